#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace logora {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor;

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node& self)>;

// One entry of the computation graph. Ids grow monotonically in creation
// order, so sorting reachable nodes by descending id is a valid reverse
// topological order.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first written
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  const char* op = "leaf";

  std::vector<double>& grad_buffer();
};

std::uint64_t next_node_id();

}  // namespace detail

/// Dense row-major float64 tensor with optional reverse-mode autodiff.
///
/// Tensors are cheap handles: copying one shares the underlying buffer and
/// graph node. Use `clone()` for an independent copy and `detach()` to cut a
/// value out of the graph.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double at(std::size_t flat_index) const { return node_->data.at(flat_index); }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  std::uint64_t node_id() const { return node_->id; }
  bool is_leaf() const { return !node_->backward; }

  Tensor detach() const;
  Tensor clone() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  /// Builds the output of a differentiable op. `backward` is attached only if
  /// some parent requires a gradient.
  static Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                            detail::BackwardFn backward, const char* op);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Reverse pass from a scalar. Leaf gradients accumulate across calls;
/// intermediate gradients are recomputed each time.
void backward(const Tensor& loss);

}  // namespace logora
