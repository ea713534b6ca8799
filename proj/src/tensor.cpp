#include "logora/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "logora/errors.hpp"

namespace logora {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace detail {

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

std::uint64_t next_node_id() {
  thread_local std::uint64_t counter = 0;
  return ++counter;
}

}  // namespace detail

namespace {

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape) LOGORA_CHECK(d > 0, ErrorCode::kShapeMismatch, "zero-sized dimension in " + shape_to_string(shape));
  LOGORA_CHECK(shape_numel(shape) == values.size(), ErrorCode::kShapeMismatch,
          "shape " + shape_to_string(shape) + " does not match " + std::to_string(values.size()) + " values");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  node->id = detail::next_node_id();
  return node;
}

}  // namespace

Tensor::Tensor() : node_(new_node({}, {0.0}, false)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor(new_node({}, {value}, requires_grad)); }

std::size_t Tensor::dim(std::size_t axis) const {
  LOGORA_CHECK(axis < rank(), ErrorCode::kShapeMismatch, "axis out of range for " + shape_to_string(shape()));
  return node_->shape[axis];
}

double Tensor::item() const {
  LOGORA_CHECK(numel() == 1, ErrorCode::kNotScalar, "item() on tensor of shape " + shape_to_string(shape()));
  return node_->data[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(new_node(node_->shape, node_->data, false)); }

Tensor Tensor::clone() const { return Tensor(new_node(node_->shape, node_->data, node_->requires_grad)); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                           detail::BackwardFn backward, const char* op) {
  auto node = new_node(std::move(shape), std::move(values), false);
  node->op = op;
  const bool any_grad = std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (any_grad) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
  }
  return Tensor(std::move(node));
}

namespace {

std::vector<detail::Node*> collect_graph(detail::Node* root) {
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{root};
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(), [](const detail::Node* a, const detail::Node* b) { return a->id > b->id; });
  return order;
}

}  // namespace

void backward(const Tensor& loss) {
  LOGORA_CHECK(loss.numel() == 1, ErrorCode::kNotScalar,
          "backward() needs a scalar loss, got " + shape_to_string(loss.shape()));
  detail::Node* root = &loss.node();
  if (!root->requires_grad) return;
  const auto order = collect_graph(root);
  for (detail::Node* n : order) {
    if (n->backward) n->grad.assign(n->data.size(), 0.0);
  }
  root->grad_buffer()[0] += 1.0;
  for (detail::Node* n : order) {
    if (n->backward) n->backward(*n);
  }
  // Intermediate gradients are scratch; release them.
  for (detail::Node* n : order) {
    if (n->backward && n != root) std::vector<double>().swap(n->grad);
  }
}

}  // namespace logora
