#pragma once

#include <string>
#include <vector>

#include "logora/random.hpp"
#include "logora/tensor.hpp"

namespace logora {

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

/// Ordered registry of named model tensors: trainable parameters plus
/// persistent buffers such as batch-norm running statistics.
class ParameterSet {
 public:
  Tensor add(const std::string& name, Tensor tensor, bool trainable = true);
  /// Weight initialized uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Tensor add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor add_zeros(const std::string& name, Shape shape);
  Tensor add_constant(const std::string& name, Shape shape, double value, bool trainable = true);

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<Tensor> trainable() const;
  /// Trainable tensors whose name starts with `prefix`.
  std::vector<Tensor> trainable_with_prefix(const std::string& prefix) const;
  std::vector<Tensor> trainable_without_prefix(const std::string& prefix) const;
  const NamedTensor* find(const std::string& name) const;
  std::size_t parameter_count() const;

  void zero_grad();

 private:
  std::vector<NamedTensor> entries_;
};

}  // namespace logora
