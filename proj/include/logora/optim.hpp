#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "logora/tensor.hpp"

namespace logora {

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update of `params` in place using explicit
/// gradients (one span per parameter).
void adam_step(std::span<Tensor> params, std::span<const std::span<const double>> grads, AdamState& state);

/// Same update, reading each parameter's accumulated gradient. Parameters
/// without a gradient buffer are treated as having zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Owns a parameter group and its Adam state.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double learning_rate);

  void step() { adam_step(params_, state_); }
  void zero_grad();
  const AdamState& state() const { return state_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

}  // namespace logora
