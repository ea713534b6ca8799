#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "logora/tensor.hpp"

namespace logora {

// Differentiable primitives. Binary element-wise ops accept either equal
// shapes or a right operand whose shape is a trailing suffix of the left
// operand's shape (broadcast over the leading axes).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor relu(const Tensor& x);
/// max(x, 0); identical to relu, named for loss code readability.
inline Tensor hinge(const Tensor& x) { return relu(x); }
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
/// Gradient passes only where lo < x < hi.
Tensor clamp(const Tensor& x, double lo, double hi);

/// a[..., m, k] x b[k, n] (shared right operand) or a[..., m, k] x b[..., k, n]
/// with identical leading axes.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Valid cross-correlation along time. x is [L, c_in] or [B, L, c_in];
/// w is [k, c_in, c_out].
Tensor conv1d_valid(const Tensor& x, const Tensor& w, std::size_t stride = 1);

Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Normalizes each channel (last axis) over all leading positions. Training
/// mode uses batch statistics and updates `stats`; inference mode reads the
/// running statistics.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, bool training);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Reduces one axis away.
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis(const Tensor& x, std::size_t axis);

/// Row-wise L2 distance between a[n, k] and b[n, k] -> [n]. The gradient at
/// zero distance is defined as zero.
Tensor euclidean_rows(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor transpose_last2(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Gathers slices along axis 0.
Tensor index_select(const Tensor& x, std::span<const std::size_t> indices);

}  // namespace logora
