#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "logora/tensor.hpp"

namespace logora {

/// Row-major view of a sequence of `length` vectors of size `width`.
struct SequenceView {
  std::span<const double> values;
  std::size_t length = 0;
  std::size_t width = 0;

  SequenceView() = default;
  SequenceView(std::span<const double> v, std::size_t len, std::size_t w) : values(v), length(len), width(w) {}
  /// 1-D convenience: each scalar is a width-1 vector.
  explicit SequenceView(std::span<const double> v) : values(v), length(v.size()), width(1) {}

  std::span<const double> row(std::size_t i) const { return values.subspan(i * width, width); }
};

using WarpingPath = std::vector<std::pair<std::size_t, std::size_t>>;

struct DtwResult {
  double distance = 0.0;
  WarpingPath path;
};

struct DtwGradient {
  DtwResult result;
  std::vector<double> grad_a;  // same layout as a.values
  std::vector<double> grad_b;
};

inline constexpr std::size_t kBruteForceCellLimit = 36;

double euclidean(std::span<const double> a, std::span<const double> b);

/// Exact DTW with Euclidean local cost and the symmetric step set
/// {(1,0), (0,1), (1,1)}. Backtracking prefers diagonal, then vertical, then
/// horizontal moves on ties.
DtwResult dtw_distance(const SequenceView& a, const SequenceView& b);

/// Exhaustive minimum over all monotone warping paths. Test oracle; throws
/// TooLarge when a.length * b.length exceeds kBruteForceCellLimit.
DtwResult dtw_brute_force(const SequenceView& a, const SequenceView& b);

/// Sum of local costs along `path`, accumulated from the start.
double path_cost(const SequenceView& a, const SequenceView& b, const WarpingPath& path);

/// Hard DTW distance and its gradient with the optimal path held fixed.
DtwGradient dtw_loss_value_and_grad(const SequenceView& a, const SequenceView& b);

/// Differentiable DTW between two [M, D] tensors -> scalar.
Tensor dtw(const Tensor& a, const Tensor& b);

/// Differentiable DTW between rows of a batch z[B, M, D]:
/// out[n] = DTW(z[lhs[n]], z[rhs[n]]).
Tensor dtw_pairs(const Tensor& z, std::span<const std::size_t> lhs, std::span<const std::size_t> rhs);

}  // namespace logora
