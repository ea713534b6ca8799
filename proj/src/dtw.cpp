#include "logora/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "logora/errors.hpp"

namespace logora {

namespace {

void check_pair(const SequenceView& a, const SequenceView& b) {
  LOGORA_CHECK(a.length >= 1 && b.length >= 1, ErrorCode::kEmpty, "DTW on an empty sequence");
  LOGORA_CHECK(a.width == b.width, ErrorCode::kShapeMismatch,
          "DTW vector widths differ: " + std::to_string(a.width) + " vs " + std::to_string(b.width));
  LOGORA_CHECK(a.values.size() == a.length * a.width && b.values.size() == b.length * b.width, ErrorCode::kShapeMismatch,
          "DTW sequence view size mismatch");
}

struct BruteSearch {
  const SequenceView& a;
  const SequenceView& b;
  WarpingPath current;
  double best = std::numeric_limits<double>::infinity();
  WarpingPath best_path;

  void walk(std::size_t i, std::size_t j, double acc) {
    acc += euclidean(a.row(i), b.row(j));
    current.emplace_back(i, j);
    if (i + 1 == a.length && j + 1 == b.length) {
      if (acc < best) {
        best = acc;
        best_path = current;
      }
    } else {
      if (i + 1 < a.length && j + 1 < b.length) walk(i + 1, j + 1, acc);
      if (i + 1 < a.length) walk(i + 1, j, acc);
      if (j + 1 < b.length) walk(i, j + 1, acc);
    }
    current.pop_back();
  }
};

}  // namespace

double euclidean(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

DtwResult dtw_distance(const SequenceView& a, const SequenceView& b) {
  check_pair(a, b);
  const std::size_t n = a.length, m = b.length;
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double local = euclidean(a.row(i), b.row(j));
      double prev;
      if (i == 0 && j == 0) {
        prev = 0.0;
      } else {
        prev = std::numeric_limits<double>::infinity();
        if (i > 0 && j > 0) prev = cost[(i - 1) * m + (j - 1)];
        if (i > 0) prev = std::min(prev, cost[(i - 1) * m + j]);
        if (j > 0) prev = std::min(prev, cost[i * m + (j - 1)]);
      }
      cost[i * m + j] = prev + local;
    }

  DtwResult result;
  result.distance = cost.back();
  std::size_t i = n - 1, j = m - 1;
  result.path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = cost[(i - 1) * m + (j - 1)];
      const double up = cost[(i - 1) * m + j];
      const double left = cost[i * m + (j - 1)];
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    result.path.emplace_back(i, j);
  }
  std::reverse(result.path.begin(), result.path.end());
  return result;
}

DtwResult dtw_brute_force(const SequenceView& a, const SequenceView& b) {
  check_pair(a, b);
  LOGORA_CHECK(a.length * b.length <= kBruteForceCellLimit, ErrorCode::kTooLarge,
          "brute-force DTW limited to " + std::to_string(kBruteForceCellLimit) + " cells");
  BruteSearch search{a, b, {}, std::numeric_limits<double>::infinity(), {}};
  search.walk(0, 0, 0.0);
  return {search.best, search.best_path};
}

double path_cost(const SequenceView& a, const SequenceView& b, const WarpingPath& path) {
  double acc = 0.0;
  for (const auto& [i, j] : path) acc += euclidean(a.row(i), b.row(j));
  return acc;
}

DtwGradient dtw_loss_value_and_grad(const SequenceView& a, const SequenceView& b) {
  DtwGradient out;
  out.result = dtw_distance(a, b);
  out.grad_a.assign(a.values.size(), 0.0);
  out.grad_b.assign(b.values.size(), 0.0);
  const std::size_t w = a.width;
  for (const auto& [i, j] : out.result.path) {
    const auto ra = a.row(i);
    const auto rb = b.row(j);
    const double dist = euclidean(ra, rb);
    if (dist == 0.0) continue;
    for (std::size_t k = 0; k < w; ++k) {
      const double g = (ra[k] - rb[k]) / dist;
      out.grad_a[i * w + k] += g;
      out.grad_b[j * w + k] -= g;
    }
  }
  return out;
}

Tensor dtw(const Tensor& a, const Tensor& b) {
  LOGORA_CHECK(a.rank() == 2 && b.rank() == 2, ErrorCode::kShapeMismatch, "dtw expects [M,D] operands");
  const SequenceView va(a.data(), a.dim(0), a.dim(1));
  const SequenceView vb(b.data(), b.dim(0), b.dim(1));
  auto g = dtw_loss_value_and_grad(va, vb);
  return Tensor::make_result(
      {}, {g.result.distance}, {a, b},
      [ga = std::move(g.grad_a), gb = std::move(g.grad_b)](detail::Node& self) {
        const double up = self.grad[0];
        if (self.parents[0]->requires_grad) {
          auto& dst = self.parents[0]->grad_buffer();
          for (std::size_t i = 0; i < ga.size(); ++i) dst[i] += up * ga[i];
        }
        if (self.parents[1]->requires_grad) {
          auto& dst = self.parents[1]->grad_buffer();
          for (std::size_t i = 0; i < gb.size(); ++i) dst[i] += up * gb[i];
        }
      },
      "dtw");
}

Tensor dtw_pairs(const Tensor& z, std::span<const std::size_t> lhs, std::span<const std::size_t> rhs) {
  LOGORA_CHECK(z.rank() == 3, ErrorCode::kShapeMismatch, "dtw_pairs expects z[B,M,D]");
  LOGORA_CHECK(lhs.size() == rhs.size() && !lhs.empty(), ErrorCode::kShapeMismatch, "dtw_pairs index lists differ");
  const std::size_t batch = z.dim(0), len = z.dim(1), width = z.dim(2), block = len * width;
  std::vector<double> distances(lhs.size());
  std::vector<DtwGradient> grads;
  grads.reserve(lhs.size());
  const auto zv = z.data();
  for (std::size_t n = 0; n < lhs.size(); ++n) {
    LOGORA_CHECK(lhs[n] < batch && rhs[n] < batch, ErrorCode::kOutOfRange, "dtw_pairs index out of range");
    const SequenceView va(zv.subspan(lhs[n] * block, block), len, width);
    const SequenceView vb(zv.subspan(rhs[n] * block, block), len, width);
    grads.push_back(dtw_loss_value_and_grad(va, vb));
    distances[n] = grads.back().result.distance;
  }
  std::vector<std::size_t> l(lhs.begin(), lhs.end()), r(rhs.begin(), rhs.end());
  return Tensor::make_result(
      {lhs.size()}, std::move(distances), {z},
      [block, l = std::move(l), r = std::move(r), grads = std::move(grads)](detail::Node& self) {
        auto& dst = self.parents[0]->grad_buffer();
        for (std::size_t n = 0; n < grads.size(); ++n) {
          const double up = self.grad[n];
          for (std::size_t k = 0; k < block; ++k) {
            dst[l[n] * block + k] += up * grads[n].grad_a[k];
            dst[r[n] * block + k] += up * grads[n].grad_b[k];
          }
        }
      },
      "dtw_pairs");
}

}  // namespace logora
