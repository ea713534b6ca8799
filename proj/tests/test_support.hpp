#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "logora/random.hpp"
#include "logora/tensor.hpp"

namespace logora::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  double worst_relative = 0.0;
  double worst_absolute = 0.0;
  double largest_gradient = 0.0;
  std::string worst_where;
};

struct GradCheckOptions {
  double h = 1e-5;
  double relative_tolerance = 1e-4;
  // Differences below this are treated as agreement (both sides ~ 0).
  double absolute_floor = 1e-8;
  // Coordinates where forward and backward one-sided differences disagree by
  // more than this relative amount straddle a kink and are not compared.
  double kink_tolerance = 1e-3;
  std::size_t max_coordinates = 20;
  std::uint64_t seed = 7;
};

inline double relative_error(double a, double b, double floor) {
  const double diff = std::abs(a - b);
  if (diff <= floor) return 0.0;
  return diff / std::max({std::abs(a), std::abs(b), floor});
}

/// Compares the tape gradient of `loss()` with central differences at
/// randomly chosen coordinates of `params`. `loss` must rebuild the graph on
/// each call and be deterministic.
inline GradCheckReport check_gradients(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                       const GradCheckOptions& opt = {}) {
  for (auto& p : params) p.zero_grad();
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    std::vector<double> g(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), g.begin());
    analytic.push_back(std::move(g));
  }

  Rng rng(opt.seed);
  GradCheckReport report;
  std::size_t attempts = 0;
  while (report.checked < opt.max_coordinates && attempts < opt.max_coordinates * 20) {
    ++attempts;
    const std::size_t pi = rng.index(params.size());
    auto data = params[pi].mutable_data();
    const std::size_t j = rng.index(data.size());
    const double x0 = data[j];
    const double f0 = loss().item();
    data[j] = x0 + opt.h;
    const double fp = loss().item();
    data[j] = x0 - opt.h;
    const double fm = loss().item();
    data[j] = x0;
    const double forward_diff = (fp - f0) / opt.h;
    const double backward_diff = (f0 - fm) / opt.h;
    if (relative_error(forward_diff, backward_diff, 1e-6) > opt.kink_tolerance) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * opt.h);
    const double rel = relative_error(analytic[pi][j], numeric, opt.absolute_floor);
    ++report.checked;
    report.worst_absolute = std::max(report.worst_absolute, std::abs(analytic[pi][j] - numeric));
    report.largest_gradient = std::max(report.largest_gradient, std::abs(numeric));
    if (rel > report.worst_relative) {
      report.worst_relative = rel;
      report.worst_where = "param " + std::to_string(pi) + "[" + std::to_string(j) + "] analytic " +
                           std::to_string(analytic[pi][j]) + " numeric " + std::to_string(numeric);
    }
  }
  return report;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("logora_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace logora::testing
