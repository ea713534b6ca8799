#include "logora/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "logora/errors.hpp"

namespace logora {

namespace {

using detail::Node;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Number of times b is tiled to match a; b must equal a's shape or a suffix.
std::size_t broadcast_repeats(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool ok = sb.size() <= sa.size() && std::equal(sb.rbegin(), sb.rend(), sa.rbegin());
  LOGORA_CHECK(ok, ErrorCode::kShapeMismatch,
          std::string(op) + ": cannot broadcast " + shape_to_string(sb) + " onto " + shape_to_string(sa));
  return a.numel() / b.numel();
}

bool wants_grad(const Node& self, std::size_t parent) { return self.parents[parent]->requires_grad; }

std::vector<double>& parent_grad(Node& self, std::size_t parent) { return self.parents[parent]->grad_buffer(); }

const std::vector<double>& parent_data(const Node& self, std::size_t parent) { return self.parents[parent]->data; }

template <typename F, typename DF>
Tensor unary(const Tensor& x, const char* name, F f, DF df) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [df](Node& self) {
        const auto& xv = parent_data(self, 0);
        auto& gx = parent_grad(self, 0);
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += self.grad[i] * df(xv[i], self.data[i]);
      },
      name);
}

// Plain row-major kernels, accumulate into c.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m,k] += a[m,n] * b[k,n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      ci[p] += acc;
    }
  }
}

// c[k,n] += a[m,k]^T * b[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const std::size_t reps = broadcast_repeats(a, b, "add");
  const std::size_t nb = b.numel();
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bv = b.data();
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] += bv[j];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [reps, nb](Node& self) {
        if (wants_grad(self, 0)) {
          auto& ga = parent_grad(self, 0);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
        }
        if (wants_grad(self, 1)) {
          auto& gb = parent_grad(self, 1);
          for (std::size_t r = 0; r < reps; ++r)
            for (std::size_t j = 0; j < nb; ++j) gb[j] += self.grad[r * nb + j];
        }
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const std::size_t reps = broadcast_repeats(a, b, "sub");
  const std::size_t nb = b.numel();
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto bv = b.data();
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] -= bv[j];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [reps, nb](Node& self) {
        if (wants_grad(self, 0)) {
          auto& ga = parent_grad(self, 0);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
        }
        if (wants_grad(self, 1)) {
          auto& gb = parent_grad(self, 1);
          for (std::size_t r = 0; r < reps; ++r)
            for (std::size_t j = 0; j < nb; ++j) gb[j] -= self.grad[r * nb + j];
        }
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::size_t reps = broadcast_repeats(a, b, "mul");
  const std::size_t nb = b.numel();
  std::vector<double> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = av[r * nb + j] * bv[j];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [reps, nb](Node& self) {
        const auto& av = parent_data(self, 0);
        const auto& bv = parent_data(self, 1);
        if (wants_grad(self, 0)) {
          auto& ga = parent_grad(self, 0);
          for (std::size_t r = 0; r < reps; ++r)
            for (std::size_t j = 0; j < nb; ++j) ga[r * nb + j] += self.grad[r * nb + j] * bv[j];
        }
        if (wants_grad(self, 1)) {
          auto& gb = parent_grad(self, 1);
          for (std::size_t r = 0; r < reps; ++r)
            for (std::size_t j = 0; j < nb; ++j) gb[j] += self.grad[r * nb + j] * av[r * nb + j];
        }
      },
      "mul");
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, "add_scalar", [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  return unary(
      x, "gelu", [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  LOGORA_CHECK(a.rank() >= 2 && b.rank() >= 2, ErrorCode::kShapeMismatch, "matmul needs rank >= 2 operands");
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t n = b.dim(b.rank() - 1);
  LOGORA_CHECK(k == kb, ErrorCode::kShapeMismatch,
          "matmul inner dims differ: " + shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);

  if (b.rank() == 2) {
    // Shared right operand: fold leading axes into rows.
    const std::size_t rows = a.numel() / k;
    std::vector<double> out(rows * n, 0.0);
    gemm_nn(a.data().data(), b.data().data(), out.data(), rows, k, n);
    return Tensor::make_result(
        std::move(out_shape), std::move(out), {a, b},
        [rows, k, n](Node& self) {
          const auto& av = parent_data(self, 0);
          const auto& bv = parent_data(self, 1);
          if (wants_grad(self, 0)) gemm_nt(self.grad.data(), bv.data(), parent_grad(self, 0).data(), rows, n, k);
          if (wants_grad(self, 1)) gemm_tn(av.data(), self.grad.data(), parent_grad(self, 1).data(), rows, k, n);
        },
        "matmul");
  }

  LOGORA_CHECK(a.rank() == b.rank() && std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()),
          ErrorCode::kShapeMismatch,
          "batched matmul leading axes differ: " + shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
  const std::size_t batch = a.numel() / (m * k);
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t t = 0; t < batch; ++t)
    gemm_nn(a.data().data() + t * m * k, b.data().data() + t * k * n, out.data() + t * m * n, m, k, n);
  return Tensor::make_result(
      std::move(out_shape), std::move(out), {a, b},
      [batch, m, k, n](Node& self) {
        const auto& av = parent_data(self, 0);
        const auto& bv = parent_data(self, 1);
        for (std::size_t t = 0; t < batch; ++t) {
          const double* g = self.grad.data() + t * m * n;
          if (wants_grad(self, 0))
            gemm_nt(g, bv.data() + t * k * n, parent_grad(self, 0).data() + t * m * k, m, n, k);
          if (wants_grad(self, 1))
            gemm_tn(av.data() + t * m * k, g, parent_grad(self, 1).data() + t * k * n, m, k, n);
        }
      },
      "bmm");
}

Tensor conv1d_valid(const Tensor& x, const Tensor& w, std::size_t stride) {
  LOGORA_CHECK(x.rank() == 2 || x.rank() == 3, ErrorCode::kShapeMismatch, "conv1d input must be [L,c] or [B,L,c]");
  LOGORA_CHECK(w.rank() == 3, ErrorCode::kShapeMismatch, "conv1d kernel must be [k,c_in,c_out]");
  LOGORA_CHECK(stride >= 1, ErrorCode::kBadConfig, "conv1d stride must be >= 1");
  const bool batched = x.rank() == 3;
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t len = x.dim(x.rank() - 2);
  const std::size_t cin = x.dim(x.rank() - 1);
  const std::size_t ksize = w.dim(0);
  const std::size_t cout = w.dim(2);
  LOGORA_CHECK(w.dim(1) == cin, ErrorCode::kShapeMismatch, "conv1d channel mismatch");
  LOGORA_CHECK(ksize <= len, ErrorCode::kShapeMismatch,
          "conv1d kernel " + std::to_string(ksize) + " longer than input " + std::to_string(len));
  const std::size_t out_len = (len - ksize) / stride + 1;
  std::vector<double> out(batch * out_len * cout, 0.0);
  const double* xv = x.data().data();
  const double* wv = w.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    if (stride == 1) {
      // One [out_len, c_in] x [c_in, c_out] product per kernel tap.
      for (std::size_t j = 0; j < ksize; ++j)
        gemm_nn(xv + (b * len + j) * cin, wv + j * cin * cout, out.data() + b * out_len * cout, out_len, cin, cout);
      continue;
    }
    for (std::size_t t = 0; t < out_len; ++t)
      gemm_nn(xv + (b * len + t * stride) * cin, wv, out.data() + (b * out_len + t) * cout, 1, ksize * cin, cout);
  }
  Shape out_shape = batched ? Shape{batch, out_len, cout} : Shape{out_len, cout};
  return Tensor::make_result(
      std::move(out_shape), std::move(out), {x, w},
      [batch, len, cin, ksize, cout, out_len, stride](Node& self) {
        const auto& xv = parent_data(self, 0);
        const auto& wv = parent_data(self, 1);
        const bool gx = wants_grad(self, 0);
        const bool gw = wants_grad(self, 1);
        double* gxv = gx ? parent_grad(self, 0).data() : nullptr;
        double* gwv = gw ? parent_grad(self, 1).data() : nullptr;
        const std::size_t window = ksize * cin;
        for (std::size_t b = 0; b < batch; ++b) {
          if (stride == 1) {
            const double* g = self.grad.data() + b * out_len * cout;
            for (std::size_t j = 0; j < ksize; ++j) {
              const std::size_t offset = (b * len + j) * cin;
              if (gx) gemm_nt(g, wv.data() + j * cin * cout, gxv + offset, out_len, cout, cin);
              if (gw) gemm_tn(xv.data() + offset, g, gwv + j * cin * cout, out_len, cin, cout);
            }
            continue;
          }
          for (std::size_t t = 0; t < out_len; ++t) {
            const double* g = self.grad.data() + (b * out_len + t) * cout;
            const std::size_t offset = (b * len + t * stride) * cin;
            if (gx) gemm_nt(g, wv.data(), gxv + offset, 1, cout, window);
            if (gw) gemm_tn(xv.data() + offset, g, gwv, 1, window, cout);
          }
        }
      },
      "conv1d");
}

Tensor softmax_lastdim(const Tensor& x) {
  const std::size_t n = x.shape().empty() ? 1 : x.shape().back();
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += (o[j] = std::exp(in[j] - mx));
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < n; ++j) o[j] *= inv;
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [rows, n](Node& self) {
        auto& gx = parent_grad(self, 0);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* y = self.data.data() + r * n;
          const double* g = self.grad.data() + r * n;
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
          for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[j] * (g[j] - dot);
        }
      },
      "softmax");
}

Tensor log_softmax_lastdim(const Tensor& x) {
  const std::size_t n = x.shape().empty() ? 1 : x.shape().back();
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(in[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < n; ++j) o[j] = in[j] - lse;
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [rows, n](Node& self) {
        auto& gx = parent_grad(self, 0);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* y = self.data.data() + r * n;
          const double* g = self.grad.data() + r * n;
          double gsum = 0.0;
          for (std::size_t j = 0; j < n; ++j) gsum += g[j];
          for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += g[j] - std::exp(y[j]) * gsum;
        }
      },
      "log_softmax");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t n = x.shape().back();
  LOGORA_CHECK(gamma.numel() == n && beta.numel() == n, ErrorCode::kShapeMismatch, "layer_norm affine size mismatch");
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (in[j] - mu) * inv_std[r];
      out[r * n + j] = xhat[r * n + j] * gv[j] + bv[j];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto& gv = parent_data(self, 1);
        const bool gx = wants_grad(self, 0);
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = self.grad.data() + r * n;
          const double* xh = xhat.data() + r * n;
          if (wants_grad(self, 1)) {
            auto& gg = parent_grad(self, 1);
            for (std::size_t j = 0; j < n; ++j) gg[j] += g[j] * xh[j];
          }
          if (wants_grad(self, 2)) {
            auto& gb = parent_grad(self, 2);
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[j];
          }
          if (gx) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              dxhat[j] = g[j] * gv[j];
              s1 += dxhat[j];
              s2 += dxhat[j] * xh[j];
            }
            auto& gxv = parent_grad(self, 0);
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j)
              gxv[r * n + j] += inv_std[r] * (dxhat[j] - inv_n * s1 - xh[j] * inv_n * s2);
          }
        }
      },
      "layer_norm");
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, bool training) {
  const std::size_t c = x.shape().back();
  LOGORA_CHECK(gamma.numel() == c && beta.numel() == c, ErrorCode::kShapeMismatch, "batch_norm affine size mismatch");
  LOGORA_CHECK(stats.running_mean.numel() == c && stats.running_var.numel() == c, ErrorCode::kShapeMismatch,
          "batch_norm running statistics size mismatch");
  const std::size_t rows = x.numel() / c;
  const auto xv = x.data();
  std::vector<double> mu(c, 0.0), var(c, 0.0);
  if (training) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) mu[j] += xv[r * c + j];
    for (std::size_t j = 0; j < c; ++j) mu[j] /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) {
        const double d = xv[r * c + j] - mu[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < c; ++j) var[j] /= static_cast<double>(rows);
    auto rm = stats.running_mean.mutable_data();
    auto rv = stats.running_var.mutable_data();
    const double unbias = rows > 1 ? static_cast<double>(rows) / static_cast<double>(rows - 1) : 1.0;
    for (std::size_t j = 0; j < c; ++j) {
      rm[j] = (1.0 - stats.momentum) * rm[j] + stats.momentum * mu[j];
      rv[j] = (1.0 - stats.momentum) * rv[j] + stats.momentum * var[j] * unbias;
    }
  } else {
    std::copy(stats.running_mean.data().begin(), stats.running_mean.data().end(), mu.begin());
    std::copy(stats.running_var.data().begin(), stats.running_var.data().end(), var.begin());
  }
  std::vector<double> inv_std(c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + stats.eps);
  std::vector<double> xhat(x.numel());
  std::vector<double> out(x.numel());
  const auto gv = gamma.data();
  const auto bv = beta.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t i = r * c + j;
      xhat[i] = (xv[i] - mu[j]) * inv_std[j];
      out[i] = xhat[i] * gv[j] + bv[j];
    }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [rows, c, training, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto& gv = parent_data(self, 1);
        std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            const double g = self.grad[r * c + j];
            sum_g[j] += g;
            sum_gx[j] += g * xhat[r * c + j];
          }
        if (wants_grad(self, 1)) {
          auto& gg = parent_grad(self, 1);
          for (std::size_t j = 0; j < c; ++j) gg[j] += sum_gx[j];
        }
        if (wants_grad(self, 2)) {
          auto& gb = parent_grad(self, 2);
          for (std::size_t j = 0; j < c; ++j) gb[j] += sum_g[j];
        }
        if (wants_grad(self, 0)) {
          auto& gx = parent_grad(self, 0);
          const double inv_n = 1.0 / static_cast<double>(rows);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) {
              const std::size_t i = r * c + j;
              const double g = self.grad[i];
              if (training)
                gx[i] += gv[j] * inv_std[j] * (g - inv_n * sum_g[j] - xhat[i] * inv_n * sum_gx[j]);
              else
                gx[i] += gv[j] * inv_std[j] * g;
            }
        }
      },
      "batch_norm");
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result(
      {}, {total}, {x},
      [](Node& self) {
        auto& gx = parent_grad(self, 0);
        for (double& g : gx) g += self.grad[0];
      },
      "sum");
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  LOGORA_CHECK(axis < x.rank(), ErrorCode::kShapeMismatch, "sum_axis axis out of range");
  const Shape& s = x.shape();
  const std::size_t outer = shape_numel(Shape(s.begin(), s.begin() + axis));
  const std::size_t span = s[axis];
  const std::size_t inner = shape_numel(Shape(s.begin() + axis + 1, s.end()));
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  std::vector<double> out(outer * inner, 0.0);
  const auto xv = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < span; ++a)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += xv[(o * span + a) * inner + i];
  return Tensor::make_result(
      std::move(out_shape), std::move(out), {x},
      [outer, span, inner](Node& self) {
        auto& gx = parent_grad(self, 0);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t a = 0; a < span; ++a)
            for (std::size_t i = 0; i < inner; ++i) gx[(o * span + a) * inner + i] += self.grad[o * inner + i];
      },
      "sum_axis");
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  return scale(sum_axis(x, axis), 1.0 / static_cast<double>(x.dim(axis)));
}

Tensor euclidean_rows(const Tensor& a, const Tensor& b) {
  LOGORA_CHECK(a.rank() == 2 && a.shape() == b.shape(), ErrorCode::kShapeMismatch,
          "euclidean_rows needs equal [n,k] operands");
  const std::size_t rows = a.dim(0);
  const std::size_t k = a.dim(1);
  std::vector<double> out(rows);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = av[r * k + j] - bv[r * k + j];
      acc += d * d;
    }
    out[r] = std::sqrt(acc);
  }
  return Tensor::make_result(
      {rows}, std::move(out), {a, b},
      [rows, k](Node& self) {
        const auto& av = parent_data(self, 0);
        const auto& bv = parent_data(self, 1);
        for (std::size_t r = 0; r < rows; ++r) {
          const double dist = self.data[r];
          if (dist == 0.0) continue;
          const double coef = self.grad[r] / dist;
          for (std::size_t j = 0; j < k; ++j) {
            const double d = (av[r * k + j] - bv[r * k + j]) * coef;
            if (wants_grad(self, 0)) parent_grad(self, 0)[r * k + j] += d;
            if (wants_grad(self, 1)) parent_grad(self, 1)[r * k + j] -= d;
          }
        }
      },
      "euclidean");
}

Tensor reshape(const Tensor& x, Shape shape) {
  LOGORA_CHECK(shape_numel(shape) == x.numel(), ErrorCode::kShapeMismatch,
          "cannot reshape " + shape_to_string(x.shape()) + " to " + shape_to_string(shape));
  return Tensor::make_result(
      std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), {x},
      [](Node& self) {
        auto& gx = parent_grad(self, 0);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
      },
      "reshape");
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const std::size_t r = x.rank();
  LOGORA_CHECK(axes.size() == r, ErrorCode::kShapeMismatch, "permute axis count mismatch");
  std::vector<bool> used(r, false);
  for (std::size_t a : axes) {
    LOGORA_CHECK(a < r && !used[a], ErrorCode::kShapeMismatch, "permute axes are not a permutation");
    used[a] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.dim(axes[i]);
  const auto in_strides = strides_of(x.shape());
  // src_index[i] maps output flat index i to its input flat index.
  std::vector<std::size_t> src_index(x.numel());
  std::vector<std::size_t> counter(r, 0);
  for (std::size_t i = 0; i < src_index.size(); ++i) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < r; ++d) src += counter[d] * in_strides[axes[d]];
    src_index[i] = src;
    for (std::size_t d = r; d-- > 0;) {
      if (++counter[d] < out_shape[d]) break;
      counter[d] = 0;
    }
  }
  std::vector<double> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[src_index[i]];
  return Tensor::make_result(
      std::move(out_shape), std::move(out), {x},
      [src_index = std::move(src_index)](Node& self) {
        auto& gx = parent_grad(self, 0);
        for (std::size_t i = 0; i < src_index.size(); ++i) gx[src_index[i]] += self.grad[i];
      },
      "permute");
}

Tensor transpose_last2(const Tensor& x) {
  LOGORA_CHECK(x.rank() >= 2, ErrorCode::kShapeMismatch, "transpose_last2 needs rank >= 2");
  std::vector<std::size_t> axes(x.rank());
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  std::swap(axes[x.rank() - 1], axes[x.rank() - 2]);
  return permute(x, axes);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  LOGORA_CHECK(!parts.empty(), ErrorCode::kEmpty, "concat of zero tensors");
  const Shape& first = parts.front().shape();
  LOGORA_CHECK(axis < first.size(), ErrorCode::kShapeMismatch, "concat axis out of range");
  const std::size_t outer = shape_numel(Shape(first.begin(), first.begin() + axis));
  const std::size_t inner = shape_numel(Shape(first.begin() + axis + 1, first.end()));
  std::vector<std::size_t> spans;
  std::size_t total_span = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    LOGORA_CHECK(ok, ErrorCode::kShapeMismatch,
            "concat shape mismatch: " + shape_to_string(s) + " vs " + shape_to_string(first));
    spans.push_back(s[axis]);
    total_span += s[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total_span;
  std::vector<double> out(outer * total_span * inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto pv = parts[p].data();
    const std::size_t block = spans[p] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.data() + o * block, block, out.data() + (o * total_span + offset) * inner);
    offset += spans[p];
  }
  return Tensor::make_result(
      std::move(out_shape), std::move(out), parts,
      [outer, inner, total_span, spans](Node& self) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < spans.size(); ++p) {
          const std::size_t block = spans[p] * inner;
          if (wants_grad(self, p)) {
            auto& gp = parent_grad(self, p);
            for (std::size_t o = 0; o < outer; ++o) {
              const double* src = self.grad.data() + (o * total_span + offset) * inner;
              for (std::size_t i = 0; i < block; ++i) gp[o * block + i] += src[i];
            }
          }
          offset += spans[p];
        }
      },
      "concat");
}

Tensor index_select(const Tensor& x, std::span<const std::size_t> indices) {
  LOGORA_CHECK(x.rank() >= 1, ErrorCode::kShapeMismatch, "index_select on a scalar");
  LOGORA_CHECK(!indices.empty(), ErrorCode::kEmpty, "index_select with no indices");
  const std::size_t rows = x.dim(0);
  const std::size_t inner = x.numel() / rows;
  for (std::size_t i : indices) LOGORA_CHECK(i < rows, ErrorCode::kOutOfRange, "index_select index out of range");
  Shape out_shape = x.shape();
  out_shape[0] = indices.size();
  std::vector<double> out(indices.size() * inner);
  const auto xv = x.data();
  for (std::size_t r = 0; r < indices.size(); ++r) std::copy_n(xv.data() + indices[r] * inner, inner, out.data() + r * inner);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tensor::make_result(
      std::move(out_shape), std::move(out), {x},
      [inner, idx = std::move(idx)](Node& self) {
        auto& gx = parent_grad(self, 0);
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (std::size_t i = 0; i < inner; ++i) gx[idx[r] * inner + i] += self.grad[r * inner + i];
      },
      "index_select");
}

}  // namespace logora
