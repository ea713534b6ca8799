#include "logora/optim.hpp"

#include <cmath>

#include "logora/errors.hpp"

namespace logora {

void adam_step(std::span<Tensor> params, std::span<const std::span<const double>> grads, AdamState& state) {
  LOGORA_CHECK(params.size() == grads.size(), ErrorCode::kShapeMismatch, "adam_step: parameter/gradient count mismatch");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  LOGORA_CHECK(state.first_moment.size() == params.size(), ErrorCode::kShapeMismatch,
          "adam_step: state was built for a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    LOGORA_CHECK(grads[i].size() == params[i].numel() && state.first_moment[i].size() == params[i].numel(),
            ErrorCode::kShapeMismatch, "adam_step: gradient shape mismatch for parameter " + std::to_string(i));
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].mutable_data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto g = grads[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  std::vector<std::vector<double>> zero_storage;
  zero_storage.reserve(params.size());
  std::vector<std::span<const double>> grads;
  grads.reserve(params.size());
  for (auto& p : params) {
    if (p.has_grad()) {
      grads.push_back(p.grad());
    } else {
      zero_storage.emplace_back(p.numel(), 0.0);
      grads.push_back(zero_storage.back());
    }
  }
  adam_step(params, grads, state);
}

Adam::Adam(std::vector<Tensor> params, double learning_rate) : params_(std::move(params)) {
  state_.learning_rate = learning_rate;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace logora
