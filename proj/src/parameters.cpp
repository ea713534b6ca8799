#include "logora/parameters.hpp"

#include <cmath>

#include "logora/errors.hpp"

namespace logora {

Tensor ParameterSet::add(const std::string& name, Tensor tensor, bool trainable) {
  LOGORA_CHECK(find(name) == nullptr, ErrorCode::kBadConfig, "duplicate parameter name " + name);
  tensor.set_requires_grad(trainable);
  entries_.push_back({name, tensor, trainable});
  return tensor;
}

Tensor ParameterSet::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return add(name, Tensor::from(std::move(shape), std::move(values)));
}

Tensor ParameterSet::add_zeros(const std::string& name, Shape shape) { return add(name, Tensor::zeros(std::move(shape))); }

Tensor ParameterSet::add_constant(const std::string& name, Shape shape, double value, bool trainable) {
  return add(name, Tensor::full(std::move(shape), value), trainable);
}

std::vector<Tensor> ParameterSet::trainable() const {
  std::vector<Tensor> out;
  for (const auto& e : entries_)
    if (e.trainable) out.push_back(e.tensor);
  return out;
}

std::vector<Tensor> ParameterSet::trainable_with_prefix(const std::string& prefix) const {
  std::vector<Tensor> out;
  for (const auto& e : entries_)
    if (e.trainable && e.name.starts_with(prefix)) out.push_back(e.tensor);
  return out;
}

std::vector<Tensor> ParameterSet::trainable_without_prefix(const std::string& prefix) const {
  std::vector<Tensor> out;
  for (const auto& e : entries_)
    if (e.trainable && !e.name.starts_with(prefix)) out.push_back(e.tensor);
  return out;
}

const NamedTensor* ParameterSet::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += e.tensor.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

}  // namespace logora
