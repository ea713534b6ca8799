#include "logora/model.hpp"

#include <json.hpp>

#include "logora/checkpoint.hpp"
#include "logora/errors.hpp"

namespace logora {

LogoraModel::LogoraModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  global_ = std::make_unique<GlobalEncoder>(config_, params_, rng);
  local_ = std::make_unique<LocalEncoder>(config_, params_, rng);
  fusion_ = std::make_unique<FusionModule>(config_, params_, rng);
  classifier_ = Linear(params_, "classifier", config_.d_v, config_.num_classes, rng);
  disc_hidden_ = Linear(params_, "discriminator.hidden", config_.d_v, config_.discriminator_hidden, rng);
  disc_out_ = Linear(params_, "discriminator.out", config_.discriminator_hidden, 1, rng);
}

ForwardOutput LogoraModel::forward(const Tensor& x, bool training) {
  LOGORA_CHECK(x.rank() == 3 && x.dim(1) == config_.series_length && x.dim(2) == config_.channels,
          ErrorCode::kShapeMismatch,
          "model expects [B," + std::to_string(config_.series_length) + "," + std::to_string(config_.channels) +
              "], got " + shape_to_string(x.shape()));
  ForwardOutput out;
  out.global_rep = (*global_)(x);
  out.local_reps = (*local_)(x, training);
  out.fusion = (*fusion_)(out.global_rep, out.local_reps);
  out.logits = classifier_(out.fusion.fused);
  return out;
}

Tensor LogoraModel::discriminate(const Tensor& fused) const {
  Tensor p = sigmoid(disc_out_(relu(disc_hidden_(fused))));
  return reshape(p, {fused.dim(0)});
}

std::vector<Tensor> LogoraModel::feature_parameters() const {
  return params_.trainable_without_prefix(kDiscriminatorPrefix);
}

std::vector<Tensor> LogoraModel::discriminator_parameters() const {
  return params_.trainable_with_prefix(kDiscriminatorPrefix);
}

void LogoraModel::save(const std::filesystem::path& path) const {
  nlohmann::json meta = {{"format", "logora-checkpoint"}, {"model", nlohmann::json::parse(config_.to_json())}};
  write_checkpoint(path, meta.dump(), params_);
}

LogoraModel LogoraModel::load(const std::filesystem::path& path) {
  Checkpoint ckpt = read_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ckpt.metadata_json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormatError, std::string("checkpoint metadata is not JSON: ") + e.what());
  }
  LOGORA_CHECK(meta.contains("model"), ErrorCode::kFormatError, "checkpoint metadata lacks a model config");
  LogoraModel model(ModelConfig::from_json(meta["model"].dump()), 0);
  load_parameters(ckpt, model.params_);
  return model;
}

}  // namespace logora
