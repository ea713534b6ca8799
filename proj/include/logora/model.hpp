#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "logora/encoders.hpp"
#include "logora/fusion.hpp"
#include "logora/model_config.hpp"
#include "logora/parameters.hpp"

namespace logora {

struct ForwardOutput {
  Tensor global_rep;               // z_g [B, M, D]
  std::vector<Tensor> local_reps;  // z_l^(i) [B, l_i, d_emb]
  FusedOutput fusion;              // fused [B, d_v] plus attention maps
  Tensor logits;                   // [B, C]
};

/// Feature extractor (global + local encoders), fusion module, linear
/// classifier, and a d_v -> hidden -> 1 discriminator. Parameters of the
/// discriminator are named "discriminator.*"; everything else belongs to the
/// feature/classifier path.
class LogoraModel {
 public:
  LogoraModel(const ModelConfig& config, std::uint64_t seed);

  LogoraModel(const LogoraModel&) = delete;
  LogoraModel& operator=(const LogoraModel&) = delete;
  LogoraModel(LogoraModel&&) = default;
  LogoraModel& operator=(LogoraModel&&) = default;

  /// x[B, T, d]. Training mode uses (and updates) batch-norm batch statistics.
  ForwardOutput forward(const Tensor& x, bool training);
  /// Source-domain probability for each fused row -> [B].
  Tensor discriminate(const Tensor& fused) const;

  const ModelConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  std::vector<Tensor> feature_parameters() const;
  std::vector<Tensor> discriminator_parameters() const;

  GlobalEncoder& global_encoder() { return *global_; }
  LocalEncoder& local_encoder() { return *local_; }
  const FusionModule& fusion() const { return *fusion_; }

  void save(const std::filesystem::path& path) const;
  static LogoraModel load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  ParameterSet params_;
  // Heap-held so handles stay put when the model moves.
  std::unique_ptr<GlobalEncoder> global_;
  std::unique_ptr<LocalEncoder> local_;
  std::unique_ptr<FusionModule> fusion_;
  Linear classifier_;
  Linear disc_hidden_;
  Linear disc_out_;
};

inline constexpr const char* kDiscriminatorPrefix = "discriminator.";

}  // namespace logora
