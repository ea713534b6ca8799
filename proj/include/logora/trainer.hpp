#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "logora/data.hpp"
#include "logora/losses.hpp"
#include "logora/model.hpp"
#include "logora/optim.hpp"

namespace logora {

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  LossWeights weights;
  ModelConfig model;
  /// The center loss is applied from epoch center_warmup_epochs + 1 onward.
  std::size_t center_warmup_epochs = 1;
  double prototype_momentum = 0.9;

  void validate() const;
  /// Everything except the model shape, which depends on the dataset.
  void validate_schedule() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss_cls = 0.0;
  double loss_domain = 0.0;
  double loss_margin = 0.0;
  double loss_dtw = 0.0;
  double loss_center = 0.0;
  double source_accuracy = 0.0;  // on the training batches of the epoch
  std::optional<double> target_accuracy;

  std::string to_json() const;
};

struct EvalResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::vector<std::size_t> per_class_total;
  std::vector<std::size_t> per_class_correct;

  std::string to_json() const;
};

/// Argmax predictions in inference mode (batch norm on running statistics).
std::vector<int> predict(LogoraModel& model, const Dataset& dataset, std::size_t batch_size = 64);
EvalResult evaluate(LogoraModel& model, const Dataset& dataset, std::size_t batch_size = 64);

/// Prototype EMA update from a source batch (see PrototypeBank::update).
void update_prototypes(PrototypeBank& bank, const Tensor& fused_source, std::span<const int> labels);

/// Gradient audit hook: called after each optimizer step with "discriminator"
/// or "feature".
using StepObserver = std::function<void(const std::string& phase)>;

/// Holds everything that evolves across epochs: two Adam optimizers (the
/// discriminator's and the feature/fusion/classifier path's), the prototype
/// bank, the sampling RNG, and the loss history.
class Trainer {
 public:
  Trainer(LogoraModel& model, const TrainConfig& config);

  /// One pass over the larger of the two datasets, pairing one source batch
  /// with one target batch per step and cycling the smaller dataset. Target
  /// labels are never read.
  EpochMetrics train_epoch(const Dataset& source, const Dataset& target);

  const TrainConfig& config() const { return config_; }
  const PrototypeBank& prototypes() const { return bank_; }
  const std::vector<EpochMetrics>& history() const { return history_; }
  std::vector<EpochMetrics>& history() { return history_; }
  std::size_t epoch() const { return epoch_; }
  const AdamState& discriminator_optimizer() const { return disc_opt_.state(); }
  const AdamState& feature_optimizer() const { return feat_opt_.state(); }

  void set_step_observer(StepObserver observer) { observer_ = std::move(observer); }

 private:
  LogoraModel& model_;
  TrainConfig config_;
  Adam disc_opt_;
  Adam feat_opt_;
  PrototypeBank bank_;
  Rng rng_;
  std::size_t epoch_ = 0;
  std::vector<EpochMetrics> history_;
  StepObserver observer_;
};

/// Every loss term and the total objective for one paired batch, forwarded
/// jointly through the model. Exposed for gradient audits.
struct BatchObjective {
  LossParts parts;
  Tensor total;
  Triplets triplets;
};

BatchObjective batch_objective(LogoraModel& model, const Tensor& x_source, std::span<const int> source_labels,
                               const Tensor& x_target, const PrototypeBank* bank, const LossWeights& weights,
                               Rng& rng, bool training = true);

}  // namespace logora
