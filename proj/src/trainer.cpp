#include "logora/trainer.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "logora/errors.hpp"
#include "logora/ops.hpp"

namespace logora {

void TrainConfig::validate() const {
  validate_schedule();
  model.validate();
}

void TrainConfig::validate_schedule() const {
  LOGORA_CHECK(epochs >= 1, ErrorCode::kBadConfig, "epochs must be >= 1");
  LOGORA_CHECK(batch_size >= 2, ErrorCode::kBadConfig, "batch_size must be >= 2");
  LOGORA_CHECK(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::kBadConfig, "learning_rate must be positive");
  LOGORA_CHECK(prototype_momentum > 0.0 && prototype_momentum < 1.0, ErrorCode::kBadConfig,
          "prototype_momentum must lie in (0, 1)");
  weights.validate();
}

std::string EpochMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["loss_cls"] = loss_cls;
  j["loss_domain"] = loss_domain;
  j["loss_margin"] = loss_margin;
  j["loss_dtw"] = loss_dtw;
  j["loss_center"] = loss_center;
  j["source_accuracy"] = source_accuracy;
  if (target_accuracy) j["target_accuracy"] = *target_accuracy;
  return j.dump();
}

std::string EvalResult::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["correct"] = correct;
  j["total"] = total;
  j["per_class_total"] = per_class_total;
  j["per_class_correct"] = per_class_correct;
  j["confusion"] = confusion;
  return j.dump();
}

namespace {

std::vector<std::size_t> iota_indices(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return idx;
}

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

// Loss terms on a joint forward whose first `n_source` rows are the source batch.
LossParts compute_parts(LogoraModel& model, const ForwardOutput& fwd, std::size_t n_source,
                        std::span<const int> source_labels, const PrototypeBank* bank, const LossWeights& weights,
                        const Triplets& triplets) {
  const std::size_t total = fwd.fusion.fused.dim(0);
  const auto src_idx = iota_indices(0, n_source);
  const auto tgt_idx = iota_indices(n_source, total);
  Tensor fused_s = index_select(fwd.fusion.fused, src_idx);
  LossParts parts;
  parts.cls = classification_loss(index_select(fwd.logits, src_idx), source_labels);
  Tensor probs = model.discriminate(fwd.fusion.fused);
  std::optional<Tensor> probs_t;
  if (!tgt_idx.empty()) probs_t = index_select(probs, tgt_idx);
  parts.domain = domain_loss(index_select(probs, src_idx), probs_t);
  // Triplet indices address the source rows, which come first in the joint batch.
  parts.margin = margin_triplet_loss(fused_s, triplets, source_labels, weights.beta);
  parts.dtw = dtw_triplet_loss(fwd.global_rep, triplets, source_labels, weights.alpha);
  if (bank != nullptr && bank->any_initialized() && !tgt_idx.empty())
    parts.center = center_loss(index_select(fwd.fusion.fused, tgt_idx), *bank);
  else
    parts.center = Tensor::scalar(0.0);
  return parts;
}

}  // namespace

std::vector<int> predict(LogoraModel& model, const Dataset& dataset, std::size_t batch_size) {
  LOGORA_CHECK(!dataset.empty(), ErrorCode::kEmptyDataset, "cannot predict on an empty dataset");
  std::vector<int> out;
  out.reserve(dataset.size());
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const auto idx = iota_indices(start, std::min(dataset.size(), start + batch_size));
    const auto fwd = model.forward(dataset.batch(idx), false);
    const std::size_t classes = fwd.logits.dim(1);
    for (std::size_t r = 0; r < idx.size(); ++r)
      out.push_back(static_cast<int>(argmax_row(fwd.logits.data().subspan(r * classes, classes))));
  }
  return out;
}

EvalResult evaluate(LogoraModel& model, const Dataset& dataset, std::size_t batch_size) {
  LOGORA_CHECK(!dataset.empty(), ErrorCode::kEmptyDataset, "cannot evaluate on an empty dataset");
  LOGORA_CHECK(dataset.fully_labeled(), ErrorCode::kMissingLabels, "evaluation needs every sample labeled");
  const std::size_t classes = model.config().num_classes;
  LOGORA_CHECK(dataset.meta().num_classes <= classes, ErrorCode::kMetaMismatch,
          "dataset has more classes than the model outputs");
  const auto predictions = predict(model, dataset, batch_size);
  EvalResult r;
  r.total = dataset.size();
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  r.per_class_total.assign(classes, 0);
  r.per_class_correct.assign(classes, 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto truth = static_cast<std::size_t>(dataset.samples()[i].label);
    const auto guess = static_cast<std::size_t>(predictions[i]);
    r.confusion[truth][guess] += 1;
    r.per_class_total[truth] += 1;
    if (truth == guess) {
      r.per_class_correct[truth] += 1;
      r.correct += 1;
    }
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

void update_prototypes(PrototypeBank& bank, const Tensor& fused_source, std::span<const int> labels) {
  bank.update(fused_source, labels);
}

BatchObjective batch_objective(LogoraModel& model, const Tensor& x_source, std::span<const int> source_labels,
                               const Tensor& x_target, const PrototypeBank* bank, const LossWeights& weights,
                               Rng& rng, bool training) {
  const std::size_t n_source = x_source.dim(0);
  const auto fwd = model.forward(concat({x_source, x_target}, 0), training);
  BatchObjective obj;
  obj.triplets = sample_triplets(source_labels, rng);
  obj.parts = compute_parts(model, fwd, n_source, source_labels, bank, weights, obj.triplets);
  obj.total = total_loss(obj.parts, weights);
  return obj;
}

Trainer::Trainer(LogoraModel& model, const TrainConfig& config)
    : model_(model),
      config_(config),
      disc_opt_(model.discriminator_parameters(), config.learning_rate),
      feat_opt_(model.feature_parameters(), config.learning_rate),
      bank_(model.config().num_classes, model.config().d_v, config.prototype_momentum),
      rng_(config.seed ^ 0xA5A5A5A5ull) {
  config_.validate();
}

EpochMetrics Trainer::train_epoch(const Dataset& source, const Dataset& target) {
  LOGORA_CHECK(!source.empty() && !target.empty(), ErrorCode::kEmptyDataset, "training needs non-empty source and target");
  LOGORA_CHECK(source.fully_labeled(), ErrorCode::kMissingLabels, "every source sample needs a label");
  epoch_ += 1;
  const bool use_center = epoch_ > config_.center_warmup_epochs;
  const std::size_t bs = config_.batch_size;

  std::vector<std::size_t> src_order = iota_indices(0, source.size());
  std::vector<std::size_t> tgt_order = iota_indices(0, target.size());
  rng_.shuffle(src_order);
  rng_.shuffle(tgt_order);
  const std::size_t longest = std::max(source.size(), target.size());
  const std::size_t steps = (longest + bs - 1) / bs;

  EpochMetrics m;
  m.epoch = epoch_;
  std::size_t batches = 0, seen = 0, correct = 0;
  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t count = std::min(bs, longest - step * bs);
    if (count < 2) break;
    std::vector<std::size_t> s_idx(count), t_idx(count);
    for (std::size_t i = 0; i < count; ++i) {
      s_idx[i] = src_order[(step * bs + i) % source.size()];
      t_idx[i] = tgt_order[(step * bs + i) % target.size()];
    }
    const auto labels = source.labels(s_idx);
    const Tensor xs = source.batch(s_idx);
    const Tensor xt = target.batch(t_idx);

    // (1) joint forward of both domains through shared batch-norm statistics.
    const auto fwd = model_.forward(concat({xs, xt}, 0), true);
    const auto src_rows = iota_indices(0, count);
    const auto tgt_rows = iota_indices(count, 2 * count);

    // (2) discriminator update on frozen features.
    {
      Tensor frozen = fwd.fusion.fused.detach();
      Tensor probs = model_.discriminate(frozen);
      Tensor loss = domain_loss(index_select(probs, src_rows), index_select(probs, tgt_rows));
      disc_opt_.zero_grad();
      backward(loss);
      disc_opt_.step();
      if (observer_) observer_("discriminator");
    }

    // (3) feature/fusion/classifier update against the refreshed discriminator.
    const Triplets triplets = sample_triplets(labels, rng_);
    LossParts parts = compute_parts(model_, fwd, count, labels, use_center ? &bank_ : nullptr, config_.weights, triplets);
    Tensor total = total_loss(parts, config_.weights);
    feat_opt_.zero_grad();
    backward(total);
    feat_opt_.step();
    disc_opt_.zero_grad();
    if (observer_) observer_("feature");

    // (4) prototypes from the source rows of this batch.
    const Tensor fused_s = index_select(fwd.fusion.fused, src_rows).detach();
    update_prototypes(bank_, fused_s, labels);

    const std::size_t classes = fwd.logits.dim(1);
    for (std::size_t r = 0; r < count; ++r)
      if (static_cast<int>(argmax_row(fwd.logits.data().subspan(r * classes, classes))) == labels[r]) ++correct;
    seen += count;
    m.loss_cls += parts.cls.item();
    m.loss_domain += parts.domain.item();
    m.loss_margin += parts.margin.item();
    m.loss_dtw += parts.dtw.item();
    m.loss_center += parts.center.item();
    ++batches;
  }
  if (batches > 0) {
    const double inv = 1.0 / static_cast<double>(batches);
    m.loss_cls *= inv;
    m.loss_domain *= inv;
    m.loss_margin *= inv;
    m.loss_dtw *= inv;
    m.loss_center *= inv;
    m.source_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
  }
  history_.push_back(m);
  return m;
}

}  // namespace logora
