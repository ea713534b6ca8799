#include "logora/losses.hpp"

#include <cmath>
#include <limits>

#include "logora/dtw.hpp"
#include "logora/errors.hpp"
#include "logora/ops.hpp"

namespace logora {

void LossWeights::validate() const {
  for (double v : {lambda_domain, lambda_margin, lambda_dtw, lambda_center, alpha, beta})
    LOGORA_CHECK(v >= 0.0 && std::isfinite(v), ErrorCode::kBadConfig, "loss weights and margins must be finite and >= 0");
}

Tensor classification_loss(const Tensor& logits, std::span<const int> labels) {
  LOGORA_CHECK(logits.rank() == 2 && logits.dim(0) == labels.size(), ErrorCode::kShapeMismatch,
          "classification_loss expects logits[B,C] with B labels");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  std::vector<double> mask(batch * classes, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    LOGORA_CHECK(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < classes, ErrorCode::kLabelOutOfRange,
            "label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
    mask[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  Tensor picked = mul(log_softmax_lastdim(logits), Tensor::from({batch, classes}, std::move(mask)));
  return scale(sum(picked), -1.0 / static_cast<double>(batch));
}

namespace {

Tensor mean_log_clamped(const Tensor& probs, bool complement) {
  for (double p : probs.data())
    LOGORA_CHECK(p >= 0.0 && p <= 1.0, ErrorCode::kOutOfRange, "discriminator probability outside [0, 1]");
  Tensor x = complement ? add_scalar(scale(probs, -1.0), 1.0) : probs;
  return mean(log(clamp(x, kProbabilityClamp, 1.0 - kProbabilityClamp)));
}

}  // namespace

Tensor domain_loss(const Tensor& source_probs, const std::optional<Tensor>& target_probs) {
  Tensor loss = scale(mean_log_clamped(source_probs, false), -1.0);
  if (target_probs) loss = sub(loss, mean_log_clamped(*target_probs, true));
  return loss;
}

Triplets sample_triplets(std::span<const int> labels, Rng& rng) {
  Triplets t;
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    pos.clear();
    neg.clear();
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (j == i) continue;
      (labels[j] == labels[i] ? pos : neg).push_back(j);
    }
    if (pos.empty() || neg.empty()) continue;
    t.anchors.push_back(i);
    t.positives.push_back(pos[rng.index(pos.size())]);
    t.negatives.push_back(neg[rng.index(neg.size())]);
  }
  return t;
}

void check_triplets(const Triplets& triplets, std::span<const int> labels) {
  LOGORA_CHECK(triplets.positives.size() == triplets.size() && triplets.negatives.size() == triplets.size(),
          ErrorCode::kShapeMismatch, "triplet index lists differ in length");
  for (std::size_t n = 0; n < triplets.size(); ++n) {
    const std::size_t a = triplets.anchors[n], p = triplets.positives[n], q = triplets.negatives[n];
    LOGORA_CHECK(a < labels.size() && p < labels.size() && q < labels.size(), ErrorCode::kOutOfRange,
            "triplet index out of range");
    LOGORA_CHECK(labels[a] == labels[p], ErrorCode::kClassMismatch, "positive does not share the anchor's class");
    LOGORA_CHECK(labels[a] != labels[q], ErrorCode::kClassMismatch, "negative shares the anchor's class");
  }
}

Tensor triplet_hinge(const Tensor& positive_distances, const Tensor& negative_distances, double margin) {
  return sum(hinge(add_scalar(sub(positive_distances, negative_distances), margin)));
}

Tensor dtw_triplet_loss(const Tensor& global_reps, const Triplets& triplets, std::span<const int> labels, double alpha) {
  check_triplets(triplets, labels);
  if (triplets.empty()) return Tensor::scalar(0.0);
  Tensor d_pos = dtw_pairs(global_reps, triplets.anchors, triplets.positives);
  Tensor d_neg = dtw_pairs(global_reps, triplets.anchors, triplets.negatives);
  return triplet_hinge(d_pos, d_neg, alpha);
}

Tensor margin_triplet_loss(const Tensor& fused, const Triplets& triplets, std::span<const int> labels, double beta) {
  check_triplets(triplets, labels);
  if (triplets.empty()) return Tensor::scalar(0.0);
  Tensor anchors = index_select(fused, triplets.anchors);
  Tensor d_pos = euclidean_rows(anchors, index_select(fused, triplets.positives));
  Tensor d_neg = euclidean_rows(anchors, index_select(fused, triplets.negatives));
  return triplet_hinge(d_pos, d_neg, beta);
}

PrototypeBank::PrototypeBank(std::size_t num_classes, std::size_t width, double momentum)
    : width_(width),
      momentum_(momentum),
      prototypes_(num_classes, std::vector<double>(width, 0.0)),
      initialized_(num_classes, false) {
  LOGORA_CHECK(momentum > 0.0 && momentum < 1.0, ErrorCode::kBadConfig, "prototype momentum must lie in (0, 1)");
}

void PrototypeBank::update(const Tensor& fused, std::span<const int> labels) {
  LOGORA_CHECK(fused.rank() == 2 && fused.dim(1) == width_ && fused.dim(0) == labels.size(), ErrorCode::kShapeMismatch,
          "prototype update expects fused[B, width] with B labels");
  const std::size_t classes = prototypes_.size();
  std::vector<std::vector<double>> sums(classes, std::vector<double>(width_, 0.0));
  std::vector<std::size_t> counts(classes, 0);
  const auto v = fused.data();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    LOGORA_CHECK(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < classes, ErrorCode::kLabelOutOfRange,
            "prototype update label out of range");
    const auto c = static_cast<std::size_t>(labels[i]);
    counts[c] += 1;
    for (std::size_t k = 0; k < width_; ++k) sums[c][k] += v[i * width_ + k];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0) continue;
    const double inv = 1.0 / static_cast<double>(counts[c]);
    for (std::size_t k = 0; k < width_; ++k) {
      const double batch_mean = sums[c][k] * inv;
      prototypes_[c][k] = initialized_[c] ? momentum_ * prototypes_[c][k] + (1.0 - momentum_) * batch_mean : batch_mean;
    }
    initialized_[c] = true;
  }
}

bool PrototypeBank::any_initialized() const {
  for (bool b : initialized_)
    if (b) return true;
  return false;
}

bool PrototypeBank::all_initialized() const {
  for (bool b : initialized_)
    if (!b) return false;
  return true;
}

std::span<const double> PrototypeBank::prototype(std::size_t j) const { return prototypes_.at(j); }

void PrototypeBank::set_prototype(std::size_t j, std::span<const double> values) {
  LOGORA_CHECK(values.size() == width_, ErrorCode::kShapeMismatch, "prototype width mismatch");
  prototypes_.at(j).assign(values.begin(), values.end());
  initialized_.at(j) = true;
}

std::size_t PrototypeBank::nearest(std::span<const double> row) const {
  LOGORA_CHECK(row.size() == width_, ErrorCode::kShapeMismatch, "prototype query width mismatch");
  std::size_t best = prototypes_.size();
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < prototypes_.size(); ++j) {
    if (!initialized_[j]) continue;
    double d = 0.0;
    for (std::size_t k = 0; k < width_; ++k) {
      const double diff = row[k] - prototypes_[j][k];
      d += diff * diff;
    }
    if (d < best_dist) {
      best_dist = d;
      best = j;
    }
  }
  LOGORA_CHECK(best < prototypes_.size(), ErrorCode::kNoPrototypes, "no initialized prototypes");
  return best;
}

Tensor center_loss(const Tensor& fused_target, const PrototypeBank& bank) {
  LOGORA_CHECK(fused_target.rank() == 2 && fused_target.dim(1) == bank.width(), ErrorCode::kShapeMismatch,
          "center_loss expects fused[B, width]");
  LOGORA_CHECK(bank.any_initialized(), ErrorCode::kNoPrototypes, "center_loss needs an initialized prototype");
  const std::size_t batch = fused_target.dim(0), width = bank.width();
  std::vector<double> targets(batch * width);
  const auto v = fused_target.data();
  for (std::size_t i = 0; i < batch; ++i) {
    const auto proto = bank.prototype(bank.nearest(v.subspan(i * width, width)));
    std::copy(proto.begin(), proto.end(), targets.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return sum(square(sub(fused_target, Tensor::from({batch, width}, std::move(targets)))));
}

Tensor total_loss(const LossParts& parts, const LossWeights& weights) {
  Tensor total = sub(parts.cls, scale(parts.domain, weights.lambda_domain));
  total = add(total, scale(parts.margin, weights.lambda_margin));
  total = add(total, scale(parts.dtw, weights.lambda_dtw));
  return add(total, scale(parts.center, weights.lambda_center));
}

}  // namespace logora
