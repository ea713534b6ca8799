#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "logora/random.hpp"
#include "logora/tensor.hpp"

namespace logora {

struct LossWeights {
  double lambda_domain = 1.0;
  double lambda_margin = 1.0;
  double lambda_dtw = 1.0;
  double lambda_center = 1.0;
  double alpha = 1.0;  // DTW triplet margin
  double beta = 1.0;   // fused-representation triplet margin

  void validate() const;
};

/// Mean softmax cross-entropy of logits[B, C] against labels in [0, C).
Tensor classification_loss(const Tensor& logits, std::span<const int> labels);

inline constexpr double kProbabilityClamp = 1e-7;

/// Discriminator binary cross-entropy with source = 1 and target = 0:
/// -mean(log d_s) - mean(log(1 - d_t)). Probabilities are clamped to
/// [1e-7, 1 - 1e-7]; values outside [0, 1] (or NaN) raise OutOfRange.
Tensor domain_loss(const Tensor& source_probs, const std::optional<Tensor>& target_probs);

/// Anchor/positive/negative batch indices. Positives share the anchor's
/// label; negatives do not.
struct Triplets {
  std::vector<std::size_t> anchors;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;

  bool empty() const { return anchors.empty(); }
  std::size_t size() const { return anchors.size(); }
};

/// One triplet per anchor with a uniformly drawn in-batch positive (other
/// than the anchor) and negative. Anchors lacking either are skipped.
Triplets sample_triplets(std::span<const int> labels, Rng& rng);

/// Throws ClassMismatch unless every triplet is label-consistent.
void check_triplets(const Triplets& triplets, std::span<const int> labels);

/// sum(max(d_pos - d_neg + margin, 0)).
Tensor triplet_hinge(const Tensor& positive_distances, const Tensor& negative_distances, double margin);

/// DTW triplet loss over global representations z_g[B, M, D].
Tensor dtw_triplet_loss(const Tensor& global_reps, const Triplets& triplets, std::span<const int> labels, double alpha);

/// Euclidean triplet loss over fused representations [B, d_v].
Tensor margin_triplet_loss(const Tensor& fused, const Triplets& triplets, std::span<const int> labels, double beta);

/// Per-class running means of source fused representations.
class PrototypeBank {
 public:
  PrototypeBank(std::size_t num_classes, std::size_t width, double momentum = 0.9);

  /// c_j <- momentum * c_j + (1 - momentum) * mean_j for every class present
  /// in the batch; the first observation of a class initializes it.
  void update(const Tensor& fused, std::span<const int> labels);

  std::size_t num_classes() const { return prototypes_.size(); }
  std::size_t width() const { return width_; }
  double momentum() const { return momentum_; }
  bool initialized(std::size_t j) const { return initialized_.at(j); }
  bool any_initialized() const;
  bool all_initialized() const;
  std::span<const double> prototype(std::size_t j) const;
  void set_prototype(std::size_t j, std::span<const double> values);

  /// Index of the initialized prototype closest to `row`; throws NoPrototypes.
  std::size_t nearest(std::span<const double> row) const;

 private:
  std::size_t width_;
  double momentum_;
  std::vector<std::vector<double>> prototypes_;
  std::vector<bool> initialized_;
};

/// sum_i min_j ||z_i - c_j||^2 over initialized prototypes. The bank is a
/// constant for differentiation.
Tensor center_loss(const Tensor& fused_target, const PrototypeBank& bank);

struct LossParts {
  Tensor cls;
  Tensor domain;
  Tensor margin;
  Tensor dtw;
  Tensor center;
};

/// L_cls - lambda_domain L_domain + lambda_margin L_margin + lambda_dtw L_dtw
/// + lambda_center L_center.
Tensor total_loss(const LossParts& parts, const LossWeights& weights);

}  // namespace logora
