#pragma once

#include <vector>

#include "logora/encoders.hpp"

namespace logora {

struct CrossAttnOutput {
  Tensor output;   // [B, M, d_v]
  Tensor weights;  // [B, M, l]
};

struct FusedOutput {
  Tensor fused;                              // [B, d_v]
  std::vector<Tensor> cross_weights;         // per scale, [B, M, l_i]
  Tensor self_weights;                       // [B, N*M, N*M]
};

/// Local-global fusion: single-head cross-attention from the global tokens
/// (queries) to every local scale (keys/values), concatenation of the N
/// results along the sequence axis, one position-free self-attention, and a
/// sum over the N*M positions.
///
/// The query/key/value projections are shared by all scales, so reordering
/// the scales permutes the concatenated sequence and leaves the pooled
/// vector unchanged.
class FusionModule {
 public:
  FusionModule(const ModelConfig& config, ParameterSet& params, Rng& rng);

  CrossAttnOutput cross_attend(const Tensor& global_rep, const Tensor& local_rep) const;
  FusedOutput operator()(const Tensor& global_rep, const std::vector<Tensor>& local_reps) const;

 private:
  Linear cross_q_, cross_k_, cross_v_;
  Linear self_q_, self_k_, self_v_;
};

}  // namespace logora
