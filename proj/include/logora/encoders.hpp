#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "logora/model_config.hpp"
#include "logora/ops.hpp"
#include "logora/parameters.hpp"
#include "logora/tensor.hpp"

namespace logora {

// ---------------------------------------------------------------------------
// Patching

/// Number of windows of length `patch_len` at `stride` needed to cover a
/// series of length `length`: ceil((T - P) / S) + 1.
std::size_t patch_count(std::size_t length, std::size_t patch_len, std::size_t stride);

/// Window start offsets 0, S, 2S, ...
std::vector<std::size_t> patch_starts(std::size_t length, std::size_t patch_len, std::size_t stride);

struct PatchSequence {
  Tensor patches;  // [M, P, d]
  std::size_t patch_len = 0;
  std::size_t stride = 0;
  std::size_t num_patches = 0;
};

/// Splits a T x d series (time-major) into overlapping windows. When the last
/// window runs past T it is filled by repeating the final time step.
PatchSequence patchify(std::span<const double> values, std::size_t length, std::size_t channels,
                       std::size_t patch_len, std::size_t stride);

/// Batched patching of x[B, T, d] into [B, M, P, d]; differentiable w.r.t. x.
Tensor patchify_batch(const Tensor& x, std::size_t patch_len, std::size_t stride);

/// Lengths of each scale after `stages` stride-1 valid convolutions.
std::vector<std::size_t> local_output_lengths(std::size_t length, std::span<const std::size_t> kernel_sizes,
                                              std::size_t stages);

// ---------------------------------------------------------------------------
// Building blocks

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out], absent when constructed without bias

  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
  Tensor operator()(const Tensor& x) const;
  bool has_bias = true;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  LayerNorm(ParameterSet& params, const std::string& name, std::size_t width);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
};

/// Pre-norm encoder block: x + MHA(LN(x)), then x + FFN(LN(x)) with a GELU
/// feed-forward of width 4 * d_model.
class TransformerBlock {
 public:
  TransformerBlock(ParameterSet& params, const std::string& name, std::size_t d_model, std::size_t heads, Rng& rng);
  Tensor operator()(const Tensor& x) const;

 private:
  std::size_t heads_;
  LayerNorm ln_attn_, ln_ff_;
  Linear q_, k_, v_, o_, ff_in_, ff_out_;
};

// ---------------------------------------------------------------------------
// Global encoder

/// Patch projection, within-patch self-attention pooled by the mean over patch
/// positions, a learnable positional encoding, then a stack of transformer
/// blocks over the patch tokens. Maps x[B, T, d] to z_g[B, M, D].
class GlobalEncoder {
 public:
  GlobalEncoder(const ModelConfig& config, ParameterSet& params, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  /// Same pipeline starting from already patched input [B, M, P, d].
  Tensor encode_patches(const Tensor& patches) const;

  const Tensor& positional_encoding() const { return pos_; }
  const Linear& projection() const { return proj_; }

 private:
  std::size_t patch_len_, stride_, num_patches_, d_model_;
  Linear proj_;
  Linear patch_q_, patch_k_, patch_v_;
  Tensor pos_;
  std::vector<TransformerBlock> blocks_;
};

// ---------------------------------------------------------------------------
// Multi-scale local encoder

/// One CNN per kernel size; each runs `stages` of (valid conv, batch norm,
/// relu) with the channel width doubling until d_emb.
class LocalEncoder {
 public:
  LocalEncoder(const ModelConfig& config, ParameterSet& params, Rng& rng);

  /// x[B, T, d] -> one [B, l_i, d_emb] tensor per kernel size.
  std::vector<Tensor> operator()(const Tensor& x, bool training);

  const std::vector<std::size_t>& kernel_sizes() const { return kernel_sizes_; }

 private:
  struct Stage {
    Tensor kernel;  // [k, c_in, c_out]
    Tensor gamma, beta;
    BatchNormStats stats;
  };
  std::vector<std::size_t> kernel_sizes_;
  std::vector<std::vector<Stage>> scales_;
};

}  // namespace logora
