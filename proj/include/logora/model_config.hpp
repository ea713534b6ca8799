#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace logora {

/// Architecture hyperparameters. Defaults follow the reference setup: patch
/// length 16 with half-length stride, an 8-layer transformer, and three
/// convolutional scales {4, 8, 16} of three stages each.
struct ModelConfig {
  std::size_t series_length = 128;  // T
  std::size_t channels = 3;         // d
  std::size_t patch_len = 16;
  std::size_t patch_stride = 8;
  std::size_t d_model = 64;
  std::size_t transformer_layers = 8;
  std::size_t transformer_heads = 4;
  std::vector<std::size_t> kernel_sizes{4, 8, 16};
  std::size_t stages = 3;
  std::size_t d_emb = 64;
  std::size_t d_k = 64;
  std::size_t d_v = 64;
  std::size_t num_classes = 6;
  std::size_t discriminator_hidden = 64;

  /// Throws BadConfig on any inconsistency.
  void validate() const;

  std::size_t num_patches() const;
  /// Channel width after each local-encoder stage; the last equals d_emb.
  std::vector<std::size_t> stage_channels() const;
  /// Output length of each local-encoder scale.
  std::vector<std::size_t> local_lengths() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& json);
};

}  // namespace logora
