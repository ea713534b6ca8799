#include "logora/model_config.hpp"

#include <json.hpp>

#include "logora/encoders.hpp"
#include "logora/errors.hpp"

namespace logora {

void ModelConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) { LOGORA_CHECK(ok, ErrorCode::kBadConfig, msg); };
  check(series_length >= 1 && channels >= 1, "series_length and channels must be positive");
  check(patch_len >= 1 && patch_len <= series_length, "patch_len must lie in [1, series_length]");
  check(patch_stride >= 1 && patch_stride <= patch_len, "patch_stride must lie in [1, patch_len]");
  check(d_model >= 1 && transformer_heads >= 1 && d_model % transformer_heads == 0,
        "d_model must be a positive multiple of transformer_heads");
  check(!kernel_sizes.empty(), "at least one kernel size is required");
  for (std::size_t i = 0; i < kernel_sizes.size(); ++i) {
    check(kernel_sizes[i] >= 1, "kernel sizes must be positive");
    if (i > 0) check(kernel_sizes[i] > kernel_sizes[i - 1], "kernel sizes must be strictly increasing");
  }
  check(stages >= 1 && stages <= 16, "stages must lie in [1, 16]");
  check(d_emb >= 1 && d_emb % (std::size_t{1} << (stages - 1)) == 0,
        "d_emb must be divisible by 2^(stages-1) for the doubling channel schedule");
  check(d_k >= 1 && d_v >= 1, "d_k and d_v must be positive");
  check(num_classes >= 2, "num_classes must be at least 2");
  check(discriminator_hidden >= 1, "discriminator_hidden must be positive");
  const std::size_t span = stages * (kernel_sizes.back() - 1) + 1;
  check(span <= series_length, "largest kernel span " + std::to_string(span) + " exceeds series_length");
}

std::size_t ModelConfig::num_patches() const { return patch_count(series_length, patch_len, patch_stride); }

std::vector<std::size_t> ModelConfig::stage_channels() const {
  std::vector<std::size_t> widths(stages);
  for (std::size_t s = 0; s < stages; ++s) widths[s] = d_emb >> (stages - 1 - s);
  return widths;
}

std::vector<std::size_t> ModelConfig::local_lengths() const {
  return local_output_lengths(series_length, kernel_sizes, stages);
}

std::string ModelConfig::to_json() const {
  nlohmann::json j = {
      {"series_length", series_length}, {"channels", channels},
      {"patch_len", patch_len},         {"patch_stride", patch_stride},
      {"d_model", d_model},             {"transformer_layers", transformer_layers},
      {"transformer_heads", transformer_heads}, {"kernel_sizes", kernel_sizes},
      {"stages", stages},               {"d_emb", d_emb},
      {"d_k", d_k},                     {"d_v", d_v},
      {"num_classes", num_classes},     {"discriminator_hidden", discriminator_hidden},
  };
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormatError, std::string("model config is not valid JSON: ") + e.what());
  }
  ModelConfig c;
  try {
    c.series_length = j.at("series_length").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.patch_len = j.at("patch_len").get<std::size_t>();
    c.patch_stride = j.at("patch_stride").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.transformer_layers = j.at("transformer_layers").get<std::size_t>();
    c.transformer_heads = j.at("transformer_heads").get<std::size_t>();
    c.kernel_sizes = j.at("kernel_sizes").get<std::vector<std::size_t>>();
    c.stages = j.at("stages").get<std::size_t>();
    c.d_emb = j.at("d_emb").get<std::size_t>();
    c.d_k = j.at("d_k").get<std::size_t>();
    c.d_v = j.at("d_v").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.discriminator_hidden = j.at("discriminator_hidden").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormatError, std::string("model config is incomplete: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace logora
