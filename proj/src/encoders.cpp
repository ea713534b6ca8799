#include "logora/encoders.hpp"

#include <algorithm>

#include "logora/attention.hpp"
#include "logora/errors.hpp"

namespace logora {

std::size_t patch_count(std::size_t length, std::size_t patch_len, std::size_t stride) {
  LOGORA_CHECK(patch_len >= 1 && patch_len <= length, ErrorCode::kBadConfig,
          "patch length " + std::to_string(patch_len) + " must lie in [1, " + std::to_string(length) + "]");
  LOGORA_CHECK(stride >= 1, ErrorCode::kBadConfig, "patch stride must be >= 1");
  return (length - patch_len + stride - 1) / stride + 1;
}

std::vector<std::size_t> patch_starts(std::size_t length, std::size_t patch_len, std::size_t stride) {
  const std::size_t m = patch_count(length, patch_len, stride);
  std::vector<std::size_t> starts(m);
  for (std::size_t i = 0; i < m; ++i) starts[i] = i * stride;
  return starts;
}

PatchSequence patchify(std::span<const double> values, std::size_t length, std::size_t channels,
                       std::size_t patch_len, std::size_t stride) {
  LOGORA_CHECK(values.size() == length * channels, ErrorCode::kShapeMismatch, "series size does not match T x d");
  const auto starts = patch_starts(length, patch_len, stride);
  std::vector<double> out(starts.size() * patch_len * channels);
  for (std::size_t m = 0; m < starts.size(); ++m)
    for (std::size_t p = 0; p < patch_len; ++p) {
      const std::size_t t = std::min(starts[m] + p, length - 1);
      std::copy_n(values.data() + t * channels, channels, out.data() + (m * patch_len + p) * channels);
    }
  return {Tensor::from({starts.size(), patch_len, channels}, std::move(out)), patch_len, stride, starts.size()};
}

Tensor patchify_batch(const Tensor& x, std::size_t patch_len, std::size_t stride) {
  LOGORA_CHECK(x.rank() == 3, ErrorCode::kShapeMismatch, "patchify_batch expects [B,T,d]");
  const std::size_t batch = x.dim(0), length = x.dim(1), channels = x.dim(2);
  const auto starts = patch_starts(length, patch_len, stride);
  const std::size_t m = starts.size();
  // source[r] is the time index feeding patch row r (same for every sample).
  std::vector<std::size_t> source(m * patch_len);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < patch_len; ++p) source[i * patch_len + p] = std::min(starts[i] + p, length - 1);
  std::vector<double> out(batch * source.size() * channels);
  const auto xv = x.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t r = 0; r < source.size(); ++r)
      std::copy_n(xv.data() + (b * length + source[r]) * channels, channels,
                  out.data() + (b * source.size() + r) * channels);
  return Tensor::make_result(
      {batch, m, patch_len, channels}, std::move(out), {x},
      [batch, length, channels, source = std::move(source)](detail::Node& self) {
        auto& gx = self.parents[0]->grad_buffer();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t r = 0; r < source.size(); ++r)
            for (std::size_t c = 0; c < channels; ++c)
              gx[(b * length + source[r]) * channels + c] += self.grad[(b * source.size() + r) * channels + c];
      },
      "patchify");
}

std::vector<std::size_t> local_output_lengths(std::size_t length, std::span<const std::size_t> kernel_sizes,
                                              std::size_t stages) {
  std::vector<std::size_t> lengths;
  for (std::size_t k : kernel_sizes) {
    std::size_t l = length;
    for (std::size_t s = 0; s < stages; ++s) {
      LOGORA_CHECK(k >= 1 && k <= l, ErrorCode::kBadConfig,
              "kernel " + std::to_string(k) + " exceeds remaining length " + std::to_string(l) + " at stage " +
                  std::to_string(s));
      l = l - k + 1;
    }
    lengths.push_back(l);
  }
  return lengths;
}

Linear::Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : has_bias(with_bias) {
  weight = params.add_uniform(name + ".weight", {in, out}, in, rng);
  if (with_bias) bias = params.add_zeros(name + ".bias", {out});
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return has_bias ? add(y, bias) : y;
}

LayerNorm::LayerNorm(ParameterSet& params, const std::string& name, std::size_t width)
    : gamma(params.add_constant(name + ".gamma", {width}, 1.0)), beta(params.add_zeros(name + ".beta", {width})) {}

TransformerBlock::TransformerBlock(ParameterSet& params, const std::string& name, std::size_t d_model,
                                   std::size_t heads, Rng& rng)
    : heads_(heads),
      ln_attn_(params, name + ".ln_attn", d_model),
      ln_ff_(params, name + ".ln_ff", d_model),
      q_(params, name + ".attn.q", d_model, d_model, rng),
      k_(params, name + ".attn.k", d_model, d_model, rng),
      v_(params, name + ".attn.v", d_model, d_model, rng),
      o_(params, name + ".attn.o", d_model, d_model, rng),
      ff_in_(params, name + ".ff.in", d_model, 4 * d_model, rng),
      ff_out_(params, name + ".ff.out", 4 * d_model, d_model, rng) {}

Tensor TransformerBlock::operator()(const Tensor& x) const {
  Tensor h = ln_attn_(x);
  Tensor attended;
  if (heads_ == 1) {
    attended = scaled_dot_attention(q_(h), k_(h), v_(h)).output;
  } else {
    auto r = scaled_dot_attention(split_heads(q_(h), heads_), split_heads(k_(h), heads_), split_heads(v_(h), heads_));
    attended = merge_heads(r.output);
  }
  Tensor y = add(x, o_(attended));
  return add(y, ff_out_(gelu(ff_in_(ln_ff_(y)))));
}

GlobalEncoder::GlobalEncoder(const ModelConfig& config, ParameterSet& params, Rng& rng)
    : patch_len_(config.patch_len),
      stride_(config.patch_stride),
      num_patches_(config.num_patches()),
      d_model_(config.d_model),
      proj_(params, "global.proj", config.channels, config.d_model, rng),
      patch_q_(params, "global.patch_attn.q", config.d_model, config.d_model, rng, false),
      patch_k_(params, "global.patch_attn.k", config.d_model, config.d_model, rng, false),
      patch_v_(params, "global.patch_attn.v", config.d_model, config.d_model, rng, false) {
  pos_ = params.add_uniform("global.pos", {num_patches_, d_model_}, d_model_, rng);
  for (std::size_t i = 0; i < config.transformer_layers; ++i)
    blocks_.emplace_back(params, "global.block" + std::to_string(i), config.d_model, config.transformer_heads, rng);
}

Tensor GlobalEncoder::operator()(const Tensor& x) const { return encode_patches(patchify_batch(x, patch_len_, stride_)); }

Tensor GlobalEncoder::encode_patches(const Tensor& patches) const {
  LOGORA_CHECK(patches.rank() == 4 && patches.dim(1) == num_patches_ && patches.dim(2) == patch_len_,
          ErrorCode::kShapeMismatch, "global encoder expects [B," + std::to_string(num_patches_) + "," +
                                         std::to_string(patch_len_) + ",d], got " + shape_to_string(patches.shape()));
  const std::size_t batch = patches.dim(0);
  // [B*M, P, D] token sequences, one per patch.
  Tensor tokens = reshape(proj_(patches), {batch * num_patches_, patch_len_, d_model_});
  Tensor within = scaled_dot_attention(patch_q_(tokens), patch_k_(tokens), patch_v_(tokens)).output;
  Tensor pooled = reshape(mean_axis(within, 1), {batch, num_patches_, d_model_});
  Tensor z = add(pooled, pos_);
  for (const auto& block : blocks_) z = block(z);
  return z;
}

LocalEncoder::LocalEncoder(const ModelConfig& config, ParameterSet& params, Rng& rng)
    : kernel_sizes_(config.kernel_sizes) {
  const auto widths = config.stage_channels();
  for (std::size_t k : kernel_sizes_) {
    std::vector<Stage> stages;
    std::size_t c_in = config.channels;
    for (std::size_t s = 0; s < config.stages; ++s) {
      const std::string name = "local.k" + std::to_string(k) + ".stage" + std::to_string(s);
      Stage st;
      st.kernel = params.add_uniform(name + ".conv", {k, c_in, widths[s]}, k * c_in, rng);
      st.gamma = params.add_constant(name + ".bn.gamma", {widths[s]}, 1.0);
      st.beta = params.add_zeros(name + ".bn.beta", {widths[s]});
      st.stats.running_mean = params.add_constant(name + ".bn.running_mean", {widths[s]}, 0.0, false);
      st.stats.running_var = params.add_constant(name + ".bn.running_var", {widths[s]}, 1.0, false);
      stages.push_back(std::move(st));
      c_in = widths[s];
    }
    scales_.push_back(std::move(stages));
  }
}

std::vector<Tensor> LocalEncoder::operator()(const Tensor& x, bool training) {
  LOGORA_CHECK(x.rank() == 3, ErrorCode::kShapeMismatch, "local encoder expects [B,T,d]");
  local_output_lengths(x.dim(1), kernel_sizes_, scales_.front().size());
  std::vector<Tensor> reps;
  for (auto& stages : scales_) {
    Tensor h = x;
    for (auto& st : stages) h = relu(batch_norm(conv1d_valid(h, st.kernel, 1), st.gamma, st.beta, st.stats, training));
    reps.push_back(h);
  }
  return reps;
}

}  // namespace logora
