#include "logora/fusion.hpp"

#include "logora/attention.hpp"
#include "logora/errors.hpp"

namespace logora {

FusionModule::FusionModule(const ModelConfig& config, ParameterSet& params, Rng& rng)
    : cross_q_(params, "fusion.cross.q", config.d_model, config.d_k, rng, false),
      cross_k_(params, "fusion.cross.k", config.d_emb, config.d_k, rng, false),
      cross_v_(params, "fusion.cross.v", config.d_emb, config.d_v, rng, false),
      self_q_(params, "fusion.self.q", config.d_v, config.d_v, rng, false),
      self_k_(params, "fusion.self.k", config.d_v, config.d_v, rng, false),
      self_v_(params, "fusion.self.v", config.d_v, config.d_v, rng, false) {}

CrossAttnOutput FusionModule::cross_attend(const Tensor& global_rep, const Tensor& local_rep) const {
  LOGORA_CHECK(global_rep.rank() == 3 && local_rep.rank() == 3 && global_rep.dim(0) == local_rep.dim(0),
          ErrorCode::kShapeMismatch, "cross_attend expects z_g[B,M,D] and z_l[B,l,d_emb] with equal B");
  LOGORA_CHECK(global_rep.dim(2) == cross_q_.weight.dim(0) && local_rep.dim(2) == cross_k_.weight.dim(0),
          ErrorCode::kShapeMismatch, "cross_attend feature widths do not match the projections");
  auto r = scaled_dot_attention(cross_q_(global_rep), cross_k_(local_rep), cross_v_(local_rep));
  return {r.output, r.weights};
}

FusedOutput FusionModule::operator()(const Tensor& global_rep, const std::vector<Tensor>& local_reps) const {
  LOGORA_CHECK(!local_reps.empty(), ErrorCode::kShapeMismatch, "fusion needs at least one local representation");
  FusedOutput out;
  std::vector<Tensor> parts;
  for (const auto& rep : local_reps) {
    auto cross = cross_attend(global_rep, rep);
    parts.push_back(cross.output);
    out.cross_weights.push_back(cross.weights);
  }
  Tensor sequence = parts.size() == 1 ? parts.front() : concat(parts, 1);
  auto self = scaled_dot_attention(self_q_(sequence), self_k_(sequence), self_v_(sequence));
  out.fused = sum_axis(self.output, 1);
  out.self_weights = self.weights;
  return out;
}

}  // namespace logora
