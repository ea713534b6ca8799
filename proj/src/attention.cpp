#include "logora/attention.hpp"

#include <cmath>

#include "logora/errors.hpp"
#include "logora/ops.hpp"

namespace logora {

AttentionResult scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  LOGORA_CHECK(q.rank() >= 2 && q.rank() == k.rank() && k.rank() == v.rank(), ErrorCode::kShapeMismatch,
          "attention operands must share rank >= 2");
  LOGORA_CHECK(q.shape().back() == k.shape().back(), ErrorCode::kShapeMismatch, "query/key widths differ");
  LOGORA_CHECK(k.dim(k.rank() - 2) == v.dim(v.rank() - 2), ErrorCode::kShapeMismatch, "key/value lengths differ");
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.shape().back()));
  Tensor scores = scale(matmul(q, transpose_last2(k)), inv_scale);
  Tensor weights = softmax_lastdim(scores);
  return {matmul(weights, v), weights};
}

Tensor split_heads(const Tensor& x, std::size_t heads) {
  LOGORA_CHECK(x.rank() == 3 && x.dim(2) % heads == 0, ErrorCode::kShapeMismatch, "split_heads needs [B,n,heads*dh]");
  const std::size_t b = x.dim(0), n = x.dim(1), dh = x.dim(2) / heads;
  return permute(reshape(x, {b, n, heads, dh}), {0, 2, 1, 3});
}

Tensor merge_heads(const Tensor& x) {
  LOGORA_CHECK(x.rank() == 4, ErrorCode::kShapeMismatch, "merge_heads needs [B,heads,n,dh]");
  const std::size_t b = x.dim(0), h = x.dim(1), n = x.dim(2), dh = x.dim(3);
  return reshape(permute(x, {0, 2, 1, 3}), {b, n, h * dh});
}

}  // namespace logora
