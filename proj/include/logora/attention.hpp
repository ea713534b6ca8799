#pragma once

#include "logora/tensor.hpp"

namespace logora {

struct AttentionResult {
  Tensor output;   // [..., m, d_v]
  Tensor weights;  // [..., m, l], rows sum to one
};

/// softmax(q k^T / sqrt(d_k)) v over identical leading axes.
AttentionResult scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// [B, n, heads*dh] <-> [B, heads, n, dh]
Tensor split_heads(const Tensor& x, std::size_t heads);
Tensor merge_heads(const Tensor& x);

}  // namespace logora
