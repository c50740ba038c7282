#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "resdyn/core/check.hpp"
#include "resdyn/core/tape.hpp"

namespace resdyn::core {

/// y = x W^T + b with W stored (out_dim, in_dim), b (1, out_dim).
inline NodeId linear(Tape& t, NodeId x, NodeId W, NodeId b) {
  return t.add_rowvec(t.matmul_nt(x, W), b);
}

inline NodeId linear_nobias(Tape& t, NodeId x, NodeId W) { return t.matmul_nt(x, W); }

/// Two affine layers with a GELU between them.
inline NodeId mlp2(Tape& t, NodeId x, NodeId W1, NodeId b1, NodeId W2, NodeId b2) {
  return linear(t, t.gelu(linear(t, x, W1, b1)), W2, b2);
}

/// Multi-head self-attention over X (T x d_model). Projections are square
/// (d_model x d_model) without bias; head width is d_model / n_heads.
/// Returns MSA(X); the caller adds the residual connection. If attn_out is
/// non-null, the per-head softmax attention nodes (T x T each) are appended.
inline NodeId multi_head_self_attention(Tape& t, NodeId X, NodeId Wq, NodeId Wk, NodeId Wv,
                                        NodeId Wo, std::size_t n_heads,
                                        std::vector<NodeId>* attn_out = nullptr) {
  const std::size_t d_model = t.value(X).cols();
  RESDYN_REQUIRE(n_heads > 0 && d_model % n_heads == 0,
                 "attention: d_model must divide into heads");
  const std::size_t dh = d_model / n_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  NodeId Q = t.matmul_nt(X, Wq);
  NodeId K = t.matmul_nt(X, Wk);
  NodeId V = t.matmul_nt(X, Wv);

  NodeId heads{};
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t c0 = h * dh;
    const std::size_t c1 = c0 + dh;
    NodeId Qh = t.slice_cols(Q, c0, c1);
    NodeId Kh = t.slice_cols(K, c0, c1);
    NodeId Vh = t.slice_cols(V, c0, c1);
    NodeId scores = t.scale(t.matmul_nt(Qh, Kh), inv_sqrt_dh);
    NodeId A = t.softmax_rows(scores);
    if (attn_out) attn_out->push_back(A);
    NodeId Oh = t.matmul(A, Vh);
    heads = (h == 0) ? Oh : t.concat_cols(heads, Oh);
  }
  return t.matmul_nt(heads, Wo);
}

struct CrossAttentionOut {
  NodeId out;    // 1 x d_k
  NodeId alpha;  // 1 x n_memories, rows sum to 1
};

/// Single-query cross-attention: query row q (1 x d_model) attends over
/// mem (n_memories x d_mem). Wq: (d_k x d_model), Wk/Wv: (d_k x d_mem).
inline CrossAttentionOut cross_attention_single_query(Tape& t, NodeId q, NodeId mem, NodeId Wq,
                                                      NodeId Wk, NodeId Wv) {
  RESDYN_REQUIRE(t.value(q).rows() == 1, "cross-attention: query must be one row");
  const std::size_t d_k = t.value(Wq).rows();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
  NodeId Q = t.matmul_nt(q, Wq);    // 1 x d_k
  NodeId K = t.matmul_nt(mem, Wk);  // m x d_k
  NodeId V = t.matmul_nt(mem, Wv);  // m x d_k
  NodeId scores = t.scale(t.matmul_nt(Q, K), inv_sqrt_dk);
  NodeId alpha = t.softmax_rows(scores);
  return {t.matmul(alpha, V), alpha};
}

}  // namespace resdyn::core
