#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "resdyn/core/check.hpp"
#include "resdyn/core/layers.hpp"
#include "resdyn/core/param_store.hpp"
#include "resdyn/core/rng.hpp"
#include "resdyn/core/tape.hpp"
#include "resdyn/core/tensor.hpp"
#include "resdyn/model/fdt_config.hpp"

namespace resdyn::model {

/// Fixed-capacity ring of the last t_long input vectors x_t = (chi, chi_dot,
/// tau_prev), each of length d_v. No allocation after construction.
class HistoryWindow {
 public:
  HistoryWindow(std::size_t d_v, std::size_t t_long)
      : d_v_(d_v), capacity_(t_long), buf_(d_v * t_long, 0.0) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t count() const { return count_; }
  bool full() const { return count_ >= capacity_; }

  void push(const Eigen::VectorXd& x) {
    RESDYN_REQUIRE(x.size() == static_cast<Eigen::Index>(d_v_), "history window: bad width");
    head_ = (head_ + 1) % capacity_;
    double* slot = buf_.data() + head_ * d_v_;
    for (std::size_t i = 0; i < d_v_; ++i) slot[i] = x(static_cast<Eigen::Index>(i));
    if (count_ < capacity_) ++count_;
  }

  /// Channel value `age` samples back (age 0 = newest).
  double channel_at(std::size_t channel, std::size_t age) const {
    RESDYN_REQUIRE(age < count_, "history window: age exceeds fill");
    const std::size_t slot = (head_ + capacity_ - age) % capacity_;
    return buf_[slot * d_v_ + channel];
  }

  void clear() {
    count_ = 0;
    head_ = capacity_ - 1;
  }

 private:
  std::size_t d_v_;
  std::size_t capacity_;
  std::vector<double> buf_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

/// Model output at one step: denormalized residual forecasts for offsets
/// j = 0..k (row j) plus the retrieved latent the adapter regresses on.
struct ResidualForecast {
  Eigen::MatrixXd base;    // (k+1) x n
  Eigen::VectorXd latent;  // latent_dim()
};

/// The residual forecaster: variable-wise tokenization of the short window,
/// self-attention context stream with a global token, single-query
/// cross-attention retrieval over per-channel long-history embeddings, and
/// a position-wise FFN + flatten + MLP decoder producing all k+1 steps.
class FdtModel {
 public:
  explicit FdtModel(FdtConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    build_params();
    const auto dvi = static_cast<Eigen::Index>(cfg_.d_v());
    const auto ni = static_cast<Eigen::Index>(cfg_.n);
    in_mean_ = Eigen::VectorXd::Zero(dvi);
    in_std_ = Eigen::VectorXd::Ones(dvi);
    out_mean_ = Eigen::VectorXd::Zero(ni);
    out_std_ = Eigen::VectorXd::Ones(ni);
  }

  const FdtConfig& config() const { return cfg_; }
  core::ParamStore& params() { return params_; }
  const core::ParamStore& params() const { return params_; }

  /// Deterministic scaled-Gaussian initialization in parameter-name order.
  void init_params(std::uint64_t seed) {
    core::Rng rng(core::Rng::splitmix(seed ^ 0x66647420696e6974ULL));
    for (auto& [name, p] : params_.entries()) {
      const bool is_bias = name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
      const bool tail_b1 = name.size() >= 3 && (name.compare(name.size() - 3, 3, ".b1") == 0 ||
                                                name.compare(name.size() - 3, 3, ".b2") == 0);
      if (is_bias || tail_b1) continue;  // biases stay zero
      double scale;
      if (name == "embed.pos" || name == "global.token") {
        scale = 0.02;
      } else {
        scale = std::sqrt(2.0 / static_cast<double>(p.value.rows() + p.value.cols()));
      }
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value.data()[i] = scale * rng.gaussian();
    }
  }

  /// Per-channel z-score statistics, fit on the training set and frozen.
  void set_normalization(const Eigen::VectorXd& in_mean, const Eigen::VectorXd& in_std,
                         const Eigen::VectorXd& out_mean, const Eigen::VectorXd& out_std) {
    RESDYN_REQUIRE(in_mean.size() == static_cast<Eigen::Index>(cfg_.d_v()) &&
                       in_std.size() == in_mean.size() &&
                       out_mean.size() == static_cast<Eigen::Index>(cfg_.n) &&
                       out_std.size() == out_mean.size(),
                   "fdt: normalization stat sizes do not match config");
    for (Eigen::Index i = 0; i < in_std.size(); ++i)
      RESDYN_REQUIRE(in_std(i) > 0.0, "fdt: input std must be positive");
    for (Eigen::Index i = 0; i < out_std.size(); ++i)
      RESDYN_REQUIRE(out_std(i) > 0.0, "fdt: target std must be positive");
    in_mean_ = in_mean;
    in_std_ = in_std;
    out_mean_ = out_mean;
    out_std_ = out_std;
  }

  const Eigen::VectorXd& input_mean() const { return in_mean_; }
  const Eigen::VectorXd& input_std() const { return in_std_; }
  const Eigen::VectorXd& target_mean() const { return out_mean_; }
  const Eigen::VectorXd& target_std() const { return out_std_; }

  struct BatchForward {
    core::NodeId base_norm;               // B x (k+1)*n, normalized scale
    std::vector<core::NodeId> latents;    // one (1 x latent_dim) node per sample
  };

  /// Forward over a batch of pre-normalized windows. short_stack is
  /// (B*d_v) x t_short and long_stack is (B*d_v) x t_long, rows grouped by
  /// sample, channel-major within a sample, columns oldest -> newest.
  /// attn, when given, collects every softmax node (self-attention rows and
  /// memory weights) for invariant checks.
  BatchForward forward_batch(core::Tape& tape, core::TapeBinding& bind,
                             const core::Tensor& short_stack, const core::Tensor& long_stack,
                             std::size_t batch, std::vector<core::NodeId>* attn = nullptr) const {
    const std::size_t dv = cfg_.d_v();
    RESDYN_REQUIRE(batch >= 1 && short_stack.rows() == batch * dv &&
                       short_stack.cols() == cfg_.t_short,
                   "fdt: short window stack has wrong shape");
    RESDYN_REQUIRE(long_stack.rows() == batch * dv && long_stack.cols() == cfg_.t_long,
                   "fdt: long window stack has wrong shape");

    using core::NodeId;
    // ---- variable-wise embedding: e_i = W_e z_i + p_i ----
    NodeId Xs = tape.leaf(short_stack);
    NodeId E0 = tape.add_tile_rows(tape.matmul_nt(Xs, bind("embed.W")), bind("embed.pos"), batch);

    NodeId g_tok{};
    if (cfg_.use_global_token) g_tok = bind("global.token");

    std::vector<NodeId> layer_q, layer_k, layer_v, layer_o;
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string base = "ctx.L" + std::to_string(l) + ".";
      layer_q.push_back(bind(base + "Wq"));
      layer_k.push_back(bind(base + "Wk"));
      layer_v.push_back(bind(base + "Wv"));
      layer_o.push_back(bind(base + "Wo"));
    }

    // ---- long-horizon memory stream (batched across samples) ----
    NodeId K{}, V{}, Wq_mem{};
    if (cfg_.use_memory) {
      NodeId Xl = tape.leaf(long_stack);
      NodeId hidden = tape.gelu(core::linear(tape, Xl, bind("mem.mlp.W1"), bind("mem.mlp.b1")));
      NodeId e_hist = core::linear(tape, hidden, bind("mem.mlp.W2"), bind("mem.mlp.b2"));
      K = tape.matmul_nt(e_hist, bind("mem.Wk"));  // (B*d_v) x d_k
      V = tape.matmul_nt(e_hist, bind("mem.Wv"));
      Wq_mem = bind("mem.Wq");
    }
    NodeId g_proj{};
    if (cfg_.use_memory && cfg_.d_k != cfg_.d_model) g_proj = bind("gproj.W");

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg_.d_k));

    // ---- per-sample context stream, retrieval, and decoder tokens ----
    std::vector<NodeId> dec_blocks;
    dec_blocks.reserve(batch);
    BatchForward out;
    out.latents.reserve(batch);
    for (std::size_t s = 0; s < batch; ++s) {
      NodeId tokens = tape.slice_rows(E0, s * dv, (s + 1) * dv);
      if (cfg_.use_global_token) tokens = tape.concat_rows({tokens, g_tok});
      for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
        NodeId attn_in = cfg_.layer_norm ? tape.layer_norm_rows(tokens) : tokens;
        NodeId msa = core::multi_head_self_attention(tape, attn_in, layer_q[l], layer_k[l],
                                                     layer_v[l], layer_o[l], cfg_.n_heads, attn);
        tokens = tape.add(msa, tokens);
      }
      NodeId ctx = cfg_.use_global_token ? tape.slice_rows(tokens, 0, dv) : tokens;
      NodeId query = cfg_.use_global_token ? tape.slice_rows(tokens, dv, dv + 1)
                                           : tape.mean_rows(tokens);

      NodeId latent;
      if (cfg_.use_memory) {
        NodeId Ks = tape.slice_rows(K, s * dv, (s + 1) * dv);
        NodeId Vs = tape.slice_rows(V, s * dv, (s + 1) * dv);
        NodeId Qs = tape.matmul_nt(query, Wq_mem);  // 1 x d_k
        NodeId alpha = tape.softmax_rows(tape.scale(tape.matmul_nt(Qs, Ks), inv_sqrt_dk));
        if (attn) attn->push_back(alpha);
        latent = tape.matmul(alpha, Vs);  // 1 x d_k
      } else {
        latent = query;  // 1 x d_model
      }
      out.latents.push_back(latent);

      NodeId mem_row = latent;
      if (cfg_.use_memory && cfg_.d_k != cfg_.d_model) mem_row = tape.matmul_nt(latent, g_proj);
      dec_blocks.push_back(tape.concat_rows({ctx, mem_row}));
    }

    // ---- decoder: position-wise FFN + residual, then readout MLP ----
    NodeId dec = (batch == 1) ? dec_blocks[0] : tape.concat_rows(dec_blocks);
    NodeId ffn_in = cfg_.layer_norm ? tape.layer_norm_rows(dec) : dec;
    NodeId ffn = core::mlp2(tape, ffn_in, bind("dec.ffn.W1"), bind("dec.ffn.b1"),
                            bind("dec.ffn.W2"), bind("dec.ffn.b2"));
    NodeId h = tape.add(ffn, dec);  // (B*(d_v+1)) x d_model

    const std::size_t tokens_per_sample = dv + 1;
    NodeId flat;
    if (cfg_.readout == ReadoutKind::flatten) {
      flat = tape.reshape(h, batch, tokens_per_sample * cfg_.d_model);
    } else {
      std::vector<NodeId> rows;
      rows.reserve(batch);
      for (std::size_t s = 0; s < batch; ++s) {
        const std::size_t r = s * tokens_per_sample + dv;  // the retrieved-memory row
        rows.push_back(tape.slice_rows(h, r, r + 1));
      }
      flat = (batch == 1) ? rows[0] : tape.concat_rows(rows);
    }
    out.base_norm = core::mlp2(tape, flat, bind("head.W1"), bind("head.b1"), bind("head.W2"),
                               bind("head.b2"));  // B x (k+1)*n
    return out;
  }

  /// Normalize a raw (d_v x T) channel-major window block in place.
  void normalize_rows(core::Tensor& block, std::size_t batch) const {
    const std::size_t dv = cfg_.d_v();
    RESDYN_REQUIRE(block.rows() == batch * dv, "fdt: normalize shape mismatch");
    for (std::size_t r = 0; r < block.rows(); ++r) {
      const auto ch = static_cast<Eigen::Index>(r % dv);
      const double mu = in_mean_(ch);
      const double inv_sd = 1.0 / in_std_(ch);
      for (std::size_t c = 0; c < block.cols(); ++c)
        block.at(r, c) = (block.at(r, c) - mu) * inv_sd;
    }
  }

  /// Fill raw (not yet normalized) channel-major window blocks for one
  /// sample from a history window; columns run oldest -> newest.
  void fill_window_blocks(const HistoryWindow& w, core::Tensor& short_block,
                          core::Tensor& long_block, std::size_t row_offset = 0) const {
    RESDYN_REQUIRE(w.full() && w.capacity() == cfg_.t_long,
                   "fdt: history window must hold exactly t_long samples");
    const std::size_t dv = cfg_.d_v();
    for (std::size_t i = 0; i < dv; ++i) {
      for (std::size_t c = 0; c < cfg_.t_short; ++c)
        short_block.at(row_offset + i, c) = w.channel_at(i, cfg_.t_short - 1 - c);
      for (std::size_t c = 0; c < cfg_.t_long; ++c)
        long_block.at(row_offset + i, c) = w.channel_at(i, cfg_.t_long - 1 - c);
    }
  }

  /// Single-window deployment forward on a non-recording tape.
  ResidualForecast predict(const HistoryWindow& w,
                           std::vector<Eigen::VectorXd>* attention_rows = nullptr) const {
    const std::size_t dv = cfg_.d_v();
    core::Tensor short_block(dv, cfg_.t_short);
    core::Tensor long_block(dv, cfg_.t_long);
    fill_window_blocks(w, short_block, long_block);
    normalize_rows(short_block, 1);
    normalize_rows(long_block, 1);

    core::Tape tape(/*recording=*/false);
    core::TapeBinding bind(tape, const_cast<core::ParamStore&>(params_));
    std::vector<core::NodeId> attn;
    BatchForward fwd = forward_batch(tape, bind, short_block, long_block, 1,
                                     attention_rows ? &attn : nullptr);
    if (attention_rows) {
      for (core::NodeId id : attn) {
        const core::Tensor& a = tape.value(id);
        for (std::size_t r = 0; r < a.rows(); ++r) {
          Eigen::VectorXd row(static_cast<Eigen::Index>(a.cols()));
          for (std::size_t c = 0; c < a.cols(); ++c) row(static_cast<Eigen::Index>(c)) = a.at(r, c);
          attention_rows->push_back(std::move(row));
        }
      }
    }

    ResidualForecast forecast;
    const core::Tensor& base = tape.value(fwd.base_norm);
    forecast.base.resize(static_cast<Eigen::Index>(cfg_.horizon + 1),
                         static_cast<Eigen::Index>(cfg_.n));
    for (std::size_t j = 0; j <= cfg_.horizon; ++j)
      for (std::size_t dof = 0; dof < cfg_.n; ++dof) {
        const auto di = static_cast<Eigen::Index>(dof);
        forecast.base(static_cast<Eigen::Index>(j), di) =
            base.at(0, j * cfg_.n + dof) * out_std_(di) + out_mean_(di);
      }
    const core::Tensor& lat = tape.value(fwd.latents[0]);
    forecast.latent.resize(static_cast<Eigen::Index>(lat.cols()));
    for (std::size_t c = 0; c < lat.cols(); ++c)
      forecast.latent(static_cast<Eigen::Index>(c)) = lat.at(0, c);
    return forecast;
  }

 private:
  void build_params() {
    auto& ps = params_;
    ps.create("embed.W", cfg_.d_model, cfg_.t_short);
    ps.create("embed.pos", cfg_.d_v(), cfg_.d_model);
    if (cfg_.use_global_token) ps.create("global.token", 1, cfg_.d_model);
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string base = "ctx.L" + std::to_string(l) + ".";
      ps.create(base + "Wq", cfg_.d_model, cfg_.d_model);
      ps.create(base + "Wk", cfg_.d_model, cfg_.d_model);
      ps.create(base + "Wv", cfg_.d_model, cfg_.d_model);
      ps.create(base + "Wo", cfg_.d_model, cfg_.d_model);
    }
    if (cfg_.use_memory) {
      ps.create("mem.mlp.W1", cfg_.memory_hidden(), cfg_.t_long);
      ps.create("mem.mlp.b1", 1, cfg_.memory_hidden());
      ps.create("mem.mlp.W2", cfg_.d_model, cfg_.memory_hidden());
      ps.create("mem.mlp.b2", 1, cfg_.d_model);
      ps.create("mem.Wq", cfg_.d_k, cfg_.d_model);
      ps.create("mem.Wk", cfg_.d_k, cfg_.d_model);
      ps.create("mem.Wv", cfg_.d_k, cfg_.d_model);
      if (cfg_.d_k != cfg_.d_model) ps.create("gproj.W", cfg_.d_model, cfg_.d_k);
    }
    ps.create("dec.ffn.W1", cfg_.d_ff, cfg_.d_model);
    ps.create("dec.ffn.b1", 1, cfg_.d_ff);
    ps.create("dec.ffn.W2", cfg_.d_model, cfg_.d_ff);
    ps.create("dec.ffn.b2", 1, cfg_.d_model);
    const std::size_t flat_dim = (cfg_.readout == ReadoutKind::flatten)
                                     ? (cfg_.d_v() + 1) * cfg_.d_model
                                     : cfg_.d_model;
    ps.create("head.W1", cfg_.d_ff, flat_dim);
    ps.create("head.b1", 1, cfg_.d_ff);
    ps.create("head.W2", cfg_.outputs(), cfg_.d_ff);
    ps.create("head.b2", 1, cfg_.outputs());
  }

  FdtConfig cfg_;
  core::ParamStore params_;
  Eigen::VectorXd in_mean_, in_std_, out_mean_, out_std_;
};

}  // namespace resdyn::model
