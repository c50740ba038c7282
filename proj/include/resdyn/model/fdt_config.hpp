#pragma once

#include <cstddef>
#include <string>

#include "resdyn/core/check.hpp"

namespace resdyn::model {

enum class ReadoutKind { flatten, global_only };

inline std::string to_string(ReadoutKind k) {
  return k == ReadoutKind::flatten ? "flatten" : "global_only";
}

inline ReadoutKind readout_from_string(const std::string& s) {
  if (s == "flatten") return ReadoutKind::flatten;
  if (s == "global_only") return ReadoutKind::global_only;
  RESDYN_REQUIRE(false, "unknown readout kind '" << s << "'");
  return ReadoutKind::flatten;
}

/// Architecture of the residual forecaster. The structural switches
/// (use_global_token, use_memory, n_layers = 0) double as the ablation
/// variants of the benchmark.
struct FdtConfig {
  std::size_t n = 5;          // plant DOF; input channels d_v = 3n
  std::size_t t_short = 5;    // short context window (samples)
  std::size_t t_long = 120;   // long memory window (samples)
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_k = 64;       // memory key/value width (latent fed to the adapter)
  std::size_t d_ff = 256;     // FFN expansion and decoder hidden width
  std::size_t horizon = 6;    // k: forecast steps beyond the current one
  std::size_t n_layers = 2;   // context self-attention depth
  std::size_t mem_hidden = 0; // memory-MLP hidden width; 0 means d_model
  bool use_global_token = true;  // false: mean-pooled substitute
  bool use_memory = true;        // false: decoder consumes the context global row
  bool layer_norm = false;       // optional pre-norm; default matches the plain residual form

  ReadoutKind readout = ReadoutKind::flatten;

  std::size_t d_v() const { return 3 * n; }
  std::size_t memory_hidden() const { return mem_hidden ? mem_hidden : d_model; }
  /// Width of the latent the adapter regresses on.
  std::size_t latent_dim() const { return use_memory ? d_k : d_model; }
  std::size_t outputs() const { return (horizon + 1) * n; }

  void validate() const {
    RESDYN_REQUIRE(n >= 1, "fdt config: n must be >= 1");
    RESDYN_REQUIRE(t_short >= 1 && t_long > t_short,
                   "fdt config: need t_long > t_short >= 1");
    RESDYN_REQUIRE(d_model >= 1 && d_k >= 1 && d_ff >= 1, "fdt config: zero width");
    RESDYN_REQUIRE(n_heads >= 1 && d_model % n_heads == 0,
                   "fdt config: d_model must be divisible by n_heads");
  }

  /// CPU-friendly default: the paper-pinned window/horizon/depth settings
  /// with widths scaled down for desk-scale training.
  static FdtConfig desk(std::size_t n_dof = 5) {
    FdtConfig c;
    c.n = n_dof;
    return c;
  }

  /// Full-width configuration (512/8/2048).
  static FdtConfig paper(std::size_t n_dof = 5) {
    FdtConfig c;
    c.n = n_dof;
    c.d_model = 512;
    c.n_heads = 8;
    c.d_k = 512;
    c.d_ff = 2048;
    return c;
  }

  /// Minimal configuration used by gradient-fidelity tests.
  static FdtConfig tiny() {
    FdtConfig c;
    c.n = 2;
    c.t_short = 3;
    c.t_long = 10;
    c.d_model = 16;
    c.n_heads = 2;
    c.d_k = 16;
    c.d_ff = 32;
    c.horizon = 2;
    c.n_layers = 2;
    c.mem_hidden = 16;
    return c;
  }
};

}  // namespace resdyn::model
