#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "resdyn/core/check.hpp"

namespace resdyn::adapt {

struct AdapterConfig {
  double lambda = 0.99;        // forgetting factor in (0, 1]
  double sigma0 = 1.0;         // initial / reset covariance scale
  double delta_thresh = 3.2;   // covariance reset trigger on ||eps_ema||
  double alpha_ema = 0.9;      // innovation EMA smoothing

  void validate() const {
    RESDYN_REQUIRE(lambda > 0.0 && lambda <= 1.0, "adapter: lambda must be in (0, 1]");
    RESDYN_REQUIRE(sigma0 > 0.0, "adapter: sigma0 must be positive");
    RESDYN_REQUIRE(delta_thresh > 0.0, "adapter: delta_thresh must be positive");
    RESDYN_REQUIRE(alpha_ema >= 0.0 && alpha_ema < 1.0, "adapter: alpha_ema must be in [0, 1)");
  }
};

/// Online linear-in-latent correction state. The adapter owns no model
/// parameters: it maps the frozen model's latent to an additive residual
/// correction and is the only mutable piece at deployment.
struct AdapterState {
  Eigen::MatrixXd W;        // latent_dim x n
  Eigen::MatrixXd Sigma;    // latent_dim x latent_dim, SPD
  Eigen::VectorXd eps_ema;  // n
  std::size_t steps = 0;
  std::size_t resets = 0;

  static AdapterState init(std::size_t latent_dim, std::size_t n, double sigma0) {
    AdapterState s;
    const auto di = static_cast<Eigen::Index>(latent_dim);
    const auto ni = static_cast<Eigen::Index>(n);
    s.W = Eigen::MatrixXd::Zero(di, ni);
    s.Sigma = sigma0 * Eigen::MatrixXd::Identity(di, di);
    s.eps_ema = Eigen::VectorXd::Zero(ni);
    return s;
  }
};

/// r_adapted = base + W^T g'.
inline Eigen::VectorXd adapt_predict(const Eigen::VectorXd& base, const Eigen::VectorXd& g_prime,
                                     const AdapterState& state) {
  RESDYN_REQUIRE(g_prime.size() == state.W.rows() && base.size() == state.W.cols(),
                 "adapt_predict: dimension mismatch");
  return base + state.W.transpose() * g_prime;
}

/// One recursive least-squares step with a gain shared across the n output
/// channels. Returns the innovation (computed with the pre-update W).
inline Eigen::VectorXd rls_update(AdapterState& state, const Eigen::VectorXd& g_prime,
                                  const Eigen::VectorXd& r_measured, const Eigen::VectorXd& base,
                                  const AdapterConfig& cfg) {
  cfg.validate();
  RESDYN_REQUIRE(g_prime.allFinite() && r_measured.allFinite() && base.allFinite(),
                 "rls_update: non-finite input");
  RESDYN_REQUIRE(g_prime.size() == state.W.rows() && r_measured.size() == state.W.cols() &&
                     base.size() == state.W.cols(),
                 "rls_update: dimension mismatch");

  const Eigen::VectorXd eps = r_measured - (base + state.W.transpose() * g_prime);
  const Eigen::VectorXd sg = state.Sigma * g_prime;
  const double denom = cfg.lambda + g_prime.dot(sg);  // > 0: Sigma SPD, lambda > 0
  const Eigen::VectorXd gain = sg / denom;
  state.W.noalias() += gain * eps.transpose();
  // The temporary matters: assigning an expression that reads Sigma.transpose()
  // back into Sigma would alias and leave the result asymmetric.
  const Eigen::MatrixXd updated = (state.Sigma - gain * sg.transpose()) / cfg.lambda;
  state.Sigma = 0.5 * (updated + updated.transpose());  // counter fp drift exactly
  state.eps_ema = cfg.alpha_ema * state.eps_ema + (1.0 - cfg.alpha_ema) * eps;
  ++state.steps;
  return eps;
}

/// Covariance reset on sustained innovation: strictly above the threshold
/// reinitializes Sigma to sigma0*I, keeping W. The EMA is halved so one
/// reset is not immediately retriggered by the same excursion.
inline bool maybe_reset(AdapterState& state, const AdapterConfig& cfg) {
  if (state.eps_ema.norm() > cfg.delta_thresh) {
    state.Sigma = cfg.sigma0 *
                  Eigen::MatrixXd::Identity(state.Sigma.rows(), state.Sigma.cols());
    state.eps_ema *= 0.5;
    ++state.resets;
    return true;
  }
  return false;
}

struct AdapterObservation {
  Eigen::VectorXd g_prime;
  Eigen::VectorXd base;
  Eigen::VectorXd r;
};

/// The exponentially weighted objective the recursion minimizes:
/// sum_tau lambda^(t - tau) ||r_tau - base_tau - W^T g'_tau||^2,
/// with tau running over the history and t its last index. Test oracle.
inline double weighted_objective(const std::vector<AdapterObservation>& history,
                                 const Eigen::MatrixXd& W, double lambda) {
  double total = 0.0;
  const std::size_t count = history.size();
  for (std::size_t i = 0; i < count; ++i) {
    const AdapterObservation& obs = history[i];
    const double weight = std::pow(lambda, static_cast<double>(count - 1 - i));
    total += weight * (obs.r - obs.base - W.transpose() * obs.g_prime).squaredNorm();
  }
  return total;
}

}  // namespace resdyn::adapt
