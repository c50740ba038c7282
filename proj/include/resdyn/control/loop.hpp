#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "resdyn/adapt/rls.hpp"
#include "resdyn/control/gains.hpp"
#include "resdyn/control/trim.hpp"
#include "resdyn/core/check.hpp"
#include "resdyn/model/fdt.hpp"
#include "resdyn/sim/plant.hpp"
#include "resdyn/sim/residual.hpp"
#include "resdyn/sim/trajectory.hpp"

namespace resdyn::control {

enum class CompensationMode { none, oracle, fdt, fdt_lra };

inline std::string to_string(CompensationMode m) {
  switch (m) {
    case CompensationMode::none: return "none";
    case CompensationMode::oracle: return "oracle";
    case CompensationMode::fdt: return "fdt";
    case CompensationMode::fdt_lra: return "fdt_lra";
  }
  return "none";
}

struct LoopOptions {
  double duration = 10.0;
  double dt_physics = 1e-3;
  std::size_t control_every = 10;  // physics substeps per control tick (100 Hz default)
  std::uint64_t seed = 0;          // disturbance noise stream
  CompensationMode mode = CompensationMode::none;
  bool switching_enabled = true;   // false drops the sigma_hat switching term entirely
  Eigen::VectorXd initial_offset;  // added to chi(0); empty = start on the reference
};

struct TickRecord {
  double t;
  Eigen::VectorXd chi_d, chi, e, s, tau, r, r_base, r_adapted;
  // Dataset-side signals: the velocity/acceleration measured at the tick and
  // the command that was held while that acceleration arose (tau is the
  // freshly commanded input; tau_prev is the one the residual is paired
  // with). Commands are trim-relative; see trim.hpp.
  Eigen::VectorXd chi_dot, chi_ddot, tau_prev;
  double sigma_hat;
  double eps_ema_norm;
  int reset;
};

struct AdapterTraceRow {
  double t;
  double eps_norm;
  double ema_norm;
  int reset;
  double sigma_trace;
  double w_fro;
};

struct LoopResult {
  std::size_t n = 0;
  std::vector<TickRecord> ticks;
  std::vector<double> tick_wall_us;         // same length as ticks; timing sidecar only
  std::vector<AdapterTraceRow> adapter_trace;  // fdt_lra mode only
  double min_sigma_hat = 0.0;
};

/// The real-time loop: at each control tick — measure, append the input
/// window, compute the measured residual from the previously commanded
/// input, forecast, adapt, form the sliding-mode control, integrate the
/// adaptive gain, and hold the new input for the next physics substeps.
///
/// The actuation map adds the payload-free hover trim to every command
/// before it reaches the plant (see trim.hpp); all logged inputs and
/// residuals are command-referenced, mirroring a stack whose allocator
/// carries the vehicle's static weight for every method alike.
///
/// `oracle` mode bypasses the forecaster and cancels the true dynamics
/// through the plant's own terms, leaving the nominal closed loop
/// Mbar s_dot = -Lambda s (the exponential-regime reference behavior).
/// Warm-up: until the window holds t_long samples, forecasts are zero.
inline LoopResult run_closed_loop(const sim::PlantModel& plant_in, const model::FdtModel* fdt,
                                  adapt::AdapterState* adapter, const adapt::AdapterConfig& acfg,
                                  const ControllerGains& gains,
                                  const sim::ReferenceTrajectory& traj,
                                  const sim::PayloadSchedule& schedule, const LoopOptions& opt) {
  gains.validate();
  const std::size_t n = static_cast<std::size_t>(gains.phi.size());
  RESDYN_REQUIRE(plant_in.n() == n && traj.n() == n, "closed loop: dimension mismatch");
  RESDYN_REQUIRE(opt.duration > 0.0 && opt.dt_physics > 0.0 && opt.control_every >= 1,
                 "closed loop: bad rate options");
  const bool needs_model =
      opt.mode == CompensationMode::fdt || opt.mode == CompensationMode::fdt_lra;
  RESDYN_REQUIRE(!needs_model || fdt != nullptr, "closed loop: mode requires a trained model");
  RESDYN_REQUIRE(opt.mode != CompensationMode::fdt_lra || adapter != nullptr,
                 "closed loop: fdt_lra requires adapter state");
  if (needs_model)
    RESDYN_REQUIRE(fdt->config().n == n, "closed loop: model DOF does not match plant");

  sim::PlantModel plant = plant_in;  // payload schedule mutates the copy
  const double initial_payload = plant.payload_mass();
  sim::DisturbanceState noise(n, core::Rng::splitmix(opt.seed ^ 0x636c6f7365646cULL));

  const double dt_ctrl = opt.dt_physics * static_cast<double>(opt.control_every);
  const auto total_ticks = static_cast<std::size_t>(opt.duration / dt_ctrl);
  const auto ni = static_cast<Eigen::Index>(n);

  Eigen::VectorXd chi_d(ni), chi_dot_d(ni), chi_ddot_d(ni);
  traj.eval(0.0, chi_d, chi_dot_d, chi_ddot_d);

  sim::GeneralizedState state;
  state.t = 0.0;
  state.chi = chi_d;
  if (opt.initial_offset.size() > 0) {
    RESDYN_REQUIRE(opt.initial_offset.size() == ni, "closed loop: initial offset size mismatch");
    state.chi += opt.initial_offset;
  }
  state.chi_dot = Eigen::VectorXd::Zero(ni);
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(ni);
  const Eigen::VectorXd trim = hover_trim(plant, chi_d);
  plant.set_payload_mass(schedule.mass_at(0.0, initial_payload));
  state.chi_ddot = plant.forward_dynamics(state.chi, state.chi_dot, tau + trim,
                                          plant.disturbance(state.chi_dot, noise));

  model::HistoryWindow window(needs_model ? fdt->config().d_v() : 3 * n,
                              needs_model ? fdt->config().t_long : 2);
  Eigen::VectorXd window_sample(static_cast<Eigen::Index>(3 * n));

  LoopResult result;
  result.n = n;
  result.ticks.reserve(total_ticks);
  result.tick_wall_us.reserve(total_ticks);
  if (opt.mode == CompensationMode::fdt_lra) result.adapter_trace.reserve(total_ticks);
  double sigma_hat = gains.sigma_hat0;
  result.min_sigma_hat = sigma_hat;

  for (std::size_t tick = 0; tick < total_ticks; ++tick) {
    const auto wall0 = std::chrono::steady_clock::now();
    const double t = state.t;
    traj.eval(t, chi_d, chi_dot_d, chi_ddot_d);

    // Measured residual pairs the previously applied input with the
    // acceleration it produced (one-tick-consistent supervision).
    const Eigen::VectorXd r_measured = sim::compute_residual(gains.mbar, tau, state.chi_ddot);

    Eigen::VectorXd r_base = Eigen::VectorXd::Zero(ni);
    Eigen::VectorXd r_adapted = Eigen::VectorXd::Zero(ni);
    double eps_ema_norm = 0.0;
    int reset_flag = 0;

    if (needs_model) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        window_sample(ii) = state.chi(ii);
        window_sample(static_cast<Eigen::Index>(n + i)) = state.chi_dot(ii);
        window_sample(static_cast<Eigen::Index>(2 * n + i)) = tau(ii);
      }
      window.push(window_sample);
      if (window.full()) {
        const model::ResidualForecast forecast = fdt->predict(window);
        r_base = forecast.base.row(0).transpose();
        if (opt.mode == CompensationMode::fdt_lra) {
          const Eigen::VectorXd eps =
              adapt::rls_update(*adapter, forecast.latent, r_measured, r_base, acfg);
          reset_flag = adapt::maybe_reset(*adapter, acfg) ? 1 : 0;
          r_adapted = adapt::adapt_predict(r_base, forecast.latent, *adapter);
          eps_ema_norm = adapter->eps_ema.norm();
          result.adapter_trace.push_back({t, eps.norm(), eps_ema_norm, reset_flag,
                                          adapter->Sigma.trace(), adapter->W.norm()});
        } else {
          r_adapted = r_base;
        }
      }
    }

    const Eigen::VectorXd e = state.chi - chi_d;
    const Eigen::VectorXd e_dot = state.chi_dot - chi_dot_d;
    const Eigen::VectorXd s = sliding_variable(e, e_dot, gains.phi);
    const Eigen::VectorXd tau_prev = tau;
    const double sigma_used = sigma_hat;

    if (opt.mode == CompensationMode::oracle) {
      // Exact cancellation: an applied force of M Mbar^-1 u0 + C chi_dot +
      // g - d gives Mbar chi_ddot = u0, the nominal sliding dynamics. The
      // command subtracts the trim the actuation map will add back.
      Eigen::VectorXd u0 =
          gains.mbar.cwiseProduct(chi_ddot_d - gains.phi.cwiseProduct(e_dot)) -
          gains.lambda.cwiseProduct(s);
      if (opt.switching_enabled)
        u0 -= sigma_hat * unit_saturation(s / gains.epsilon_bl);
      const Eigen::MatrixXd m_true = plant.mass_matrix(state.chi);
      tau = m_true * gains.mbar.cwiseInverse().cwiseProduct(u0) +
            plant.coriolis_matrix(state.chi, state.chi_dot) * state.chi_dot +
            plant.gravity_vector(state.chi) - plant.disturbance(state.chi_dot, noise) - trim;
    } else {
      tau = control_input(chi_ddot_d, e_dot, s, r_adapted,
                          opt.switching_enabled ? sigma_hat : 0.0, gains);
    }

    sigma_hat = adaptive_gain_step(sigma_hat, s, gains.nu, dt_ctrl, gains.sigma_floor);
    if (sigma_hat < result.min_sigma_hat) result.min_sigma_hat = sigma_hat;

    const auto wall1 = std::chrono::steady_clock::now();
    result.tick_wall_us.push_back(
        std::chrono::duration<double, std::micro>(wall1 - wall0).count());

    TickRecord rec;
    rec.t = t;
    rec.chi_d = chi_d;
    rec.chi = state.chi;
    rec.e = e;
    rec.s = s;
    rec.tau = tau;
    rec.r = r_measured;
    rec.r_base = r_base;
    rec.r_adapted = r_adapted;
    rec.chi_dot = state.chi_dot;
    rec.chi_ddot = state.chi_ddot;
    rec.tau_prev = tau_prev;
    rec.sigma_hat = sigma_used;
    rec.eps_ema_norm = eps_ema_norm;
    rec.reset = reset_flag;
    result.ticks.push_back(std::move(rec));

    for (std::size_t sub = 0; sub < opt.control_every; ++sub) {
      plant.set_payload_mass(schedule.mass_at(state.t, initial_payload));
      state = plant.step(state, tau + trim, opt.dt_physics, noise);
    }
  }
  return result;
}

}  // namespace resdyn::control
