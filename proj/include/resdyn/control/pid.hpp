#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "resdyn/control/trim.hpp"
#include "resdyn/core/check.hpp"
#include "resdyn/core/rng.hpp"
#include "resdyn/sim/dataset.hpp"
#include "resdyn/sim/plant.hpp"
#include "resdyn/sim/residual.hpp"
#include "resdyn/sim/trajectory.hpp"

namespace resdyn::control {

/// Per-channel PID gains for the dataset-collection tracking loop. The
/// collector deliberately stays a plain PID — no residual compensation and
/// no sliding-mode machinery — so the logged residual carries the full
/// model mismatch while the plant still follows the excitation envelope.
struct PidGains {
  Eigen::VectorXd kp, kd, ki;

  /// Pole placement against a per-channel nominal inertia: critically
  /// damped double pole at `omega` (rad/s) plus an integral zero a decade
  /// below it, so integral action carries static loads (gravity) without
  /// disturbing the transient.
  static PidGains from_nominal_inertia(const Eigen::VectorXd& nominal, double omega = 8.0) {
    RESDYN_REQUIRE(omega > 0.0, "pid gains: omega must be positive");
    RESDYN_REQUIRE((nominal.array() > 0.0).all(), "pid gains: nominal inertia must be positive");
    PidGains g;
    g.kp = nominal * (omega * omega);
    g.kd = nominal * (2.0 * omega);
    g.ki = nominal * (omega * omega * omega / 10.0);
    return g;
  }
};

/// Track a reference trajectory with a per-channel PID under zero-order
/// hold, logging the dataset-side signals at the control rate. Mirrors the
/// adaptive loop's conventions: commands ride on the payload-free hover
/// trim (see trim.hpp), each sample pairs the previously commanded input
/// with the acceleration it produced (one-tick-consistent residual
/// supervision), and the colored disturbance advances once per physics
/// step. Deterministic given (plant, trajectory, seed).
inline sim::RunRecording run_pid_collection(const sim::PlantModel& plant_in,
                                            const Eigen::VectorXd& mbar, const PidGains& pid,
                                            const sim::ReferenceTrajectory& traj,
                                            const sim::PayloadSchedule& schedule, double duration,
                                            double dt_physics, std::size_t control_every,
                                            std::uint64_t seed) {
  const std::size_t n = plant_in.n();
  const auto ni = static_cast<Eigen::Index>(n);
  RESDYN_REQUIRE(traj.n() == n, "pid collection: trajectory/plant dimension mismatch");
  RESDYN_REQUIRE(mbar.size() == ni && pid.kp.size() == ni && pid.kd.size() == ni &&
                     pid.ki.size() == ni,
                 "pid collection: gain dimension mismatch");
  RESDYN_REQUIRE(duration > 0.0 && dt_physics > 0.0 && control_every >= 1,
                 "pid collection: bad rate options");

  // Anti-windup clamp on the integrated error (m*s or rad*s per channel):
  // generous next to the ~0.7 the gravity load needs, tight enough to bound
  // the start-up transient.
  constexpr double kIntegralClamp = 2.0;

  sim::PlantModel plant = plant_in;  // payload schedule mutates the copy
  const double initial_payload = plant.payload_mass();
  sim::DisturbanceState noise(n, core::Rng::splitmix(seed ^ 0x706964636f6cULL));

  const double dt_ctrl = dt_physics * static_cast<double>(control_every);
  const auto total_ticks = static_cast<std::size_t>(duration / dt_ctrl);

  Eigen::VectorXd chi_d(ni), chi_dot_d(ni), chi_ddot_d(ni);
  traj.eval(0.0, chi_d, chi_dot_d, chi_ddot_d);

  sim::GeneralizedState state;
  state.t = 0.0;
  state.chi = chi_d;
  state.chi_dot = chi_dot_d;
  Eigen::VectorXd tau = Eigen::VectorXd::Zero(ni);
  const Eigen::VectorXd trim = hover_trim(plant, chi_d);
  plant.set_payload_mass(schedule.mass_at(0.0, initial_payload));
  state.chi_ddot = plant.forward_dynamics(state.chi, state.chi_dot, tau + trim,
                                          plant.disturbance(state.chi_dot, noise));

  Eigen::VectorXd integral = Eigen::VectorXd::Zero(ni);

  sim::RunRecording rec;
  rec.n = n;
  rec.samples.reserve(total_ticks);

  for (std::size_t tick = 0; tick < total_ticks; ++tick) {
    const double t = state.t;
    traj.eval(t, chi_d, chi_dot_d, chi_ddot_d);

    sim::ResidualSample sample;
    sample.t = t;
    sample.chi = state.chi;
    sample.chi_dot = state.chi_dot;
    sample.chi_ddot = state.chi_ddot;
    sample.tau = tau;  // the input held while chi_ddot arose
    sample.r = sim::compute_residual(mbar, tau, state.chi_ddot);
    rec.samples.push_back(std::move(sample));

    const Eigen::VectorXd e = chi_d - state.chi;
    const Eigen::VectorXd e_dot = chi_dot_d - state.chi_dot;
    integral += e * dt_ctrl;
    integral = integral.cwiseMax(-kIntegralClamp).cwiseMin(kIntegralClamp);
    tau = pid.kp.cwiseProduct(e) + pid.kd.cwiseProduct(e_dot) + pid.ki.cwiseProduct(integral);

    for (std::size_t sub = 0; sub < control_every; ++sub) {
      plant.set_payload_mass(schedule.mass_at(state.t, initial_payload));
      state = plant.step(state, tau + trim, dt_physics, noise);
    }
  }
  return rec;
}

}  // namespace resdyn::control
