// Sliding-mode controller: closed-form checks of every algebraic piece, the
// published gain tables, and closed-loop behavior on plants where the exact
// answer is known (zero-residual regulation and oracle-cancelled dynamics).

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "resdyn/bench/metrics.hpp"
#include "resdyn/control/gains.hpp"
#include "resdyn/control/loop.hpp"
#include "resdyn/core/rng.hpp"
#include "resdyn/sim/plant.hpp"
#include "resdyn/sim/residual.hpp"
#include "resdyn/sim/trajectory.hpp"

using namespace resdyn;
using control::adaptive_gain_step;
using control::CompensationMode;
using control::control_input;
using control::ControllerGains;
using control::LoopOptions;
using control::run_closed_loop;
using control::sliding_variable;
using control::unit_saturation;

namespace {

Eigen::VectorXd random_vec(core::Rng& rng, Eigen::Index size, double stddev = 1.0) {
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = rng.gaussian(0.0, stddev);
  return v;
}

/// Base-only plant in zero gravity with no drag or noise: the true inertia
/// is exactly diagonal and constant, so a controller whose nominal inertia
/// matches it faces identically zero residual dynamics.
sim::PlantModel exact_nominal_plant() {
  sim::PlantParams p;
  p.n_arm = 0;
  p.link_masses.clear();
  p.link_lengths.clear();
  p.link_com_ratios.clear();
  p.gravity = 0.0;
  return sim::PlantModel(p);
}

ControllerGains exact_nominal_gains() {
  ControllerGains g = ControllerGains::table_defaults(3);
  g.mbar = Eigen::Vector3d(2.2, 2.2, 0.03);  // the true base mass/inertia diagonal
  return g;
}

/// Least-squares slope of y over x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  REQUIRE(x.size() == y.size());
  REQUIRE(x.size() >= 2);
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("sliding variable combines velocity error with filtered position error") {
  core::Rng rng(31);
  const Eigen::VectorXd e = random_vec(rng, 5);
  const Eigen::VectorXd e_dot = random_vec(rng, 5);
  const Eigen::VectorXd phi = random_vec(rng, 5).cwiseAbs();
  const Eigen::VectorXd s = sliding_variable(e, e_dot, phi);
  for (Eigen::Index i = 0; i < 5; ++i)
    REQUIRE(s(i) == Catch::Approx(e_dot(i) + phi(i) * e(i)).margin(1e-15));
  REQUIRE_THROWS_AS(sliding_variable(e, random_vec(rng, 4), phi), std::invalid_argument);
}

TEST_CASE("unit saturation is the identity inside the ball and a clamp outside") {
  core::Rng rng(32);
  Eigen::VectorXd inside = random_vec(rng, 4);
  inside *= 0.7 / inside.norm();
  REQUIRE((unit_saturation(inside) - inside).norm() == 0.0);

  Eigen::VectorXd boundary = random_vec(rng, 4);
  boundary /= boundary.norm();
  REQUIRE((unit_saturation(boundary) - boundary).norm() == 0.0);

  Eigen::VectorXd outside = random_vec(rng, 4);
  outside *= 7.3 / outside.norm();
  const Eigen::VectorXd clamped = unit_saturation(outside);
  REQUIRE(clamped.norm() == Catch::Approx(1.0).margin(1e-12));
  // Direction preserved: clamped is a positive multiple of the input.
  REQUIRE((clamped - outside / 7.3).norm() < 1e-12);
}

TEST_CASE("control input matches its algebraic definition in both switching modes") {
  core::Rng rng(33);
  ControllerGains g = ControllerGains::table_defaults(5);
  const Eigen::VectorXd a_d = random_vec(rng, 5);
  const Eigen::VectorXd e_dot = random_vec(rng, 5, 0.3);
  const Eigen::VectorXd r_adapted = random_vec(rng, 5, 0.5);
  const double sigma_hat = 0.17;

  SECTION("smooth switching, small s inside the boundary layer") {
    Eigen::VectorXd s = random_vec(rng, 5);
    s *= 0.4 * g.epsilon_bl / s.norm();  // ||s/eps|| < 1: sat is linear here
    const Eigen::VectorXd tau = control_input(a_d, e_dot, s, r_adapted, sigma_hat, g);
    const Eigen::VectorXd expect = g.mbar.cwiseProduct(a_d - g.phi.cwiseProduct(e_dot)) -
                                   g.lambda.cwiseProduct(s) + r_adapted -
                                   sigma_hat * (s / g.epsilon_bl);
    REQUIRE((tau - expect).norm() < 1e-14);
  }
  SECTION("smooth switching, large s saturates to the unit direction") {
    Eigen::VectorXd s = random_vec(rng, 5);
    s *= 50.0 * g.epsilon_bl / s.norm();
    const Eigen::VectorXd tau = control_input(a_d, e_dot, s, r_adapted, sigma_hat, g);
    const Eigen::VectorXd expect = g.mbar.cwiseProduct(a_d - g.phi.cwiseProduct(e_dot)) -
                                   g.lambda.cwiseProduct(s) + r_adapted -
                                   sigma_hat * (s / s.norm());
    REQUIRE((tau - expect).norm() < 1e-13);
  }
  SECTION("hard switching uses the unit direction for any nonzero s") {
    g.smooth_switching = false;
    Eigen::VectorXd s = random_vec(rng, 5);
    s *= 1e-4 / s.norm();  // tiny, but hard switching still applies full gain
    const Eigen::VectorXd tau = control_input(a_d, e_dot, s, r_adapted, sigma_hat, g);
    const Eigen::VectorXd expect = g.mbar.cwiseProduct(a_d - g.phi.cwiseProduct(e_dot)) -
                                   g.lambda.cwiseProduct(s) + r_adapted -
                                   sigma_hat * (s / s.norm());
    REQUIRE((tau - expect).norm() < 1e-13);
  }
  SECTION("hard switching at s = 0 applies no switching term at all") {
    g.smooth_switching = false;
    const Eigen::VectorXd s = Eigen::VectorXd::Zero(5);
    const Eigen::VectorXd tau = control_input(a_d, e_dot, s, r_adapted, sigma_hat, g);
    const Eigen::VectorXd expect =
        g.mbar.cwiseProduct(a_d - g.phi.cwiseProduct(e_dot)) + r_adapted;
    REQUIRE((tau - expect).norm() < 1e-14);
  }
  SECTION("dimension mismatch throws") {
    REQUIRE_THROWS_AS(control_input(random_vec(rng, 4), e_dot, random_vec(rng, 5), r_adapted,
                                    sigma_hat, g),
                      std::invalid_argument);
  }
}

TEST_CASE("adaptive gain follows the leaky integrator with a positive floor") {
  const Eigen::VectorXd s = Eigen::Vector3d(0.3, -0.4, 1.2);
  const double nu = 2.0, dt = 0.01;
  const double sigma = 0.1;
  const double next = adaptive_gain_step(sigma, s, nu, dt, 1e-6);
  REQUIRE(next == Catch::Approx(sigma + dt * (s.norm() - nu * sigma)).margin(1e-15));

  // A long quiet stretch decays the gain onto the floor, never below it.
  double decayed = 0.1;
  const Eigen::VectorXd quiet = Eigen::VectorXd::Zero(3);
  for (int i = 0; i < 5000; ++i) decayed = adaptive_gain_step(decayed, quiet, nu, dt, 1e-6);
  REQUIRE(decayed == 1e-6);

  REQUIRE_THROWS_AS(adaptive_gain_step(sigma, s, nu, 0.0, 1e-6), std::invalid_argument);
}

TEST_CASE("published gain tables are reproduced for the 8- and 5-DOF plants") {
  const ControllerGains g8 = ControllerGains::table_defaults(8);
  const Eigen::VectorXd phi8 = (Eigen::VectorXd(8) << 1.0, 1.0, 1.5, 1.1, 1.1, 1.0, 1.2, 1.2).finished();
  const Eigen::VectorXd lam8 = (Eigen::VectorXd(8) << 2.0, 2.0, 3.5, 1.5, 1.5, 1.2, 3.0, 3.0).finished();
  const Eigen::VectorXd mbar8 = (Eigen::VectorXd(8) << 2.0, 2.0, 2.0, 0.02, 0.02, 0.02, 0.05, 0.05).finished();
  REQUIRE((g8.phi - phi8).norm() == 0.0);
  REQUIRE((g8.lambda - lam8).norm() == 0.0);
  REQUIRE((g8.mbar - mbar8).norm() == 0.0);
  REQUIRE_NOTHROW(g8.validate());

  const ControllerGains g5 = ControllerGains::table_defaults(5);
  const Eigen::VectorXd phi5 = (Eigen::VectorXd(5) << 1.0, 1.5, 1.1, 1.2, 1.2).finished();
  const Eigen::VectorXd lam5 = (Eigen::VectorXd(5) << 2.0, 3.5, 1.5, 3.0, 3.0).finished();
  const Eigen::VectorXd mbar5 = (Eigen::VectorXd(5) << 2.0, 2.0, 0.02, 0.05, 0.05).finished();
  REQUIRE((g5.phi - phi5).norm() == 0.0);
  REQUIRE((g5.lambda - lam5).norm() == 0.0);
  REQUIRE((g5.mbar - mbar5).norm() == 0.0);
  REQUIRE_NOTHROW(g5.validate());

  // Fallback sizes assemble translational, pitch, then joint defaults.
  const ControllerGains g4 = ControllerGains::table_defaults(4);
  REQUIRE((g4.phi - (Eigen::VectorXd(4) << 1.0, 1.0, 1.1, 1.2).finished()).norm() == 0.0);
  REQUIRE((g4.lambda - (Eigen::VectorXd(4) << 2.0, 2.0, 1.5, 3.0).finished()).norm() == 0.0);
  REQUIRE((g4.mbar - (Eigen::VectorXd(4) << 2.0, 2.0, 0.02, 0.05).finished()).norm() == 0.0);
  REQUIRE_NOTHROW(g4.validate());
}

TEST_CASE("gain validation rejects inconsistent or non-positive settings") {
  ControllerGains g = ControllerGains::table_defaults(5);
  REQUIRE_NOTHROW(g.validate());
  g.phi(2) = 0.0;
  REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
  g = ControllerGains::table_defaults(5);
  g.lambda = Eigen::VectorXd::Ones(4);
  REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
  g = ControllerGains::table_defaults(5);
  g.nu = 0.0;
  REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
  g = ControllerGains::table_defaults(5);
  g.epsilon_bl = -0.01;
  REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("closed-loop records are self-consistent tick by tick") {
  sim::PlantModel plant = exact_nominal_plant();
  const ControllerGains gains = exact_nominal_gains();
  const sim::ReferenceTrajectory traj(sim::TrajectoryKind::s_shape, 0, 0.4, 10.0, 0);
  LoopOptions opt;
  opt.duration = 1.0;
  opt.mode = CompensationMode::none;

  const control::LoopResult run =
      run_closed_loop(plant, nullptr, nullptr, {}, gains, traj, sim::PayloadSchedule(), opt);

  REQUIRE(run.n == 3);
  REQUIRE(run.ticks.size() == 100);  // 1 s at 100 Hz control
  REQUIRE(run.tick_wall_us.size() == run.ticks.size());
  const double dt_ctrl = opt.dt_physics * static_cast<double>(opt.control_every);
  Eigen::VectorXd chi_d(3), chi_dot_d(3), chi_ddot_d(3);
  for (std::size_t k = 0; k < run.ticks.size(); ++k) {
    const auto& tick = run.ticks[k];
    REQUIRE(tick.t == Catch::Approx(static_cast<double>(k) * dt_ctrl).margin(1e-9));
    // Recorded error, sliding variable, and residual recompute exactly from
    // the recorded signals.
    REQUIRE((tick.e - (tick.chi - tick.chi_d)).norm() == 0.0);
    traj.eval(tick.t, chi_d, chi_dot_d, chi_ddot_d);
    REQUIRE((tick.chi_d - chi_d).norm() == 0.0);
    const Eigen::VectorXd s =
        sliding_variable(tick.e, tick.chi_dot - chi_dot_d, gains.phi);
    REQUIRE((tick.s - s).norm() < 1e-15);
    const Eigen::VectorXd r = sim::compute_residual(gains.mbar, tick.tau_prev, tick.chi_ddot);
    REQUIRE((tick.r - r).norm() == 0.0);
    REQUIRE(tick.sigma_hat > 0.0);
  }
  // First tick starts exactly on the reference and applies no stale input.
  REQUIRE(run.ticks.front().e.norm() == 0.0);
  REQUIRE(run.ticks.front().tau_prev.norm() == 0.0);
  REQUIRE(run.min_sigma_hat > 0.0);
}

TEST_CASE("matched nominal inertia yields exact exponential sliding decay") {
  // Zero-residual plant, stationary reference, switching disabled: the loop
  // reduces to Mbar s_dot = -Lambda s, so ln||s|| falls with slope
  // -lambda_x/mbar_x for an x-only offset.
  sim::PlantModel plant = exact_nominal_plant();
  const ControllerGains gains = exact_nominal_gains();
  // Near-zero speed freezes the reference at the start pose for any test
  // horizon (the transfer takes ~1e6 s), giving a pure regulation problem.
  const sim::ReferenceTrajectory traj(sim::TrajectoryKind::s_shape, 0, 1e-6, 10.0, 0);
  LoopOptions opt;
  opt.duration = 8.0;
  opt.mode = CompensationMode::none;
  opt.switching_enabled = false;
  opt.initial_offset = Eigen::Vector3d(0.05, 0.0, 0.0);

  const control::LoopResult run =
      run_closed_loop(plant, nullptr, nullptr, {}, gains, traj, sim::PayloadSchedule(), opt);

  std::vector<double> ts, lns;
  for (const auto& tick : run.ticks) {
    if (tick.t < 0.2 || tick.t > 6.0) continue;
    ts.push_back(tick.t);
    lns.push_back(std::log(tick.s.norm()));
  }
  const double slope = fitted_slope(ts, lns);
  const double expected_rate = gains.lambda(0) / gains.mbar(0);  // 2.0 / 2.2
  INFO("fitted decay rate " << -slope << " expected " << expected_rate);
  REQUIRE(std::abs(-slope - expected_rate) < 0.02 * expected_rate);

  // Regulation is exact in the limit: the offset is gone at the end.
  REQUIRE(run.ticks.back().e.norm() < 1e-3);
  // Untouched channels stay quiet (references are decoupled and diagonal).
  REQUIRE(std::abs(run.ticks.back().e(1)) < 1e-6);
  REQUIRE(std::abs(run.ticks.back().e(2)) < 1e-6);
}

TEST_CASE("oracle compensation reproduces the nominal decay on the full plant") {
  // The oracle cancels the true dynamics exactly, so even the coupled 5-DOF
  // arm plant collapses to Mbar s_dot = -Lambda s. With an x-only offset the
  // decay rate is lambda_x/mbar_x = 1.0, the slowest mode of Lambda/Mbar.
  sim::PlantParams p;  // default two-link arm plant
  p.gravity = 9.80665;
  sim::PlantModel plant{p};
  const ControllerGains gains = ControllerGains::table_defaults(5);
  const sim::ReferenceTrajectory traj(sim::TrajectoryKind::s_shape, 2, 1e-6, 10.0, 0);
  LoopOptions opt;
  opt.duration = 2.0;
  opt.mode = CompensationMode::oracle;
  opt.switching_enabled = false;
  opt.initial_offset = Eigen::VectorXd::Zero(5);
  opt.initial_offset(0) = 0.05;

  const control::LoopResult run =
      run_closed_loop(plant, nullptr, nullptr, {}, gains, traj, sim::PayloadSchedule(), opt);

  std::vector<double> ts, lns;
  for (const auto& tick : run.ticks) {
    if (tick.t < 0.2 || tick.t > 1.8) continue;
    ts.push_back(tick.t);
    lns.push_back(std::log(tick.s.norm()));
  }
  const double slope = fitted_slope(ts, lns);
  const double expected_rate = gains.lambda(0) / gains.mbar(0);  // = 1.0
  INFO("fitted decay rate " << -slope << " expected " << expected_rate);
  REQUIRE(std::abs(-slope - expected_rate) < 0.02 * expected_rate);
}

TEST_CASE("zero-residual tracking of a moving reference is tight and settles") {
  sim::PlantModel plant = exact_nominal_plant();
  const ControllerGains gains = exact_nominal_gains();
  const sim::ReferenceTrajectory traj(sim::TrajectoryKind::s_shape, 0, 0.4, 30.0, 0);
  LoopOptions opt;
  opt.duration = traj.motion_time() + 6.0;
  opt.mode = CompensationMode::none;

  const control::LoopResult run =
      run_closed_loop(plant, nullptr, nullptr, {}, gains, traj, sim::PayloadSchedule(), opt);

  // Transit error stays small (the only imperfection is the 100 Hz hold),
  // and once the reference stops the error collapses.
  REQUIRE(bench::tracking_rmse(run) < 0.03);
  double max_err = 0.0;
  for (const auto& tick : run.ticks) max_err = std::max(max_err, tick.e.norm());
  REQUIRE(max_err < 0.08);
  REQUIRE(run.ticks.back().e.norm() < 5e-3);
  REQUIRE(run.min_sigma_hat > 0.0);
  REQUIRE(run.min_sigma_hat >= gains.sigma_floor);
}

TEST_CASE("closed loop validates mode prerequisites and offset dimensions") {
  sim::PlantModel plant = exact_nominal_plant();
  const ControllerGains gains = exact_nominal_gains();
  const sim::ReferenceTrajectory traj(sim::TrajectoryKind::s_shape, 0, 0.4, 10.0, 0);
  LoopOptions opt;
  opt.duration = 0.5;

  opt.mode = CompensationMode::fdt;
  REQUIRE_THROWS_AS(
      run_closed_loop(plant, nullptr, nullptr, {}, gains, traj, sim::PayloadSchedule(), opt),
      std::invalid_argument);

  opt.mode = CompensationMode::none;
  opt.initial_offset = Eigen::VectorXd::Zero(4);
  REQUIRE_THROWS_AS(
      run_closed_loop(plant, nullptr, nullptr, {}, gains, traj, sim::PayloadSchedule(), opt),
      std::invalid_argument);
}

TEST_CASE("compensation mode names round-trip to strings") {
  REQUIRE(control::to_string(CompensationMode::none) == "none");
  REQUIRE(control::to_string(CompensationMode::oracle) == "oracle");
  REQUIRE(control::to_string(CompensationMode::fdt) == "fdt");
  REQUIRE(control::to_string(CompensationMode::fdt_lra) == "fdt_lra");
}
