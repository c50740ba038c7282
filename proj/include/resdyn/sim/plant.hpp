#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "resdyn/core/check.hpp"
#include "resdyn/core/rng.hpp"

namespace resdyn::sim {

/// Generalized coordinates of the planar floating-base manipulator:
/// chi = (x, z, pitch, q_1 .. q_{n_arm}).
struct GeneralizedState {
  Eigen::VectorXd chi;
  Eigen::VectorXd chi_dot;
  Eigen::VectorXd chi_ddot;
  double t = 0.0;
};

struct PlantParams {
  std::size_t n_arm = 2;
  double base_mass = 2.2;
  double base_inertia = 0.03;           // about base COM
  double base_com_x = 0.0;              // base COM offset in base frame
  double base_com_z = 0.0;
  double arm_mount_x = 0.0;             // arm shoulder in base frame
  double arm_mount_z = -0.06;
  std::vector<double> link_masses{0.35, 0.28};
  std::vector<double> link_lengths{0.18, 0.16};
  std::vector<double> link_com_ratios{0.5, 0.5};  // COM at ratio * length from joint
  std::vector<double> link_inertias;    // about link COM; empty -> rod m*l^2/12
  // Geared joint actuators reflect their rotor inertia through the gear
  // ratio squared; at high ratios this term dominates the link's own
  // inertia. Seen at the joint, in kg*m^2. Empty -> zeros.
  std::vector<double> joint_reflected_inertias;
  double payload_mass = 0.0;            // point mass at the end effector
  double gravity = 9.80665;
  Eigen::VectorXd drag_coeffs;          // per-DOF viscous drag; empty -> zero
  double noise_bandwidth_hz = 0.0;      // first-order low-pass corner
  double noise_amplitude = 0.0;         // stationary std of filtered noise = amplitude / sqrt(2)
};

/// Colored-noise state for the disturbance term: one first-order
/// autoregressive channel per DOF plus the generator that drives it.
struct DisturbanceState {
  Eigen::VectorXd eta;
  core::Rng rng;

  DisturbanceState(std::size_t n, std::uint64_t seed)
      : eta(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))), rng(seed) {}
};

/// Step events (time, payload mass). Times must be strictly increasing;
/// before the first event the construction-time payload mass applies.
class PayloadSchedule {
 public:
  PayloadSchedule() = default;

  explicit PayloadSchedule(std::vector<std::pair<double, double>> events)
      : events_(std::move(events)) {
    for (std::size_t i = 0; i < events_.size(); ++i) {
      RESDYN_REQUIRE(events_[i].second >= 0.0, "payload schedule: negative mass");
      RESDYN_REQUIRE(i == 0 || events_[i].first > events_[i - 1].first,
                     "payload schedule: times must be strictly increasing");
    }
  }

  bool empty() const { return events_.empty(); }

  double mass_at(double t, double initial_mass) const {
    double m = initial_mass;
    for (const auto& [time, mass] : events_) {
      if (time <= t) m = mass;
      else break;
    }
    return m;
  }

  const std::vector<std::pair<double, double>>& events() const { return events_; }

 private:
  std::vector<std::pair<double, double>> events_;
};

/// Planar floating-base + serial-arm plant with exact analytic dynamics.
///
/// Every body COM is written as (x, z) + sum_j rho_j * u(alpha_j . chi + delta_j)
/// with u(phi) = (sin phi, -cos phi), so translational Jacobians and their
/// configuration derivatives are closed-form. This gives the mass matrix,
/// Christoffel Coriolis matrix, and gravity vector to machine precision,
/// which the energy and skew-symmetry properties rely on.
class PlantModel {
 public:
  explicit PlantModel(PlantParams params) : p_(std::move(params)) {
    validate();
    build_bodies();
  }

  std::size_t n_base() const { return 3; }
  std::size_t n_arm() const { return p_.n_arm; }
  std::size_t n() const { return 3 + p_.n_arm; }
  const PlantParams& params() const { return p_; }

  double payload_mass() const { return p_.payload_mass; }

  /// The one sanctioned mutation: the payload schedule drives this.
  void set_payload_mass(double m) {
    RESDYN_REQUIRE(m >= 0.0, "plant: negative payload mass");
    p_.payload_mass = m;
    bodies_.back().mass = m;
  }

  Eigen::MatrixXd mass_matrix(const Eigen::VectorXd& chi) const {
    check_dim(chi, "mass_matrix");
    const auto ni = static_cast<Eigen::Index>(n());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(ni, ni);
    Eigen::MatrixXd J(2, ni);
    for (const Body& b : bodies_) {
      if (b.mass > 0.0) {
        jacobian(b, chi, J);
        M.noalias() += b.mass * J.transpose() * J;
      }
      if (b.inertia > 0.0) M.noalias() += b.inertia * b.beta * b.beta.transpose();
    }
    return M;
  }

  /// Coriolis/centripetal matrix from Christoffel symbols of the analytic
  /// mass matrix, so that dM/dt - 2C is exactly skew-symmetric.
  Eigen::MatrixXd coriolis_matrix(const Eigen::VectorXd& chi, const Eigen::VectorXd& chi_dot) const {
    check_dim(chi, "coriolis_matrix");
    check_dim(chi_dot, "coriolis_matrix");
    const std::size_t nn = n();
    const auto ni = static_cast<Eigen::Index>(nn);
    std::vector<Eigen::MatrixXd> dM(nn);
    for (std::size_t k = 0; k < nn; ++k) dM[k] = mass_matrix_partial(chi, k);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(ni, ni);
    for (std::size_t i = 0; i < nn; ++i)
      for (std::size_t j = 0; j < nn; ++j) {
        double cij = 0.0;
        for (std::size_t k = 0; k < nn; ++k)
          cij += (dM[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                  dM[j](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) -
                  dM[i](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))) *
                 chi_dot(static_cast<Eigen::Index>(k));
        C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.5 * cij;
      }
    return C;
  }

  /// dV/dchi for V = g * sum_b m_b * height(COM_b).
  Eigen::VectorXd gravity_vector(const Eigen::VectorXd& chi) const {
    check_dim(chi, "gravity_vector");
    const auto ni = static_cast<Eigen::Index>(n());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(ni);
    for (const Body& b : bodies_) {
      if (b.mass <= 0.0) continue;
      g(1) += p_.gravity * b.mass;  // d(height)/dz = 1
      for (const PolarTerm& term : b.terms) {
        const double phi = term.alpha.dot(chi) + term.delta;
        const double s = std::sin(phi);
        g.noalias() += (p_.gravity * b.mass * term.rho * s) * term.alpha;
      }
    }
    return g;
  }

  double potential_energy(const Eigen::VectorXd& chi) const {
    check_dim(chi, "potential_energy");
    double v = 0.0;
    for (const Body& b : bodies_) {
      if (b.mass <= 0.0) continue;
      double height = chi(1);
      for (const PolarTerm& term : b.terms) {
        const double phi = term.alpha.dot(chi) + term.delta;
        height += term.rho * (-std::cos(phi));
      }
      v += p_.gravity * b.mass * height;
    }
    return v;
  }

  double kinetic_energy(const Eigen::VectorXd& chi, const Eigen::VectorXd& chi_dot) const {
    return 0.5 * chi_dot.dot(mass_matrix(chi) * chi_dot);
  }

  double total_energy(const Eigen::VectorXd& chi, const Eigen::VectorXd& chi_dot) const {
    return kinetic_energy(chi, chi_dot) + potential_energy(chi);
  }

  /// Generalized disturbance force applied to the plant: linear drag
  /// -D*chi_dot plus the current colored-noise sample. Pure in its inputs;
  /// advance_noise() moves the noise state once per physics step.
  Eigen::VectorXd disturbance(const Eigen::VectorXd& chi_dot, const DisturbanceState& state) const {
    check_dim(chi_dot, "disturbance");
    Eigen::VectorXd d = state.eta;
    if (p_.drag_coeffs.size() > 0) d -= p_.drag_coeffs.cwiseProduct(chi_dot);
    return d;
  }

  /// One first-order autoregressive update per DOF. The pole comes from the
  /// bandwidth and the innovation scale is chosen so the stationary std of
  /// each channel is exactly amplitude / sqrt(2).
  void advance_noise(DisturbanceState& state, double dt) const {
    if (p_.noise_amplitude <= 0.0 || p_.noise_bandwidth_hz <= 0.0) return;
    const double pole = std::exp(-2.0 * M_PI * p_.noise_bandwidth_hz * dt);
    const double target_std = p_.noise_amplitude / std::sqrt(2.0);
    const double innovation = target_std * std::sqrt(1.0 - pole * pole);
    for (Eigen::Index i = 0; i < state.eta.size(); ++i)
      state.eta(i) = pole * state.eta(i) + innovation * state.rng.gaussian();
  }

  /// chi_ddot = M^-1 (tau + d - C chi_dot - g).
  Eigen::VectorXd forward_dynamics(const Eigen::VectorXd& chi, const Eigen::VectorXd& chi_dot,
                                   const Eigen::VectorXd& tau,
                                   const Eigen::VectorXd& disturbance_force) const {
    check_dim(tau, "forward_dynamics");
    const Eigen::MatrixXd M = mass_matrix(chi);
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    RESDYN_REQUIRE(llt.info() == Eigen::Success,
                   "forward_dynamics: mass matrix is not positive definite "
                   "(non-physical model parameters)");
    const Eigen::VectorXd rhs =
        tau + disturbance_force - coriolis_matrix(chi, chi_dot) * chi_dot - gravity_vector(chi);
    return llt.solve(rhs);
  }

  /// Fixed-step RK4 on (chi, chi_dot) under zero-order-hold tau. The colored
  /// noise is advanced once and frozen across the four stages; drag uses the
  /// stage velocities. The returned chi_ddot is the forward-dynamics
  /// acceleration at the new state under the same held inputs, i.e. the
  /// acceleration a sensor at the end of the step would report.
  GeneralizedState step(const GeneralizedState& state, const Eigen::VectorXd& tau, double dt,
                        DisturbanceState& noise) const {
    RESDYN_REQUIRE(dt > 0.0, "step: dt must be positive");
    check_dim(state.chi, "step");
    check_dim(state.chi_dot, "step");
    check_dim(tau, "step");
    advance_noise(noise, dt);
    const Eigen::VectorXd eta = noise.eta;

    auto accel = [&](const Eigen::VectorXd& chi, const Eigen::VectorXd& chi_dot) {
      Eigen::VectorXd d = eta;
      if (p_.drag_coeffs.size() > 0) d -= p_.drag_coeffs.cwiseProduct(chi_dot);
      return forward_dynamics(chi, chi_dot, tau, d);
    };

    const Eigen::VectorXd& x0 = state.chi;
    const Eigen::VectorXd& v0 = state.chi_dot;
    const Eigen::VectorXd a1 = accel(x0, v0);
    const Eigen::VectorXd a2 = accel(x0 + 0.5 * dt * v0, v0 + 0.5 * dt * a1);
    const Eigen::VectorXd a3 =
        accel(x0 + 0.5 * dt * v0 + 0.25 * dt * dt * a1, v0 + 0.5 * dt * a2);
    const Eigen::VectorXd a4 = accel(x0 + dt * v0 + 0.5 * dt * dt * a2, v0 + dt * a3);

    GeneralizedState out;
    out.t = state.t + dt;
    out.chi = x0 + dt * v0 + (dt * dt / 6.0) * (a1 + a2 + a3);
    out.chi_dot = v0 + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    Eigen::VectorXd d_new = eta;
    if (p_.drag_coeffs.size() > 0) d_new -= p_.drag_coeffs.cwiseProduct(out.chi_dot);
    out.chi_ddot = forward_dynamics(out.chi, out.chi_dot, tau, d_new);
    return out;
  }

  /// End-effector (payload point) position in the world frame.
  Eigen::Vector2d ee_position(const Eigen::VectorXd& chi) const {
    check_dim(chi, "ee_position");
    const Body& payload = bodies_.back();
    Eigen::Vector2d p(chi(0), chi(1));
    for (const PolarTerm& term : payload.terms) {
      const double phi = term.alpha.dot(chi) + term.delta;
      p.x() += term.rho * std::sin(phi);
      p.y() += term.rho * (-std::cos(phi));
    }
    return p;
  }

  Eigen::MatrixXd ee_jacobian(const Eigen::VectorXd& chi) const {
    check_dim(chi, "ee_jacobian");
    Eigen::MatrixXd J(2, static_cast<Eigen::Index>(n()));
    jacobian(bodies_.back(), chi, J);
    return J;
  }

 private:
  /// One rotating offset: rho * u(alpha . chi + delta).
  struct PolarTerm {
    double rho;
    double delta;
    Eigen::VectorXd alpha;
  };

  struct Body {
    double mass;
    double inertia;
    std::vector<PolarTerm> terms;  // COM = (x, z) + sum of terms
    Eigen::VectorXd beta;          // angular rate = beta . chi_dot
  };

  void validate() const {
    RESDYN_REQUIRE(p_.base_mass > 0.0, "plant: base mass must be positive");
    RESDYN_REQUIRE(p_.base_inertia > 0.0, "plant: base inertia must be positive");
    RESDYN_REQUIRE(p_.gravity >= 0.0, "plant: gravity must be non-negative");
    RESDYN_REQUIRE(p_.payload_mass >= 0.0, "plant: payload mass must be non-negative");
    RESDYN_REQUIRE(p_.link_masses.size() == p_.n_arm && p_.link_lengths.size() == p_.n_arm &&
                       p_.link_com_ratios.size() == p_.n_arm,
                   "plant: link parameter vectors must have n_arm entries");
    RESDYN_REQUIRE(p_.link_inertias.empty() || p_.link_inertias.size() == p_.n_arm,
                   "plant: link inertia vector must be empty or have n_arm entries");
    RESDYN_REQUIRE(
        p_.joint_reflected_inertias.empty() || p_.joint_reflected_inertias.size() == p_.n_arm,
        "plant: reflected inertia vector must be empty or have n_arm entries");
    for (double v : p_.joint_reflected_inertias)
      RESDYN_REQUIRE(v >= 0.0, "plant: reflected inertia must be non-negative");
    for (std::size_t i = 0; i < p_.n_arm; ++i) {
      RESDYN_REQUIRE(p_.link_masses[i] > 0.0, "plant: link mass must be positive");
      RESDYN_REQUIRE(p_.link_lengths[i] > 0.0, "plant: link length must be positive");
      RESDYN_REQUIRE(p_.link_com_ratios[i] > 0.0 && p_.link_com_ratios[i] <= 1.0,
                     "plant: link COM ratio must be in (0, 1]");
      if (!p_.link_inertias.empty())
        RESDYN_REQUIRE(p_.link_inertias[i] > 0.0, "plant: link inertia must be positive");
    }
    RESDYN_REQUIRE(p_.drag_coeffs.size() == 0 ||
                       p_.drag_coeffs.size() == static_cast<Eigen::Index>(3 + p_.n_arm),
                   "plant: drag coefficient vector must be empty or length n");
    RESDYN_REQUIRE(p_.noise_amplitude >= 0.0 && p_.noise_bandwidth_hz >= 0.0,
                   "plant: noise parameters must be non-negative");
  }

  /// Polar form of a fixed base-frame offset v: R(theta) v = rho * u(theta + delta).
  static std::pair<double, double> polar_of(double vx, double vz) {
    const double rho = std::hypot(vx, vz);
    const double delta = (rho > 0.0) ? std::atan2(vx, -vz) : 0.0;
    return {rho, delta};
  }

  void build_bodies() {
    const auto ni = static_cast<Eigen::Index>(n());
    auto unit = [&](std::size_t k) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(ni);
      e(static_cast<Eigen::Index>(k)) = 1.0;
      return e;
    };
    const Eigen::VectorXd e_theta = unit(2);

    bodies_.clear();

    Body base;
    base.mass = p_.base_mass;
    base.inertia = p_.base_inertia;
    base.beta = e_theta;
    if (p_.base_com_x != 0.0 || p_.base_com_z != 0.0) {
      auto [rho, delta] = polar_of(p_.base_com_x, p_.base_com_z);
      base.terms.push_back({rho, delta, e_theta});
    }
    bodies_.push_back(std::move(base));

    const auto [mount_rho, mount_delta] = polar_of(p_.arm_mount_x, p_.arm_mount_z);
    Eigen::VectorXd link_axis = e_theta;  // orientation selector of the current link

    std::vector<PolarTerm> chain;  // joint position terms accumulated so far
    if (mount_rho > 0.0) chain.push_back({mount_rho, mount_delta, e_theta});

    for (std::size_t i = 0; i < p_.n_arm; ++i) {
      link_axis += unit(3 + i);
      const double l = p_.link_lengths[i];
      const double c = p_.link_com_ratios[i] * l;
      const double inertia = p_.link_inertias.empty()
                                 ? p_.link_masses[i] * l * l / 12.0
                                 : p_.link_inertias[i];
      Body link;
      link.mass = p_.link_masses[i];
      link.inertia = inertia;
      link.beta = link_axis;
      link.terms = chain;
      link.terms.push_back({c, 0.0, link_axis});
      bodies_.push_back(std::move(link));

      // Reflected rotor of the joint's geared actuator: spins at gear-ratio
      // times q_dot_i, so its kinetic energy is 1/2 * I_reflected * q_dot_i^2
      // — a constant diagonal mass-matrix entry with no gravity or Coriolis
      // footprint.
      const double reflected =
          p_.joint_reflected_inertias.empty() ? 0.0 : p_.joint_reflected_inertias[i];
      if (reflected > 0.0) {
        Body rotor;
        rotor.mass = 0.0;
        rotor.inertia = reflected;
        rotor.beta = unit(3 + i);
        bodies_.push_back(std::move(rotor));
      }

      chain.push_back({l, 0.0, link_axis});
    }

    Body payload;
    payload.mass = p_.payload_mass;
    payload.inertia = 0.0;
    payload.beta = link_axis;
    payload.terms = chain;  // end of the final link (or the mount when n_arm = 0)
    bodies_.push_back(std::move(payload));
  }

  void jacobian(const Body& b, const Eigen::VectorXd& chi, Eigen::MatrixXd& J) const {
    J.setZero();
    J(0, 0) = 1.0;
    J(1, 1) = 1.0;
    for (const PolarTerm& term : b.terms) {
      const double phi = term.alpha.dot(chi) + term.delta;
      const double c = std::cos(phi);
      const double s = std::sin(phi);
      // d/dchi_k of rho * u(phi) = rho * (cos phi, sin phi) * alpha_k
      J.row(0).noalias() += (term.rho * c) * term.alpha.transpose();
      J.row(1).noalias() += (term.rho * s) * term.alpha.transpose();
    }
  }

  /// dJ/dchi_k for body b, exploiting d u'(phi)/dphi = -u(phi).
  void jacobian_partial(const Body& b, const Eigen::VectorXd& chi, std::size_t k,
                        Eigen::MatrixXd& dJ) const {
    dJ.setZero();
    const auto ki = static_cast<Eigen::Index>(k);
    for (const PolarTerm& term : b.terms) {
      if (term.alpha(ki) == 0.0) continue;
      const double phi = term.alpha.dot(chi) + term.delta;
      const double factor = term.rho * term.alpha(ki);
      dJ.row(0).noalias() += (-factor * std::sin(phi)) * term.alpha.transpose();
      dJ.row(1).noalias() += (factor * std::cos(phi)) * term.alpha.transpose();
    }
  }

  Eigen::MatrixXd mass_matrix_partial(const Eigen::VectorXd& chi, std::size_t k) const {
    const auto ni = static_cast<Eigen::Index>(n());
    Eigen::MatrixXd dM = Eigen::MatrixXd::Zero(ni, ni);
    Eigen::MatrixXd J(2, ni);
    Eigen::MatrixXd dJ(2, ni);
    for (const Body& b : bodies_) {
      if (b.mass <= 0.0 || b.terms.empty()) continue;
      jacobian(b, chi, J);
      jacobian_partial(b, chi, k, dJ);
      dM.noalias() += b.mass * (dJ.transpose() * J + J.transpose() * dJ);
    }
    return dM;
  }

  void check_dim(const Eigen::VectorXd& v, const char* where) const {
    RESDYN_REQUIRE(v.size() == static_cast<Eigen::Index>(n()),
                   where << ": expected length-" << n() << " vector, got " << v.size());
  }

  PlantParams p_;
  std::vector<Body> bodies_;
};

}  // namespace resdyn::sim
