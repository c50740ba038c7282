#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "resdyn/core/check.hpp"

namespace resdyn::control {

/// Sliding-mode controller gains; all matrices diagonal, stored as their
/// diagonals.
struct ControllerGains {
  Eigen::VectorXd phi;     // error-filter gain
  Eigen::VectorXd lambda;  // sliding-variable feedback gain
  Eigen::VectorXd mbar;    // nominal constant inertia
  double nu = 2.0;         // adaptive-gain leak
  double sigma_hat0 = 0.1;
  double epsilon_bl = 0.01;    // boundary-layer width of the switching term
  double sigma_floor = 1e-6;   // lower clamp keeping the adaptive gain positive
  bool smooth_switching = true;  // false: discontinuous s/||s|| switching

  void validate() const {
    RESDYN_REQUIRE(phi.size() > 0 && phi.size() == lambda.size() && phi.size() == mbar.size(),
                   "gains: diagonal lengths must agree");
    RESDYN_REQUIRE((phi.array() > 0).all() && (lambda.array() > 0).all() &&
                       (mbar.array() > 0).all(),
                   "gains: diagonals must be positive");
    RESDYN_REQUIRE(nu > 0.0 && sigma_hat0 > 0.0 && epsilon_bl > 0.0 && sigma_floor > 0.0,
                   "gains: scalar parameters must be positive");
  }

  /// Published settings: the 8-DOF set verbatim for n = 8, and for the
  /// planar 5-DOF plant the (x, z, pitch, q1, q2) entries of that set.
  static ControllerGains table_defaults(std::size_t n) {
    auto vec = [](std::vector<double> v) {
      return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))
          .eval();
    };
    ControllerGains g;
    if (n == 8) {
      g.phi = vec({1.0, 1.0, 1.5, 1.1, 1.1, 1.0, 1.2, 1.2});
      g.lambda = vec({2.0, 2.0, 3.5, 1.5, 1.5, 1.2, 3.0, 3.0});
      g.mbar = vec({2.0, 2.0, 2.0, 0.02, 0.02, 0.02, 0.05, 0.05});
    } else if (n == 5) {
      g.phi = vec({1.0, 1.5, 1.1, 1.2, 1.2});
      g.lambda = vec({2.0, 3.5, 1.5, 3.0, 3.0});
      g.mbar = vec({2.0, 2.0, 0.02, 0.05, 0.05});
    } else {
      RESDYN_REQUIRE(n >= 1, "gains: n must be positive");
      // Other DOF counts: translational entries then pitch, then arm joints.
      g.phi = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.2);
      g.lambda = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 3.0);
      g.mbar = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 0.05);
      for (std::size_t i = 0; i < n && i < 2; ++i) {
        g.phi(static_cast<Eigen::Index>(i)) = 1.0;
        g.lambda(static_cast<Eigen::Index>(i)) = 2.0;
        g.mbar(static_cast<Eigen::Index>(i)) = 2.0;
      }
      if (n >= 3) {
        g.phi(2) = 1.1;
        g.lambda(2) = 1.5;
        g.mbar(2) = 0.02;
      }
    }
    return g;
  }
};

/// s = e_dot + Phi e.
inline Eigen::VectorXd sliding_variable(const Eigen::VectorXd& e, const Eigen::VectorXd& e_dot,
                                        const Eigen::VectorXd& phi_diag) {
  RESDYN_REQUIRE(e.size() == e_dot.size() && e.size() == phi_diag.size(),
                 "sliding_variable: dimension mismatch");
  return e_dot + phi_diag.cwiseProduct(e);
}

/// Unit saturation sat(x) = x / max(1, ||x||): identity inside the unit
/// ball, direction-preserving clamp outside.
inline Eigen::VectorXd unit_saturation(const Eigen::VectorXd& x) {
  const double norm = x.norm();
  return norm > 1.0 ? (x / norm).eval() : x;
}

/// tau = Mbar (chi_ddot_desired - Phi e_dot) - Lambda s + r_adapted - sigma_hat * switch(s).
inline Eigen::VectorXd control_input(const Eigen::VectorXd& chi_ddot_desired,
                                     const Eigen::VectorXd& e_dot, const Eigen::VectorXd& s,
                                     const Eigen::VectorXd& r_adapted, double sigma_hat,
                                     const ControllerGains& gains) {
  RESDYN_REQUIRE(chi_ddot_desired.size() == gains.phi.size() && e_dot.size() == gains.phi.size() &&
                     s.size() == gains.phi.size() && r_adapted.size() == gains.phi.size(),
                 "control_input: dimension mismatch");
  Eigen::VectorXd switching;
  if (gains.smooth_switching) {
    switching = unit_saturation(s / gains.epsilon_bl);
  } else {
    const double norm = s.norm();
    switching = (norm > 0.0) ? (s / norm).eval() : Eigen::VectorXd::Zero(s.size()).eval();
  }
  return gains.mbar.cwiseProduct(chi_ddot_desired - gains.phi.cwiseProduct(e_dot)) -
         gains.lambda.cwiseProduct(s) + r_adapted - sigma_hat * switching;
}

/// Forward-Euler step of sigma_hat_dot = ||s|| - nu * sigma_hat, clamped at
/// the positive floor. Positivity holds whenever dt * nu < 1.
inline double adaptive_gain_step(double sigma_hat, const Eigen::VectorXd& s, double nu, double dt,
                                 double floor_value) {
  RESDYN_REQUIRE(dt > 0.0, "adaptive_gain_step: dt must be positive");
  const double next = sigma_hat + dt * (s.norm() - nu * sigma_hat);
  return next > floor_value ? next : floor_value;
}

}  // namespace resdyn::control
