#pragma once

#include <Eigen/Core>

#include "resdyn/core/check.hpp"

namespace resdyn::sim {

/// One logged record: the measured state/input pair plus the residual force
/// r = tau - Mbar * chi_ddot that the nominal constant-inertia model misses.
struct ResidualSample {
  double t = 0.0;
  Eigen::VectorXd chi;
  Eigen::VectorXd chi_dot;
  Eigen::VectorXd chi_ddot;
  Eigen::VectorXd tau;
  Eigen::VectorXd r;
};

/// r = tau - Mbar * chi_ddot with diagonal nominal inertia Mbar.
inline Eigen::VectorXd compute_residual(const Eigen::VectorXd& mbar_diag,
                                        const Eigen::VectorXd& tau,
                                        const Eigen::VectorXd& chi_ddot) {
  RESDYN_REQUIRE(mbar_diag.size() == tau.size() && tau.size() == chi_ddot.size(),
                 "compute_residual: dimension mismatch");
  for (Eigen::Index i = 0; i < mbar_diag.size(); ++i)
    RESDYN_REQUIRE(mbar_diag(i) > 0.0, "compute_residual: nominal inertia must be positive");
  return tau - mbar_diag.cwiseProduct(chi_ddot);
}

}  // namespace resdyn::sim
