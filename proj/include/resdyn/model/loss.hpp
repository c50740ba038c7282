#pragma once

#include <Eigen/Core>
#include <vector>

#include "resdyn/core/check.hpp"

namespace resdyn::model {

/// Sum over forecast times t and steps j of the squared error norm
/// ||r_{t+j} - rhat_{t+j|t}||^2: one (k+1) x n matrix pair per t.
inline double multi_step_loss(const std::vector<Eigen::MatrixXd>& forecasts,
                              const std::vector<Eigen::MatrixXd>& targets) {
  RESDYN_REQUIRE(forecasts.size() == targets.size(), "multi_step_loss: batch size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    RESDYN_REQUIRE(forecasts[i].rows() == targets[i].rows() &&
                       forecasts[i].cols() == targets[i].cols(),
                   "multi_step_loss: shape mismatch at item " << i);
    total += (forecasts[i] - targets[i]).squaredNorm();
  }
  return total;
}

}  // namespace resdyn::model
