#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "resdyn/control/loop.hpp"
#include "resdyn/core/check.hpp"

namespace resdyn::bench {

/// sqrt(mean of squared entries) over an entire error matrix.
inline double rmse(const Eigen::MatrixXd& error) {
  RESDYN_REQUIRE(error.size() > 0, "rmse: empty error matrix");
  return std::sqrt(error.squaredNorm() / static_cast<double>(error.size()));
}

/// Coefficient of determination per column (channel), averaged:
/// R2_i = 1 - SSE_i / SST_i with SST about the column mean of the targets.
/// Rows are observations, columns are channels.
inline double r_squared(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target) {
  RESDYN_REQUIRE(prediction.rows() == target.rows() && prediction.cols() == target.cols(),
                 "r_squared: shape mismatch");
  RESDYN_REQUIRE(target.rows() >= 2, "r_squared: needs at least two observations");
  double acc = 0.0;
  for (Eigen::Index c = 0; c < target.cols(); ++c) {
    const double mean = target.col(c).mean();
    const double sse = (prediction.col(c) - target.col(c)).squaredNorm();
    const double sst = (target.col(c).array() - mean).matrix().squaredNorm();
    acc += 1.0 - sse / std::max(sst, 1e-12);
  }
  return acc / static_cast<double>(target.cols());
}

/// Quantile with linear interpolation between order statistics (the common
/// "type 7" convention). p in [0, 1].
inline double quantile(std::vector<double> xs, double p) {
  RESDYN_REQUIRE(!xs.empty(), "quantile: empty sample");
  RESDYN_REQUIRE(p >= 0.0 && p <= 1.0, "quantile: p out of range");
  std::sort(xs.begin(), xs.end());
  const double pos = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= xs.size()) return xs.back();
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

struct SeedStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  std::size_t count = 0;
  double iqr() const { return q3 - q1; }
};

inline SeedStats summarize(const std::vector<double>& xs) {
  SeedStats s;
  s.median = quantile(xs, 0.5);
  s.q1 = quantile(xs, 0.25);
  s.q3 = quantile(xs, 0.75);
  s.count = xs.size();
  return s;
}

/// Tracking RMSE of a closed-loop run: RMSE over all ticks and channels of
/// the position error entries.
inline double tracking_rmse(const control::LoopResult& run) {
  RESDYN_REQUIRE(!run.ticks.empty(), "tracking_rmse: empty run");
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& tick : run.ticks) {
    acc += tick.e.squaredNorm();
    count += static_cast<std::size_t>(tick.e.size());
  }
  return std::sqrt(acc / static_cast<double>(count));
}

}  // namespace resdyn::bench
