#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "resdyn/core/check.hpp"
#include "resdyn/core/rng.hpp"

namespace resdyn::sim {

/// Quintic smoothstep on [0, 1]: C^2 rest-to-rest blend (zero first and
/// second derivatives at both ends).
struct Quintic {
  static double value(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return ((6.0 * s - 15.0) * s + 10.0) * s * s * s;
  }
  static double deriv(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return ((30.0 * s - 60.0) * s + 30.0) * s * s;
  }
  static double deriv2(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return ((120.0 * s - 180.0) * s + 60.0) * s;
  }
};

enum class TrajectoryKind { s_shape, figure8, randomized_excitation };

inline TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "s_shape") return TrajectoryKind::s_shape;
  if (s == "figure8") return TrajectoryKind::figure8;
  if (s == "randomized_excitation") return TrajectoryKind::randomized_excitation;
  RESDYN_REQUIRE(false, "unknown trajectory kind '" << s << "'");
  return TrajectoryKind::s_shape;
}

/// Time-indexed desired (chi_d, chi_dot_d, chi_ddot_d) for the n = 3 + n_arm
/// planar plant. All kinds are C^2 in t with analytic derivatives and start
/// at rest, so runs can be initialized exactly on the reference.
///
///  - s_shape: rest-to-rest pick-and-place sweep, altitude 0.10 m -> 0.55 m,
///    with an S-curved vertical detour; arm executes a smooth pick profile.
///  - figure8: Lissajous loop whose period is set from the numerically
///    integrated arc length so the mean path speed equals `speed`; a C^2
///    ramp-in blends from rest onto the loop.
///  - randomized_excitation: seeded multi-sine per channel under a C^2
///    on/off envelope, joint channels confined to the arm's working ranges.
class ReferenceTrajectory {
 public:
  static constexpr double kPickAltitude = 0.10;
  static constexpr double kPlaceAltitude = 0.55;
  // Arm joint working ranges (rad): q1 in (-20.1 deg, 37.2 deg), q2 in (65.3 deg, 77.2 deg).
  static constexpr double kJoint1Lo = -20.1 * M_PI / 180.0;
  static constexpr double kJoint1Hi = 37.2 * M_PI / 180.0;
  static constexpr double kJoint2Lo = 65.3 * M_PI / 180.0;
  static constexpr double kJoint2Hi = 77.2 * M_PI / 180.0;

  ReferenceTrajectory(TrajectoryKind kind, std::size_t n_arm, double speed, double duration,
                      std::uint64_t seed)
      : kind_(kind), n_arm_(n_arm), speed_(speed), duration_(duration) {
    RESDYN_REQUIRE(speed > 0.0, "trajectory: speed must be positive");
    RESDYN_REQUIRE(duration > 0.0, "trajectory: duration must be positive");
    switch (kind_) {
      case TrajectoryKind::s_shape: {
        const double len = path_length([this](double s, double& dx, double& dz) {
          s_shape_path_deriv(s, dx, dz);
        });
        motion_time_ = len / speed_;
        break;
      }
      case TrajectoryKind::figure8: {
        const double len = path_length([this](double s, double& dx, double& dz) {
          const double u = 2.0 * M_PI * s;
          dx = 2.0 * M_PI * kFig8Ax * std::cos(u);
          dz = 2.0 * M_PI * kFig8Az * 2.0 * std::cos(2.0 * u);
        });
        period_ = len / speed_;
        omega_ = 2.0 * M_PI / period_;
        break;
      }
      case TrajectoryKind::randomized_excitation: {
        build_multisine(seed);
        break;
      }
    }
  }

  std::size_t n() const { return 3 + n_arm_; }
  double duration() const { return duration_; }
  /// Transfer time of the s_shape motion at the configured speed.
  double motion_time() const { return motion_time_; }
  /// Loop period of the figure8 motion at the configured speed.
  double period() const { return period_; }
  static constexpr double ramp_time() { return kFig8Ramp; }

  void eval(double t, Eigen::VectorXd& chi_d, Eigen::VectorXd& chi_dot_d,
            Eigen::VectorXd& chi_ddot_d) const {
    const auto ni = static_cast<Eigen::Index>(n());
    chi_d.setZero(ni);
    chi_dot_d.setZero(ni);
    chi_ddot_d.setZero(ni);
    switch (kind_) {
      case TrajectoryKind::s_shape: eval_s_shape(t, chi_d, chi_dot_d, chi_ddot_d); break;
      case TrajectoryKind::figure8: eval_figure8(t, chi_d, chi_dot_d, chi_ddot_d); break;
      case TrajectoryKind::randomized_excitation:
        eval_multisine(t, chi_d, chi_dot_d, chi_ddot_d);
        break;
    }
  }

 private:
  // figure8 geometry (m)
  static constexpr double kFig8Ax = 0.45;
  static constexpr double kFig8Az = 0.16;
  static constexpr double kFig8Alt = 0.32;
  static constexpr double kFig8Ramp = 1.5;  // s, C^2 blend from rest onto the loop
  // s_shape geometry (m)
  static constexpr double kSwing = 0.8;     // horizontal travel
  static constexpr double kSBump = 0.09;    // vertical S detour amplitude

  template <typename PathDeriv>
  static double path_length(PathDeriv deriv) {
    // Composite Simpson over the unit parameter.
    const int m = 2000;
    double len = 0.0;
    auto speed_of = [&](double s) {
      double dx = 0.0, dz = 0.0;
      deriv(s, dx, dz);
      return std::hypot(dx, dz);
    };
    const double h = 1.0 / m;
    for (int i = 0; i < m; i += 2)
      len += (h / 3.0) * (speed_of(i * h) + 4.0 * speed_of((i + 1) * h) + speed_of((i + 2) * h));
    return len;
  }

  // ---- s_shape ----

  static void s_shape_path(double s, double& x, double& z) {
    x = kSwing * s;
    z = kPickAltitude + (kPlaceAltitude - kPickAltitude) * s + kSBump * std::sin(2.0 * M_PI * s);
  }

  static void s_shape_path_deriv(double s, double& dx, double& dz) {
    dx = kSwing;
    dz = (kPlaceAltitude - kPickAltitude) + kSBump * 2.0 * M_PI * std::cos(2.0 * M_PI * s);
  }

  static void s_shape_path_deriv2(double s, double& ddx, double& ddz) {
    ddx = 0.0;
    ddz = -kSBump * 4.0 * M_PI * M_PI * std::sin(2.0 * M_PI * s);
  }

  void eval_s_shape(double t, Eigen::VectorXd& chi, Eigen::VectorXd& chid,
                    Eigen::VectorXd& chidd) const {
    const double u = t / motion_time_;  // unit time over the motion phase
    const double s = Quintic::value(u);
    const double ds = Quintic::deriv(u) / motion_time_;
    const double dds = Quintic::deriv2(u) / (motion_time_ * motion_time_);

    double x, z, dx, dz, ddx, ddz;
    s_shape_path(s, x, z);
    s_shape_path_deriv(s, dx, dz);
    s_shape_path_deriv2(s, ddx, ddz);
    chi(0) = x;
    chi(1) = z;
    chid(0) = dx * ds;
    chid(1) = dz * ds;
    chidd(0) = ddx * ds * ds + dx * dds;
    chidd(1) = ddz * ds * ds + dz * dds;
    // pitch stays level; arm runs one pick cycle keyed to the same blend
    for (std::size_t j = 0; j < n_arm_; ++j) {
      double center, amp, cycles;
      joint_profile(j, center, amp, cycles);
      const double w = 2.0 * M_PI * cycles;
      const auto ji = static_cast<Eigen::Index>(3 + j);
      chi(ji) = center + amp * std::sin(w * s);
      chid(ji) = amp * w * std::cos(w * s) * ds;
      chidd(ji) = amp * (-w * w * std::sin(w * s) * ds * ds + w * std::cos(w * s) * dds);
    }
  }

  // ---- figure8 ----

  void eval_figure8(double t, Eigen::VectorXd& chi, Eigen::VectorXd& chid,
                    Eigen::VectorXd& chidd) const {
    // Raw loop q(t) and C^2 ramp r(t): p = q(0) + r * (q - q(0)).
    const double u = omega_ * t;
    const double qx = kFig8Ax * std::sin(u);
    const double qz = kFig8Alt + kFig8Az * std::sin(2.0 * u);
    const double dqx = kFig8Ax * omega_ * std::cos(u);
    const double dqz = kFig8Az * 2.0 * omega_ * std::cos(2.0 * u);
    const double ddqx = -kFig8Ax * omega_ * omega_ * std::sin(u);
    const double ddqz = -kFig8Az * 4.0 * omega_ * omega_ * std::sin(2.0 * u);

    const double v = t / kFig8Ramp;
    const double r = Quintic::value(v);
    const double dr = Quintic::deriv(v) / kFig8Ramp;
    const double ddr = Quintic::deriv2(v) / (kFig8Ramp * kFig8Ramp);

    const double q0x = 0.0;
    const double q0z = kFig8Alt;
    chi(0) = q0x + r * (qx - q0x);
    chi(1) = q0z + r * (qz - q0z);
    chid(0) = dr * (qx - q0x) + r * dqx;
    chid(1) = dr * (qz - q0z) + r * dqz;
    chidd(0) = ddr * (qx - q0x) + 2.0 * dr * dqx + r * ddqx;
    chidd(1) = ddr * (qz - q0z) + 2.0 * dr * dqz + r * ddqz;

    for (std::size_t j = 0; j < n_arm_; ++j) {
      double center, amp, cycles;
      joint_profile(j, center, amp, cycles);
      const double wj = cycles * omega_ * 0.5;  // slow sweep relative to the loop
      const double qj = amp * std::sin(wj * t);
      const double dqj = amp * wj * std::cos(wj * t);
      const double ddqj = -amp * wj * wj * std::sin(wj * t);
      const auto ji = static_cast<Eigen::Index>(3 + j);
      chi(ji) = center + r * qj;
      chid(ji) = dr * qj + r * dqj;
      chidd(ji) = ddr * qj + 2.0 * dr * dqj + r * ddqj;
    }
  }

  // ---- randomized excitation ----

  struct SineComponent {
    double amp;
    double omega;
    double phase;
  };

  void build_multisine(std::uint64_t seed) {
    core::Rng rng(core::Rng::splitmix(seed ^ 0x72616e646f6d21ULL));
    components_.resize(n());
    centers_.setZero(static_cast<Eigen::Index>(n()));
    const int per_channel = 4;
    for (std::size_t kidx = 0; kidx < n(); ++kidx) {
      double half_range;
      if (kidx == 0) {
        centers_(0) = 0.0;
        half_range = 0.45;
      } else if (kidx == 1) {
        centers_(1) = 0.32;
        half_range = 0.22;
      } else if (kidx == 2) {
        centers_(2) = 0.0;
        half_range = 0.14;
      } else {
        double center, amp, cycles;
        joint_profile(kidx - 3, center, amp, cycles);
        centers_(static_cast<Eigen::Index>(kidx)) = center;
        half_range = amp;
      }
      auto& comps = components_[kidx];
      comps.resize(per_channel);
      double amp_sum = 0.0;
      for (auto& c : comps) {
        c.amp = rng.uniform(0.3, 1.0);
        c.omega = 2.0 * M_PI * rng.uniform(0.08, 1.6);
        c.phase = rng.uniform(0.0, 2.0 * M_PI);
        amp_sum += c.amp;
      }
      // One faster component excites the short-horizon dynamics.
      comps.back().omega = 2.0 * M_PI * rng.uniform(1.8, 2.6);
      // The evaluated signal is f(t) - f(0), so bound |f| + |f(0)| to keep
      // the channel inside half_range around its center.
      double f0 = 0.0;
      for (const auto& c : comps) f0 += c.amp * std::sin(c.phase);
      const double scale = 0.92 * half_range / (amp_sum + std::abs(f0));
      for (auto& c : comps) c.amp *= scale;
    }
  }

  void eval_multisine(double t, Eigen::VectorXd& chi, Eigen::VectorXd& chid,
                      Eigen::VectorXd& chidd) const {
    // On/off envelope: ramp up over t_r, ramp down into the final t_r.
    const double t_r = 2.0;
    const double up = t / t_r;
    const double down = (duration_ - t) / t_r;
    const double e_up = Quintic::value(up), de_up = Quintic::deriv(up) / t_r,
                 dde_up = Quintic::deriv2(up) / (t_r * t_r);
    const double e_dn = Quintic::value(down), de_dn = -Quintic::deriv(down) / t_r,
                 dde_dn = Quintic::deriv2(down) / (t_r * t_r);
    const double env = e_up * e_dn;
    const double denv = de_up * e_dn + e_up * de_dn;
    const double ddenv = dde_up * e_dn + 2.0 * de_up * de_dn + e_up * dde_dn;

    for (std::size_t kidx = 0; kidx < n(); ++kidx) {
      double f = 0.0, df = 0.0, ddf = 0.0;
      for (const SineComponent& c : components_[kidx]) {
        const double ph = c.omega * t + c.phase;
        f += c.amp * std::sin(ph);
        df += c.amp * c.omega * std::cos(ph);
        ddf -= c.amp * c.omega * c.omega * std::sin(ph);
      }
      // Subtract f(0) contributions so the channel starts exactly at center.
      double f0 = 0.0;
      for (const SineComponent& c : components_[kidx]) f0 += c.amp * std::sin(c.phase);
      const double g = f - f0;
      const auto ki = static_cast<Eigen::Index>(kidx);
      chi(ki) = centers_(ki) + env * g;
      chid(ki) = denv * g + env * df;
      chidd(ki) = ddenv * g + 2.0 * denv * df + env * ddf;
    }
  }

  /// Per-joint sweep parameters keeping every joint inside its working
  /// range: odd-indexed joints use the narrow elbow range.
  static void joint_profile(std::size_t j, double& center, double& amp, double& cycles) {
    if (j % 2 == 0) {
      center = 0.5 * (kJoint1Lo + kJoint1Hi);
      amp = 0.42 * (kJoint1Hi - kJoint1Lo);
      cycles = 1.0;
    } else {
      center = 0.5 * (kJoint2Lo + kJoint2Hi);
      amp = 0.42 * (kJoint2Hi - kJoint2Lo);
      cycles = 2.0;
    }
  }

  TrajectoryKind kind_;
  std::size_t n_arm_;
  double speed_;
  double duration_;
  double motion_time_ = 1.0;  // s_shape
  double period_ = 1.0;       // figure8
  double omega_ = 1.0;        // figure8
  std::vector<std::vector<SineComponent>> components_;  // randomized_excitation
  Eigen::VectorXd centers_;
};

}  // namespace resdyn::sim
