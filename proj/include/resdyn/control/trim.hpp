#pragma once

#include <Eigen/Core>

#include "resdyn/sim/plant.hpp"

namespace resdyn::control {

/// Static actuation trim: the generalized force that holds the unloaded
/// vehicle's weight at a reference configuration. Real actuation stacks
/// bake this in — a thrust allocator adds the vehicle's weight to the
/// collective-thrust command, and position-servoed joints supply their own
/// holding torque — so controller commands, and the residuals measured
/// from them, are expressed relative to it. The trim is calibrated
/// payload-free: a carried payload stays part of the residual, which is
/// exactly the regime signal the learning stack is asked to pick up.
inline Eigen::VectorXd hover_trim(const sim::PlantModel& plant, const Eigen::VectorXd& chi_ref) {
  sim::PlantModel unloaded = plant;
  unloaded.set_payload_mass(0.0);
  return unloaded.gravity_vector(chi_ref);
}

}  // namespace resdyn::control
