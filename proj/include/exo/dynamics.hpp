#ifndef EXO_DYNAMICS_HPP_
#define EXO_DYNAMICS_HPP_

#include <Eigen/Dense>

#include "exo/common.hpp"

namespace exo::dynamics {

/// One rigid segment: mass, kinematic length, center-of-mass offset from the
/// proximal joint, rotational inertia about the center of mass.
struct SegmentParams {
  double mass = 0.0;       // kg
  double length = 0.0;     // m
  double com_offset = 0.0; // m, proximal joint -> COM
  double inertia = 0.0;    // kg m^2 about COM
};

/// Sagittal-plane model of the coupled human-exoskeleton system. The trunk is
/// kinematically prescribed (treadmill-supported gait); each leg is a
/// thigh+shank chain hanging from the hip attachment point. Exoskeleton and
/// human segments are kept as separate rigid bodies on the same links so the
/// generalized torque map stays exactly linear in the inertial parameters;
/// include_human_inertia selects whether the human bodies enter the map.
struct PlantModel {
  SegmentParams exo_trunk, exo_thigh, exo_shank;
  SegmentParams human_trunk, human_thigh, human_shank;
  bool include_human_inertia = true;
  bool include_exo_inertia = true;

  double hip_friction = 1.2;   // N m s/rad, viscous
  double knee_friction = 1.2;  // N m s/rad
  double gravity = 9.81;       // m/s^2

  Vec2 hip_limits{-0.6, 2.1};   // rad
  Vec2 knee_limits{-2.3, 0.05}; // rad
  double actuator_limit = 60.0; // N m, applied at the plant input boundary

  /// Human+exoskeleton model with default anthropometry (75 kg / 1.75 m
  /// subject, 17 kg device).
  static PlantModel default_model();

  /// Same geometry with the human bodies excluded from the torque map.
  PlantModel exoskeleton_only() const;

  /// Same geometry with the exoskeleton bodies excluded (natural walking).
  PlantModel human_only() const;

  void validate() const;  // throws ValidationError

  double thigh_length() const { return exo_thigh.length; }
  double shank_length() const { return exo_shank.length; }
  double total_mass() const;
};

/// Full kinematic state. q ordering: [hip_right, knee_right, hip_left,
/// knee_left]. gamma is the trunk angle w.r.t. the gravity vector; accel is
/// the sagittal-plane linear acceleration of the hip attachment point.
struct PlantState {
  double gamma = 0.0;
  double gamma_dot = 0.0;
  double gamma_ddot = 0.0;
  Vec2 accel = Vec2::Zero();
  Vec4 q = Vec4::Zero();
  Vec4 q_dot = Vec4::Zero();
  Vec4 q_ddot = Vec4::Zero();
  double t = 0.0;

  bool finite() const;
};

/// Joint torques, same ordering as PlantState::q.
struct TorqueVector {
  Vec4 values = Vec4::Zero();

  TorqueVector() = default;
  explicit TorqueVector(const Vec4& v) : values(v) {}
  static TorqueVector zero() { return TorqueVector(); }

  double operator[](int i) const { return values[i]; }
};

inline TorqueVector operator+(const TorqueVector& a, const TorqueVector& b) {
  return TorqueVector(a.values + b.values);
}
inline TorqueVector operator-(const TorqueVector& a, const TorqueVector& b) {
  return TorqueVector(a.values - b.values);
}

/// Generalized joint torques required to realize the accelerations in `state`
/// under `model` (inverse dynamics of the leg chains with the trunk pinned at
/// the measured gamma/accel). Throws ValidationError on non-finite state.
TorqueVector gamma_torques(const PlantModel& model, const PlantState& state);

/// u_int = Gamma(state) - u_E, elementwise.
TorqueVector estimate_interaction_torque(const PlantModel& model,
                                         const PlantState& state,
                                         const TorqueVector& u_e);

/// Clamp to the actuator limit. Used only at the plant input boundary.
TorqueVector clamp_to_actuator(const PlantModel& model, const TorqueVector& u);

/// Mass matrix (block diagonal, one 2x2 block per leg) and bias vector h such
/// that gamma_torques = M * q_ddot + h for the given positions/velocities and
/// prescribed trunk motion.
struct DynamicsDecomposition {
  Eigen::Matrix2d m_right, m_left;
  Vec4 bias;
};
DynamicsDecomposition decompose_dynamics(const PlantModel& model,
                                         const PlantState& state);

/// Advance joint states one semi-implicit Euler step under u_E + u_H. u_E is
/// clamped to the actuator limit; u_H is not (it is muscle torque, not a
/// motor command). Trunk fields carry over unchanged - the simulator owns the
/// prescribed trunk profile. Throws ExecutionError when a joint limit is
/// violated, naming the joint and the time.
PlantState step_plant(const PlantModel& model, const PlantState& state,
                      const TorqueVector& u_e, const TorqueVector& u_h,
                      double dt);

}  // namespace exo::dynamics

#endif  // EXO_DYNAMICS_HPP_
