#include "exo/dynamics.hpp"

#include <cmath>
#include <sstream>

namespace exo::dynamics {

namespace {

// Aggregate linear parameters of all rigid bodies riding on one link:
// m = total mass, mc = first moment about the proximal joint, io = inertia
// about the proximal joint. Torques are linear in these.
struct LinkAggregate {
  double m = 0.0;
  double mc = 0.0;
  double io = 0.0;

  void add(const SegmentParams& s) {
    m += s.mass;
    mc += s.mass * s.com_offset;
    io += s.inertia + s.mass * s.com_offset * s.com_offset;
  }
};

struct LegParams {
  LinkAggregate thigh, shank;
  double thigh_length = 0.0;
};

LegParams leg_params(const PlantModel& model) {
  LegParams p;
  if (model.include_exo_inertia) {
    p.thigh.add(model.exo_thigh);
    p.shank.add(model.exo_shank);
  }
  if (model.include_human_inertia) {
    p.thigh.add(model.human_thigh);
    p.shank.add(model.human_shank);
  }
  if (!model.include_exo_inertia && !model.include_human_inertia)
    throw ValidationError("plant model: no bodies selected");
  p.thigh_length = model.exo_thigh.length;
  return p;
}

inline double cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Unit vector along a link whose absolute angle th is measured from the
// downward vertical, positive toward +x (forward flexion).
inline Vec2 link_dir(double th) { return Vec2(std::sin(th), -std::cos(th)); }
inline Vec2 link_dir_perp(double th) { return Vec2(std::cos(th), std::sin(th)); }

// Inverse dynamics of one leg (Newton-Euler, planar two-link chain hanging
// from a point with prescribed acceleration). Joint friction excluded here.
Vec2 leg_torques(const LegParams& leg, double gravity, const Vec2& hip_accel,
                 double gamma, double gamma_dot, double gamma_ddot, double q_h,
                 double qd_h, double qdd_h, double q_k, double qd_k,
                 double qdd_k) {
  const double th1 = gamma + q_h;
  const double w1 = gamma_dot + qd_h;
  const double a1 = gamma_ddot + qdd_h;
  const double th2 = th1 + q_k;
  const double w2 = w1 + qd_k;
  const double a2 = a1 + qdd_k;

  const Vec2 u1 = link_dir(th1);
  const Vec2 u1p = link_dir_perp(th1);
  const Vec2 u2 = link_dir(th2);
  const Vec2 u2p = link_dir_perp(th2);

  const Vec2 g_vec(0.0, -gravity);
  const Vec2 knee_accel = hip_accel + leg.thigh_length * (a1 * u1p - w1 * w1 * u1);

  // Shank: torque about the knee.
  const Vec2 knee_rel = knee_accel - g_vec;
  const double tau_k = leg.shank.io * a2 + leg.shank.mc * cross2(u2, knee_rel);

  // Knee reaction force on the thigh.
  const Vec2 f_shank =
      leg.shank.m * knee_rel + leg.shank.mc * (a2 * u2p - w2 * w2 * u2);

  // Thigh: torque about the hip.
  const Vec2 hip_rel = hip_accel - g_vec;
  const double tau_h = leg.thigh.io * a1 + leg.thigh.mc * cross2(u1, hip_rel) +
                       tau_k + leg.thigh_length * cross2(u1, f_shank);

  return Vec2(tau_h, tau_k);
}

void check_segment(const SegmentParams& s, const char* name) {
  if (!(s.mass > 0.0) || !(s.length > 0.0) || !(s.inertia > 0.0)) {
    throw ValidationError(std::string("plant model: ") + name +
                          " mass/length/inertia must be strictly positive");
  }
  if (!(s.com_offset > 0.0) || s.com_offset > s.length) {
    throw ValidationError(std::string("plant model: ") + name +
                          " com_offset must lie within the segment");
  }
}

}  // namespace

PlantModel PlantModel::default_model() {
  PlantModel m;
  // 75 kg / 1.75 m subject, segment fractions from standard anthropometric
  // tables (foot lumped into the shank body).
  m.human_trunk = {50.9, 0.80, 0.50, 1.50};
  m.human_thigh = {7.50, 0.429, 0.186, 0.144};
  m.human_shank = {4.58, 0.431, 0.245, 0.108};
  // 17 kg device: hip module plus thigh/shank cuffs and actuators.
  m.exo_trunk = {7.0, 0.40, 0.20, 0.30};
  m.exo_thigh = {2.6, 0.429, 0.20, 0.035};
  m.exo_shank = {2.4, 0.431, 0.20, 0.030};
  return m;
}

PlantModel PlantModel::exoskeleton_only() const {
  PlantModel m = *this;
  m.include_human_inertia = false;
  m.include_exo_inertia = true;
  return m;
}

PlantModel PlantModel::human_only() const {
  PlantModel m = *this;
  m.include_human_inertia = true;
  m.include_exo_inertia = false;
  return m;
}

double PlantModel::total_mass() const {
  double m = 0.0;
  if (include_exo_inertia)
    m += exo_trunk.mass + 2.0 * (exo_thigh.mass + exo_shank.mass);
  if (include_human_inertia)
    m += human_trunk.mass + 2.0 * (human_thigh.mass + human_shank.mass);
  return m;
}

void PlantModel::validate() const {
  check_segment(exo_trunk, "exo_trunk");
  check_segment(exo_thigh, "exo_thigh");
  check_segment(exo_shank, "exo_shank");
  check_segment(human_trunk, "human_trunk");
  check_segment(human_thigh, "human_thigh");
  check_segment(human_shank, "human_shank");
  if (hip_friction < 0.0 || knee_friction < 0.0)
    throw ValidationError("plant model: friction must be non-negative");
  if (!(gravity >= 0.0))
    throw ValidationError("plant model: gravity must be non-negative");
  if (!(hip_limits[0] < hip_limits[1]) || !(knee_limits[0] < knee_limits[1]))
    throw ValidationError("plant model: joint limits must be ordered");
  if (!(actuator_limit > 0.0))
    throw ValidationError("plant model: actuator limit must be positive");
}

bool PlantState::finite() const {
  return std::isfinite(gamma) && std::isfinite(gamma_dot) &&
         std::isfinite(gamma_ddot) && std::isfinite(t) && all_finite(accel) &&
         all_finite(q) && all_finite(q_dot) && all_finite(q_ddot);
}

TorqueVector gamma_torques(const PlantModel& model, const PlantState& state) {
  if (!state.finite()) throw ValidationError("invalid state");
  const LegParams leg = leg_params(model);

  Vec4 tau;
  for (int side = 0; side < 2; ++side) {
    const int h = 2 * side;      // hip index
    const int k = 2 * side + 1;  // knee index
    const Vec2 t = leg_torques(leg, model.gravity, state.accel, state.gamma,
                               state.gamma_dot, state.gamma_ddot, state.q[h],
                               state.q_dot[h], state.q_ddot[h], state.q[k],
                               state.q_dot[k], state.q_ddot[k]);
    tau[h] = t[0] + model.hip_friction * state.q_dot[h];
    tau[k] = t[1] + model.knee_friction * state.q_dot[k];
  }
  return TorqueVector(tau);
}

TorqueVector estimate_interaction_torque(const PlantModel& model,
                                         const PlantState& state,
                                         const TorqueVector& u_e) {
  return gamma_torques(model, state) - u_e;
}

TorqueVector clamp_to_actuator(const PlantModel& model, const TorqueVector& u) {
  Vec4 v = u.values;
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(v[i]))
      throw ValidationError("torque command must be finite");
    v[i] = std::clamp(v[i], -model.actuator_limit, model.actuator_limit);
  }
  return TorqueVector(v);
}

DynamicsDecomposition decompose_dynamics(const PlantModel& model,
                                         const PlantState& state) {
  PlantState s = state;
  s.q_ddot.setZero();
  const Vec4 bias = gamma_torques(model, s).values;

  DynamicsDecomposition d;
  d.bias = bias;
  for (int side = 0; side < 2; ++side) {
    Eigen::Matrix2d& m = side == 0 ? d.m_right : d.m_left;
    for (int col = 0; col < 2; ++col) {
      s.q_ddot.setZero();
      s.q_ddot[2 * side + col] = 1.0;
      const Vec4 tau = gamma_torques(model, s).values;
      m(0, col) = tau[2 * side] - bias[2 * side];
      m(1, col) = tau[2 * side + 1] - bias[2 * side + 1];
    }
  }
  return d;
}

PlantState step_plant(const PlantModel& model, const PlantState& state,
                      const TorqueVector& u_e, const TorqueVector& u_h,
                      double dt) {
  if (!(dt > 0.0) || dt > 0.02)
    throw ValidationError("step_plant: dt must be in (0, 0.02] s");
  if (!all_finite(u_h.values))
    throw ValidationError("step_plant: torques must be finite");

  const Vec4 u = clamp_to_actuator(model, u_e).values + u_h.values;
  const DynamicsDecomposition dyn = decompose_dynamics(model, state);

  Vec4 qdd;
  qdd.segment<2>(0) =
      dyn.m_right.inverse() * (u.segment<2>(0) - dyn.bias.segment<2>(0));
  qdd.segment<2>(2) =
      dyn.m_left.inverse() * (u.segment<2>(2) - dyn.bias.segment<2>(2));

  PlantState next = state;
  next.q_dot = state.q_dot + dt * qdd;
  next.q = state.q + dt * next.q_dot;
  next.q_ddot = qdd;
  next.t = state.t + dt;

  for (int i = 0; i < 4; ++i) {
    const bool is_hip = (i % 2 == 0);
    const Vec2& lim = is_hip ? model.hip_limits : model.knee_limits;
    if (next.q[i] < lim[0] || next.q[i] > lim[1]) {
      std::ostringstream os;
      os << "joint limit violated at " << joint_name(static_cast<Joint>(i))
         << ": q = " << next.q[i] << " rad at t = " << next.t << " s";
      throw ExecutionError(os.str());
    }
  }
  return next;
}

}  // namespace exo::dynamics
