#ifndef EXO_CONTROLLERS_HPP_
#define EXO_CONTROLLERS_HPP_

#include <Eigen/Dense>
#include <array>
#include <deque>
#include <filesystem>
#include <vector>

#include "exo/common.hpp"
#include "exo/dynamics.hpp"
#include "exo/fourier.hpp"

namespace exo::control {

/// Normalized gait phase in [0, 1), wrapping at heel strike.
struct GaitPhase {
  double phi = 0.0;
};

/// Time-based phase: mod(t, T) / T.
GaitPhase phase_time(double t, double period);

// ---------------------------------------------------------------------------
// Kinematic gait phase from the right-thigh-angle phase portrait.
// ---------------------------------------------------------------------------

struct KinematicPhaseConfig {
  double nominal_period = 1.2;      // s, bootstrap frequency
  double mean_time_constant = 3.0;  // s, EMA centering of the hip angle
  double freq_time_constant = 3.0;  // s, EMA of the portrait rotation rate
  double min_period = 0.4;          // s
  double max_period = 4.0;          // s
  double stationary_velocity = 0.01;  // rad/s
  double stationary_timeout = 2.0;    // s
  double rate_cutoff_hz = 5.0;        // low-pass on the phase rate output
  bool frozen = false;  // freeze centering/frequency adaptation
};

/// phi = atan2(-q_dot_hr / omega, q_hr - mean) mapped to [0, 1) so that a
/// sinusoidal hip angle A*sin(2*pi*t/T) reproduces t/T exactly once the
/// running mean and frequency have converged. Output is monotone within a
/// stride (backward portrait jitter is held, not emitted).
class KinematicPhaseEstimator {
 public:
  explicit KinematicPhaseEstimator(const KinematicPhaseConfig& cfg = {});

  /// Exact initialization when the gait statistics are known a priori.
  void prime(double hip_mean, double period);

  /// Advance one sample. Throws ExecutionError("phase undefined: stationary")
  /// after stationary_timeout of near-zero limb motion.
  GaitPhase update(const Vec4& q, const Vec4& q_dot, double dt);

  GaitPhase phase() const { return GaitPhase{phase_}; }
  /// Low-pass filtered phase rate, 1/s.
  double phase_rate() const { return rate_; }
  double frequency() const { return omega_; }
  double hip_mean() const { return mean_; }

 private:
  KinematicPhaseConfig cfg_;
  bool initialized_ = false;
  double mean_ = 0.0;
  double omega_ = 0.0;
  double phase_ = 0.0;
  double raw_prev_ = 0.0;
  double rate_ = 0.0;
  double still_time_ = 0.0;
};

// ---------------------------------------------------------------------------
// Gait speed estimation from stride geometry and heel-strike timing.
// ---------------------------------------------------------------------------

enum class SpeedClass : int { UltraSlow = 0, Slow = 1, Moderate = 2 };

inline double speed_value(SpeedClass c) {
  switch (c) {
    case SpeedClass::UltraSlow: return 0.4;
    case SpeedClass::Slow: return 0.6;
    case SpeedClass::Moderate: return 0.8;
  }
  return 0.6;
}

const char* speed_name(SpeedClass c);

/// Nearest of {0.4, 0.6, 0.8} m/s; boundary values go to the lower class.
SpeedClass classify_speed(double speed_mps);

/// Fore-aft separation of the two feet (right minus left), from leg forward
/// kinematics with the hip as the common origin.
double foot_separation(const Vec4& q, double gamma, double thigh_length,
                       double shank_length);

class SpeedEstimator {
 public:
  SpeedEstimator(double thigh_length, double shank_length);

  void on_heel_strike(Leg leg, double t, const Vec4& q, double gamma);

  bool available() const { return !stride_speeds_.empty(); }
  /// Mean over the most recent strides, m/s. Throws when no stride yet.
  double speed() const;
  SpeedClass speed_class() const;
  double last_stride_length() const;
  double last_stride_time() const;

 private:
  double thigh_length_, shank_length_;
  bool has_right_ = false;
  double last_right_t_ = 0.0;
  double last_right_sep_ = 0.0;
  double left_sep_ = 0.0;
  bool left_seen_ = false;
  double last_length_ = 0.0, last_time_ = 0.0;
  std::deque<double> stride_speeds_;
};

// ---------------------------------------------------------------------------
// Torque lookup table (TBC / GPC).
// ---------------------------------------------------------------------------

class TorqueLookup {
 public:
  TorqueLookup() = default;
  TorqueLookup(std::vector<double> speeds, int phase_nodes);

  bool empty() const { return values_.empty(); }
  int phase_nodes() const { return phase_nodes_; }
  const std::vector<double>& speeds() const { return speeds_; }

  void set(int speed_index, int node, const Vec4& torque);
  Vec4 node_value(int speed_index, int node) const;

  /// Bilinear interpolation: periodic linear in phi, linear in speed between
  /// grid speeds (clamped at the extremes). Throws on an empty table.
  Vec4 torque(double phi, double speed_mps) const;

  void save(const std::filesystem::path&) const;
  static TorqueLookup load(const std::filesystem::path&);

 private:
  std::vector<double> speeds_;
  int phase_nodes_ = 0;
  std::vector<Vec4> values_;  // [speed][node] flattened
};

dynamics::TorqueVector tbc_torque(const TorqueLookup& table, GaitPhase phi,
                                  double speed_mps);

// ---------------------------------------------------------------------------
// KSC biological-torque approximator (loadable feedforward network).
// ---------------------------------------------------------------------------

/// Two tanh hidden layers mapping the standardized [q, q_dot, gamma] input to
/// a biological joint-torque estimate. Weights ship as a data file.
struct KscNetwork {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
  Eigen::VectorXd input_mean, input_scale;
  Eigen::VectorXd output_mean, output_scale;

  static KscNetwork zeros(int hidden = 16);

  void check_dimensions() const;  // throws ValidationError
  Vec4 eval(const Vec4& q, const Vec4& q_dot, double gamma) const;

  void save(const std::filesystem::path&) const;
  static KscNetwork load(const std::filesystem::path&);
};

dynamics::TorqueVector ksc_torque(const KscNetwork& net, const Vec4& q,
                                  const Vec4& q_dot, double gamma);

/// u = w * u_ksc + (1 - w) * u_gpc. Throws when w is outside [0, 1].
dynamics::TorqueVector htc_torque(const dynamics::TorqueVector& u_ksc,
                                  const dynamics::TorqueVector& u_gpc,
                                  double w);

// ---------------------------------------------------------------------------
// AMTC: adaptive Fourier reference trajectory + model-based torque.
// ---------------------------------------------------------------------------

struct AmtcConfig {
  int harmonics = 5;
  bool include_dc = true;
  Vec4 learning_rate{0.5, 0.5, 0.5, 0.5};  // per joint, 1/s scale
  double coeff_guard = 1.5;                // rad, per coefficient
};

/// Adaptive controller memory: per-joint Fourier coefficients over the base
/// reference trajectory r0.
struct AmtcState {
  AmtcConfig config;
  std::array<Eigen::VectorXd, 4> theta;
  std::array<FourierSeries, 4> base;

  static AmtcState init(const AmtcConfig& cfg,
                        const std::array<FourierSeries, 4>& base);
  int coeff_count() const {
    return 2 * config.harmonics + (config.include_dc ? 1 : 0);
  }
};

struct ReferencePoint {
  Vec4 r = Vec4::Zero();
  Vec4 r_dot = Vec4::Zero();
  Vec4 r_ddot = Vec4::Zero();
};

/// r_E = r0(phi) + theta' psi(phi) per joint, with first and second time
/// derivatives from analytic differentiation in phi chained with the
/// estimated phase rate (and optional phase acceleration).
ReferencePoint amtc_reference(const AmtcState& state, GaitPhase phi,
                              double phase_rate, double phase_accel = 0.0);

/// Gradient-descent update theta <- theta - eps * e * psi(phi) * dt per
/// joint, e = r_E - q. Throws ExecutionError("adaptation diverged ...") when
/// a coefficient exceeds the guard, naming the joint.
void amtc_adapt(AmtcState& state, const Vec4& tracking_error, GaitPhase phi,
                double dt);

/// Gamma evaluated with measured trunk kinematics and (q, q_dot, q_ddot)
/// replaced by the reference point.
dynamics::TorqueVector amtc_torque(const dynamics::PlantModel& model,
                                   const dynamics::PlantState& state,
                                   const ReferencePoint& ref);

// ---------------------------------------------------------------------------
// Closed-loop controller frontends used by the simulator.
// ---------------------------------------------------------------------------

/// Nominal stride period per treadmill speed (linear interpolation, clamped).
struct StrideTimeTable {
  std::vector<double> speeds{0.4, 0.6, 0.8};
  std::vector<double> periods{1.375, 1.2, 1.1};
  double period(double speed_mps) const;
};

class TbcController {
 public:
  TbcController(TorqueLookup table, StrideTimeTable periods,
                double thigh_length, double shank_length);

  dynamics::TorqueVector update(const dynamics::PlantState& s,
                                double commanded_speed);
  void on_heel_strike(Leg leg, const dynamics::PlantState& s);
  GaitPhase phase() const { return phase_; }

 private:
  TorqueLookup table_;
  StrideTimeTable periods_;
  SpeedEstimator speed_;
  GaitPhase phase_;
};

class HtcController {
 public:
  HtcController(KscNetwork net, TorqueLookup table, double weight,
                double thigh_length, double shank_length,
                const KinematicPhaseConfig& phase_cfg = {});

  dynamics::TorqueVector update(const dynamics::PlantState& s, double dt,
                                double commanded_speed);
  void on_heel_strike(Leg leg, const dynamics::PlantState& s);
  KinematicPhaseEstimator& phase_estimator() { return phase_est_; }
  GaitPhase phase() const { return phase_est_.phase(); }

 private:
  KscNetwork net_;
  TorqueLookup table_;
  double weight_;
  SpeedEstimator speed_;
  KinematicPhaseEstimator phase_est_;
};

class AmtcController {
 public:
  AmtcController(dynamics::PlantModel estimation_model, AmtcState state,
                 const KinematicPhaseConfig& phase_cfg = {});

  dynamics::TorqueVector update(const dynamics::PlantState& s, double dt);

  void set_adaptation(bool enabled) { adapt_ = enabled; }
  bool adaptation() const { return adapt_; }
  const AmtcState& state() const { return state_; }
  AmtcState& state() { return state_; }
  KinematicPhaseEstimator& phase_estimator() { return phase_est_; }
  GaitPhase phase() const { return phase_est_.phase(); }
  const ReferencePoint& last_reference() const { return last_ref_; }

 private:
  dynamics::PlantModel model_;
  AmtcState state_;
  KinematicPhaseEstimator phase_est_;
  bool adapt_ = true;
  ReferencePoint last_ref_;
};

}  // namespace exo::control

#endif  // EXO_CONTROLLERS_HPP_
