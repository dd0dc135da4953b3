#ifndef EXO_SIM_HPP_
#define EXO_SIM_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "exo/controllers.hpp"
#include "exo/dynamics.hpp"
#include "exo/fourier.hpp"
#include "exo/random.hpp"
#include "exo/trial.hpp"

namespace exo::sim {

// ---------------------------------------------------------------------------
// Nominal gait
// ---------------------------------------------------------------------------

/// Sagittal hip/knee reference trajectories per treadmill speed, 3-harmonic
/// Fourier fits to physiological waypoints. Right leg at phase 0 = right heel
/// strike; left leg is the same series shifted by half a stride. Coefficients
/// interpolate linearly between the three anchor speeds.
std::array<FourierSeries, 4> nominal_gait(double speed_mps);

control::StrideTimeTable default_stride_times();

// ---------------------------------------------------------------------------
// Human policies
// ---------------------------------------------------------------------------

enum class PolicyKind { Leader, Follower, Conflicting, Yielding };

const char* policy_name(PolicyKind k);
PolicyKind policy_from_name(const std::string& name);

/// Parameterized simulated human. The policy tracks its own desired
/// trajectory r_H with a PD law scaled by engagement; the disengaged fraction
/// contributes passive joint damping instead.
struct HumanPolicy {
  PolicyKind kind = PolicyKind::Leader;
  std::array<FourierSeries, 4> r_h;
  Vec4 kp{900.0, 300.0, 900.0, 300.0};  // N m/rad
  Vec4 kd{40.0, 12.0, 40.0, 12.0};      // N m s/rad
  double engagement = 1.0;              // [0, 1]
  double phase_offset = 0.0;            // rad, conflicting only
  double yield_time_constant = 30.0;    // s, engagement decay for yielding
  double yield_floor = 0.08;            // residual muscle tone
  double passive_damping = 3.0;         // N m s/rad
  double period_scale = 1.0;            // own cadence vs nominal

  void validate() const;
  double engagement_at(double t) const;
};

/// Policy whose desired trajectory is the nominal gait at `speed`,
/// deviated by the subject's own pattern (amplitude/timing) in proportion to
/// pattern_deviation: 0 = perfectly aligned with the exoskeleton reference,
/// 1 = default idiosyncrasy.
HumanPolicy make_policy(PolicyKind kind, double speed_mps,
                        double pattern_deviation = 1.0);

/// Per-seed variation of gains/engagement/cadence, emulating subject
/// differences.
HumanPolicy jitter_policy(const HumanPolicy& p, Rng& rng, double fraction = 0.1);

/// Muscle torque from the policy at trial time state.t, gait phase phi with
/// phase rate in 1/s.
dynamics::TorqueVector human_torque(const HumanPolicy& policy,
                                    const dynamics::PlantState& state,
                                    control::GaitPhase phi, double phase_rate);

// ---------------------------------------------------------------------------
// Synthetic sensors
// ---------------------------------------------------------------------------

/// Directional torque-to-muscle distribution: activation share of positive
/// (flexion/extension) joint torque per channel. Shipped as a data file;
/// defaults() is the same matrix compiled in.
struct MuscleMap {
  // [channel][hip_flex, hip_ext, knee_ext, knee_flex], activation per N m
  std::array<std::array<double, 4>, kMuscleCount> weights{};
  // phase of peak modulation per channel
  std::array<double, kMuscleCount> peak_phase{};

  static MuscleMap defaults();
  void save(const std::filesystem::path&) const;
  static MuscleMap load(const std::filesystem::path&);

  /// Activation target per channel for a given muscle torque and gait phase.
  std::array<double, kMuscleCount> activations(const Vec4& u_h,
                                               double phi) const;
};

/// Band-limited-noise EMG carrier amplitude-modulated by the activation
/// target. Deterministic per seed.
class EmgSynthesizer {
 public:
  EmgSynthesizer(MuscleMap map, double emg_hz, std::uint64_t seed,
                 double baseline = 0.001, double carrier_low_hz = 20.0,
                 double carrier_high_hz = 450.0);

  /// Append n samples driven by the current muscle torque and phase.
  void generate(const Vec4& u_h, double phi, int n_samples, EmgStream& out);

 private:
  MuscleMap map_;
  double fs_;
  double baseline_;
  double carrier_gain_;
  std::array<Rng, kMuscleCount> rng_;
  std::array<std::vector<sigproc::Biquad>, kMuscleCount> filters_;
  std::uint64_t sample_index_ = 0;
};

/// Breath records: vo2 = baseline(speed) + k * mean squared muscle torque
/// over the preceding breath window + seeded noise; spacing uniform in
/// [3, 5] s.
class BreathSynthesizer {
 public:
  BreathSynthesizer(std::uint64_t seed, double baseline_intercept = 4.0,
                    double baseline_slope = 8.0, double effort_gain = 0.015,
                    double noise_sd = 0.15);

  void step(double t, double dt, const Vec4& u_h, double speed_mps,
            BreathStream& out);

 private:
  Rng rng_;
  double b0_, b1_, k_, sd_;
  double next_breath_;
  double window_sum_ = 0.0;
  double window_time_ = 0.0;
};

/// Phase-indexed double-bump vertical GRF template (per leg) plus small
/// lateral and longitudinal components. phi is the trial gait phase; right
/// stance starts at 0, left at 0.5.
struct GrfModel {
  double stance_fraction = 0.62;
  double vertical_peak_scale = 1.15;   // x body weight
  double longitudinal_scale = 0.18;
  double lateral_scale = 0.05;

  Eigen::Vector3d sample(double phi, Leg leg, double body_weight_n,
                         double amp_jitter) const;
};

/// Prescribed trunk kinematics on the treadmill: forward lean with stride-
/// frequency sway, hip-point bobbing at twice the stride frequency.
struct TrunkProfile {
  double gamma0 = 0.06;
  double gamma_amp = 0.025;
  double bob_amp = 0.012;   // m
  double sway_amp = 0.004;  // m

  void apply(double phi, double rate, dynamics::PlantState& s) const;
};

/// Stance-phase ground support: the treadmill carries a smooth fraction of
/// the quasi-static torque demand along the nominal gait (the model has no
/// contact dynamics). Zero during swing.
dynamics::TorqueVector ground_support_torque(
    const dynamics::PlantModel& plant, const std::array<FourierSeries, 4>& gait,
    const TrunkProfile& trunk, double phi, double period,
    double stance_fraction = 0.62, double support_fraction = 0.9);

// ---------------------------------------------------------------------------
// Trial configuration and execution
// ---------------------------------------------------------------------------

struct TrialConfig {
  std::string controller = "tbc";  // tbc | htc | amtc | none
  std::vector<SpeedSegment> schedule = {{0.4, 100.0}, {0.6, 100.0}, {0.8, 100.0}};
  HumanPolicy policy;
  std::uint64_t seed = 1;

  double control_hz = 200.0;
  double grf_hz = 1000.0;
  double emg_hz = 2000.0;

  double htc_weight = 0.5;
  control::AmtcConfig amtc;
  bool amtc_adaptation = true;
  /// Base reference speed for the AMTC r0 trajectory.
  double amtc_base_speed = 0.6;
  /// Record AMTC coefficient snapshots at 10 Hz.
  bool record_amtc_coeffs = true;

  /// Kinematic playback: the plant exactly tracks the policy trajectory
  /// instead of integrating forward dynamics. Transparency experiments.
  bool playback = false;
  /// Freeze the kinematic phase estimator statistics (primed estimators).
  bool freeze_phase_estimator = false;

  std::string config_hash;  // embedded into the trial metadata

  void validate() const;
  double total_duration() const;
};

/// Shared controller assets: lookup table (built by high-gain tracking or
/// loaded), KSC parameters, muscle map.
struct SimAssets {
  control::TorqueLookup lookup;
  control::KscNetwork ksc = control::KscNetwork::zeros();
  MuscleMap muscles = MuscleMap::defaults();
  control::StrideTimeTable stride_times = default_stride_times();

  static SimAssets build(const dynamics::PlantModel& model);
};

/// Record commanded torques of a stiff PD tracking the nominal gait (passive
/// user), binned by time-based phase: the TBC/GPC lookup source.
control::TorqueLookup build_lookup_from_tracking(
    const dynamics::PlantModel& model,
    const std::vector<double>& speeds = {0.4, 0.6, 0.8}, int phase_nodes = 60,
    int strides_per_speed = 8, double kp = 1200.0, double kd = 60.0);

/// Closed-loop simulation at the control rate with sub/super-sampled sensor
/// streams. Throws ExecutionError carrying time and cause when the plant
/// aborts.
GaitTrial run_trial(const TrialConfig& config,
                    const dynamics::PlantModel& model, const SimAssets& assets);

}  // namespace exo::sim

#endif  // EXO_SIM_HPP_
