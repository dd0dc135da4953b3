#include "exo/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "exo/table_io.hpp"

namespace exo::sim {

using control::GaitPhase;
using dynamics::PlantModel;
using dynamics::PlantState;
using dynamics::TorqueVector;

// ---------------------------------------------------------------------------
// Nominal gait
// ---------------------------------------------------------------------------

namespace {

// 3-harmonic fits to hip/knee waypoints at the three protocol speeds.
// Layout: dc, a1, b1, a2, b2, a3, b3.
constexpr double kGaitSpeeds[3] = {0.4, 0.6, 0.8};
constexpr double kHipCoeffs[3][7] = {
    {0.129998, 0.247434, -0.017317, -0.000008, -0.028319, -0.008732, 0.010333},
    {0.152938, 0.291099, -0.020373, -0.000010, -0.033316, -0.010274, 0.012156},
    {0.175879, 0.334764, -0.023429, -0.000011, -0.038314, -0.011815, 0.013979}};
constexpr double kKneeCoeffs[3][7] = {
    {-0.336821, 0.047907, 0.280203, 0.117538, -0.060881, -0.004600, -0.035455},
    {-0.378613, 0.056361, 0.329651, 0.138279, -0.071625, -0.005411, -0.041711},
    {-0.420405, 0.064815, 0.379099, 0.159021, -0.082369, -0.006223, -0.047968}};

FourierSeries series_from_row(const double (&row)[7]) {
  return FourierSeries(row[0], {row[1], row[3], row[5]},
                       {row[2], row[4], row[6]});
}

FourierSeries interp_series(const double (&rows)[3][7], double speed) {
  double blended[7];
  if (speed <= kGaitSpeeds[0]) {
    for (int i = 0; i < 7; ++i) blended[i] = rows[0][i];
  } else if (speed >= kGaitSpeeds[2]) {
    for (int i = 0; i < 7; ++i) blended[i] = rows[2][i];
  } else {
    const int hi = speed <= kGaitSpeeds[1] ? 1 : 2;
    const double f = (speed - kGaitSpeeds[hi - 1]) /
                     (kGaitSpeeds[hi] - kGaitSpeeds[hi - 1]);
    for (int i = 0; i < 7; ++i)
      blended[i] = (1.0 - f) * rows[hi - 1][i] + f * rows[hi][i];
  }
  return series_from_row(blended);
}

}  // namespace

std::array<FourierSeries, 4> nominal_gait(double speed_mps) {
  const FourierSeries hip = interp_series(kHipCoeffs, speed_mps);
  const FourierSeries knee = interp_series(kKneeCoeffs, speed_mps);
  return {hip, knee, hip.phase_shifted(0.5), knee.phase_shifted(0.5)};
}

control::StrideTimeTable default_stride_times() { return {}; }

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

const char* policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Leader: return "leader";
    case PolicyKind::Follower: return "follower";
    case PolicyKind::Conflicting: return "conflicting";
    case PolicyKind::Yielding: return "yielding";
  }
  return "?";
}

PolicyKind policy_from_name(const std::string& name) {
  if (name == "leader") return PolicyKind::Leader;
  if (name == "follower") return PolicyKind::Follower;
  if (name == "conflicting") return PolicyKind::Conflicting;
  if (name == "yielding") return PolicyKind::Yielding;
  throw ValidationError("unknown policy: " + name);
}

void HumanPolicy::validate() const {
  for (int i = 0; i < 4; ++i)
    if (kp[i] < 0.0 || kd[i] < 0.0)
      throw ValidationError("human policy: gains must be non-negative");
  if (!(engagement >= 0.0 && engagement <= 1.0))
    throw ValidationError("human policy: engagement must be in [0, 1]");
  if (passive_damping < 0.0)
    throw ValidationError("human policy: damping must be non-negative");
  if (!(period_scale > 0.5 && period_scale < 2.0))
    throw ValidationError("human policy: period scale out of range");
}

double HumanPolicy::engagement_at(double t) const {
  if (kind == PolicyKind::Yielding)
    return std::max(engagement * std::exp(-t / yield_time_constant),
                    yield_floor);
  return engagement;
}

HumanPolicy make_policy(PolicyKind kind, double speed_mps,
                        double pattern_deviation) {
  HumanPolicy p;
  p.kind = kind;
  p.r_h = nominal_gait(speed_mps);
  auto own_pattern = [&] {
    const double amp = 1.0 + 0.10 * pattern_deviation;
    const double shift = 0.015 * pattern_deviation;
    for (FourierSeries& f : p.r_h) f = f.scaled(amp).phase_shifted(shift);
  };
  switch (kind) {
    case PolicyKind::Leader:
      own_pattern();
      break;
    case PolicyKind::Follower:
      p.engagement = 0.0;
      break;
    case PolicyKind::Conflicting:
      p.phase_offset = 0.45 * kPi;
      break;
    case PolicyKind::Yielding:
      own_pattern();
      p.yield_time_constant = 25.0;
      break;
  }
  return p;
}

HumanPolicy jitter_policy(const HumanPolicy& p, Rng& rng, double fraction) {
  HumanPolicy out = p;
  auto scale = [&](double v) { return v * (1.0 + fraction * rng.uniform(-1.0, 1.0)); };
  for (int i = 0; i < 4; ++i) {
    out.kp[i] = scale(p.kp[i]);
    out.kd[i] = scale(p.kd[i]);
  }
  out.passive_damping = scale(p.passive_damping);
  if (p.kind != PolicyKind::Follower)
    out.engagement = std::clamp(scale(p.engagement), 0.0, 1.0);
  out.period_scale =
      p.period_scale * (1.0 + 0.02 * rng.uniform(-1.0, 1.0));
  return out;
}

TorqueVector human_torque(const HumanPolicy& policy, const PlantState& state,
                          GaitPhase phi, double phase_rate) {
  policy.validate();
  const double eng = policy.engagement_at(state.t);
  const double p = wrap_unit(phi.phi + policy.phase_offset / kTwoPi);
  Vec4 u;
  for (int j = 0; j < 4; ++j) {
    const double r = policy.r_h[j].eval(p);
    const double r_dot = policy.r_h[j].deriv(p) * phase_rate;
    const double e = r - state.q[j];
    const double e_dot = r_dot - state.q_dot[j];
    const double pd = policy.kp[j] * e + policy.kd[j] * e_dot;
    u[j] = eng * pd - (1.0 - eng) * policy.passive_damping * state.q_dot[j];
  }
  return TorqueVector(u);
}

// ---------------------------------------------------------------------------
// Muscle map and EMG synthesis
// ---------------------------------------------------------------------------

const std::array<std::string, 14>& channel_names_impl() {
  static const std::array<std::string, 14> names = {
      "gm_r", "bf_r", "rf_r", "vm_r", "mg_r", "sol_r", "ta_r",
      "gm_l", "bf_l", "rf_l", "vm_l", "mg_l", "sol_l", "ta_l"};
  return names;
}

MuscleMap MuscleMap::defaults() {
  MuscleMap m;
  // [hip_flex, hip_ext, knee_ext, knee_flex] shares, activation per N m.
  // Hip flexion is +torque; knee extension is +torque (flexion negative).
  const std::array<std::array<double, 4>, kMusclesPerLeg> leg = {{
      {0.000, 0.016, 0.000, 0.000},  // gluteus maximus
      {0.000, 0.010, 0.000, 0.006},  // biceps femoris
      {0.012, 0.000, 0.006, 0.000},  // rectus femoris
      {0.000, 0.000, 0.014, 0.000},  // vastus medialis
      {0.000, 0.000, 0.000, 0.012},  // gastrocnemius medialis
      {0.000, 0.000, 0.000, 0.005},  // soleus
      {0.000, 0.000, 0.005, 0.000},  // tibialis anterior
  }};
  const std::array<double, kMusclesPerLeg> peaks = {0.05, 0.90, 0.10, 0.12,
                                                    0.40, 0.35, 0.70};
  for (int leg_i = 0; leg_i < 2; ++leg_i) {
    for (int mi = 0; mi < kMusclesPerLeg; ++mi) {
      m.weights[leg_i * kMusclesPerLeg + mi] = leg[mi];
      m.peak_phase[leg_i * kMusclesPerLeg + mi] =
          wrap_unit(peaks[mi] + (leg_i == 1 ? 0.5 : 0.0));
    }
  }
  return m;
}

void MuscleMap::save(const std::filesystem::path& path) const {
  io::Table t;
  t.kind = "muscle_map";
  t.add_column("channel", "index");
  t.add_column("hip_flex", "1/N.m");
  t.add_column("hip_ext", "1/N.m");
  t.add_column("knee_ext", "1/N.m");
  t.add_column("knee_flex", "1/N.m");
  t.add_column("peak_phase", "unitless");
  for (int c = 0; c < kMuscleCount; ++c)
    t.push_row({static_cast<double>(c), weights[c][0], weights[c][1],
                weights[c][2], weights[c][3], peak_phase[c]});
  io::write_table(path, t);
}

MuscleMap MuscleMap::load(const std::filesystem::path& path) {
  const io::Table t = io::read_table(path);
  if (t.kind != "muscle_map")
    throw ValidationError("expected muscle_map table, got '" + t.kind + "'");
  if (t.n_rows() != kMuscleCount)
    throw ValidationError("muscle_map: expected 14 channels");
  MuscleMap m;
  const int c_ch = t.col("channel");
  const int cols[4] = {t.col("hip_flex"), t.col("hip_ext"), t.col("knee_ext"),
                       t.col("knee_flex")};
  const int c_peak = t.col("peak_phase");
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    const int ch = static_cast<int>(t.at(r, c_ch));
    if (ch < 0 || ch >= kMuscleCount)
      throw ValidationError("muscle_map: channel index out of range");
    for (int k = 0; k < 4; ++k) m.weights[ch][k] = t.at(r, cols[k]);
    m.peak_phase[ch] = t.at(r, c_peak);
  }
  return m;
}

std::array<double, kMuscleCount> MuscleMap::activations(const Vec4& u_h,
                                                        double phi) const {
  std::array<double, kMuscleCount> act{};
  for (int c = 0; c < kMuscleCount; ++c) {
    const int hip = c < kMusclesPerLeg ? 0 : 2;
    const int knee = hip + 1;
    double a = weights[c][0] * std::max(u_h[hip], 0.0) +
               weights[c][1] * std::max(-u_h[hip], 0.0) +
               weights[c][2] * std::max(u_h[knee], 0.0) +
               weights[c][3] * std::max(-u_h[knee], 0.0);
    a *= 1.0 + 0.3 * std::cos(kTwoPi * (phi - peak_phase[c]));
    act[c] = a;
  }
  return act;
}

EmgSynthesizer::EmgSynthesizer(MuscleMap map, double emg_hz,
                               std::uint64_t seed, double baseline,
                               double carrier_low_hz, double carrier_high_hz)
    : map_(map), fs_(emg_hz), baseline_(baseline), rng_{Rng(seed),
          Rng(seed + 101), Rng(seed + 202), Rng(seed + 303), Rng(seed + 404),
          Rng(seed + 505), Rng(seed + 606), Rng(seed + 707), Rng(seed + 808),
          Rng(seed + 909), Rng(seed + 1010), Rng(seed + 1111),
          Rng(seed + 1212), Rng(seed + 1313)} {
  // Unit-RMS carrier: the band holds ~43% of white-noise power at 2 kHz.
  carrier_gain_ = 1.0 / std::sqrt((carrier_high_hz - carrier_low_hz) /
                                  (fs_ / 2.0));
  for (int c = 0; c < kMuscleCount; ++c) {
    filters_[c] = {sigproc::design_highpass(carrier_low_hz, fs_),
                   sigproc::design_lowpass(carrier_high_hz, fs_)};
  }
}

void EmgSynthesizer::generate(const Vec4& u_h, double phi, int n_samples,
                              EmgStream& out) {
  const std::array<double, kMuscleCount> act = map_.activations(u_h, phi);
  for (int s = 0; s < n_samples; ++s) {
    out.t.push_back(static_cast<double>(sample_index_) / fs_);
    for (int c = 0; c < kMuscleCount; ++c) {
      double carrier = rng_[c].gaussian();
      for (sigproc::Biquad& bq : filters_[c]) carrier = bq.step(carrier);
      carrier *= carrier_gain_;
      out.channels[c].push_back((baseline_ + act[c]) * carrier);
    }
    ++sample_index_;
  }
}

// ---------------------------------------------------------------------------
// Breath synthesis
// ---------------------------------------------------------------------------

BreathSynthesizer::BreathSynthesizer(std::uint64_t seed,
                                     double baseline_intercept,
                                     double baseline_slope, double effort_gain,
                                     double noise_sd)
    : rng_(seed ^ 0x5eedb4ea75ULL),
      b0_(baseline_intercept),
      b1_(baseline_slope),
      k_(effort_gain),
      sd_(noise_sd) {
  next_breath_ = rng_.uniform(3.0, 5.0);
}

void BreathSynthesizer::step(double t, double dt, const Vec4& u_h,
                             double speed_mps, BreathStream& out) {
  window_sum_ += u_h.squaredNorm() / 4.0 * dt;
  window_time_ += dt;
  if (t + 1e-12 >= next_breath_) {
    const double mean_sq =
        window_time_ > 0.0 ? window_sum_ / window_time_ : 0.0;
    const double vo2 =
        b0_ + b1_ * speed_mps + k_ * mean_sq + sd_ * rng_.gaussian();
    out.t.push_back(next_breath_);
    out.vo2.push_back(std::max(vo2, 0.0));
    window_sum_ = 0.0;
    window_time_ = 0.0;
    next_breath_ += rng_.uniform(3.0, 5.0);
  }
}

// ---------------------------------------------------------------------------
// GRF synthesis
// ---------------------------------------------------------------------------

Eigen::Vector3d GrfModel::sample(double phi, Leg leg, double body_weight_n,
                                 double amp_jitter) const {
  const double local =
      wrap_unit(leg == Leg::Right ? phi : phi - 0.5) / stance_fraction;
  if (local >= 1.0) return Eigen::Vector3d::Zero();
  const double xi = local;
  const double bump =
      std::sin(kPi * xi) + 0.35 * std::sin(3.0 * kPi * xi);
  const double vertical =
      std::max(0.0, vertical_peak_scale * body_weight_n * bump * amp_jitter);
  const double longitudinal =
      -longitudinal_scale * body_weight_n * std::sin(kTwoPi * xi) * amp_jitter;
  const double lateral = lateral_scale * body_weight_n * std::sin(kPi * xi) *
                         (leg == Leg::Right ? 1.0 : -1.0);
  return Eigen::Vector3d(vertical, lateral, longitudinal);
}

// ---------------------------------------------------------------------------
// Lookup construction
// ---------------------------------------------------------------------------

control::TorqueLookup build_lookup_from_tracking(
    const PlantModel& model, const std::vector<double>& speeds,
    int phase_nodes, int strides_per_speed, double kp, double kd) {
  const control::StrideTimeTable times = default_stride_times();
  control::TorqueLookup lut(speeds, phase_nodes);
  const double dt = 1.0 / 200.0;
  const TrunkProfile trunk;

  for (std::size_t si = 0; si < speeds.size(); ++si) {
    const double v = speeds[si];
    const double period = times.period(v);
    const std::array<FourierSeries, 4> gait = nominal_gait(v);
    HumanPolicy passive = make_policy(PolicyKind::Follower, v);

    PlantState state;
    for (int j = 0; j < 4; ++j) {
      state.q[j] = gait[j].eval(0.0);
      state.q_dot[j] = gait[j].deriv(0.0) / period;
    }
    trunk.apply(0.0, 1.0 / period, state);

    std::vector<double> sum(static_cast<std::size_t>(phase_nodes) * 4, 0.0);
    std::vector<int> count(phase_nodes, 0);
    const int skip_strides = 3;
    const int total_steps = static_cast<int>(
        std::round((skip_strides + strides_per_speed) * period / dt));

    for (int k = 0; k < total_steps; ++k) {
      const double t = k * dt;
      const double phi = control::phase_time(t, period).phi;
      state.t = t;
      trunk.apply(phi, 1.0 / period, state);
      Vec4 u_cmd;
      for (int j = 0; j < 4; ++j) {
        const double r = gait[j].eval(phi);
        const double r_dot = gait[j].deriv(phi) / period;
        u_cmd[j] = kp * (r - state.q[j]) + kd * (r_dot - state.q_dot[j]);
      }
      const TorqueVector u_e =
          dynamics::clamp_to_actuator(model, TorqueVector(u_cmd));
      const TorqueVector u_h =
          human_torque(passive, state, GaitPhase{phi}, 1.0 / period);
      const TorqueVector u_sup =
          ground_support_torque(model, gait, trunk, phi, period);
      if (t >= skip_strides * period) {
        const int node = std::min(phase_nodes - 1,
                                  static_cast<int>(phi * phase_nodes));
        for (int j = 0; j < 4; ++j)
          sum[static_cast<std::size_t>(node) * 4 + j] += u_e[j];
        ++count[node];
      }
      state = dynamics::step_plant(model, state, u_e,
                                   TorqueVector(u_h.values + u_sup.values), dt);
    }

    for (int n = 0; n < phase_nodes; ++n) {
      if (count[n] == 0)
        throw ExecutionError("lookup construction: unvisited phase bin");
      Vec4 mean;
      for (int j = 0; j < 4; ++j)
        mean[j] = sum[static_cast<std::size_t>(n) * 4 + j] / count[n];
      lut.set(static_cast<int>(si), n, mean);
    }
  }
  return lut;
}

SimAssets SimAssets::build(const PlantModel& model) {
  SimAssets a;
  a.lookup = build_lookup_from_tracking(model);
  return a;
}

// ---------------------------------------------------------------------------
// Trial execution
// ---------------------------------------------------------------------------

void TrialConfig::validate() const {
  if (controller != "tbc" && controller != "htc" && controller != "amtc" &&
      controller != "none")
    throw ValidationError("trial: unknown controller '" + controller + "'");
  if (schedule.empty()) throw ValidationError("trial: empty speed schedule");
  for (const SpeedSegment& s : schedule) {
    if (!(s.duration_s > 0.0))
      throw ValidationError("trial: segment durations must be positive");
    if (!(s.speed_mps > 0.0))
      throw ValidationError("trial: segment speeds must be positive");
  }
  policy.validate();
  if (!(control_hz > 0.0) || !(grf_hz > 0.0) || !(emg_hz > 0.0))
    throw ValidationError("trial: rates must be positive");
  const double grf_ratio = grf_hz / control_hz;
  const double emg_ratio = emg_hz / control_hz;
  if (std::abs(grf_ratio - std::round(grf_ratio)) > 1e-9 ||
      std::abs(emg_ratio - std::round(emg_ratio)) > 1e-9)
    throw ValidationError(
        "trial: sensor rates must be integer multiples of the control rate");
  if (!(htc_weight >= 0.0 && htc_weight <= 1.0))
    throw ValidationError("trial: htc weight must be in [0, 1]");
}

double TrialConfig::total_duration() const {
  double d = 0.0;
  for (const SpeedSegment& s : schedule) d += s.duration_s;
  return d;
}

void TrunkProfile::apply(double phi, double rate, PlantState& s) const {
  const double w1 = kTwoPi * rate;
  s.gamma = gamma0 + gamma_amp * std::sin(kTwoPi * phi);
  s.gamma_dot = gamma_amp * w1 * std::cos(kTwoPi * phi);
  s.gamma_ddot = -gamma_amp * w1 * w1 * std::sin(kTwoPi * phi);
  const double w2 = 2.0 * w1;
  s.accel[0] = -sway_amp * w2 * w2 * std::sin(2.0 * kTwoPi * phi);
  s.accel[1] = bob_amp * w2 * w2 * std::cos(2.0 * kTwoPi * phi);
}

dynamics::TorqueVector ground_support_torque(
    const PlantModel& plant, const std::array<FourierSeries, 4>& gait,
    const TrunkProfile& trunk, double phi, double period,
    double stance_fraction, double support_fraction) {
  PlantState nominal;
  const double rate = 1.0 / period;
  trunk.apply(phi, rate, nominal);
  for (int j = 0; j < 4; ++j) {
    nominal.q[j] = gait[j].eval(phi);
    nominal.q_dot[j] = gait[j].deriv(phi) * rate;
    nominal.q_ddot[j] = gait[j].deriv2(phi) * rate * rate;
  }
  const Vec4 demand = dynamics::gamma_torques(plant, nominal).values;
  Vec4 support = Vec4::Zero();
  for (int leg = 0; leg < 2; ++leg) {
    const double local =
        wrap_unit(leg == 0 ? phi : phi - 0.5) / stance_fraction;
    if (local < 1.0) {
      const double s = support_fraction * std::sin(kPi * local);
      support[2 * leg] = s * demand[2 * leg];
      support[2 * leg + 1] = s * demand[2 * leg + 1];
    }
  }
  return dynamics::TorqueVector(support);
}

namespace {

struct SegmentCursor {
  const std::vector<SpeedSegment>* schedule;
  std::size_t index = 0;
  double segment_end;

  explicit SegmentCursor(const std::vector<SpeedSegment>& s)
      : schedule(&s), segment_end(s.front().duration_s) {}

  const SpeedSegment& at(double t) {
    while (index + 1 < schedule->size() && t >= segment_end) {
      ++index;
      segment_end += (*schedule)[index].duration_s;
    }
    return (*schedule)[index];
  }
};

}  // namespace

GaitTrial run_trial(const TrialConfig& config, const PlantModel& model,
                    const SimAssets& assets) {
  config.validate();
  model.validate();

  const bool natural = config.controller == "none";
  PlantModel plant = model;
  plant.include_human_inertia = true;
  plant.include_exo_inertia = !natural;
  const PlantModel est_model = model.exoskeleton_only();

  const double dt = 1.0 / config.control_hz;
  const int grf_per_step = static_cast<int>(std::round(config.grf_hz / config.control_hz));
  const int emg_per_step = static_cast<int>(std::round(config.emg_hz / config.control_hz));
  const int n_steps = static_cast<int>(std::round(config.total_duration() * config.control_hz));

  Rng rng(config.seed);
  Rng grf_rng = rng.fork(1);
  EmgSynthesizer emg_synth(assets.muscles, config.emg_hz, rng.fork(2).integer());
  BreathSynthesizer breath_synth(rng.fork(3).integer());

  // Controllers.
  const double thigh_len = model.exo_thigh.length;
  const double shank_len = model.exo_shank.length;
  control::KinematicPhaseConfig phase_cfg;
  phase_cfg.frozen = config.freeze_phase_estimator;
  std::optional<control::TbcController> tbc;
  std::optional<control::HtcController> htc;
  std::optional<control::AmtcController> amtc;
  const std::array<FourierSeries, 4> amtc_base = nominal_gait(config.amtc_base_speed);
  if (config.controller == "tbc") {
    tbc.emplace(assets.lookup, assets.stride_times, thigh_len, shank_len);
  } else if (config.controller == "htc") {
    htc.emplace(assets.ksc, assets.lookup, config.htc_weight, thigh_len,
                shank_len, phase_cfg);
  } else if (config.controller == "amtc") {
    amtc.emplace(est_model, control::AmtcState::init(config.amtc, amtc_base),
                 phase_cfg);
    amtc->set_adaptation(config.amtc_adaptation);
  }

  // Prime kinematic estimators with the nominal statistics of the first
  // segment; the exoskeleton knows its own reference gait.
  const double first_speed = config.schedule.front().speed_mps;
  const double first_period =
      assets.stride_times.period(first_speed) * config.policy.period_scale;
  {
    double mean_hip = 0.0;
    for (int i = 0; i < 64; ++i)
      mean_hip += config.policy.r_h[0].eval(i / 64.0) / 64.0;
    if (htc) htc->phase_estimator().prime(mean_hip, first_period);
    if (amtc) amtc->phase_estimator().prime(mean_hip, first_period);
  }

  GaitTrial trial;
  trial.meta.controller = config.controller;
  trial.meta.policy = policy_name(config.policy.kind);
  trial.meta.schedule = config.schedule;
  trial.meta.seed = config.seed;
  trial.meta.config_hash = config.config_hash;
  trial.meta.control_hz = config.control_hz;
  trial.meta.grf_hz = config.grf_hz;
  trial.meta.emg_hz = config.emg_hz;
  trial.kin.has_u_int = !natural;
  trial.emg.emplace();
  if (config.controller == "amtc" && config.record_amtc_coeffs)
    trial.amtc_coeffs.emplace();

  const double body_weight = plant.total_mass() * plant.gravity;

  // State initialization on the policy trajectory.
  PlantState state;
  const double rate0 = 1.0 / first_period;
  for (int j = 0; j < 4; ++j) {
    state.q[j] = config.policy.r_h[j].eval(0.0);
    state.q_dot[j] = config.policy.r_h[j].deriv(0.0) * rate0;
  }
  TrunkProfile trunk;
  trunk.apply(0.0, rate0, state);

  SegmentCursor cursor(config.schedule);
  GrfModel grf_model;
  std::size_t gait_segment = static_cast<std::size_t>(-1);
  std::array<FourierSeries, 4> segment_gait;
  double phi_trial = 0.0;
  double phi_prev = 0.0;
  std::array<double, 2> stance_jitter = {1.0, 1.0};
  std::array<bool, 2> in_stance = {true, false};

  for (int k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) / config.control_hz;
    const SpeedSegment& seg = cursor.at(t);
    if (cursor.index != gait_segment) {
      gait_segment = cursor.index;
      segment_gait = nominal_gait(seg.speed_mps);
    }
    const double period =
        assets.stride_times.period(seg.speed_mps) * config.policy.period_scale;
    const double rate = 1.0 / period;

    state.t = t;
    trunk.apply(phi_trial, rate, state);

    // Heel-strike events from the trial gait clock feed the controllers'
    // own speed estimators.
    const bool wrapped = phi_trial < phi_prev;
    const bool crossed_half =
        (phi_prev < 0.5 && phi_trial >= 0.5) || (wrapped && phi_prev < 0.5);
    if (k > 0 && wrapped) {
      if (tbc) tbc->on_heel_strike(Leg::Right, state);
      if (htc) htc->on_heel_strike(Leg::Right, state);
    }
    if (k > 0 && crossed_half) {
      if (tbc) tbc->on_heel_strike(Leg::Left, state);
      if (htc) htc->on_heel_strike(Leg::Left, state);
    }

    // Controller command, clamped at the plant input boundary.
    TorqueVector u_cmd;
    if (tbc) u_cmd = tbc->update(state, seg.speed_mps);
    if (htc) u_cmd = htc->update(state, dt, seg.speed_mps);
    if (amtc) u_cmd = amtc->update(state, dt);
    const TorqueVector u_e =
        natural ? TorqueVector::zero() : dynamics::clamp_to_actuator(plant, u_cmd);

    const TorqueVector u_h = human_torque(config.policy, state, GaitPhase{phi_trial}, rate);

    // Advance the plant (or play the trajectory back) to obtain the realized
    // acceleration for this step.
    PlantState next;
    if (config.playback) {
      for (int j = 0; j < 4; ++j)
        state.q_ddot[j] = config.policy.r_h[j].deriv2(phi_trial) * rate * rate;
      next = state;
      next.t = t + dt;
      const double phi_next = wrap_unit(phi_trial + rate * dt);
      for (int j = 0; j < 4; ++j) {
        next.q[j] = config.policy.r_h[j].eval(phi_next);
        next.q_dot[j] = config.policy.r_h[j].deriv(phi_next) * rate;
      }
    } else {
      const TorqueVector u_sup = ground_support_torque(
          plant, segment_gait, trunk, phi_trial, period,
          grf_model.stance_fraction);
      try {
        next = dynamics::step_plant(
            plant, state, u_e, TorqueVector(u_h.values + u_sup.values), dt);
      } catch (const ExecutionError& e) {
        std::ostringstream os;
        os << "trial aborted (" << config.controller << "/"
           << policy_name(config.policy.kind) << ", seed " << config.seed
           << "): " << e.what();
        throw ExecutionError(os.str());
      }
      state.q_ddot = next.q_ddot;
    }

    const TorqueVector u_int =
        natural ? TorqueVector::zero()
                : dynamics::estimate_interaction_torque(est_model, state, u_e);

    // Record the control-rate row.
    trial.kin.t.push_back(t);
    trial.kin.gamma.push_back(state.gamma);
    trial.kin.gamma_dot.push_back(state.gamma_dot);
    trial.kin.accel[0].push_back(state.accel[0]);
    trial.kin.accel[1].push_back(state.accel[1]);
    for (int j = 0; j < 4; ++j) {
      trial.kin.q[j].push_back(state.q[j]);
      trial.kin.q_dot[j].push_back(state.q_dot[j]);
      trial.kin.u_e[j].push_back(u_e[j]);
      trial.kin.u_int[j].push_back(u_int[j]);
    }

    if (trial.amtc_coeffs && k % 20 == 0) {
      trial.amtc_coeffs->t.push_back(t);
      for (int j = 0; j < 4; ++j)
        trial.amtc_coeffs->theta[j].push_back(amtc->state().theta[j]);
    }

    // GRF sub-samples.
    for (int m = 0; m < grf_per_step; ++m) {
      const auto gi = static_cast<std::uint64_t>(k) * grf_per_step + m;
      const double tg = static_cast<double>(gi) / config.grf_hz;
      const double phi_g = wrap_unit(phi_trial + rate * (tg - t));
      trial.grf.t.push_back(tg);
      for (int leg_i = 0; leg_i < 2; ++leg_i) {
        const Leg leg = static_cast<Leg>(leg_i);
        const double local =
            wrap_unit(leg == Leg::Right ? phi_g : phi_g - 0.5) /
            grf_model.stance_fraction;
        const bool stance = local < 1.0;
        if (stance && !in_stance[leg_i])
          stance_jitter[leg_i] = 1.0 + 0.03 * grf_rng.gaussian();
        in_stance[leg_i] = stance;
        const Eigen::Vector3d f =
            grf_model.sample(phi_g, leg, body_weight, stance_jitter[leg_i]);
        for (int ax = 0; ax < 3; ++ax) {
          const double noise = 0.3 * grf_rng.gaussian();
          trial.grf.f[leg_i][ax].push_back(f[ax] + (stance ? noise : 0.2 * noise));
        }
      }
    }

    // EMG sub-samples.
    emg_synth.generate(u_h.values, phi_trial, emg_per_step, *trial.emg);

    // Breath records.
    breath_synth.step(t, dt, u_h.values, seg.speed_mps, trial.breaths);

    phi_prev = phi_trial;
    phi_trial = wrap_unit(phi_trial + rate * dt);
    state = next;
  }

  // Stride table from the synthetic right-belt vertical GRF, exactly the
  // analysis-side segmentation path.
  const std::vector<double> events = sigproc::detect_heel_strikes(
      trial.grf.f[0][0], config.grf_hz, 30.0, 0.3, 0.0);
  trial.strides = sigproc::segment_strides(events, Leg::Right);

  return trial;
}

}  // namespace exo::sim

const std::array<std::string, 14>& exo::muscle_channel_names() {
  return exo::sim::channel_names_impl();
}
