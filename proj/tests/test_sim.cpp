#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "exo/sigproc.hpp"
#include "exo/sim.hpp"

using namespace exo;
using namespace exo::sim;
using control::GaitPhase;
using dynamics::PlantModel;
using dynamics::PlantState;
using dynamics::TorqueVector;

namespace {

const PlantModel& model() {
  static const PlantModel m = PlantModel::default_model();
  return m;
}

const SimAssets& assets() {
  static const SimAssets a = SimAssets::build(model());
  return a;
}

double mean_abs(std::span<const double> x, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += std::abs(x[i]);
  return s / static_cast<double>(hi - lo);
}

}  // namespace

TEST_CASE("follower torque is pure passive damping") {
  HumanPolicy p = make_policy(PolicyKind::Follower, 0.6);
  p.passive_damping = 2.5;
  PlantState s;
  s.q_dot << 1.0, -0.5, 0.25, 0.0;
  const TorqueVector u = human_torque(p, s, GaitPhase{0.3}, 1.0 / 1.2);
  for (int j = 0; j < 4; ++j)
    CHECK(u[j] == doctest::Approx(-2.5 * s.q_dot[j]).epsilon(1e-12));
}

TEST_CASE("leader exactly on its trajectory produces zero torque") {
  HumanPolicy p = make_policy(PolicyKind::Leader, 0.6);
  const double phi = 0.37, rate = 1.0 / 1.2;
  PlantState s;
  for (int j = 0; j < 4; ++j) {
    s.q[j] = p.r_h[j].eval(phi);
    s.q_dot[j] = p.r_h[j].deriv(phi) * rate;
  }
  const TorqueVector u = human_torque(p, s, GaitPhase{phi}, rate);
  CHECK(u.values.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conflicting with offset pi flips the leader torque") {
  HumanPolicy leader = make_policy(PolicyKind::Leader, 0.6);
  // Single odd harmonic about a dc offset per joint.
  for (int j = 0; j < 4; ++j)
    leader.r_h[j] = FourierSeries(0.1 * (j + 1), {0.0}, {0.2 + 0.05 * j});
  HumanPolicy conflict = leader;
  conflict.kind = PolicyKind::Conflicting;
  conflict.phase_offset = kPi;

  PlantState s;
  for (int j = 0; j < 4; ++j) s.q[j] = leader.r_h[j].dc;  // q at the dc
  const double rate = 1.0 / 1.2;
  for (double phi : {0.1, 0.33, 0.77}) {
    const TorqueVector ul = human_torque(leader, s, GaitPhase{phi}, rate);
    const TorqueVector uc = human_torque(conflict, s, GaitPhase{phi}, rate);
    for (int j = 0; j < 4; ++j)
      CHECK(uc[j] == doctest::Approx(-ul[j]).epsilon(1e-9));
  }
}

TEST_CASE("yielding engagement decays exponentially") {
  HumanPolicy p = make_policy(PolicyKind::Yielding, 0.6);
  p.yield_time_constant = 10.0;
  CHECK(p.engagement_at(0.0) == doctest::Approx(1.0));
  CHECK(p.engagement_at(10.0) == doctest::Approx(std::exp(-1.0)));
  // Residual muscle tone floors the decay.
  CHECK(p.engagement_at(60.0) == doctest::Approx(p.yield_floor));
}

TEST_CASE("policy validation") {
  HumanPolicy p = make_policy(PolicyKind::Leader, 0.6);
  p.engagement = 1.4;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = make_policy(PolicyKind::Leader, 0.6);
  p.kp[2] = -1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("EMG synthesis: zero drive stays below 1% of an active trial's max") {
  const MuscleMap map = MuscleMap::defaults();
  EmgSynthesizer quiet(map, 2000.0, 77);
  EmgSynthesizer active(map, 2000.0, 77);
  EmgStream qs, as;
  for (int k = 0; k < 1600; ++k) {
    const double phi = wrap_unit(k * 0.005 / 1.2);
    // Walking-scale torque sweeping both directions at every joint.
    Vec4 drive;
    drive << 25.0 * std::sin(kTwoPi * phi), 30.0 * std::sin(kTwoPi * phi),
        -25.0 * std::sin(kTwoPi * phi), -30.0 * std::sin(kTwoPi * phi);
    quiet.generate(Vec4::Zero(), phi, 10, qs);
    active.generate(drive, phi, 10, as);
  }
  for (int c = 0; c < kMuscleCount; ++c) {
    const auto env_q = sigproc::process_emg(qs.channels[c], 2000.0);
    const auto env_a = sigproc::process_emg(as.channels[c], 2000.0);
    const double mvc = *std::max_element(env_a.begin(), env_a.end());
    const double quiet_mean = mean_abs(env_q, 1000, env_q.size() - 1000);
    CHECK(quiet_mean / mvc < 0.01);
  }
}

TEST_CASE("EMG envelope doubles with the drive (Monte-Carlo over seeds)") {
  const MuscleMap map = MuscleMap::defaults();
  Vec4 drive;
  drive << 25.0, -18.0, -25.0, 18.0;
  double env1 = 0.0, env2 = 0.0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    EmgSynthesizer a(map, 2000.0, 1000 + seed);
    EmgSynthesizer b(map, 2000.0, 1000 + seed);
    EmgStream sa, sb;
    for (int k = 0; k < 600; ++k) {
      const double phi = wrap_unit(k * 0.005 / 1.2);
      a.generate(drive, phi, 10, sa);
      b.generate(2.0 * drive, phi, 10, sb);
    }
    for (int c = 0; c < kMuscleCount; ++c) {
      const auto ea = sigproc::process_emg(sa.channels[c], 2000.0);
      const auto eb = sigproc::process_emg(sb.channels[c], 2000.0);
      env1 += mean_abs(ea, 500, ea.size() - 500);
      env2 += mean_abs(eb, 500, eb.size() - 500);
    }
  }
  CHECK(env2 / env1 == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("EMG synthesis is bit-deterministic per seed") {
  const MuscleMap map = MuscleMap::defaults();
  EmgSynthesizer a(map, 2000.0, 321), b(map, 2000.0, 321);
  EmgStream sa, sb;
  Vec4 drive;
  drive << 10.0, -5.0, 0.0, 5.0;
  for (int k = 0; k < 50; ++k) {
    a.generate(drive, 0.3, 10, sa);
    b.generate(drive, 0.3, 10, sb);
  }
  for (int c = 0; c < kMuscleCount; ++c)
    for (std::size_t i = 0; i < sa.channels[c].size(); ++i)
      CHECK(sa.channels[c][i] == sb.channels[c][i]);
}

TEST_CASE("muscle map round-trips through its data file") {
  const MuscleMap m = MuscleMap::defaults();
  const auto path = std::filesystem::temp_directory_path() / "mm_test.tsv";
  m.save(path);
  const MuscleMap back = MuscleMap::load(path);
  for (int c = 0; c < kMuscleCount; ++c) {
    CHECK(back.peak_phase[c] == m.peak_phase[c]);
    for (int k = 0; k < 4; ++k) CHECK(back.weights[c][k] == m.weights[c][k]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("breaths: zero torque sits at the baseline within the noise band") {
  BreathSynthesizer synth(9, 4.0, 8.0, 0.015, 0.15);
  BreathStream out;
  for (int k = 0; k < 12000; ++k)
    synth.step(k * 0.005, 0.005, Vec4::Zero(), 0.6, out);
  REQUIRE(out.size() > 10);
  const double baseline = 4.0 + 8.0 * 0.6;
  for (double v : out.vo2) CHECK(std::abs(v - baseline) < 5.0 * 0.15);
  // Spacing in [3, 5] s.
  for (std::size_t i = 1; i < out.t.size(); ++i) {
    CHECK(out.t[i] - out.t[i - 1] >= 3.0 - 1e-9);
    CHECK(out.t[i] - out.t[i - 1] <= 5.0 + 1e-9);
  }
}

TEST_CASE("breaths: active muscle torque raises VO2; same seed repeats") {
  auto run = [&](double amp, std::uint64_t seed) {
    BreathSynthesizer synth(seed);
    BreathStream out;
    for (int k = 0; k < 12000; ++k) {
      const double t = k * 0.005;
      Vec4 u = Vec4::Constant(amp * std::sin(kTwoPi * t / 1.2));
      synth.step(t, 0.005, u, 0.6, out);
    }
    return out;
  };
  double lead = 0.0, follow = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const BreathStream l = run(20.0, seed);
    const BreathStream f = run(3.0, seed);
    lead += std::accumulate(l.vo2.begin(), l.vo2.end(), 0.0) / l.vo2.size();
    follow += std::accumulate(f.vo2.begin(), f.vo2.end(), 0.0) / f.vo2.size();
  }
  CHECK(lead > follow);

  const BreathStream a = run(20.0, 5);
  const BreathStream b = run(20.0, 5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.t[i] == b.t[i]);
    CHECK(a.vo2[i] == b.vo2[i]);
  }
}

TEST_CASE("GRF template: double bump, one threshold crossing per stride") {
  GrfModel g;
  const double w = 900.0;
  // Shape: two peaks around xi ~ 0.27 and 0.73, valley at 0.5.
  const double peak = g.sample(0.27 * g.stance_fraction, Leg::Right, w, 1.0)[0];
  const double valley = g.sample(0.5 * g.stance_fraction, Leg::Right, w, 1.0)[0];
  CHECK(peak > valley);
  CHECK(valley > 0.5 * w);
  CHECK(g.sample(0.9, Leg::Right, w, 1.0)[0] == 0.0);  // swing
}

TEST_CASE("short follower TBC trial: stride count matches the schedule") {
  TrialConfig cfg;
  cfg.controller = "tbc";
  cfg.schedule = {{0.6, 36.0}};
  cfg.policy = make_policy(PolicyKind::Follower, 0.6);
  cfg.seed = 11;
  const GaitTrial trial = run_trial(cfg, model(), assets());

  const double expected = 36.0 / 1.2;
  CHECK(std::abs(static_cast<double>(trial.strides.size()) - expected) <= 1.0);

  // Heel-strike detectability: one right-belt event per stride.
  const auto events = sigproc::detect_heel_strikes(trial.grf.f[0][0],
                                                   cfg.grf_hz, 30.0, 0.3);
  CHECK(std::abs(static_cast<double>(events.size()) - expected) <= 1.0);
  const auto left_events = sigproc::detect_heel_strikes(trial.grf.f[1][0],
                                                        cfg.grf_hz, 30.0, 0.3);
  CHECK(std::abs(static_cast<double>(left_events.size()) - expected) <= 1.0);
}

TEST_CASE("trial streams keep exact rational timestamps") {
  TrialConfig cfg;
  cfg.controller = "tbc";
  cfg.schedule = {{0.8, 12.0}};
  cfg.policy = make_policy(PolicyKind::Follower, 0.8);
  const GaitTrial trial = run_trial(cfg, model(), assets());
  for (std::size_t i = 0; i < trial.kin.t.size(); i += 97)
    CHECK(trial.kin.t[i] == static_cast<double>(i) / cfg.control_hz);
  for (std::size_t i = 0; i < trial.grf.t.size(); i += 997)
    CHECK(trial.grf.t[i] == static_cast<double>(i) / cfg.grf_hz);
  for (std::size_t i = 0; i < trial.emg->t.size(); i += 1997)
    CHECK(trial.emg->t[i] == static_cast<double>(i) / cfg.emg_hz);
  // Stream sizes in exact rate ratio.
  CHECK(trial.grf.t.size() == trial.kin.t.size() * 5);
  CHECK(trial.emg->t.size() == trial.kin.t.size() * 10);
}

TEST_CASE("same config and seed give identical trials") {
  TrialConfig cfg;
  cfg.controller = "amtc";
  cfg.schedule = {{0.6, 10.0}};
  cfg.policy = make_policy(PolicyKind::Leader, 0.6);
  cfg.seed = 3;
  const GaitTrial a = run_trial(cfg, model(), assets());
  const GaitTrial b = run_trial(cfg, model(), assets());
  REQUIRE(a.kin.size() == b.kin.size());
  for (std::size_t i = 0; i < a.kin.size(); ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(a.kin.q[j][i] == b.kin.q[j][i]);
      CHECK(a.kin.u_e[j][i] == b.kin.u_e[j][i]);
      CHECK(a.kin.u_int[j][i] == b.kin.u_int[j][i]);
    }
  }
  REQUIRE(a.emg->size() == b.emg->size());
  for (std::size_t i = 0; i < a.emg->size(); i += 503)
    CHECK(a.emg->channels[4][i] == b.emg->channels[4][i]);
  REQUIRE(a.breaths.size() == b.breaths.size());
  for (std::size_t i = 0; i < a.breaths.size(); ++i)
    CHECK(a.breaths.vo2[i] == b.breaths.vo2[i]);
}

TEST_CASE("AMTC with a leader reduces interaction torque over the block") {
  TrialConfig cfg;
  cfg.controller = "amtc";
  cfg.schedule = {{0.4, 60.0}};
  cfg.policy = make_policy(PolicyKind::Leader, 0.4);
  cfg.policy.period_scale = 1.02;
  cfg.seed = 21;
  const GaitTrial trial = run_trial(cfg, model(), assets());

  const std::size_t n = trial.kin.size();
  double first = 0.0, last = 0.0;
  for (int j = 0; j < 4; ++j) {
    first += mean_abs(trial.kin.u_int[j], 0, n / 4);
    last += mean_abs(trial.kin.u_int[j], 3 * n / 4, n);
  }
  CHECK(last < first);
}

TEST_CASE("EMG envelope level orders follower < leader < conflicting") {
  auto mean_envelope = [&](PolicyKind kind) {
    TrialConfig cfg;
    cfg.controller = "tbc";
    cfg.schedule = {{0.6, 30.0}};
    cfg.policy = make_policy(kind, 0.6);
    cfg.seed = 7;
    const GaitTrial trial = run_trial(cfg, model(), assets());
    double s = 0.0;
    for (int c = 0; c < kMuscleCount; ++c) {
      const auto env = sigproc::process_emg(trial.emg->channels[c], 2000.0);
      s += mean_abs(env, env.size() / 2, env.size());
    }
    return s;
  };
  const double follower = mean_envelope(PolicyKind::Follower);
  const double leader = mean_envelope(PolicyKind::Leader);
  const double conflicting = mean_envelope(PolicyKind::Conflicting);
  CHECK(follower < leader);
  CHECK(leader < conflicting);
}

TEST_CASE("natural walking trial has no exoskeleton torques") {
  TrialConfig cfg;
  cfg.controller = "none";
  cfg.schedule = {{0.6, 10.0}};
  cfg.policy = make_policy(PolicyKind::Leader, 0.6);
  const GaitTrial trial = run_trial(cfg, model(), assets());
  CHECK(!trial.kin.has_u_int);
  for (int j = 0; j < 4; ++j)
    for (double v : trial.kin.u_e[j]) CHECK(v == 0.0);
  CHECK(trial.strides.size() > 5);
}

TEST_CASE("invalid configs are rejected") {
  TrialConfig cfg;
  cfg.controller = "pid";
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrialConfig{};
  cfg.schedule.clear();
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrialConfig{};
  cfg.grf_hz = 950.0;  // not an integer multiple of 200
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("nominal gait stays within the joint limits at all speeds") {
  const PlantModel& m = model();
  for (double v : {0.4, 0.5, 0.6, 0.7, 0.8}) {
    const auto gait = nominal_gait(v);
    for (int i = 0; i <= 400; ++i) {
      const double phi = i / 400.0;
      for (int j = 0; j < 4; ++j) {
        const double q = gait[j].eval(phi);
        const Vec2& lim = (j % 2 == 0) ? m.hip_limits : m.knee_limits;
        CHECK(q > lim[0] + 0.05);
        CHECK(q < lim[1] - 0.05);
      }
    }
  }
}

TEST_CASE("left-leg gait is the right-leg gait shifted by half a stride") {
  const auto gait = nominal_gait(0.6);
  for (double phi : {0.0, 0.2, 0.55, 0.9}) {
    CHECK(gait[2].eval(phi) == doctest::Approx(gait[0].eval(phi + 0.5)).epsilon(1e-9));
    CHECK(gait[3].eval(phi) == doctest::Approx(gait[1].eval(phi + 0.5)).epsilon(1e-9));
  }
}
