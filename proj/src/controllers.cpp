#include "exo/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "exo/table_io.hpp"

namespace exo::control {

GaitPhase phase_time(double t, double period) {
  if (!(period > 0.0)) throw ValidationError("phase_time: period must be > 0");
  return GaitPhase{wrap_unit(std::fmod(t, period) / period)};
}

// ---------------------------------------------------------------------------
// KinematicPhaseEstimator
// ---------------------------------------------------------------------------

KinematicPhaseEstimator::KinematicPhaseEstimator(const KinematicPhaseConfig& cfg)
    : cfg_(cfg) {}

void KinematicPhaseEstimator::prime(double hip_mean, double period) {
  mean_ = hip_mean;
  omega_ = kTwoPi / period;
  rate_ = 1.0 / period;
  initialized_ = true;
  // Leave raw_prev_ untouched; the first update after prime() re-anchors it.
  raw_prev_ = std::numeric_limits<double>::quiet_NaN();
}

GaitPhase KinematicPhaseEstimator::update(const Vec4& q, const Vec4& q_dot,
                                          double dt) {
  if (!(dt > 0.0))
    throw ValidationError("phase estimator: dt must be positive");
  if (!initialized_) {
    mean_ = q[0];
    omega_ = kTwoPi / cfg_.nominal_period;
    rate_ = 1.0 / cfg_.nominal_period;
    raw_prev_ = std::numeric_limits<double>::quiet_NaN();
    initialized_ = true;
  }

  if (q_dot.cwiseAbs().maxCoeff() < cfg_.stationary_velocity) {
    still_time_ += dt;
    if (still_time_ > cfg_.stationary_timeout)
      throw ExecutionError("phase undefined: stationary");
  } else {
    still_time_ = 0.0;
  }

  const double x = q[0] - mean_;
  const double y = -q_dot[0] / omega_;
  // Calibrated so a sinusoidal hip angle sin(2*pi*t/T) maps to phi = t/T.
  const double raw = wrap_unit(std::atan2(y, x) / kTwoPi + 0.25);

  if (std::isnan(raw_prev_)) {
    phase_ = raw;
  } else {
    double d = raw - raw_prev_;
    d -= std::round(d);  // into [-0.5, 0.5]
    const double advance = std::max(d, 0.0);
    phase_ = wrap_unit(phase_ + advance);
    if (!cfg_.frozen) {
      const double inst_omega = kTwoPi * advance / dt;
      const double alpha_f = dt / cfg_.freq_time_constant;
      omega_ += alpha_f * (inst_omega - omega_);
      omega_ = std::clamp(omega_, kTwoPi / cfg_.max_period,
                          kTwoPi / cfg_.min_period);
    }
    const double rc = 1.0 / (kTwoPi * cfg_.rate_cutoff_hz);
    const double alpha_r = dt / (dt + rc);
    rate_ += alpha_r * (advance / dt - rate_);
  }
  raw_prev_ = raw;

  if (!cfg_.frozen) {
    mean_ += (q[0] - mean_) * dt / cfg_.mean_time_constant;
  }
  return GaitPhase{phase_};
}

// ---------------------------------------------------------------------------
// Speed estimation
// ---------------------------------------------------------------------------

const char* speed_name(SpeedClass c) {
  switch (c) {
    case SpeedClass::UltraSlow: return "ultra-slow";
    case SpeedClass::Slow: return "slow";
    case SpeedClass::Moderate: return "moderate";
  }
  return "?";
}

SpeedClass classify_speed(double v) {
  if (v <= 0.5) return SpeedClass::UltraSlow;
  if (v <= 0.7) return SpeedClass::Slow;
  return SpeedClass::Moderate;
}

double foot_separation(const Vec4& q, double gamma, double thigh_length,
                       double shank_length) {
  auto foot_x = [&](int hip, int knee) {
    const double th1 = gamma + q[hip];
    const double th2 = th1 + q[knee];
    return thigh_length * std::sin(th1) + shank_length * std::sin(th2);
  };
  return foot_x(0, 1) - foot_x(2, 3);
}

SpeedEstimator::SpeedEstimator(double thigh_length, double shank_length)
    : thigh_length_(thigh_length), shank_length_(shank_length) {}

void SpeedEstimator::on_heel_strike(Leg leg, double t, const Vec4& q,
                                    double gamma) {
  const double sep = foot_separation(q, gamma, thigh_length_, shank_length_);
  if (leg == Leg::Left) {
    left_sep_ = std::abs(sep);
    left_seen_ = true;
    return;
  }
  if (has_right_) {
    const double stride_time = t - last_right_t_;
    if (stride_time > 0.2) {
      const double step_r = std::abs(last_right_sep_);
      const double step_l = left_seen_ ? left_sep_ : step_r;
      last_length_ = step_r + step_l;
      last_time_ = stride_time;
      stride_speeds_.push_back(last_length_ / stride_time);
      while (stride_speeds_.size() > 3) stride_speeds_.pop_front();
    }
  }
  has_right_ = true;
  last_right_t_ = t;
  last_right_sep_ = sep;
  left_seen_ = false;
}

double SpeedEstimator::speed() const {
  if (stride_speeds_.empty()) throw ExecutionError("speed unavailable");
  return std::accumulate(stride_speeds_.begin(), stride_speeds_.end(), 0.0) /
         static_cast<double>(stride_speeds_.size());
}

SpeedClass SpeedEstimator::speed_class() const {
  return classify_speed(speed());
}

double SpeedEstimator::last_stride_length() const {
  if (stride_speeds_.empty()) throw ExecutionError("speed unavailable");
  return last_length_;
}

double SpeedEstimator::last_stride_time() const {
  if (stride_speeds_.empty()) throw ExecutionError("speed unavailable");
  return last_time_;
}

// ---------------------------------------------------------------------------
// TorqueLookup
// ---------------------------------------------------------------------------

TorqueLookup::TorqueLookup(std::vector<double> speeds, int phase_nodes)
    : speeds_(std::move(speeds)), phase_nodes_(phase_nodes) {
  if (speeds_.empty() || phase_nodes_ < 2)
    throw ValidationError("torque lookup: need >= 1 speed and >= 2 nodes");
  if (!std::is_sorted(speeds_.begin(), speeds_.end()))
    throw ValidationError("torque lookup: speeds must be sorted");
  values_.assign(speeds_.size() * static_cast<std::size_t>(phase_nodes_),
                 Vec4::Zero());
}

void TorqueLookup::set(int speed_index, int node, const Vec4& torque) {
  values_.at(static_cast<std::size_t>(speed_index) * phase_nodes_ + node) =
      torque;
}

Vec4 TorqueLookup::node_value(int speed_index, int node) const {
  return values_.at(static_cast<std::size_t>(speed_index) * phase_nodes_ +
                    node);
}

Vec4 TorqueLookup::torque(double phi, double speed_mps) const {
  if (empty()) throw ValidationError("torque lookup: empty table");
  const double p = wrap_unit(phi) * phase_nodes_;
  const int i0 = static_cast<int>(p) % phase_nodes_;
  const int i1 = (i0 + 1) % phase_nodes_;  // periodic continuation
  const double fp = p - std::floor(p);

  auto at_speed = [&](int si) -> Vec4 {
    return (1.0 - fp) * node_value(si, i0) + fp * node_value(si, i1);
  };

  if (speeds_.size() == 1 || speed_mps <= speeds_.front())
    return at_speed(0);
  if (speed_mps >= speeds_.back())
    return at_speed(static_cast<int>(speeds_.size()) - 1);
  const auto upper =
      std::upper_bound(speeds_.begin(), speeds_.end(), speed_mps);
  const int s1 = static_cast<int>(upper - speeds_.begin());
  const int s0 = s1 - 1;
  const double fs = (speed_mps - speeds_[s0]) / (speeds_[s1] - speeds_[s0]);
  return (1.0 - fs) * at_speed(s0) + fs * at_speed(s1);
}

void TorqueLookup::save(const std::filesystem::path& path) const {
  io::Table t;
  t.kind = "torque_lookup";
  t.add_column("phi", "unitless");
  t.add_column("speed", "m/s");
  t.add_column("hip_right", "N.m");
  t.add_column("knee_right", "N.m");
  t.add_column("hip_left", "N.m");
  t.add_column("knee_left", "N.m");
  for (std::size_t si = 0; si < speeds_.size(); ++si) {
    for (int n = 0; n < phase_nodes_; ++n) {
      const Vec4 v = node_value(static_cast<int>(si), n);
      t.push_row({static_cast<double>(n) / phase_nodes_, speeds_[si], v[0],
                  v[1], v[2], v[3]});
    }
  }
  io::write_table(path, t);
}

TorqueLookup TorqueLookup::load(const std::filesystem::path& path) {
  const io::Table t = io::read_table(path);
  if (t.kind != "torque_lookup")
    throw ValidationError("expected torque_lookup table, got '" + t.kind + "'");
  const int c_phi = t.col("phi"), c_speed = t.col("speed");
  const int c_j[4] = {t.col("hip_right"), t.col("knee_right"),
                      t.col("hip_left"), t.col("knee_left")};

  std::vector<double> speeds;
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    const double s = t.at(r, c_speed);
    if (speeds.empty() || s != speeds.back()) speeds.push_back(s);
  }
  if (speeds.empty()) throw ValidationError("torque lookup: empty table");
  const int nodes = static_cast<int>(t.n_rows() / speeds.size());
  if (nodes < 2 ||
      t.n_rows() != speeds.size() * static_cast<std::size_t>(nodes))
    throw ValidationError("torque lookup: ragged table");

  TorqueLookup lut(speeds, nodes);
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    const int si = static_cast<int>(r) / nodes;
    const int n = static_cast<int>(r) % nodes;
    const double expected_phi = static_cast<double>(n) / nodes;
    if (std::abs(t.at(r, c_phi) - expected_phi) > 1e-9)
      throw ValidationError("torque lookup: unexpected phase grid");
    lut.set(si, n,
            Vec4(t.at(r, c_j[0]), t.at(r, c_j[1]), t.at(r, c_j[2]),
                 t.at(r, c_j[3])));
  }
  return lut;
}

dynamics::TorqueVector tbc_torque(const TorqueLookup& table, GaitPhase phi,
                                  double speed_mps) {
  return dynamics::TorqueVector(table.torque(phi.phi, speed_mps));
}

// ---------------------------------------------------------------------------
// KscNetwork
// ---------------------------------------------------------------------------

KscNetwork KscNetwork::zeros(int hidden) {
  KscNetwork n;
  n.w1 = Eigen::MatrixXd::Zero(hidden, 9);
  n.b1 = Eigen::VectorXd::Zero(hidden);
  n.w2 = Eigen::MatrixXd::Zero(hidden, hidden);
  n.b2 = Eigen::VectorXd::Zero(hidden);
  n.w3 = Eigen::MatrixXd::Zero(4, hidden);
  n.b3 = Eigen::VectorXd::Zero(4);
  n.input_mean = Eigen::VectorXd::Zero(9);
  n.input_scale = Eigen::VectorXd::Ones(9);
  n.output_mean = Eigen::VectorXd::Zero(4);
  n.output_scale = Eigen::VectorXd::Ones(4);
  return n;
}

void KscNetwork::check_dimensions() const {
  const auto h1 = w1.rows();
  const auto h2 = w2.rows();
  if (w1.cols() != 9 || b1.size() != h1 || w2.cols() != h1 ||
      b2.size() != h2 || w3.cols() != h2 || w3.rows() != 4 || b3.size() != 4 ||
      input_mean.size() != 9 || input_scale.size() != 9 ||
      output_mean.size() != 4 || output_scale.size() != 4)
    throw ValidationError("ksc network: dimension mismatch");
}

Vec4 KscNetwork::eval(const Vec4& q, const Vec4& q_dot, double gamma) const {
  Eigen::VectorXd x(9);
  x << q[0], q[1], q[2], q[3], q_dot[0], q_dot[1], q_dot[2], q_dot[3], gamma;
  x = (x - input_mean).cwiseQuotient(input_scale);
  const Eigen::VectorXd h1 = (w1 * x + b1).array().tanh();
  const Eigen::VectorXd h2 = (w2 * h1 + b2).array().tanh();
  const Eigen::VectorXd y =
      ((w3 * h2 + b3).cwiseProduct(output_scale)) + output_mean;
  return Vec4(y[0], y[1], y[2], y[3]);
}

namespace {

void push_matrix(io::Table& t, int tag, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.push_row({static_cast<double>(tag), static_cast<double>(r),
                  static_cast<double>(c), m(r, c)});
}

Eigen::MatrixXd pull_matrix(const io::Table& t, int tag) {
  const int c_tag = t.col("tensor"), c_r = t.col("row"), c_c = t.col("col"),
            c_v = t.col("value");
  Eigen::Index rows = 0, cols = 0;
  for (std::size_t i = 0; i < t.n_rows(); ++i) {
    if (static_cast<int>(t.at(i, c_tag)) != tag) continue;
    rows = std::max(rows, static_cast<Eigen::Index>(t.at(i, c_r)) + 1);
    cols = std::max(cols, static_cast<Eigen::Index>(t.at(i, c_c)) + 1);
  }
  if (rows == 0)
    throw ValidationError("ksc network: missing tensor in parameter file");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  for (std::size_t i = 0; i < t.n_rows(); ++i) {
    if (static_cast<int>(t.at(i, c_tag)) != tag) continue;
    m(static_cast<Eigen::Index>(t.at(i, c_r)),
      static_cast<Eigen::Index>(t.at(i, c_c))) = t.at(i, c_v);
  }
  return m;
}

}  // namespace

void KscNetwork::save(const std::filesystem::path& path) const {
  io::Table t;
  t.kind = "ksc_params";
  t.add_column("tensor", "id");
  t.add_column("row", "index");
  t.add_column("col", "index");
  t.add_column("value", "mixed");
  push_matrix(t, 0, w1);
  push_matrix(t, 1, b1);
  push_matrix(t, 2, w2);
  push_matrix(t, 3, b2);
  push_matrix(t, 4, w3);
  push_matrix(t, 5, b3);
  push_matrix(t, 6, input_mean);
  push_matrix(t, 7, input_scale);
  push_matrix(t, 8, output_mean);
  push_matrix(t, 9, output_scale);
  io::write_table(path, t);
}

KscNetwork KscNetwork::load(const std::filesystem::path& path) {
  const io::Table t = io::read_table(path);
  if (t.kind != "ksc_params")
    throw ValidationError("expected ksc_params table, got '" + t.kind + "'");
  KscNetwork n;
  n.w1 = pull_matrix(t, 0);
  n.b1 = pull_matrix(t, 1);
  n.w2 = pull_matrix(t, 2);
  n.b2 = pull_matrix(t, 3);
  n.w3 = pull_matrix(t, 4);
  n.b3 = pull_matrix(t, 5);
  n.input_mean = pull_matrix(t, 6);
  n.input_scale = pull_matrix(t, 7);
  n.output_mean = pull_matrix(t, 8);
  n.output_scale = pull_matrix(t, 9);
  n.check_dimensions();
  return n;
}

dynamics::TorqueVector ksc_torque(const KscNetwork& net, const Vec4& q,
                                  const Vec4& q_dot, double gamma) {
  net.check_dimensions();
  return dynamics::TorqueVector(net.eval(q, q_dot, gamma));
}

dynamics::TorqueVector htc_torque(const dynamics::TorqueVector& u_ksc,
                                  const dynamics::TorqueVector& u_gpc,
                                  double w) {
  if (!(w >= 0.0 && w <= 1.0))
    throw ValidationError("htc_torque: blend weight must be in [0, 1]");
  return dynamics::TorqueVector(w * u_ksc.values + (1.0 - w) * u_gpc.values);
}

// ---------------------------------------------------------------------------
// AMTC
// ---------------------------------------------------------------------------

AmtcState AmtcState::init(const AmtcConfig& cfg,
                          const std::array<FourierSeries, 4>& base) {
  if (cfg.harmonics < 1)
    throw ValidationError("amtc: need at least one harmonic");
  if (!(cfg.coeff_guard > 0.0))
    throw ValidationError("amtc: coefficient guard must be positive");
  AmtcState s;
  s.config = cfg;
  s.base = base;
  const int n = s.coeff_count();
  for (auto& th : s.theta) th = Eigen::VectorXd::Zero(n);
  return s;
}

ReferencePoint amtc_reference(const AmtcState& state, GaitPhase phi,
                              double phase_rate, double phase_accel) {
  ReferencePoint out;
  const double p = wrap_unit(phi.phi);
  for (int j = 0; j < 4; ++j) {
    if (!state.theta[j].allFinite())
      throw ValidationError("amtc: non-finite coefficients");
    const FourierSeries delta = series_from_coeffs(
        state.theta[j], state.config.harmonics, state.config.include_dc);
    const double val = state.base[j].eval(p) + delta.eval(p);
    const double d1 = state.base[j].deriv(p) + delta.deriv(p);
    const double d2 = state.base[j].deriv2(p) + delta.deriv2(p);
    out.r[j] = val;
    out.r_dot[j] = d1 * phase_rate;
    out.r_ddot[j] = d2 * phase_rate * phase_rate + d1 * phase_accel;
  }
  return out;
}

void amtc_adapt(AmtcState& state, const Vec4& tracking_error, GaitPhase phi,
                double dt) {
  if (!(dt > 0.0)) throw ValidationError("amtc_adapt: dt must be positive");
  if (!all_finite(tracking_error))
    throw ValidationError("amtc_adapt: non-finite tracking error");
  const Eigen::VectorXd psi = fourier_basis(
      wrap_unit(phi.phi), state.config.harmonics, state.config.include_dc);
  for (int j = 0; j < 4; ++j) {
    state.theta[j] -=
        state.config.learning_rate[j] * tracking_error[j] * dt * psi;
    if (state.theta[j].cwiseAbs().maxCoeff() > state.config.coeff_guard) {
      std::ostringstream os;
      os << "adaptation diverged at " << joint_name(static_cast<Joint>(j))
         << ": coefficient magnitude exceeds " << state.config.coeff_guard;
      throw ExecutionError(os.str());
    }
  }
}

dynamics::TorqueVector amtc_torque(const dynamics::PlantModel& model,
                                   const dynamics::PlantState& state,
                                   const ReferencePoint& ref) {
  dynamics::PlantState s = state;
  s.q = ref.r;
  s.q_dot = ref.r_dot;
  s.q_ddot = ref.r_ddot;
  return dynamics::gamma_torques(model, s);
}

// ---------------------------------------------------------------------------
// Controller frontends
// ---------------------------------------------------------------------------

double StrideTimeTable::period(double speed_mps) const {
  if (speeds.empty() || speeds.size() != periods.size())
    throw ValidationError("stride time table: inconsistent");
  if (speed_mps <= speeds.front()) return periods.front();
  if (speed_mps >= speeds.back()) return periods.back();
  const auto upper = std::upper_bound(speeds.begin(), speeds.end(), speed_mps);
  const std::size_t i1 = static_cast<std::size_t>(upper - speeds.begin());
  const std::size_t i0 = i1 - 1;
  const double f = (speed_mps - speeds[i0]) / (speeds[i1] - speeds[i0]);
  return (1.0 - f) * periods[i0] + f * periods[i1];
}

TbcController::TbcController(TorqueLookup table, StrideTimeTable periods,
                             double thigh_length, double shank_length)
    : table_(std::move(table)),
      periods_(std::move(periods)),
      speed_(thigh_length, shank_length) {}

dynamics::TorqueVector TbcController::update(const dynamics::PlantState& s,
                                             double commanded_speed) {
  phase_ = phase_time(s.t, periods_.period(commanded_speed));
  const double v = speed_.available() ? speed_.speed() : commanded_speed;
  return tbc_torque(table_, phase_, speed_value(classify_speed(v)));
}

void TbcController::on_heel_strike(Leg leg, const dynamics::PlantState& s) {
  speed_.on_heel_strike(leg, s.t, s.q, s.gamma);
}

HtcController::HtcController(KscNetwork net, TorqueLookup table, double weight,
                             double thigh_length, double shank_length,
                             const KinematicPhaseConfig& phase_cfg)
    : net_(std::move(net)),
      table_(std::move(table)),
      weight_(weight),
      speed_(thigh_length, shank_length),
      phase_est_(phase_cfg) {
  if (!(weight_ >= 0.0 && weight_ <= 1.0))
    throw ValidationError("htc: blend weight must be in [0, 1]");
  net_.check_dimensions();
}

dynamics::TorqueVector HtcController::update(const dynamics::PlantState& s,
                                             double dt,
                                             double commanded_speed) {
  const GaitPhase phi = phase_est_.update(s.q, s.q_dot, dt);
  const double v = speed_.available() ? speed_.speed() : commanded_speed;
  const dynamics::TorqueVector u_gpc =
      tbc_torque(table_, phi, speed_value(classify_speed(v)));
  const dynamics::TorqueVector u_ksc =
      ksc_torque(net_, s.q, s.q_dot, s.gamma);
  return htc_torque(u_ksc, u_gpc, weight_);
}

void HtcController::on_heel_strike(Leg leg, const dynamics::PlantState& s) {
  speed_.on_heel_strike(leg, s.t, s.q, s.gamma);
}

AmtcController::AmtcController(dynamics::PlantModel estimation_model,
                               AmtcState state,
                               const KinematicPhaseConfig& phase_cfg)
    : model_(std::move(estimation_model)),
      state_(std::move(state)),
      phase_est_(phase_cfg) {}

dynamics::TorqueVector AmtcController::update(const dynamics::PlantState& s,
                                              double dt) {
  const GaitPhase phi = phase_est_.update(s.q, s.q_dot, dt);
  last_ref_ = amtc_reference(state_, phi, phase_est_.phase_rate());
  const dynamics::TorqueVector u = amtc_torque(model_, s, last_ref_);
  if (adapt_) {
    const Vec4 e = last_ref_.r - s.q;
    amtc_adapt(state_, e, phi, dt);
  }
  return u;
}

}  // namespace exo::control
