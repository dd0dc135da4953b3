#ifndef EXO_TRIAL_HPP_
#define EXO_TRIAL_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "exo/common.hpp"
#include "exo/sigproc.hpp"

namespace exo {

struct SpeedSegment {
  double speed_mps = 0.6;
  double duration_s = 100.0;
};

struct TrialMeta {
  std::string controller = "tbc";  // tbc | htc | amtc | none
  std::string policy = "leader";
  std::vector<SpeedSegment> schedule;
  std::uint64_t seed = 1;
  std::string model_id = "default";
  std::string config_hash;
  double control_hz = 200.0;
  double grf_hz = 1000.0;
  double emg_hz = 2000.0;
};

/// 200 Hz control-rate stream.
struct KinematicsStream {
  std::vector<double> t;
  std::array<std::vector<double>, 4> q, q_dot, u_e, u_int;
  std::vector<double> gamma, gamma_dot;
  std::array<std::vector<double>, 2> accel;
  bool has_u_int = true;

  std::size_t size() const { return t.size(); }
};

/// 1000 Hz per-belt ground reaction forces.
struct GrfStream {
  std::vector<double> t;
  // [leg][axis]: axis 0 vertical, 1 lateral, 2 longitudinal
  std::array<std::array<std::vector<double>, 3>, 2> f;

  std::size_t size() const { return t.size(); }
};

/// 2000 Hz, 14 channels: 7 muscles x {right, left}.
struct EmgStream {
  std::vector<double> t;
  std::array<std::vector<double>, 14> channels;

  std::size_t size() const { return t.size(); }
};

struct BreathStream {
  std::vector<double> t;
  std::vector<double> vo2;

  std::size_t size() const { return t.size(); }
};

/// Optional AMTC coefficient snapshots for post-hoc adaptation plots.
struct CoeffStream {
  std::vector<double> t;
  std::array<std::vector<Eigen::VectorXd>, 4> theta;
};

struct GaitTrial {
  TrialMeta meta;
  KinematicsStream kin;
  GrfStream grf;
  std::optional<EmgStream> emg;
  BreathStream breaths;
  std::vector<sigproc::Stride> strides;
  std::optional<CoeffStream> amtc_coeffs;
};

/// Channel order: gm, bf, rf, vm, mg, sol, ta for the right leg, then the
/// same seven for the left leg.
const std::array<std::string, 14>& muscle_channel_names();

constexpr int kMuscleCount = 14;
constexpr int kMusclesPerLeg = 7;

}  // namespace exo

#endif  // EXO_TRIAL_HPP_
