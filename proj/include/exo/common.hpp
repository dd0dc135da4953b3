#ifndef EXO_COMMON_HPP_
#define EXO_COMMON_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace exo {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;

/// Joint ordering used everywhere: [hip_right, knee_right, hip_left, knee_left].
enum class Joint : int { HipRight = 0, KneeRight = 1, HipLeft = 2, KneeLeft = 3 };

enum class Leg : int { Right = 0, Left = 1 };

inline const char* joint_name(Joint j) {
  switch (j) {
    case Joint::HipRight: return "hip_right";
    case Joint::KneeRight: return "knee_right";
    case Joint::HipLeft: return "hip_left";
    case Joint::KneeLeft: return "knee_left";
  }
  return "?";
}

inline const char* leg_name(Leg l) { return l == Leg::Right ? "right" : "left"; }

/// Base error. Validation errors map to CLI exit code 2, execution errors to 3.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad input: configuration, file contents, out-of-range arguments.
struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// Failure while running: integration aborts, divergence, degenerate data.
struct ExecutionError : Error {
  explicit ExecutionError(const std::string& msg) : Error(msg) {}
};

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

/// Wrap into [0, 1).
inline double wrap_unit(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? r - 1.0 : r;
}

/// Wrap into (-pi, pi].
inline double wrap_pi(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  if (r > kPi) r -= kTwoPi;
  return r;
}

inline bool all_finite(const Vec4& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]) &&
         std::isfinite(v[3]);
}

inline bool all_finite(const Vec2& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]);
}

}  // namespace exo

#endif  // EXO_COMMON_HPP_
