#ifndef EXO_METRICS_HPP_
#define EXO_METRICS_HPP_

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "exo/common.hpp"
#include "exo/sigproc.hpp"
#include "exo/trial.hpp"

namespace exo::metrics {

/// Physiological cross-sectional areas (cm^2) used as weights for the total
/// muscular effort, one value per muscle (same for both legs).
struct PcsaWeights {
  std::array<double, kMusclesPerLeg> area;

  static PcsaWeights defaults();
  void save(const std::filesystem::path&) const;
  static PcsaWeights load(const std::filesystem::path&);

  double weight_for_channel(int channel) const {
    return area[channel % kMusclesPerLeg];
  }
  double total() const;
};

/// Trapezoidal integral of transform(x(t)) over [a, b] with linear
/// interpolation at the window ends. Throws when [a, b] is not covered.
double integrate_series(std::span<const double> x, double fs, double t0,
                        double a, double b, double (*transform)(double));

/// mu_{m,s} = (1/T_s) * integral of the squared normalized envelope.
double muscle_effort_stride(std::span<const double> envelope, double fs,
                            double t0, const sigproc::Stride& stride);

/// tau_{j,s} = (1/T_s) * integral of |u_int_j|.
double interaction_stride(std::span<const double> u_int, double fs, double t0,
                          const sigproc::Stride& stride);

/// Per-stride aggregates for one block.
struct StrideMetrics {
  int stride_index = 0;
  double start = 0.0;
  double duration = 0.0;
  std::array<double, kMuscleCount> mu{};  // per muscle
  double mu_total = 0.0;                  // PCSA-weighted average
  Vec4 tau = Vec4::Zero();                // per joint
  double tau_total = 0.0;                 // mean over joints
};

/// Block-level aggregates. The *_sum fields follow the duration-weighted-sum
/// formulas (units: effort x seconds); the *_mean fields are the
/// duration-normalized variants (sum / total stride time), comparable across
/// blocks of unequal length and used for stride-wise portraits.
struct BlockMetrics {
  std::string controller;
  std::string policy;
  double speed = 0.0;
  int stride_count = 0;
  double stride_time_total = 0.0;

  std::array<double, kMuscleCount> mu_sum{};
  double mu_total_sum = 0.0;
  std::array<double, kMuscleCount> mu_mean{};
  double mu_total_mean = 0.0;

  Vec4 tau_sum = Vec4::Zero();
  double tau_total_sum = 0.0;
  Vec4 tau_mean = Vec4::Zero();
  double tau_total_mean = 0.0;

  double vo2_total = 0.0;  // sum of normalized breaths
  int breath_count = 0;
};

double pcsa_weighted_average(const std::array<double, kMuscleCount>& mu,
                             const PcsaWeights& weights);

/// Duration-weighted block aggregation of per-stride metrics.
BlockMetrics aggregate_block(std::span<const StrideMetrics> strides,
                             const PcsaWeights& weights);

/// Normalized VO2: each breath divided by the no-exoskeleton baseline for
/// its speed; total is the sum. Throws when the baseline is missing.
struct Vo2Result {
  std::vector<double> normalized;
  double total = 0.0;
};
Vo2Result vo2_normalize(std::span<const double> breaths, double baseline);

/// Pearson correlation; throws ValidationError("degenerate profile") when
/// either input has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Resample one stride of a series onto the 101-point phase grid.
std::vector<double> resample_stride(std::span<const double> x, double fs,
                                    double t0, const sigproc::Stride& stride);

/// Per-stride Pearson correlation of each GRF axis against the natural
/// walking reference profile (both on the 101-point grid).
struct GrfCorrelation {
  std::vector<int> stride_index;
  std::array<std::vector<double>, 3> r;  // vertical, lateral, longitudinal
};
GrfCorrelation grf_correlation(
    const GrfStream& grf, Leg leg, std::span<const sigproc::Stride> strides,
    const std::array<std::vector<double>, 3>& reference);

}  // namespace exo::metrics

#endif  // EXO_METRICS_HPP_
