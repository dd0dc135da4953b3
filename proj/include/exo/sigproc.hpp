#ifndef EXO_SIGPROC_HPP_
#define EXO_SIGPROC_HPP_

#include <span>
#include <string>
#include <vector>

#include "exo/common.hpp"

namespace exo::sigproc {

/// One stride delimited by consecutive same-leg heel strikes.
struct Stride {
  int index = 0;
  double start = 0.0;  // s
  double end = 0.0;    // s
  Leg leg = Leg::Right;

  double duration() const { return end - start; }
};

/// Direct-form-II-transposed second-order section.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
  double s1 = 0.0, s2 = 0.0;

  double step(double x) {
    const double y = b0 * x + s1;
    s1 = b1 * x - a1 * y + s2;
    s2 = b2 * x - a2 * y;
    return y;
  }
  void reset() { s1 = s2 = 0.0; }
};

/// Second-order Butterworth sections (bilinear transform).
Biquad design_lowpass(double cutoff_hz, double fs);
Biquad design_highpass(double cutoff_hz, double fs);

/// Causal single pass through a biquad cascade.
std::vector<double> filter_cascade(std::vector<Biquad> sections,
                                   std::span<const double> x);

/// Zero-phase (forward-backward) 4th-order Butterworth bandpass: a 2nd-order
/// highpass at `low_hz` cascaded with a 2nd-order lowpass at `high_hz`,
/// applied in both directions over an odd-reflection padded copy.
/// Requires x.size() >= 3 * warmup where warmup = ceil(fs / low_hz).
std::vector<double> bandpass_filtfilt(std::span<const double> x, double fs,
                                      double low_hz, double high_hz);

/// Centered moving average; window forced odd, edges truncated.
std::vector<double> moving_average(std::span<const double> x, int window);

/// EMG conditioning: zero-phase 5-500 Hz bandpass, full-wave rectification,
/// centered 100 ms moving average. Sample rate must be >= 1000 Hz.
std::vector<double> process_emg(std::span<const double> raw, double fs,
                                double low_hz = 5.0, double high_hz = 500.0,
                                double window_s = 0.1);

/// Elementwise division by the per-channel MVC. Throws ValidationError naming
/// the channel when mvc <= 0.
std::vector<double> normalize_mvc(std::span<const double> envelope, double mvc,
                                  const std::string& channel);

/// Rising-threshold crossings with linear sub-sample interpolation; events
/// closer than `refractory` to the previous accepted event are discarded.
/// Sample i is at time t0 + i / fs. Empty result allowed.
std::vector<double> detect_heel_strikes(std::span<const double> vgrf, double fs,
                                        double threshold = 30.0,
                                        double refractory = 0.3,
                                        double t0 = 0.0);

/// Strides delimited by consecutive events of one leg. Fewer than two events
/// gives an empty list.
std::vector<Stride> segment_strides(std::span<const double> events,
                                    Leg leg = Leg::Right);

constexpr int kPhaseGridPoints = 101;

/// Pointwise mean and (population) standard deviation over strides resampled
/// onto the fixed 101-point phase grid by linear interpolation.
struct PhaseProfile {
  std::vector<double> mean;  // size kPhaseGridPoints
  std::vector<double> sd;
};

PhaseProfile phase_average(std::span<const double> x, double fs, double t0,
                           std::span<const Stride> strides);

/// Linear interpolation of a uniformly sampled series at time t.
double sample_at(std::span<const double> x, double fs, double t0, double t);

}  // namespace exo::sigproc

#endif  // EXO_SIGPROC_HPP_
