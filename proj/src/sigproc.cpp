#include "exo/sigproc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace exo::sigproc {

namespace {

void check_cutoff(double cutoff_hz, double fs) {
  if (!(fs > 0.0)) throw ValidationError("filter design: fs must be positive");
  if (!(cutoff_hz > 0.0) || cutoff_hz >= fs / 2.0)
    throw ValidationError("filter design: cutoff must lie in (0, fs/2)");
}

}  // namespace

Biquad design_lowpass(double cutoff_hz, double fs) {
  check_cutoff(cutoff_hz, fs);
  const double k = std::tan(kPi * cutoff_hz / fs);
  const double norm = 1.0 / (1.0 + std::sqrt(2.0) * k + k * k);
  Biquad s;
  s.b0 = k * k * norm;
  s.b1 = 2.0 * s.b0;
  s.b2 = s.b0;
  s.a1 = 2.0 * (k * k - 1.0) * norm;
  s.a2 = (1.0 - std::sqrt(2.0) * k + k * k) * norm;
  return s;
}

Biquad design_highpass(double cutoff_hz, double fs) {
  check_cutoff(cutoff_hz, fs);
  const double k = std::tan(kPi * cutoff_hz / fs);
  const double norm = 1.0 / (1.0 + std::sqrt(2.0) * k + k * k);
  Biquad s;
  s.b0 = norm;
  s.b1 = -2.0 * norm;
  s.b2 = norm;
  s.a1 = 2.0 * (k * k - 1.0) * norm;
  s.a2 = (1.0 - std::sqrt(2.0) * k + k * k) * norm;
  return s;
}

std::vector<double> filter_cascade(std::vector<Biquad> sections,
                                   std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  for (Biquad& s : sections) {
    s.reset();
    for (double& v : y) v = s.step(v);
  }
  return y;
}

namespace {

// Steady-state section states for a constant input, scaled by the first
// sample. Suppresses the start-up transient in each filtfilt pass.
void prime_for_step(Biquad& s, double x0) {
  const double denom = 1.0 + s.a1 + s.a2;
  const double y0 = denom != 0.0 ? (s.b0 + s.b1 + s.b2) / denom * x0 : 0.0;
  s.s2 = s.b2 * x0 - s.a2 * y0;
  s.s1 = s.b1 * x0 - s.a1 * y0 + s.s2;
}

void filter_in_place(std::vector<Biquad> sections, std::vector<double>& y) {
  for (Biquad& s : sections) {
    s.reset();
    if (!y.empty()) prime_for_step(s, y.front());
    for (double& v : y) v = s.step(v);
  }
}

}  // namespace

std::vector<double> bandpass_filtfilt(std::span<const double> x, double fs,
                                      double low_hz, double high_hz) {
  if (low_hz >= high_hz)
    throw ValidationError("bandpass: low cutoff must be below high cutoff");
  const std::size_t warmup =
      static_cast<std::size_t>(std::ceil(fs / low_hz));
  if (x.size() < 3 * warmup) {
    std::ostringstream os;
    os << "bandpass: series too short (" << x.size() << " samples, need >= "
       << 3 * warmup << ")";
    throw ValidationError(os.str());
  }

  const std::size_t n = x.size();
  // Pad well past the slowest pole's decay so both filtfilt orderings agree
  // at the retained edges.
  const std::size_t pad = std::min(n - 1, 4 * warmup);

  // Odd reflection about both endpoints.
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i)
    ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + pad);
  for (std::size_t i = 0; i < pad; ++i)
    ext[n + pad + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  const std::vector<Biquad> sections = {design_highpass(low_hz, fs),
                                        design_lowpass(high_hz, fs)};
  filter_in_place(sections, ext);
  std::reverse(ext.begin(), ext.end());
  filter_in_place(sections, ext);
  std::reverse(ext.begin(), ext.end());

  return std::vector<double>(ext.begin() + pad, ext.begin() + pad + n);
}

std::vector<double> moving_average(std::span<const double> x, int window) {
  if (window < 1) throw ValidationError("moving_average: window must be >= 1");
  if (window % 2 == 0) ++window;
  const int n = static_cast<int>(x.size());
  const int half = window / 2;
  std::vector<double> y(n);
  // Prefix sums keep this O(n); edges use the truncated window.
  std::vector<double> prefix(n + 1, 0.0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    y[i] = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1);
  }
  return y;
}

std::vector<double> process_emg(std::span<const double> raw, double fs,
                                double low_hz, double high_hz,
                                double window_s) {
  if (fs < 1000.0)
    throw ValidationError("process_emg: sample rate must be >= 1000 Hz");
  std::vector<double> y = bandpass_filtfilt(raw, fs, low_hz, high_hz);
  for (double& v : y) v = std::abs(v);
  const int window = static_cast<int>(std::round(window_s * fs));
  return moving_average(y, window);
}

std::vector<double> normalize_mvc(std::span<const double> envelope, double mvc,
                                  const std::string& channel) {
  if (!(mvc > 0.0))
    throw ValidationError("normalize_mvc: non-positive MVC for channel " +
                          channel);
  std::vector<double> y(envelope.begin(), envelope.end());
  for (double& v : y) v /= mvc;
  return y;
}

std::vector<double> detect_heel_strikes(std::span<const double> vgrf, double fs,
                                        double threshold, double refractory,
                                        double t0) {
  if (!(threshold > 0.0))
    throw ValidationError("detect_heel_strikes: threshold must be positive");
  std::vector<double> events;
  double last = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < vgrf.size(); ++i) {
    if (vgrf[i - 1] < threshold && vgrf[i] >= threshold) {
      const double frac = (threshold - vgrf[i - 1]) / (vgrf[i] - vgrf[i - 1]);
      const double t = t0 + (static_cast<double>(i - 1) + frac) / fs;
      if (t - last >= refractory) {
        events.push_back(t);
        last = t;
      }
    }
  }
  return events;
}

std::vector<Stride> segment_strides(std::span<const double> events, Leg leg) {
  std::vector<Stride> strides;
  if (events.size() < 2) return strides;
  strides.reserve(events.size() - 1);
  for (std::size_t i = 0; i + 1 < events.size(); ++i) {
    Stride s;
    s.index = static_cast<int>(i);
    s.start = events[i];
    s.end = events[i + 1];
    s.leg = leg;
    if (!(s.end > s.start))
      throw ValidationError("segment_strides: events must be increasing");
    strides.push_back(s);
  }
  return strides;
}

double sample_at(std::span<const double> x, double fs, double t0, double t) {
  const double pos = (t - t0) * fs;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (pos < 0.0 || pos > static_cast<double>(n - 1))
    throw ValidationError("sample_at: time outside series span");
  const auto i = static_cast<std::ptrdiff_t>(pos);
  if (i >= n - 1) return x[n - 1];
  const double frac = pos - static_cast<double>(i);
  return x[i] + frac * (x[i + 1] - x[i]);
}

PhaseProfile phase_average(std::span<const double> x, double fs, double t0,
                           std::span<const Stride> strides) {
  if (strides.empty())
    throw ValidationError("phase_average: need at least one stride");
  const int n = kPhaseGridPoints;
  const double t_end = t0 + static_cast<double>(x.size() - 1) / fs;
  const std::size_t n_strides = strides.size();
  std::vector<double> resampled(n_strides * n);
  for (std::size_t si = 0; si < n_strides; ++si) {
    const Stride& s = strides[si];
    if (s.start < t0 - 0.5 / fs || s.end > t_end + 0.5 / fs) {
      std::ostringstream os;
      os << "phase_average: stride " << s.index << " outside signal span";
      throw ValidationError(os.str());
    }
    for (int i = 0; i < n; ++i) {
      const double t =
          std::clamp(s.start + s.duration() * i / (n - 1), t0, t_end);
      resampled[si * n + i] = sample_at(x, fs, t0, t);
    }
  }
  PhaseProfile p;
  p.mean.resize(n);
  p.sd.resize(n);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t si = 0; si < n_strides; ++si) sum += resampled[si * n + i];
    const double mean = sum / static_cast<double>(n_strides);
    double sq = 0.0;
    for (std::size_t si = 0; si < n_strides; ++si) {
      const double d = resampled[si * n + i] - mean;
      sq += d * d;
    }
    p.mean[i] = mean;
    p.sd[i] = std::sqrt(sq / static_cast<double>(n_strides));
  }
  return p;
}

}  // namespace exo::sigproc
