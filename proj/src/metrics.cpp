#include "exo/metrics.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "exo/table_io.hpp"

namespace exo::metrics {

PcsaWeights PcsaWeights::defaults() {
  // cm^2: gluteus maximus, biceps femoris (long head), rectus femoris,
  // vastus medialis, gastrocnemius medialis, soleus, tibialis anterior.
  return {{33.5, 11.3, 13.8, 20.6, 21.1, 51.8, 10.9}};
}

double PcsaWeights::total() const {
  return std::accumulate(area.begin(), area.end(), 0.0);
}

void PcsaWeights::save(const std::filesystem::path& path) const {
  io::Table t;
  t.kind = "pcsa_weights";
  t.add_column("muscle", "index");
  t.add_column("pcsa", "cm^2");
  for (int m = 0; m < kMusclesPerLeg; ++m)
    t.push_row({static_cast<double>(m), area[m]});
  io::write_table(path, t);
}

PcsaWeights PcsaWeights::load(const std::filesystem::path& path) {
  const io::Table t = io::read_table(path);
  if (t.kind != "pcsa_weights")
    throw ValidationError("expected pcsa_weights table, got '" + t.kind + "'");
  if (t.n_rows() != kMusclesPerLeg)
    throw ValidationError("pcsa_weights: expected 7 muscles");
  PcsaWeights w{};
  const int c_m = t.col("muscle"), c_p = t.col("pcsa");
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    const int m = static_cast<int>(t.at(r, c_m));
    if (m < 0 || m >= kMusclesPerLeg)
      throw ValidationError("pcsa_weights: muscle index out of range");
    if (!(t.at(r, c_p) > 0.0))
      throw ValidationError("pcsa_weights: areas must be positive");
    w.area[m] = t.at(r, c_p);
  }
  return w;
}

double integrate_series(std::span<const double> x, double fs, double t0,
                        double a, double b, double (*transform)(double)) {
  if (!(b > a)) throw ValidationError("integrate_series: empty window");
  const double t_end = t0 + static_cast<double>(x.size() - 1) / fs;
  if (a < t0 - 0.5 / fs || b > t_end + 0.5 / fs) {
    std::ostringstream os;
    os << "integrate_series: window [" << a << ", " << b
       << "] not covered by series [" << t0 << ", " << t_end << "]";
    throw ValidationError(os.str());
  }
  a = std::max(a, t0);
  b = std::min(b, t_end);

  const auto idx_a = static_cast<std::size_t>(std::ceil((a - t0) * fs));
  const auto idx_b = static_cast<std::size_t>(std::floor((b - t0) * fs));

  auto value_at = [&](double t) {
    return transform(sigproc::sample_at(x, fs, t0, t));
  };

  double integral = 0.0;
  if (idx_a > idx_b) {
    // Window inside one sample interval.
    integral = 0.5 * (value_at(a) + value_at(b)) * (b - a);
    return integral;
  }
  const double ta = t0 + static_cast<double>(idx_a) / fs;
  const double tb = t0 + static_cast<double>(idx_b) / fs;
  if (a < ta) integral += 0.5 * (value_at(a) + transform(x[idx_a])) * (ta - a);
  for (std::size_t i = idx_a; i < idx_b; ++i)
    integral += 0.5 * (transform(x[i]) + transform(x[i + 1])) / fs;
  if (b > tb) integral += 0.5 * (transform(x[idx_b]) + value_at(b)) * (b - tb);
  return integral;
}

namespace {
double square(double v) { return v * v; }
double abs_value(double v) { return std::abs(v); }
}  // namespace

double muscle_effort_stride(std::span<const double> envelope, double fs,
                            double t0, const sigproc::Stride& stride) {
  return integrate_series(envelope, fs, t0, stride.start, stride.end, square) /
         stride.duration();
}

double interaction_stride(std::span<const double> u_int, double fs, double t0,
                          const sigproc::Stride& stride) {
  return integrate_series(u_int, fs, t0, stride.start, stride.end, abs_value) /
         stride.duration();
}

double pcsa_weighted_average(const std::array<double, kMuscleCount>& mu,
                             const PcsaWeights& weights) {
  double num = 0.0, den = 0.0;
  for (int c = 0; c < kMuscleCount; ++c) {
    const double w = weights.weight_for_channel(c);
    num += w * mu[c];
    den += w;
  }
  return num / den;
}

BlockMetrics aggregate_block(std::span<const StrideMetrics> strides,
                             const PcsaWeights& weights) {
  if (strides.empty())
    throw ValidationError("aggregate_block: need at least one stride");
  BlockMetrics b;
  b.stride_count = static_cast<int>(strides.size());
  for (const StrideMetrics& s : strides) {
    b.stride_time_total += s.duration;
    for (int c = 0; c < kMuscleCount; ++c) b.mu_sum[c] += s.duration * s.mu[c];
    b.tau_sum += s.duration * s.tau;
  }
  for (int c = 0; c < kMuscleCount; ++c)
    b.mu_mean[c] = b.mu_sum[c] / b.stride_time_total;
  b.tau_mean = b.tau_sum / b.stride_time_total;
  b.mu_total_sum = pcsa_weighted_average(b.mu_sum, weights);
  b.mu_total_mean = pcsa_weighted_average(b.mu_mean, weights);
  b.tau_total_sum = b.tau_sum.mean();
  b.tau_total_mean = b.tau_mean.mean();
  return b;
}

Vo2Result vo2_normalize(std::span<const double> breaths, double baseline) {
  if (!(baseline > 0.0))
    throw ValidationError("vo2_normalize: missing or non-positive baseline");
  Vo2Result r;
  r.normalized.reserve(breaths.size());
  for (double v : breaths) {
    r.normalized.push_back(v / baseline);
    r.total += v / baseline;
  }
  return r;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ValidationError("pearson: inputs must have equal size >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0)
    throw ValidationError("degenerate profile");
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> resample_stride(std::span<const double> x, double fs,
                                    double t0, const sigproc::Stride& stride) {
  const std::array<sigproc::Stride, 1> one = {stride};
  return sigproc::phase_average(x, fs, t0, one).mean;
}

GrfCorrelation grf_correlation(
    const GrfStream& grf, Leg leg, std::span<const sigproc::Stride> strides,
    const std::array<std::vector<double>, 3>& reference) {
  for (const auto& ref : reference)
    if (ref.size() != sigproc::kPhaseGridPoints)
      throw ValidationError("grf_correlation: reference must be on the "
                            "101-point phase grid");
  GrfCorrelation out;
  const double fs = 1.0 / (grf.t[1] - grf.t[0]);
  const int leg_i = static_cast<int>(leg);
  for (const sigproc::Stride& s : strides) {
    out.stride_index.push_back(s.index);
    for (int ax = 0; ax < 3; ++ax) {
      const std::vector<double> prof =
          resample_stride(grf.f[leg_i][ax], fs, grf.t.front(), s);
      out.r[ax].push_back(pearson(prof, reference[ax]));
    }
  }
  return out;
}

}  // namespace exo::metrics
