#include "exo/ip.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace exo::ip {

const char* quadrant_name(Quadrant q) {
  switch (q) {
    case Quadrant::DisagreementIncrease: return "disagreement_increase";
    case Quadrant::HumanTakesControl: return "human_takes_control";
    case Quadrant::DisagreementDecrease: return "disagreement_decrease";
    case Quadrant::HumanYields: return "human_yields";
    case Quadrant::Boundary: return "boundary";
  }
  return "?";
}

IpPoint make_ip_point(double d_tau, double d_mu) {
  if (!std::isfinite(d_tau) || !std::isfinite(d_mu))
    throw ValidationError("ip point: non-finite components");
  IpPoint p;
  p.d_tau = d_tau;
  p.d_mu = d_mu;
  p.radius = std::hypot(d_tau, d_mu);
  p.phase = std::atan2(d_mu, d_tau);
  if (d_tau == 0.0 || d_mu == 0.0) {
    p.quadrant = Quadrant::Boundary;
  } else if (d_tau > 0.0) {
    p.quadrant = d_mu > 0.0 ? Quadrant::DisagreementIncrease
                            : Quadrant::HumanYields;
  } else {
    p.quadrant = d_mu > 0.0 ? Quadrant::HumanTakesControl
                            : Quadrant::DisagreementDecrease;
  }
  return p;
}

IpPoint ip_block(const metrics::BlockMetrics& from,
                 const metrics::BlockMetrics& to) {
  if (from.speed != to.speed) {
    std::ostringstream os;
    os << "ip_block: blocks at different speeds (" << from.controller << " @ "
       << from.speed << " vs " << to.controller << " @ " << to.speed << ")";
    throw ValidationError(os.str());
  }
  if (from.stride_count == 0 || to.stride_count == 0) {
    std::ostringstream os;
    os << "ip_block: missing block ("
       << (from.stride_count == 0 ? from.controller : to.controller) << ", "
       << from.speed << ")";
    throw ValidationError(os.str());
  }
  IpPoint p = make_ip_point(to.tau_total_sum - from.tau_total_sum,
                            to.mu_total_sum - from.mu_total_sum);
  p.c1 = from.controller;
  p.c2 = to.controller;
  p.speed = from.speed;
  return p;
}

std::vector<IpPoint> ip_stridewise(
    std::span<const metrics::StrideMetrics> to_strides,
    const metrics::BlockMetrics& from_block,
    const metrics::PcsaWeights& weights) {
  if (from_block.stride_count == 0) {
    std::ostringstream os;
    os << "ip_stridewise: missing baseline block (" << from_block.controller
       << ", " << from_block.speed << ")";
    throw ValidationError(os.str());
  }
  (void)weights;  // stride metrics already carry the weighted totals
  std::vector<IpPoint> out;
  out.reserve(to_strides.size());
  for (const metrics::StrideMetrics& s : to_strides) {
    IpPoint p = make_ip_point(s.tau_total - from_block.tau_total_mean,
                              s.mu_total - from_block.mu_total_mean);
    p.stride_index = s.stride_index;
    p.c1 = from_block.controller;
    p.speed = from_block.speed;
    out.push_back(p);
  }
  return out;
}

NormalizedSet normalize_ip(std::vector<IpPoint> points,
                           NormalizationScope scope) {
  NormalizedSet result;
  double scale = 0.0;
  for (const IpPoint& p : points) {
    if (scope == NormalizationScope::Component)
      scale = std::max({scale, std::abs(p.d_tau), std::abs(p.d_mu)});
    else
      scale = std::max(scale, p.radius);
  }
  if (scale == 0.0) {
    result.points = std::move(points);
    result.degenerate = true;
    return result;
  }
  result.scale = scale;
  result.points.reserve(points.size());
  for (const IpPoint& p : points) {
    IpPoint q = make_ip_point(p.d_tau / scale, p.d_mu / scale);
    q.stride_index = p.stride_index;
    q.c1 = p.c1;
    q.c2 = p.c2;
    q.speed = p.speed;
    result.points.push_back(q);
  }
  return result;
}

std::vector<int> polar_histogram(std::span<const IpPoint> points,
                                 double bin_width) {
  if (!(bin_width > 0.0))
    throw ValidationError("polar_histogram: bin width must be positive");
  const double ratio = kTwoPi / bin_width;
  const int bins = static_cast<int>(std::round(ratio));
  if (std::abs(ratio - bins) > 1e-9)
    throw ValidationError("polar_histogram: bin width must divide 2*pi");
  std::vector<int> counts(bins, 0);
  for (const IpPoint& p : points) {
    if (p.radius == 0.0) continue;
    double phase = wrap_pi(p.phase);
    if (phase >= kPi) phase = -kPi;  // pi belongs with -pi in the wrap bin
    int idx = static_cast<int>(std::floor((phase + kPi) / bin_width));
    idx = std::clamp(idx, 0, bins - 1);
    ++counts[idx];
  }
  return counts;
}

PhaseEvolution phase_evolution(std::span<const IpPoint> points, int window) {
  if (window < 1)
    throw ValidationError("phase_evolution: window must be >= 1");
  PhaseEvolution ev;
  std::vector<const IpPoint*> ordered;
  ordered.reserve(points.size());
  for (const IpPoint& p : points) ordered.push_back(&p);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const IpPoint* a, const IpPoint* b) {
                     return a->stride_index < b->stride_index;
                   });
  const std::size_t n = ordered.size();
  ev.stride.reserve(n);
  ev.phase.reserve(n);
  ev.running_mean.reserve(n);
  ev.mean_defined.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ev.stride.push_back(ordered[i]->stride_index);
    ev.phase.push_back(ordered[i]->phase);
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window)
                               ? i + 1 - static_cast<std::size_t>(window)
                               : 0;
    double sx = 0.0, sy = 0.0;
    for (std::size_t k = lo; k <= i; ++k) {
      sx += std::cos(ev.phase[k]);
      sy += std::sin(ev.phase[k]);
    }
    const double count = static_cast<double>(i - lo + 1);
    const double resultant = std::hypot(sx, sy) / count;
    if (resultant < 1e-8) {
      ev.running_mean.push_back(std::numeric_limits<double>::quiet_NaN());
      ev.mean_defined.push_back(false);
    } else {
      ev.running_mean.push_back(std::atan2(sy, sx));
      ev.mean_defined.push_back(true);
    }
  }
  return ev;
}

}  // namespace exo::ip
