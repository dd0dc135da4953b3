#ifndef EXO_IP_HPP_
#define EXO_IP_HPP_

#include <span>
#include <string>
#include <vector>

#include "exo/common.hpp"
#include "exo/metrics.hpp"

namespace exo::ip {

enum class Quadrant {
  DisagreementIncrease,  // d_tau > 0, d_mu > 0
  HumanTakesControl,     // d_tau < 0, d_mu > 0
  DisagreementDecrease,  // d_tau < 0, d_mu < 0
  HumanYields,           // d_tau > 0, d_mu < 0
  Boundary,              // an exactly-zero coordinate
};

const char* quadrant_name(Quadrant q);

/// One sample of the Interaction Portrait: the change in total interaction
/// torque vs the change in total muscular effort between two blocks, in
/// Cartesian and polar form.
struct IpPoint {
  double d_tau = 0.0;
  double d_mu = 0.0;
  double radius = 0.0;
  double phase = 0.0;  // (-pi, pi]
  Quadrant quadrant = Quadrant::Boundary;
  int stride_index = -1;  // -1 for block-level points
  std::string c1, c2;
  double speed = 0.0;
};

/// Fill radius/phase/quadrant from the Cartesian components.
IpPoint make_ip_point(double d_tau, double d_mu);

/// Block-level portrait point between two blocks at the same speed. Throws
/// naming the controller/speed when the blocks do not match.
IpPoint ip_block(const metrics::BlockMetrics& from,
                 const metrics::BlockMetrics& to);

/// One point per stride of the second block against the first block's
/// duration-normalized means.
std::vector<IpPoint> ip_stridewise(
    std::span<const metrics::StrideMetrics> to_strides,
    const metrics::BlockMetrics& from_block, const metrics::PcsaWeights&);

enum class NormalizationScope {
  Component,  // block level: both components / max absolute component
  Radius,     // stride level: radii / max radius, phases preserved
};

struct NormalizedSet {
  std::vector<IpPoint> points;
  bool degenerate = false;  // all-zero input set, returned unchanged
  double scale = 1.0;
};

NormalizedSet normalize_ip(std::vector<IpPoint> points,
                           NormalizationScope scope);

/// Counts of point phases per half-open bin [k*w, (k+1)*w) covering
/// (-pi, pi]; zero-radius points are excluded. Throws when the bin width
/// does not divide 2*pi.
std::vector<int> polar_histogram(std::span<const IpPoint> points,
                                 double bin_width = kPi / 6.0);

/// Phases in stride order, plus a trailing circular running mean (mean
/// resultant vector over the window). Windows with a near-zero resultant are
/// flagged undefined and carry NaN.
struct PhaseEvolution {
  std::vector<int> stride;
  std::vector<double> phase;
  std::vector<double> running_mean;
  std::vector<bool> mean_defined;
};

PhaseEvolution phase_evolution(std::span<const IpPoint> points,
                               int window = 10);

}  // namespace exo::ip

#endif  // EXO_IP_HPP_
