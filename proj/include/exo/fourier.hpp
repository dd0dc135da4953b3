#ifndef EXO_FOURIER_HPP_
#define EXO_FOURIER_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "exo/common.hpp"

namespace exo {

/// Truncated Fourier series on the unit phase interval:
///   f(phi) = dc + sum_k a_k cos(2*pi*k*phi) + b_k sin(2*pi*k*phi)
/// with analytic derivatives in phi.
struct FourierSeries {
  double dc = 0.0;
  std::vector<double> cos_coeff;  // a_1..a_m
  std::vector<double> sin_coeff;  // b_1..b_m

  FourierSeries() = default;
  FourierSeries(double dc_, std::vector<double> a, std::vector<double> b)
      : dc(dc_), cos_coeff(std::move(a)), sin_coeff(std::move(b)) {}

  static FourierSeries constant(double value) { return FourierSeries(value, {}, {}); }

  int harmonics() const { return static_cast<int>(cos_coeff.size()); }

  double eval(double phi) const {
    double v = dc;
    for (int k = 1; k <= harmonics(); ++k) {
      double w = kTwoPi * k * phi;
      v += cos_coeff[k - 1] * std::cos(w) + sin_coeff[k - 1] * std::sin(w);
    }
    return v;
  }

  /// df/dphi
  double deriv(double phi) const {
    double v = 0.0;
    for (int k = 1; k <= harmonics(); ++k) {
      double wk = kTwoPi * k;
      double w = wk * phi;
      v += wk * (-cos_coeff[k - 1] * std::sin(w) + sin_coeff[k - 1] * std::cos(w));
    }
    return v;
  }

  /// d2f/dphi2
  double deriv2(double phi) const {
    double v = 0.0;
    for (int k = 1; k <= harmonics(); ++k) {
      double wk = kTwoPi * k;
      double w = wk * phi;
      v -= wk * wk * (cos_coeff[k - 1] * std::cos(w) + sin_coeff[k - 1] * std::sin(w));
    }
    return v;
  }

  /// g(phi) = f(phi + dphi), expressed in rotated coefficients.
  FourierSeries phase_shifted(double dphi) const {
    FourierSeries s = *this;
    for (int k = 1; k <= harmonics(); ++k) {
      const double c = std::cos(kTwoPi * k * dphi);
      const double sn = std::sin(kTwoPi * k * dphi);
      const double a = cos_coeff[k - 1];
      const double b = sin_coeff[k - 1];
      s.cos_coeff[k - 1] = a * c + b * sn;
      s.sin_coeff[k - 1] = b * c - a * sn;
    }
    return s;
  }

  FourierSeries scaled(double amp_scale, double dc_shift = 0.0) const {
    FourierSeries s = *this;
    s.dc += dc_shift;
    for (double& v : s.cos_coeff) v *= amp_scale;
    for (double& v : s.sin_coeff) v *= amp_scale;
    return s;
  }
};

/// Fourier basis psi(phi) = [1, cos(2*pi*phi), sin(2*pi*phi), ...,
/// cos(2*pi*m*phi), sin(2*pi*m*phi)]; the leading constant is dropped when
/// include_dc is false.
inline Eigen::VectorXd fourier_basis(double phi, int m, bool include_dc = true) {
  const int n = 2 * m + (include_dc ? 1 : 0);
  Eigen::VectorXd psi(n);
  int idx = 0;
  if (include_dc) psi[idx++] = 1.0;
  for (int k = 1; k <= m; ++k) {
    double w = kTwoPi * k * phi;
    psi[idx++] = std::cos(w);
    psi[idx++] = std::sin(w);
  }
  return psi;
}

/// Series built from a coefficient vector laid out like fourier_basis.
inline FourierSeries series_from_coeffs(const Eigen::VectorXd& theta, int m,
                                        bool include_dc = true) {
  FourierSeries s;
  int idx = 0;
  if (include_dc) s.dc = theta[idx++];
  s.cos_coeff.resize(m);
  s.sin_coeff.resize(m);
  for (int k = 0; k < m; ++k) {
    s.cos_coeff[k] = theta[idx++];
    s.sin_coeff[k] = theta[idx++];
  }
  return s;
}

}  // namespace exo

#endif  // EXO_FOURIER_HPP_
