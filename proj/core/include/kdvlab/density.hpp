#pragma once

#include <vector>

#include "kdvlab/fourier.hpp"

namespace kdvlab {

/// Perturbation density f(x, z) = sum_{d=0}^{D} c_d(x) z^d with real
/// trigonometric-polynomial coefficients.
class PerturbationDensity {
 public:
  PerturbationDensity() = default;
  explicit PerturbationDensity(std::vector<FourierSeries> coeffs);

  /// f with constant-in-x coefficients, e.g. {0, 0, 0, 1} is z^3.
  static PerturbationDensity polynomial(const std::vector<double>& coeffs);

  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  const FourierSeries& coeff(int d) const { return coeffs_[static_cast<size_t>(d)]; }
  int coeff_band() const;

  /// d^(order)/dz^(order) f(x, u(x)) evaluated alias-free on a grid wide
  /// enough for the full polynomial degree, truncated to u's window.
  FourierSeries zeta_derivative(const FourierSeries& u, int order) const;

 private:
  std::vector<FourierSeries> coeffs_;
};

}  // namespace kdvlab
