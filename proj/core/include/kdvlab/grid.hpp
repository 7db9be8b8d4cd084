#pragma once

#include <memory>
#include <span>
#include <vector>

#include "kdvlab/fourier.hpp"

namespace kdvlab {

/// Real-to-complex FFT engine of fixed grid size M (collocation points
/// x_n = n/M). Plans are created with FFTW_ESTIMATE so repeated runs of the
/// same binary produce bit-identical output.
class RealGrid {
 public:
  explicit RealGrid(int points);
  ~RealGrid();
  RealGrid(const RealGrid&) = delete;
  RealGrid& operator=(const RealGrid&) = delete;

  int points() const { return m_; }

  /// values[n] = sum_k c_k e^{2 pi i k n / M}; requires max_mode <= M/2 - 1.
  void to_grid(const FourierSeries& u, std::span<double> values) const;
  void to_grid_coeffs(std::span<const cplx> half, std::span<double> values) const;

  /// Coefficients of the trigonometric interpolant, truncated to K.
  void from_grid(std::span<const double> values, FourierSeries& out) const;
  /// Half-spectrum variant for hot loops: out[k], k = 0..K.
  void from_grid_half(std::span<const double> values, std::span<cplx> out) const;

  std::span<double> scratch(int which) const;

 private:
  int m_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Smallest FFT-friendly grid size (2^a 3^b 5^c) that resolves modes up to
/// `band` without aliasing, i.e. points >= max(2*band + 2, minimum).
int good_grid_size(int band, int minimum = 0);

/// Shared per-thread engine cache.
RealGrid& grid_for(int points);

}  // namespace kdvlab
