#pragma once

#include <random>

#include "kdvlab/fourier.hpp"

namespace kdvlab {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random real trigonometric polynomial with |c_k| ~ <k>^{-decay}.
inline FourierSeries random_series(Rng& rng, int max_mode, double decay = 0.0,
                                   bool mean_zero = false) {
  FourierSeries u(max_mode, mean_zero);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int k = mean_zero ? 1 : 0; k <= max_mode; ++k) {
    const double w = std::pow(jbracket(k), -decay);
    u.set_pair(k, k == 0 ? cplx{d(rng), 0.0} : cplx{d(rng) * w, d(rng) * w});
  }
  return u;
}

/// Random mean-zero series supported on S_perp within the window.
inline FourierSeries random_perp_series(Rng& rng, const ModeSet& modes, int window,
                                        double decay = 0.0) {
  FourierSeries u(window, true);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int k = 1; k <= window; ++k) {
    if (!modes.in_perp(k)) continue;
    const double w = std::pow(jbracket(k), -decay);
    u.set_pair(k, cplx{d(rng) * w, d(rng) * w});
  }
  return u;
}

}  // namespace kdvlab
