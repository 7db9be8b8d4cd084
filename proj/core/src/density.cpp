#include "kdvlab/density.hpp"

#include <stdexcept>

#include "kdvlab/grid.hpp"

namespace kdvlab {

PerturbationDensity::PerturbationDensity(std::vector<FourierSeries> coeffs)
    : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) throw std::invalid_argument("density needs at least one coefficient");
  for (const auto& c : coeffs_)
    if (!c.is_real(1e-10)) throw std::invalid_argument("density coefficients must be real");
}

PerturbationDensity PerturbationDensity::polynomial(const std::vector<double>& coeffs) {
  std::vector<FourierSeries> cs;
  cs.reserve(coeffs.size());
  for (double v : coeffs) {
    FourierSeries c(0, false);
    c.set_pair(0, cplx{v, 0.0});
    cs.push_back(std::move(c));
  }
  return PerturbationDensity(std::move(cs));
}

int PerturbationDensity::coeff_band() const {
  int band = 0;
  for (const auto& c : coeffs_) band = std::max(band, c.max_mode());
  return band;
}

FourierSeries PerturbationDensity::zeta_derivative(const FourierSeries& u, int order) const {
  const int D = degree();
  const int K = u.max_mode();
  // widest mode produced by any monomial c_d u^{d-order}
  int band = coeff_band();
  if (D - order > 0) band += (D - order) * K;
  const int M = good_grid_size(std::max(band, K), 0);
  RealGrid& g = grid_for(M);

  std::vector<double> gu(static_cast<size_t>(M)), acc(static_cast<size_t>(M), 0.0),
      gc(static_cast<size_t>(M)), pow_u(static_cast<size_t>(M), 1.0);
  g.to_grid(u, gu);
  for (int d = order; d <= D; ++d) {
    double fall = 1.0;
    for (int r = 0; r < order; ++r) fall *= static_cast<double>(d - r);
    g.to_grid(coeffs_[static_cast<size_t>(d)], gc);
    for (int n = 0; n < M; ++n)
      acc[static_cast<size_t>(n)] += fall * gc[static_cast<size_t>(n)] * pow_u[static_cast<size_t>(n)];
    if (d < D)
      for (int n = 0; n < M; ++n) pow_u[static_cast<size_t>(n)] *= gu[static_cast<size_t>(n)];
  }
  FourierSeries out(K, false);
  g.from_grid(acc, out);
  return out;
}

}  // namespace kdvlab
