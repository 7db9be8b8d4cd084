#pragma once

#include "kdvlab/normalform.hpp"
#include "kdvlab/rng.hpp"

namespace kdvlab::sampledata {

/// Reality-paired random scalar theta-function with support |ell| <= lmax.
inline TorusField random_scalar(Rng& rng, int p, int L, int lmax, double size) {
  TorusField f(p, L);
  EllGrid grid(p, L);
  for (size_t e = 0; e < grid.count(); ++e) {
    const auto ell = grid.unflatten(e);
    bool inside = true;
    for (int v : ell) inside = inside && std::abs(v) <= lmax;
    if (!inside) continue;
    const size_t en = grid.negated(e);
    if (en < e) continue;
    cplx v{uniform(rng, -size, size), uniform(rng, -size, size)};
    if (en == e) v = cplx{v.real(), 0.0};
    f.set_flat(e, 0, v);
    f.set_flat(en, 0, std::conj(v));
  }
  return f;
}

/// Reality-paired random perp-supported field (ell, j).
inline TorusField random_perp(Rng& rng, int p, int L, int lmax, const ModeSet& modes, int J,
                              double size, double jdecay = 1.0) {
  TorusField f(p, L, modes, J);
  EllGrid grid(p, L);
  for (size_t e = 0; e < grid.count(); ++e) {
    const auto ell = grid.unflatten(e);
    bool inside = true;
    for (int v : ell) inside = inside && std::abs(v) <= lmax;
    if (!inside) continue;
    const size_t en = grid.negated(e);
    if (en < e) continue;
    for (int j = 1; j <= J; ++j) {
      if (!modes.in_perp(j)) continue;
      const double s = size * std::pow(jbracket(j), -jdecay);
      const cplx v{uniform(rng, -s, s), uniform(rng, -s, s)};
      f.set_flat(e, j, v);
      f.set_flat(en, -j, std::conj(v));
      if (en != e) {
        const cplx v2{uniform(rng, -s, s), uniform(rng, -s, s)};
        f.set_flat(e, -j, v2);
        f.set_flat(en, j, std::conj(v2));
      }
    }
  }
  return f;
}

/// Reality-paired random coefficient field (ell, x-mode), unconstrained.
inline TorusField random_symbol_coeff(Rng& rng, int p, int L, int lmax, int J, int xband,
                                      double size) {
  TorusField f = TorusField::unconstrained(p, L, J);
  EllGrid grid(p, L);
  for (size_t e = 0; e < grid.count(); ++e) {
    const auto ell = grid.unflatten(e);
    bool inside = true;
    for (int v : ell) inside = inside && std::abs(v) <= lmax;
    if (!inside) continue;
    const size_t en = grid.negated(e);
    if (en < e) continue;
    for (int nx = 0; nx <= xband; ++nx) {
      cplx v{uniform(rng, -size, size), uniform(rng, -size, size)};
      if (en == e && nx == 0) v = cplx{v.real(), 0.0};
      f.set_flat(e, nx, v);
      f.set_flat(en, -nx, std::conj(v));
      if (en != e && nx > 0) {
        const cplx v2{uniform(rng, -size, size), uniform(rng, -size, size)};
        f.set_flat(e, -nx, v2);
        f.set_flat(en, nx, std::conj(v2));
      }
    }
  }
  return f;
}

/// Reality-paired linear kernel with smoothing-type decay in all slots.
inline SmoothingKernel random_linear_kernel(Rng& rng, int p, int L, int lmax, const ModeSet& modes,
                                            int J, double size, double decay = 2.0) {
  SmoothingKernel k(p, L, modes, J);
  EllGrid grid(p, L);
  const auto perp = modes.perp_window(J);
  for (size_t e = 0; e < grid.count(); ++e) {
    const auto ell = grid.unflatten(e);
    bool inside = true;
    for (int v : ell) inside = inside && std::abs(v) <= lmax;
    if (!inside) continue;
    const size_t en = grid.negated(e);
    if (en < e) continue;
    for (int n : perp)
      for (int j : perp) {
        const double s = size * std::pow(jbracket(n) * jbracket(j), -decay);
        const cplx v{uniform(rng, -s, s), uniform(rng, -s, s)};
        k.set(e, n, j, k.get(e, n, j) + v);
        k.set(en, -n, -j, std::conj(k.get(e, n, j)));
      }
  }
  return k;
}

/// Reality-paired bilinear kernel, symmetric in the two input slots.
inline SmoothingKernel random_bilinear_kernel(Rng& rng, int p, int L, int lmax,
                                              const ModeSet& modes, int J, double size,
                                              double decay = 2.0) {
  SmoothingKernel k = SmoothingKernel::bilinear(p, L, modes, J);
  EllGrid grid(p, L);
  const auto perp = modes.perp_window(J);
  for (size_t e = 0; e < grid.count(); ++e) {
    const auto ell = grid.unflatten(e);
    bool inside = true;
    for (int v : ell) inside = inside && std::abs(v) <= lmax;
    if (!inside) continue;
    const size_t en = grid.negated(e);
    if (en < e) continue;
    for (int n : perp)
      for (int j : perp)
        for (int jp : perp) {
          if (jp < j) continue;
          const double s = size * std::pow(jbracket(n) * jbracket(j) * jbracket(jp), -decay);
          const cplx v{uniform(rng, -s, s), uniform(rng, -s, s)};
          k.set(e, n, j, jp, k.get(e, n, j, jp) + v);
          k.set(e, n, jp, j, k.get(e, n, j, jp));
          k.set(en, -n, -j, -jp, std::conj(k.get(e, n, j, jp)));
          k.set(en, -n, -jp, -j, std::conj(k.get(e, n, j, jp)));
        }
  }
  return k;
}

/// Random Taylor-truncated Hamiltonian with every degree-three family
/// populated, para-structured P02 (including the degree-two slots whose
/// field terms realize the surviving a(x)), and a trilinear kernel.
inline TaylorHamiltonian random_hamiltonian(Rng& rng, const FrequencyModel& model, int p, int L,
                                            int J, int depth, double size) {
  TaylorHamiltonian H = TaylorHamiltonian::empty(p, L, J, J, model.modes());
  const int lmax = L / 2;
  for (int i = 0; i < p; ++i)
    for (int k = 0; k < p; ++k)
      H.omega_spp[static_cast<size_t>(i)][static_cast<size_t>(k)] =
          (i == k ? 1.0 : 0.0) + uniform(rng, -0.2, 0.2);
  // symmetrize
  for (int i = 0; i < p; ++i)
    for (int k = i + 1; k < p; ++k)
      H.omega_spp[static_cast<size_t>(k)][static_cast<size_t>(i)] =
          H.omega_spp[static_cast<size_t>(i)][static_cast<size_t>(k)];

  H.P00 = random_scalar(rng, p, L, lmax, size);
  for (auto& f : H.P10) f = random_scalar(rng, p, L, lmax, size);
  H.P01 = random_perp(rng, p, L, lmax, model.modes(), J, size);

  H.P00_3 = random_scalar(rng, p, L, lmax, size);
  for (auto& f : H.P10_3) f = random_scalar(rng, p, L, lmax, size);
  for (int i = 0; i < p; ++i)
    for (int k = i; k < p; ++k) {
      TorusField f = random_scalar(rng, p, L, lmax, size);
      H.P20_3[static_cast<size_t>(i)][static_cast<size_t>(k)] = f;
      H.P20_3[static_cast<size_t>(k)][static_cast<size_t>(i)] = f;
    }
  for (int i = 0; i < p; ++i)
    for (int k = 0; k < p; ++k)
      for (int q = 0; q < p; ++q)
        H.P30_3[static_cast<size_t>(i)][static_cast<size_t>(k)][static_cast<size_t>(q)] =
            random_scalar(rng, p, L, lmax, size);
  H.P01_3 = random_perp(rng, p, L, lmax, model.modes(), J, size);
  for (auto& f : H.P11_3) f = random_perp(rng, p, L, lmax, model.modes(), J, size);
  for (int i = 0; i < p; ++i)
    for (int k = 0; k < p; ++k)
      H.P21_3[static_cast<size_t>(i)][static_cast<size_t>(k)] =
          random_perp(rng, p, L, lmax, model.modes(), J, size);

  // P02 symbol: orders 0 .. -(depth+1), (eps, y)-affine slots
  std::vector<Monomial> affine{Monomial::eps1(p)};
  for (int i = 0; i < p; ++i) affine.push_back(Monomial::y(p, i));
  for (int m = 0; m >= -(depth + 1); --m)
    for (const auto& mono : affine)
      H.P02.symbol[m][mono] = random_symbol_coeff(rng, p, L, lmax, J, 3, size);
  // degree-two slots at top order: the O4-tail whose field term is the
  // Theorem's surviving T_{a(x)} dx
  {
    Monomial e2 = Monomial::eps1(p);
    e2.eps = 2;
    H.P02.symbol[0][e2] = random_symbol_coeff(rng, p, L, lmax, J, 3, size);
    Monomial ey = Monomial::eps1(p);
    ey.beta[0] = 1;
    H.P02.symbol[0][ey] = random_symbol_coeff(rng, p, L, lmax, J, 3, size);
  }
  for (const auto& mono : affine)
    H.P02.smooth[mono] = random_linear_kernel(rng, p, L, lmax, model.modes(), J, size);
  H.P03 = random_bilinear_kernel(rng, p, L, lmax, model.modes(), J, size);
  return H;
}

/// A Diophantine-ish frequency model for normal-form tests.
inline FrequencyModel pipeline_model(int p = 1, double gamma = 1e-3, double tau = 1.5) {
  if (p == 1) return FrequencyModel(ModeSet({1}), {1.2357}, {0.4, -0.15}, tau, gamma);
  return FrequencyModel(ModeSet({1, 2}), {1.2357, 2.71828}, {0.4, -0.15}, std::max(tau, 2.5),
                        gamma);
}

}  // namespace kdvlab::testsupport
