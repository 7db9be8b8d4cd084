#include <cmath>

#include "doctest.h"
#include "kdvlab/fourier.hpp"
#include "kdvlab/grid.hpp"
#include "kdvlab/rng.hpp"

using namespace kdvlab;

namespace {

FourierSeries cosine(int k, int K, double amp = 1.0) {
  FourierSeries u(K, false);
  u.set_pair(k, cplx{amp / 2.0, 0.0});
  return u;
}

FourierSeries sine(int k, int K, double amp = 1.0) {
  FourierSeries u(K, false);
  u.set_pair(k, cplx{0.0, -amp / 2.0});
  return u;
}

// independent summation oracle, accumulated in long double and reversed order
double sobolev_norm_oracle(const FourierSeries& u, double s) {
  long double acc = 0.0L;
  for (int k = u.max_mode(); k >= -u.max_mode(); --k) {
    const long double a = std::abs(u.coeff(k));
    acc += std::pow((long double)jbracket(k), 2.0L * (long double)s) * a * a;
  }
  return (double)std::sqrt(acc);
}

// trapezoid quadrature of int_0^1 f g dx on a fine grid (exact for trig polys)
double quadrature_pairing(const FourierSeries& f, const FourierSeries& g, int points) {
  RealGrid& grid = grid_for(points);
  std::vector<double> gf(points), gg(points);
  grid.to_grid(f, gf);
  grid.to_grid(g, gg);
  double acc = 0.0;
  for (int n = 0; n < points; ++n) acc += gf[n] * gg[n];
  return acc / points;
}

}  // namespace

TEST_CASE("sobolev norm on the two-mode example") {
  FourierSeries u(4, false);
  u.set_pair(1, cplx{1.0, 0.0});  // e^{2 pi i x} + e^{-2 pi i x}
  CHECK(sobolev_norm(u, 2.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(sobolev_norm(FourierSeries(8, false), 3.0) == 0.0);
}

TEST_CASE("sobolev norm matches the direct summation oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    FourierSeries u = random_series(rng, 64, 0.5);
    const double got = sobolev_norm(u, 3.0);
    const double want = sobolev_norm_oracle(u, 3.0);
    CHECK(std::abs(got - want) <= 1e-14 * want);
  }
}

TEST_CASE("dx_power on single modes and the mean") {
  FourierSeries u(4, false);
  u.set_raw(1, cplx{1.0, 0.0});
  u.set_raw(-1, cplx{1.0, 0.0});
  const FourierSeries v = dx_power(u, -1);
  CHECK(std::abs(v.coeff(1) - cplx{1.0, 0.0} / cplx{0.0, kTwoPi}) < 1e-16);

  FourierSeries one(4, false);
  one.set_pair(0, cplx{1.0, 0.0});
  CHECK(max_abs_coeff(dx_power(one, -2)) == 0.0);
  CHECK(dx_power(one, 0).coeff(0) == cplx{1.0, 0.0});
  CHECK(max_abs_coeff(dx_power(one, 1)) == 0.0);
}

TEST_CASE("dx_power composes additively on mean-zero input") {
  Rng rng(7);
  FourierSeries u = random_series(rng, 16, 0.0, true);
  const FourierSeries back = dx_power(dx_power(u, -1), 1);
  FourierSeries diff = back - u;
  CHECK(max_abs_coeff(diff) <= 1e-13);

  const FourierSeries a = dx_power(dx_power(u, 2), -3);
  const FourierSeries b = dx_power(u, -1);
  double d = 0.0;
  for (int k = -16; k <= 16; ++k) d = std::max(d, std::abs(a.coeff(k) - b.coeff(k)));
  CHECK(d <= 1e-15);
}

TEST_CASE("project_perp zeroes tangential sites and is idempotent") {
  ModeSet modes({1});
  FourierSeries u(4, false);
  u.set_pair(1, cplx{0.5, 0.0});
  u.set_pair(2, cplx{0.5, 0.0});
  const FourierSeries p = project_perp(u, modes);
  CHECK(p.coeff(1) == cplx{0.0, 0.0});
  CHECK(p.coeff(2) == cplx{0.5, 0.0});

  Rng rng(11);
  FourierSeries r = random_series(rng, 12);
  const FourierSeries p1 = project_perp(r, modes);
  const FourierSeries p2 = project_perp(p1, modes);
  CHECK(max_abs_coeff(p2 - p1) == 0.0);
  const FourierSeries q = project_perp(p1, modes);
  CHECK(max_abs_coeff(q - p1) == 0.0);
}

TEST_CASE("symplectic form: antisymmetry, quadrature oracle, scaling") {
  const int K = 8;
  FourierSeries c = cosine(1, K), s = sine(1, K);
  c.drop_mean();
  s.drop_mean();

  CHECK(symplectic_form(c, c) == doctest::Approx(0.0).epsilon(1e-15));

  // oracle: quadrature of (dx^{-1} cos)(x) sin(x); the analytic value is
  // 1/(4 pi) for this ordering, and the form flips sign when swapped.
  const double oracle = quadrature_pairing(dx_power(c, -1), s, 64);
  CHECK(oracle == doctest::Approx(1.0 / (4.0 * M_PI)).epsilon(1e-12));
  CHECK(symplectic_form(c, s) == doctest::Approx(oracle).epsilon(1e-13));
  CHECK(symplectic_form(s, c) == doctest::Approx(-oracle).epsilon(1e-13));

  Rng rng(3);
  FourierSeries u = random_series(rng, K, 0.0, true), v = random_series(rng, K, 0.0, true);
  CHECK(symplectic_form(u, v) == doctest::Approx(-symplectic_form(v, u)).epsilon(1e-14));
  FourierSeries u2 = u;
  u2 *= 2.0;
  CHECK(symplectic_form(u2, v) == doctest::Approx(2.0 * symplectic_form(u, v)).epsilon(1e-14));
  FourierSeries bad = cosine(1, K);
  bad.set_pair(0, cplx{1.0, 0.0});
  CHECK_THROWS(symplectic_form(bad, v));
}

TEST_CASE("Parseval against quadrature on 4K points") {
  Rng rng(5);
  const int K = 32;
  FourierSeries u = random_series(rng, K, 0.25);
  const double lhs = sobolev_norm(u, 0.0);
  const double rhs = std::sqrt(quadrature_pairing(u, u, 4 * K));
  CHECK(std::abs(lhs * lhs - rhs * rhs) <= 1e-12 * std::max(1.0, lhs * lhs));
}

TEST_CASE("dealiased product is exact for bandlimited factors") {
  Rng rng(13);
  FourierSeries a = random_series(rng, 10), b = random_series(rng, 10);
  const FourierSeries p = dealiased_product(a, b);
  // direct convolution oracle
  for (int k = -10; k <= 10; ++k) {
    cplx want{0, 0};
    for (int e = -10; e <= 10; ++e) want += a.coeff(e) * b.coeff(k - e);
    CHECK(std::abs(p.coeff(k) - want) <= 1e-13);
  }
  CHECK(p.is_real(1e-13));
}

TEST_CASE("reality invariant and phase point support") {
  FourierSeries u(4, false);
  u.set_raw(1, cplx{1.0, 2.0});
  CHECK(u.reality_defect() > 1.0);
  u.set_pair(1, cplx{1.0, 2.0});
  CHECK(u.is_real());

  ModeSet modes({1, 3});
  FourierSeries w(8, true);
  w.set_pair(2, cplx{0.5, 0.1});
  CHECK_NOTHROW(check_support_in_perp(w, modes));
  w.set_pair(3, cplx{0.5, 0.0});
  CHECK_THROWS(check_support_in_perp(w, modes));

  PhasePoint pt({0.3}, {0.1}, w, 0.5);
  const PhasePoint half = pt.scaled(0.5);
  CHECK(half.eps == doctest::Approx(0.25));
  CHECK(half.theta[0] == doctest::Approx(0.3));
  CHECK(max_abs_coeff(half.w) == doctest::Approx(0.5 * max_abs_coeff(pt.w)));
}
