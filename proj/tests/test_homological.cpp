#include <cmath>

#include "doctest.h"
#include "kdvlab/homological.hpp"
#include "kdvlab/rng.hpp"

using namespace kdvlab;

namespace {

// Diophantine-ish sample used across the solver tests (|S_+| = 1).
FrequencyModel model1(double gamma = 0.01, double tau = 1.5) {
  return FrequencyModel(ModeSet({1}), {1.2357}, {0.4, -0.15}, tau, gamma);
}

TorusField random_scalar_field(Rng& rng, int p, int L) {
  TorusField f(p, L);
  EllGrid grid(p, L);
  for (size_t e = 0; e < grid.count(); ++e) {
    const auto ell = grid.unflatten(e);
    const size_t en = grid.negated(e);
    if (en < e) continue;
    const cplx v{uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
    f.set_flat(e, 0, v);
    if (en != e)
      f.set_flat(en, 0, std::conj(v));
    else
      f.set_flat(e, 0, cplx{v.real(), 0.0});
  }
  return f;
}

TorusField random_perp_field(Rng& rng, int p, int L, const ModeSet& modes, int J) {
  TorusField f(p, L, modes, J);
  EllGrid grid(p, L);
  for (size_t e = 0; e < grid.count(); ++e) {
    const size_t en = grid.negated(e);
    if (en < e) continue;
    for (int j = -J; j <= J; ++j) {
      if (!modes.in_perp(j)) continue;
      if (en == e && j < 0) continue;
      const cplx v{uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
      f.set_flat(e, j, v);
      f.set_flat(en, -j, std::conj(v));
    }
  }
  return f;
}

// residual of omega . d_theta F + P - <P> in coefficients
double transport_residual(const FrequencyModel& m, const TorusField& F, const TorusField& P) {
  TorusField r = F.omega_dtheta(m.omega());
  r += P;
  double d = 0.0;
  for (size_t e = 0; e < P.ells().count(); ++e) {
    for (int j = -P.window(); j <= P.window(); ++j) {
      if (P.window() > 0 && !P.modes().in_perp(j)) continue;
      cplx v = r.coeff_flat(e, P.window() > 0 ? j : 0);
      if (P.ells().is_zero(e)) v -= P.average(P.window() > 0 ? j : 0);
      d = std::max(d, std::abs(v));
    }
  }
  return d;
}

// residual of (omega . d_theta + i Omega) F + P
double first_melnikov_residual(const FrequencyModel& m, const TorusField& F, const TorusField& P) {
  TorusField r = F.omega_dtheta(m.omega());
  double d = 0.0;
  for (size_t e = 0; e < P.ells().count(); ++e)
    for (int j = -P.window(); j <= P.window(); ++j) {
      if (!P.modes().in_perp(j)) continue;
      const cplx v = r.coeff_flat(e, j) + cplx{0.0, m.normal_frequency(j)} * F.coeff_flat(e, j) +
                     P.coeff_flat(e, j);
      d = std::max(d, std::abs(v));
    }
  return d;
}

}  // namespace

TEST_CASE("torus transport: cos theta forcing gives F = -sin theta") {
  const FrequencyModel m = FrequencyModel(ModeSet({1}), {1.0}, {}, 1.5, 0.5);
  TorusField P(1, 2);
  P.set({1}, 0, cplx{0.5, 0.0});
  P.set({-1}, 0, cplx{0.5, 0.0});
  const TorusField F = solve_torus_transport(m, P);
  // -sin theta has coefficients +- i/2
  CHECK(std::abs(F.coeff({1}, 0) - cplx{0.0, 0.5}) <= 1e-15);
  CHECK(std::abs(F.coeff({-1}, 0) - cplx{0.0, -0.5}) <= 1e-15);
  CHECK(transport_residual(m, F, P) <= 1e-15);

  TorusField C(1, 2);
  C.set({0}, 0, cplx{0.7, 0.0});
  CHECK(solve_torus_transport(m, C).max_abs() == 0.0);
}

TEST_CASE("torus transport: random fields, residual and linearity") {
  const FrequencyModel m = model1();
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    TorusField P = random_scalar_field(rng, 1, 4);
    const TorusField F = solve_torus_transport(m, P);
    CHECK(transport_residual(m, F, P) <= 1e-13);
    CHECK(F.reality_defect() <= 1e-14);

    TorusField Q = random_scalar_field(rng, 1, 4);
    TorusField lin = P;
    lin *= 2.0;
    lin += Q;
    TorusField expect = solve_torus_transport(m, P);
    expect *= 2.0;
    expect += solve_torus_transport(m, Q);
    TorusField got = solve_torus_transport(m, lin);
    got -= expect;
    CHECK(got.max_abs() <= 1e-13);
  }
}

TEST_CASE("first Melnikov solver: explicit division and reality") {
  const FrequencyModel m = FrequencyModel(ModeSet({2}), {1.0}, {}, 1.5, 0.01);
  TorusField P(1, 2, m.modes(), 4);
  P.set({0}, 1, cplx{1.0, 0.0});
  P.set({0}, -1, cplx{1.0, 0.0});
  const TorusField F = solve_first_melnikov(m, P);
  const double eight_pi3 = std::pow(kTwoPi, 3);
  CHECK(std::abs(F.coeff({0}, 1) - (-cplx{1.0, 0.0} / cplx{0.0, eight_pi3})) <= 1e-18);
  CHECK(first_melnikov_residual(m, F, P) <= 1e-15);
  CHECK(F.reality_defect() <= 1e-16);

  TorusField Z(1, 2, m.modes(), 4);
  CHECK(solve_first_melnikov(m, Z).max_abs() == 0.0);

  Rng rng(9);
  const FrequencyModel mr = model1();
  for (int trial = 0; trial < 20; ++trial) {
    TorusField Pr = random_perp_field(rng, 1, 3, mr.modes(), 6);
    const TorusField Fr = solve_first_melnikov(mr, Pr);
    CHECK(first_melnikov_residual(mr, Fr, Pr) <= 1e-13);
    CHECK(Fr.reality_defect() <= 1e-13);
  }
}

TEST_CASE("x-transport: -3 dx b + a = <a>_x exactly") {
  FourierSeries a(8, false);
  a.set_pair(1, cplx{0.5, 0.0});  // cos(2 pi x)
  const FourierSeries b = solve_x_transport(a);
  // sin(2 pi x)/(6 pi) has coefficient -+ i/(12 pi)
  CHECK(std::abs(b.coeff(1) - cplx{0.0, -1.0 / (12.0 * M_PI)}) <= 1e-16);

  FourierSeries c(4, false);
  c.set_pair(0, cplx{2.0, 0.0});
  CHECK(max_abs_coeff(solve_x_transport(c)) == 0.0);

  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    FourierSeries f = random_series(rng, 16);
    const FourierSeries bf = solve_x_transport(f);
    FourierSeries resid = dx_power(bf, 1);
    resid *= -3.0;
    resid += f;
    resid.set_raw(0, resid.coeff(0) - f.coeff(0));  // subtract <a>_x
    CHECK(max_abs_coeff(resid) <= 1e-15);
  }
}

TEST_CASE("second Melnikov solver: resonant slot goes to Z, off-diagonal divides") {
  const FrequencyModel m = model1();
  const int L = 2, J = 6;
  SmoothingKernel R(1, L, m.modes(), J);

  // only entry (ell, j, j') = (0, 2, 2): S = 0, Z_2 = r
  const cplx r{0.0, 0.3};
  R.set(R.ells().index({0}), 2, 2, r);
  R.set(R.ells().index({0}), -2, -2, std::conj(r));
  const SecondMelnikovSolution sol = solve_second_melnikov(m, R, L, J);
  CHECK(sol.S.max_abs() == 0.0);
  bool found = false;
  for (size_t i = 0; i < sol.window_modes.size(); ++i)
    if (sol.window_modes[i] == 2) {
      CHECK(std::abs(sol.Z[i] - r) <= 1e-16);
      found = true;
    }
  CHECK(found);
  // purely imaginary diagonal data makes Z skew-adjoint (multiplier with
  // imaginary symbol)
  for (const auto& z : sol.Z) CHECK(std::abs(z.real()) <= 1e-16);

  // single off-diagonal entry: one division, residual zero
  SmoothingKernel R2(1, L, m.modes(), J);
  const cplx r2{0.4, -0.1};
  R2.set(R2.ells().index({1}), 3, 2, r2);
  R2.set(R2.ells().index({-1}), -3, -2, std::conj(r2));
  const SecondMelnikovSolution sol2 = solve_second_melnikov(m, R2, L, J);
  const double d = m.omega_dot({1}) + m.normal_frequency(3) - m.normal_frequency(2);
  const cplx want = -r2 / cplx{0.0, d};
  CHECK(std::abs(sol2.S.get(sol2.S.ells().index({1}), 3, 2) - want) <= 1e-16);

  // coefficientwise residual of omega.dtheta S + [i Omega, S] + R = Z
  for (size_t e = 0; e < R2.ells().count(); ++e) {
    const auto ell = R2.ells().unflatten(e);
    for (int j : m.modes().perp_window(J))
      for (int jp : m.modes().perp_window(J)) {
        cplx lhs = cplx{0.0, m.omega_dot(ell)} * sol2.S.get(e, j, jp) +
                   cplx{0.0, m.normal_frequency(j) - m.normal_frequency(jp)} * sol2.S.get(e, j, jp) +
                   R2.get(e, j, jp);
        if (R2.ells().is_zero(e) && j == jp) {
          for (size_t i = 0; i < sol2.window_modes.size(); ++i)
            if (sol2.window_modes[i] == j) lhs -= sol2.Z[i];
        }
        CHECK(std::abs(lhs) <= 1e-13);
      }
  }
}

TEST_CASE("third Melnikov solver: explicit division, residual, bookkeeping") {
  const FrequencyModel m = model1();
  const int L = 2, J = 6;

  SmoothingKernel Z = SmoothingKernel::bilinear(1, L, m.modes(), J);
  CHECK(solve_third_melnikov(m, Z, L, J).S.max_abs() == 0.0);

  Rng rng(31);
  SmoothingKernel R = SmoothingKernel::bilinear(1, L, m.modes(), J);
  // sparse random entries, reality-paired
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + (trial % 3), j = -2 - (trial % 2), jp = 3 + (trial % 3);
    const cplx v{uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
    const std::vector<int> ell{(trial % 5) - 2};
    std::vector<int> nell{-ell[0]};
    R.add(R.ells().index(ell), n, j, jp, v);
    R.add(R.ells().index(nell), -n, -j, -jp, std::conj(v));
  }
  const ThirdMelnikovSolution sol = solve_third_melnikov(m, R, L, J);
  CHECK(sol.S.reality_defect() <= 1e-14);
  CHECK(sol.max_amplification <= sol.amplification_bound + 1e-12);

  // coefficientwise residual of i(omega.l + Om_n - Om_j - Om_j') S + R = 0
  const auto perp = m.modes().perp_window(J);
  for (size_t e = 0; e < R.ells().count(); ++e) {
    const auto ell = R.ells().unflatten(e);
    for (int n : perp)
      for (int j : perp)
        for (int jp : perp) {
          const double d = m.omega_dot(ell) + m.normal_frequency(n) - m.normal_frequency(j) -
                           m.normal_frequency(jp);
          const cplx lhs = cplx{0.0, d} * sol.S.get(e, n, j, jp) + R.get(e, n, j, jp);
          CHECK(std::abs(lhs) <= 1e-12);
        }
  }
}

TEST_CASE("multiplier homological equation mirrors the first Melnikov solver") {
  const FrequencyModel m = model1();
  TorusField lambda(1, 3, m.modes(), 6);
  CHECK(solve_multiplier_homological(m, lambda).xi.max_abs() == 0.0);

  lambda.set({1}, 2, cplx{0.2, 0.1});
  lambda.set({-1}, -2, cplx{0.2, -0.1});
  const MultiplierSolution sol = solve_multiplier_homological(m, lambda);
  const double d = m.omega_dot({1}) + m.normal_frequency(2);
  CHECK(std::abs(sol.xi.coeff({1}, 2) - (-cplx{0.2, 0.1} / cplx{0.0, d})) <= 1e-16);
  CHECK(first_melnikov_residual(m, sol.xi, lambda) <= 1e-14);
  // tau-loss bookkeeping: amplification no worse than <ell>^tau / gamma
  CHECK(sol.max_amplification <= std::pow(1.0, m.tau()) / m.gamma() + 1e-9);
}

TEST_CASE("divisor aborts exactly when check_melnikov reports a violator") {
  Rng rng(55);
  int aborts = 0, passes = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const double gamma = uniform(rng, 0.05, 0.95);
    FrequencyModel m(ModeSet({1}), {uniform(rng, 0.2, 2.0)}, {uniform(rng, -0.5, 0.5)}, 1.5,
                     gamma);
    const int L = 3, J = 6;
    TorusField P = random_scalar_field(rng, 1, L);
    const bool expect_abort = !check_melnikov(m, 0, L, J).empty();
    bool aborted = false;
    try {
      solve_torus_transport(m, P);
    } catch (const DivisorBelowThreshold& e) {
      aborted = true;
      CHECK(e.order() == 0);
    }
    CHECK(aborted == expect_abort);
    aborted ? ++aborts : ++passes;
  }
  CHECK(aborts > 0);
  CHECK(passes > 0);
}
