#include <cmath>

#include "doctest.h"
#include "kdvlab/normalform.hpp"
#include "support.hpp"

using namespace kdvlab;
using namespace kdvlab::testsupport;

namespace {

PhasePoint sample_point(int p, const ModeSet& modes, int J, double scale = 1.0) {
  std::vector<double> th(static_cast<size_t>(p), 0.9), yy(static_cast<size_t>(p), 0.4 * scale);
  FourierSeries w(J, true);
  for (int j = 1; j <= J; ++j)
    if (modes.in_perp(j))
      w.set_pair(j, scale * cplx{0.3 / std::pow(jbracket(j), 2), 0.2 / std::pow(jbracket(j), 2)});
  return PhasePoint(th, yy, w, 0.5 * scale);
}

double scalar_offaverage(const TorusField& f) {
  double m = 0.0;
  for (size_t e = 0; e < f.ells().count(); ++e) {
    if (f.ells().is_zero(e)) continue;
    m = std::max(m, std::abs(f.coeff_flat(e, 0)));
  }
  return m;
}

NormalVectorField bare_field(const FrequencyModel& m, int p, int L, int J, int N) {
  NormalVectorField V;
  V.p = p;
  V.L = L;
  V.J = J;
  V.depth = N;
  V.modes = m.modes();
  V.omega = m.omega();
  V.omega_spp.assign(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(p), 0.0));
  V.nf.omega_hat_const.assign(static_cast<size_t>(p), 0.0);
  V.nf.omega_hat_eps.assign(static_cast<size_t>(p), 0.0);
  V.nf.q_eps.assign(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(p), 0.0));
  V.nf.q_cubic.assign(static_cast<size_t>(p),
                      std::vector<std::vector<double>>(
                          static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(p), 0.0)));
  V.upsilon_theta.assign(static_cast<size_t>(p), SmoothingKernel(p, L, m.modes(), J));
  return V;
}

}  // namespace

TEST_CASE("measured_order calibration") {
  PhasePoint base = sample_point(1, ModeSet({1}), 8);
  const std::vector<double> scales{0.5, 0.35, 0.25, 0.18, 0.125};
  CHECK(measured_order([](const PhasePoint& x) { return x.y[0] * x.y[0]; }, base, scales) ==
        doctest::Approx(2.0).epsilon(0.005));
  CHECK(measured_order([](const PhasePoint& x) { return std::abs(x.eps * x.y[0]); }, base,
                       scales) == doctest::Approx(2.0).epsilon(0.005));
  CHECK(measured_order([](const PhasePoint&) { return 3.7; }, base, scales) ==
        doctest::Approx(0.0).epsilon(0.01));
  CHECK(std::isinf(measured_order([](const PhasePoint&) { return 0.0; }, base, scales)));
}

TEST_CASE("step 1: cos theta forcing and already-normalized input") {
  const FrequencyModel m(ModeSet({2}), {1.0}, {}, 1.5, 1e-3);
  TaylorHamiltonian H = TaylorHamiltonian::empty(1, 3, 8, 8, m.modes());
  H.P00.set({1}, 0, cplx{0.5, 0.0});
  H.P00.set({-1}, 0, cplx{0.5, 0.0});
  TorusField eps2(1, 3);
  const Step1Generators g = step1_normalize_linear(H, m, &eps2);
  CHECK(std::abs(g.F00.coeff({1}, 0) - cplx{0.0, 0.5}) <= 1e-15);  // F00 = -sin theta
  CHECK(H.max_abs_eps_blocks_offaverage() == 0.0);
  CHECK(std::abs(H.P00.average()) == 0.0);  // <cos theta> = 0

  TaylorHamiltonian H2 = TaylorHamiltonian::empty(1, 3, 8, 8, m.modes());
  H2.P00.set({0}, 0, cplx{0.7, 0.0});
  H2.P10[0].set({0}, 0, cplx{0.3, 0.0});
  const Step1Generators g2 = step1_normalize_linear(H2, m, nullptr);
  CHECK(g2.F00.max_abs() == 0.0);
  CHECK(g2.F10[0].max_abs() == 0.0);
  CHECK(g2.F01.max_abs() == 0.0);
  CHECK(H2.P00.average().real() == doctest::Approx(0.7));
}

TEST_CASE("step 1: Omega_{S_+} coupling enters the F10 equation with zero residual") {
  Rng rng(7);
  const FrequencyModel m = pipeline_model();
  TaylorHamiltonian H = random_hamiltonian(rng, m, 1, 4, 8, 2, 0.01);
  const TaylorHamiltonian H0 = H;
  TorusField eps2(1, 4);
  const Step1Generators g = step1_normalize_linear(H, m, &eps2);

  // residual of omega.dth F10 + P10 + Omega[grad_theta F00] - <P10>
  TorusField resid = g.F10[0].omega_dtheta(m.omega());
  resid += H0.P10[0];
  EllGrid grid(1, 4);
  {
    TorusField d(1, 4);
    for (size_t e = 0; e < grid.count(); ++e) {
      const auto l = grid.unflatten(e);
      d.set_flat(e, 0, cplx{0.0, double(l[0])} * g.F00.coeff_flat(e, 0));
    }
    d *= H.omega_spp[0][0];
    resid += d;
  }
  double worst = 0.0;
  for (size_t e = 0; e < grid.count(); ++e) {
    cplx v = resid.coeff_flat(e, 0);
    if (grid.is_zero(e)) v -= H0.P10[0].average();
    worst = std::max(worst, std::abs(v));
  }
  CHECK(worst <= 1e-13);
}

TEST_CASE("steps 2 and 3: averages survive, affine blocks vanish") {
  Rng rng(11);
  const FrequencyModel m = pipeline_model();
  TaylorHamiltonian H = random_hamiltonian(rng, m, 1, 4, 8, 2, 0.01);
  const cplx p20_avg = H.P20_3[0][0].average();

  TorusField eps2(1, 4);
  eps2.set({1}, 0, cplx{0.2, 0.1});
  eps2.set({-1}, 0, cplx{0.2, -0.1});
  eps2.set({0}, 0, cplx{0.5, 0.0});
  const TorusField eps2_orig = eps2;
  const TorusField F2 = step2_normalize_eps2(eps2, m);
  CHECK(scalar_offaverage(eps2) == 0.0);
  CHECK(eps2.average().real() == doctest::Approx(0.5));
  TorusField r = F2.omega_dtheta(m.omega());
  r += eps2_orig;
  EllGrid grid(1, 4);
  for (size_t e = 0; e < grid.count(); ++e) {
    cplx v = r.coeff_flat(e, 0);
    if (grid.is_zero(e)) v -= eps2_orig.average();
    CHECK(std::abs(v) <= 1e-14);
  }

  NormalFormPart nf;
  const Step3Generators g3 = step3_normalize_affine(H, m, nf);
  (void)g3;
  CHECK(nf.q_eps[0][0] == doctest::Approx(p20_avg.real()));
  CHECK(H.P01_3.max_abs() == 0.0);
  CHECK(H.P11_3[0].max_abs() == 0.0);
  CHECK(H.P21_3[0][0].max_abs() == 0.0);
}

TEST_CASE("single-harmonic P21 entry is removed by one division") {
  const FrequencyModel m = pipeline_model();
  TaylorHamiltonian H = TaylorHamiltonian::empty(1, 3, 8, 8, m.modes());
  H.P21_3[0][0].set({1}, 3, cplx{0.2, -0.4});
  H.P21_3[0][0].set({-1}, -3, cplx{0.2, 0.4});
  NormalFormPart nf;
  const Step3Generators g = step3_normalize_affine(H, m, nf);
  const double d = m.omega_dot({1}) + m.normal_frequency(3);
  CHECK(std::abs(g.F21[0][0].coeff({1}, 3) - (-cplx{0.2, -0.4} / cplx{0.0, d})) <= 1e-16);
  CHECK(H.P21_3[0][0].max_abs() == 0.0);
}

TEST_CASE("vector field assembly matches the dense oracle dx(P02 + P02^T)") {
  Rng rng(23);
  const FrequencyModel m = pipeline_model();
  const int p = 1, L = 3, J = 10, N = 2;
  TaylorHamiltonian H = TaylorHamiltonian::empty(p, L, J, J, m.modes());
  H.P02.symbol[0][Monomial::eps1(p)] = random_symbol_coeff(rng, p, L, 1, J, 2, 0.1);
  H.P02.symbol[-1][Monomial::y(p, 0)] = random_symbol_coeff(rng, p, L, 1, J, 2, 0.1);
  H.P02.smooth[Monomial::eps1(p)] = random_linear_kernel(rng, p, L, 1, m.modes(), J, 0.1);

  const CutoffFunction cutoff{};
  NormalVectorField V = build_vector_field(H, m, cutoff, N);
  V.nf.omega_hat_const.assign(1, 0.0);
  V.nf.omega_hat_eps.assign(1, 0.0);

  const PhasePoint x = sample_point(p, m.modes(), J);
  DenseOp M(J);
  for (const auto& [mo, slots] : H.P02.symbol)
    for (const auto& [mono, c] : slots) {
      FourierSeries cs = c.eval_series(x.theta);
      cs *= mono.eval(x);
      M += DenseOp::paraproduct_op(cs, mo, cutoff, J).projected_perp(m.modes());
    }
  for (const auto& [mono, S] : H.P02.smooth) {
    const double mm = mono.eval(x);
    for (size_t e = 0; e < S.ells().count(); ++e) {
      const auto ell = S.ells().unflatten(e);
      double phase = 0.0;
      for (size_t q = 0; q < x.theta.size(); ++q) phase += x.theta[q] * ell[q];
      const cplx ph = std::polar(1.0, phase) * mm;
      for (int n : m.modes().perp_window(J))
        for (int j : m.modes().perp_window(J)) {
          const cplx v = S.get(e, n, j);
          if (v != cplx{0, 0}) M.at(n, j) += ph * v;
        }
    }
  }
  DenseOp MT(J);
  for (int i = -J; i <= J; ++i)
    for (int j = -J; j <= J; ++j) MT.at(i, j) = M.at(-j, -i);
  const DenseOp want = DenseOp::dx_power_op(J, 1).compose(M + MT).projected_perp(m.modes());

  const DenseOp got = V.dense_linear_part(x, m, false);
  DenseOp diff = got;
  diff -= want;
  CHECK(diff.max_abs() <= 1e-12);

  const DiagonalCheck dc = check_imaginary_diagonal(got, m.modes());
  CHECK(dc.max_real_defect <= 1e-13);
}

TEST_CASE("symbol regularization: constant coefficient goes to the multiplier") {
  const FrequencyModel m(ModeSet({1}), {1.1}, {}, 1.5, 1e-3);
  NormalVectorField V = bare_field(m, 1, 3, 10, 2);
  TorusField a = TorusField::unconstrained(1, 3, 10);
  a.set({0}, 0, cplx{0.7, 0.0});
  V.sym_w[1][Monomial::eps1(1)] = a;

  const SymbolStepResult r = regularize_symbol_step(V, m, 0);
  CHECK(r.b_eps.max_abs() == 0.0);
  CHECK(V.sym_w[1][Monomial::eps1(1)].max_abs() == 0.0);
  CHECK(std::abs(V.mult_w[1][Monomial::eps1(1)].average() - cplx{0.7, 0.0}) <= 1e-15);
  CHECK(r.diag_defect <= 1e-13);
}

TEST_CASE("symbol regularization: y cos(2 pi x), dense update identity") {
  const FrequencyModel m(ModeSet({1}), {1.1}, {}, 1.5, 1e-3);  // tail zero
  const int J = 10;
  NormalVectorField V = bare_field(m, 1, 3, J, 2);
  TorusField a = TorusField::unconstrained(1, 3, J);
  a.set({0}, 1, cplx{0.5, 0.0});
  a.set({0}, -1, cplx{0.5, 0.0});  // cos(2 pi x)
  V.sym_w[1][Monomial::y(1, 0)] = a;

  const PhasePoint x = sample_point(1, m.modes(), J);
  const DenseOp before = V.dense_linear_part(x, m, false);

  const SymbolStepResult r = regularize_symbol_step(V, m, 0);
  REQUIRE(!r.b_y.empty());
  // b = sin(2 pi x)/(6 pi): coefficients -+ i/(12 pi)
  CHECK(std::abs(r.b_y[0].coeff({0}, 1) - cplx{0.0, -1.0 / (12.0 * M_PI)}) <= 1e-15);
  CHECK(V.sym_w[1][Monomial::y(1, 0)].max_abs() <= 1e-15);

  const DenseOp after = V.dense_linear_part(x, m, false);
  FourierSeries bs = r.b_y[0].eval_series(x.theta);
  bs *= x.y[0];
  const DenseOp Yd =
      DenseOp::paraproduct_op(bs, -1, CutoffFunction{}, J).projected_perp(m.modes());
  DenseOp iOm(J);
  for (int j : m.modes().perp_window(J)) iOm.at(j, j) = cplx{0.0, m.normal_frequency(j)};
  DenseOp want = iOm.compose(Yd);
  want -= Yd.compose(iOm);
  DenseOp diff = after;
  diff -= before;
  diff -= want;
  CHECK(diff.max_abs() <= 1e-11);
}

TEST_CASE("multiplier normalization divides single coefficients") {
  const FrequencyModel m = pipeline_model();
  NormalVectorField V = bare_field(m, 1, 3, 8, 2);

  TorusField lam(1, 3, m.modes(), 8);
  lam.set({1}, 2, cplx{0.3, 0.1});
  lam.set({-1}, -2, cplx{0.3, -0.1});
  V.mult_ww[0] = lam;
  V.mult_ww[1] = lam;  // the order-one block survives

  const MultiplierStepResult r = normalize_multiplier_quadratic(V, m);
  CHECK(V.mult_ww.count(0) == 0);
  CHECK(V.mult_ww.count(1) == 1);
  CHECK(r.residual <= 1e-13);
  const double d = m.omega_dot({1}) - m.normal_frequency(2);
  CHECK(std::abs(r.xi.at(0).coeff({1}, 2) - (-cplx{0.3, 0.1} / cplx{0.0, d})) <= 1e-16);

  NormalVectorField V2 = bare_field(m, 1, 3, 8, 2);
  const MultiplierStepResult r2 = normalize_multiplier_quadratic(V2, m);
  CHECK(r2.xi.empty());
}

TEST_CASE("smoothing normalization clears kernels and keeps the resonant parts") {
  Rng rng(31);
  const FrequencyModel m = pipeline_model();
  const int p = 1, L = 3, J = 8;
  NormalVectorField V = bare_field(m, p, L, J, 2);

  V.smooth_w[Monomial::eps1(p)] = random_linear_kernel(rng, p, L, 1, m.modes(), J, 0.1);
  {
    // purely imaginary theta-average diagonal (the Hamiltonian inheritance)
    auto& k = V.smooth_w[Monomial::eps1(p)];
    const size_t zero = k.ells().index({0});
    for (int j : m.modes().perp_window(J))
      k.set(zero, j, j, cplx{0.0, k.get(zero, j, j).imag()});
  }
  V.smooth_ww[Monomial::one(p)] = random_bilinear_kernel(rng, p, L, 1, m.modes(), J, 0.1);
  V.upsilon_theta[0] = random_linear_kernel(rng, p, L, 1, m.modes(), J, 0.1);
  const SmoothingKernel ups = V.upsilon_theta[0];

  const SmoothingStepResult r = normalize_smoothing(V, m);
  CHECK(r.residual_linear <= 1e-12);
  CHECK(r.residual_bilinear <= 1e-12);
  CHECK(V.smooth_w[Monomial::eps1(p)].max_abs() == 0.0);
  CHECK(V.smooth_ww[Monomial::one(p)].max_abs() == 0.0);

  const auto perp = m.modes().perp_window(J);
  const size_t zero = ups.ells().index({0});
  for (size_t q = 0; q < perp.size(); ++q)
    CHECK(std::abs(V.ztheta[0][q] - ups.get(zero, perp[q], -perp[q])) <= 1e-15);

  for (const auto& [mono, z] : V.zdiag)
    for (const auto& v : z) CHECK(std::abs(v.real()) <= 1e-13);
}

TEST_CASE("full pipeline on the zero Hamiltonian is the identity") {
  const FrequencyModel m = pipeline_model();
  TaylorHamiltonian H = TaylorHamiltonian::empty(1, 4, 16, 16, m.modes());
  PipelineConfig cfg;
  cfg.depth = 2;
  const PipelineReport rep = full_pipeline(H, m, cfg);
  CHECK(rep.melnikov_ok);
  CHECK(rep.residual_step1 == 0.0);
  CHECK(rep.eps_linear_offaverage == 0.0);
  CHECK(rep.skew_defect == 0.0);
  CHECK(std::isinf(rep.order_y));
  CHECK(std::isinf(rep.order_a));
}

TEST_CASE("full pipeline on a random small Hamiltonian") {
  Rng rng(2026);
  const FrequencyModel m = pipeline_model();
  TaylorHamiltonian H = random_hamiltonian(rng, m, 1, 4, 16, 2, 1e-2);
  PipelineConfig cfg;
  cfg.depth = 2;
  const PipelineReport rep = full_pipeline(H, m, cfg);
  MESSAGE(rep.to_text());
  REQUIRE(rep.melnikov_ok);
  CHECK(rep.residual_step1 <= 1e-10);
  CHECK(rep.residual_step2 <= 1e-10);
  CHECK(rep.residual_step3 <= 1e-10);
  CHECK(rep.eps_linear_offaverage <= 1e-12);
  CHECK(rep.symbol_clear_residual <= 1e-12);
  CHECK(rep.odd_mean_defect <= 1e-12);
  CHECK(rep.diag_defect <= 1e-12);
  CHECK(rep.skew_defect <= 1e-12);
  CHECK(rep.multiplier_residual <= 1e-12);
  CHECK(rep.smoothing_residual <= 1e-12);
  CHECK(rep.order_y >= 2.8);
  CHECK(rep.order_a >= 1.8);
  CHECK(rep.order_r >= 2.8);
}

TEST_CASE("pipeline aborts with the offending tuple on resonant samples") {
  const FrequencyModel m(ModeSet({1}), {0.01}, {}, 1.5, 0.9);
  Rng rng(5);
  TaylorHamiltonian H = random_hamiltonian(rng, m, 1, 4, 8, 2, 1e-2);
  PipelineConfig cfg;
  cfg.depth = 2;
  const PipelineReport rep = full_pipeline(H, m, cfg);
  CHECK(!rep.melnikov_ok);
  CHECK(!rep.abort_reason.empty());
}
