#include "kdvlab/kdv.hpp"

#include <gsl/gsl_sf_ellint.h>
#include <gsl/gsl_sf_elljac.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "kdvlab/csv.hpp"
#include "kdvlab/grid.hpp"
#include "kdvlab/rng.hpp"

namespace kdvlab {

namespace {

// phi functions on the imaginary axis; series below |z| = 0.5 avoids the
// cancellation in the closed forms
cplx phi(int k, cplx z) {
  if (std::abs(z) < 0.5) {
    cplx term{1.0, 0.0};
    double fact = 1.0;
    for (int i = 1; i <= k; ++i) fact *= i;
    term /= fact;
    cplx acc = term;
    for (int n = 1; n < 24; ++n) {
      term *= z / static_cast<double>(n + k);
      acc += term;
      if (std::abs(term) < 1e-18) break;
    }
    return acc;
  }
  const cplx ez = std::exp(z);
  switch (k) {
    case 1: return (ez - 1.0) / z;
    case 2: return (ez - 1.0 - z) / (z * z);
    default: return (ez - 1.0 - z - 0.5 * z * z) / (z * z * z);
  }
}

/// Newton polish of the even cn^2-family profile on the integrated
/// traveling-wave equation (2 pi k)^2 q_k + 3 (q^2)_k + c q_k = 0, k >= 1,
/// with the first coefficient pinned. The elliptic-function evaluation is
/// only ~1e-10 accurate; the third derivative in the residual needs better.
void polish_profile(FourierSeries& q, double& c) {
  const int K = q.max_mode();
  const int n = K;  // unknowns: q_2..q_K and c
  std::vector<double> qr(static_cast<size_t>(K) + 1);
  for (int k = 1; k <= K; ++k) qr[static_cast<size_t>(k)] = q.coeff(k).real();

  auto assemble = [&](std::vector<double>& resid) {
    FourierSeries qq(K, false);
    for (int k = 1; k <= K; ++k) qq.set_pair(k, cplx{qr[static_cast<size_t>(k)], 0.0});
    const FourierSeries q2 = dealiased_product(qq, qq);
    for (int k = 1; k <= K; ++k) {
      const double tpk = kTwoPi * k;
      resid[static_cast<size_t>(k - 1)] =
          tpk * tpk * qr[static_cast<size_t>(k)] + 3.0 * q2.coeff(k).real() +
          c * qr[static_cast<size_t>(k)];
    }
  };

  std::vector<double> resid(static_cast<size_t>(n)), jac(static_cast<size_t>(n) * n);
  for (int iter = 0; iter < 6; ++iter) {
    assemble(resid);
    double rmax = 0.0;
    for (double v : resid) rmax = std::max(rmax, std::abs(v));
    if (rmax < 1e-13) break;
    auto qcoef = [&](int k) {
      k = std::abs(k);
      return k >= 1 && k <= K ? qr[static_cast<size_t>(k)] : (k == 0 ? 0.0 : 0.0);
    };
    // columns: q_2..q_K then c; rows k = 1..K
    for (int k = 1; k <= K; ++k) {
      for (int j = 2; j <= K; ++j) {
        double v = 6.0 * (qcoef(k - j) + qcoef(k + j));
        if (k == j) v += kTwoPi * k * kTwoPi * k + c;
        jac[static_cast<size_t>(k - 1) * n + (j - 2)] = v;
      }
      jac[static_cast<size_t>(k - 1) * n + (n - 1)] = qr[static_cast<size_t>(k)];
    }
    // dense Gaussian elimination with partial pivoting
    std::vector<double> rhs = resid;
    for (int col = 0; col < n; ++col) {
      int piv = col;
      for (int r = col + 1; r < n; ++r)
        if (std::abs(jac[static_cast<size_t>(r) * n + col]) >
            std::abs(jac[static_cast<size_t>(piv) * n + col]))
          piv = r;
      if (piv != col) {
        for (int cc = 0; cc < n; ++cc)
          std::swap(jac[static_cast<size_t>(col) * n + cc], jac[static_cast<size_t>(piv) * n + cc]);
        std::swap(rhs[static_cast<size_t>(col)], rhs[static_cast<size_t>(piv)]);
      }
      const double d = jac[static_cast<size_t>(col) * n + col];
      for (int r = col + 1; r < n; ++r) {
        const double f = jac[static_cast<size_t>(r) * n + col] / d;
        if (f == 0.0) continue;
        for (int cc = col; cc < n; ++cc)
          jac[static_cast<size_t>(r) * n + cc] -= f * jac[static_cast<size_t>(col) * n + cc];
        rhs[static_cast<size_t>(r)] -= f * rhs[static_cast<size_t>(col)];
      }
    }
    std::vector<double> delta(static_cast<size_t>(n));
    for (int r = n - 1; r >= 0; --r) {
      double v = rhs[static_cast<size_t>(r)];
      for (int cc = r + 1; cc < n; ++cc)
        v -= jac[static_cast<size_t>(r) * n + cc] * delta[static_cast<size_t>(cc)];
      delta[static_cast<size_t>(r)] = v / jac[static_cast<size_t>(r) * n + r];
    }
    for (int j = 2; j <= K; ++j) qr[static_cast<size_t>(j)] -= delta[static_cast<size_t>(j - 2)];
    c -= delta[static_cast<size_t>(n - 1)];
  }
  for (int k = 1; k <= K; ++k) q.set_pair(k, cplx{qr[static_cast<size_t>(k)], 0.0});
  q.drop_mean();
}

double cn_mean(double m) {
  // <cn^2> over a period: (E - (1-m) K)/(m K)
  const double k = std::sqrt(m);
  const double K = gsl_sf_ellint_Kcomp(k, GSL_PREC_DOUBLE);
  const double E = gsl_sf_ellint_Ecomp(k, GSL_PREC_DOUBLE);
  return (E - (1.0 - m) * K) / (m * K);
}

double amplitude_of(double m) {
  const double K = gsl_sf_ellint_Kcomp(std::sqrt(m), GSL_PREC_DOUBLE);
  return 4.0 * m * K * K;  // |beta|/2 with beta = -2 m (2K)^2
}

}  // namespace

TravelingWave cnoidal(double amplitude, int max_mode) {
  TravelingWave wave;
  wave.amplitude = amplitude;
  if (amplitude < 0.0) throw std::invalid_argument("amplitude must be nonnegative");
  if (amplitude == 0.0) {
    wave.profile = FourierSeries(max_mode, true);
    wave.speed = -kTwoPi * kTwoPi;
    return wave;
  }
  if (amplitude > amplitude_of(0.995))
    throw std::invalid_argument("amplitude outside the cn^2 validity range");
  double lo = 1e-12, hi = 0.995;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (amplitude_of(mid) < amplitude ? lo : hi) = mid;
  }
  const double m = 0.5 * (lo + hi);
  const double K = gsl_sf_ellint_Kcomp(std::sqrt(m), GSL_PREC_DOUBLE);
  const double gamma = 2.0 * K;  // period 1 in x
  // q = alpha + beta cn^2(gamma x; m) solves q'' = 3 q^2 + c q + const with
  // beta = -2 m gamma^2 and c = (8m - 4) gamma^2 - 6 alpha
  const double beta = -2.0 * m * gamma * gamma;
  const double alpha = -beta * cn_mean(m);
  const double speed = (8.0 * m - 4.0) * gamma * gamma - 6.0 * alpha;

  const int M = good_grid_size(3 * max_mode + 1, 0);
  RealGrid& g = grid_for(M);
  std::vector<double> values(static_cast<size_t>(M));
  for (int n = 0; n < M; ++n) {
    double sn, cn, dn;
    gsl_sf_elljac_e(gamma * n / M, m, &sn, &cn, &dn);
    values[static_cast<size_t>(n)] = alpha + beta * cn * cn;
  }
  FourierSeries q(max_mode, false);
  g.from_grid(values, q);
  q.drop_mean();  // alpha centers it analytically; this clears round-off
  double c = speed;
  polish_profile(q, c);
  wave.profile = q;
  wave.speed = c;
  wave.elliptic_parameter = m;
  return wave;
}

double traveling_wave_residual(const TravelingWave& wave) {
  const FourierSeries& q = wave.profile;
  FourierSeries r = dx_power(q, 3);
  r *= -1.0;
  FourierSeries qq = dealiased_product(q, dx_power(q, 1));
  qq *= 6.0;
  r += qq;
  FourierSeries cq = dx_power(q, 1);
  cq *= wave.speed;
  r += cq;
  return sobolev_norm(r, 0.0);
}

FourierSeries kdv_rhs(const FourierSeries& u, double eps, const PerturbationDensity& f) {
  if (std::abs(u.coeff(0)) > 1e-12) throw std::invalid_argument("kdv_rhs needs mean-zero input");
  FourierSeries rhs = dx_power(u, 3);
  rhs *= -1.0;
  FourierSeries uu = dealiased_product(u, u);
  uu *= 3.0;
  rhs += dx_power(uu.truncated(u.max_mode()), 1);
  if (eps != 0.0) {
    FourierSeries fp = f.zeta_derivative(u, 1);
    fp *= eps;
    rhs += dx_power(fp, 1);
  }
  rhs.drop_mean();
  return rhs;
}

KdvIntegrator::KdvIntegrator(int max_mode, double eps, PerturbationDensity f, double frame_speed,
                             bool nonlinear)
    : K_(max_mode),
      eps_(eps),
      f_(std::move(f)),
      frame_speed_(frame_speed),
      nonlinear_(nonlinear) {
  M_ = good_grid_size(3 * K_ + 1 + f_.coeff_band(), 0);
  lin_.resize(static_cast<size_t>(K_) + 1);
  for (int k = 0; k <= K_; ++k) {
    const double tpk = kTwoPi * k;
    lin_[static_cast<size_t>(k)] = cplx{0.0, tpk * tpk * tpk + frame_speed_ * tpk};
  }
  x_dependent_density_ = f_.coeff_band() > 0;
  cubic_only_ = f_.degree() == 3 && max_abs_coeff(f_.coeff(1)) == 0.0 &&
                max_abs_coeff(f_.coeff(2)) == 0.0 && f_.coeff(3).max_mode() <= 1;
  if (eps_ != 0.0) {
    // trig tables for the density band: cos/sin(2 pi kk n / M)
    const int band = f_.coeff_band();
    cos_table_.assign(static_cast<size_t>(band) + 1, std::vector<double>(static_cast<size_t>(M_)));
    sin_table_.assign(static_cast<size_t>(band) + 1, std::vector<double>(static_cast<size_t>(M_)));
    for (int kk = 0; kk <= band; ++kk)
      for (int n = 0; n < M_; ++n) {
        cos_table_[static_cast<size_t>(kk)][static_cast<size_t>(n)] =
            std::cos(kTwoPi * kk * n / M_);
        sin_table_[static_cast<size_t>(kk)][static_cast<size_t>(n)] =
            std::sin(kTwoPi * kk * n / M_);
      }
    powv_.assign(static_cast<size_t>(M_), 1.0);
  }
  na_.resize(static_cast<size_t>(K_) + 1);
  nb_.resize(static_cast<size_t>(K_) + 1);
  nc_.resize(static_cast<size_t>(K_) + 1);
  nu_.resize(static_cast<size_t>(K_) + 1);
  stage_.resize(static_cast<size_t>(K_) + 1);
  aa_g_.resize(static_cast<size_t>(K_) + 1);
  aa_f_.resize(static_cast<size_t>(K_) + 1);
  aa_gprev_.resize(static_cast<size_t>(K_) + 1);
  aa_fprev_.resize(static_cast<size_t>(K_) + 1);
}

void KdvIntegrator::refresh_coefficients(double dt) {
  const size_t nb = lin_.size();
  e_full_.resize(nb);
  e_half_.resize(nb);
  q_half_.resize(nb);
  f1_.resize(nb);
  f2_.resize(nb);
  f3_.resize(nb);
  for (size_t i = 0; i < nb; ++i) {
    const cplx z = lin_[i] * dt;
    e_full_[i] = std::exp(z);
    e_half_[i] = std::exp(0.5 * z);
    q_half_[i] = 0.5 * dt * phi(1, 0.5 * z);
    const cplx p1 = phi(1, z), p2 = phi(2, z), p3 = phi(3, z);
    f1_[i] = dt * (p1 - 3.0 * p2 + 4.0 * p3);
    f2_[i] = dt * (p2 - 2.0 * p3);
    f3_[i] = dt * (-p2 + 4.0 * p3);
  }
  dt_cached_ = dt;
}

void KdvIntegrator::nonlinear_term(const std::vector<cplx>& half, double t,
                                   std::vector<cplx>& out) {
  if (!nonlinear_) {
    std::fill(out.begin(), out.end(), cplx{0, 0});
    return;
  }
  RealGrid& g = grid_for(M_);
  auto gu = g.scratch(0);
  g.to_grid_coeffs(half, gu);
  auto acc = g.scratch(1);
  // h(x) = 3 u^2 + eps d_z f(x + c t, u); out_k = i 2 pi k h_k
  if (eps_ == 0.0) {
    for (int n = 0; n < M_; ++n) {
      const double v = gu[static_cast<size_t>(n)];
      acc[static_cast<size_t>(n)] = 3.0 * v * v;
    }
  } else if (cubic_only_) {
    // f = c_3(x) z^3 with band <= 1: everything folds into one pass
    const double shift = x_dependent_density_ ? frame_speed_ * t : 0.0;
    const FourierSeries& c = f_.coeff(3);
    const double c0 = 3.0 * eps_ * c.coeff(0).real();
    double cr = 0.0, ci = 0.0;
    if (c.max_mode() >= 1) {
      const cplx ck = c.coeff(1) * std::polar(1.0, kTwoPi * shift);
      cr = 3.0 * eps_ * 2.0 * ck.real();
      ci = -3.0 * eps_ * 2.0 * ck.imag();
    }
    double* a = acc.data();
    const double* guv = gu.data();
    const double* ct = cos_table_[cos_table_.size() > 1 ? 1 : 0].data();
    const double* st = sin_table_[sin_table_.size() > 1 ? 1 : 0].data();
    for (int n = 0; n < M_; ++n) {
      const double v2 = guv[n] * guv[n];
      a[n] = v2 * (3.0 + c0 + cr * ct[n] + ci * st[n]);
    }
  } else {
    for (int n = 0; n < M_; ++n) {
      const double v = gu[static_cast<size_t>(n)];
      acc[static_cast<size_t>(n)] = 3.0 * v * v;
    }
    const int D = f_.degree();
    const double shift = x_dependent_density_ ? frame_speed_ * t : 0.0;
    std::fill(powv_.begin(), powv_.end(), 1.0);  // v^{d-1}, updated per degree
    for (int d = 1; d <= D; ++d) {
      if (d > 1)
        for (int n = 0; n < M_; ++n) powv_[static_cast<size_t>(n)] *= gu[static_cast<size_t>(n)];
      const FourierSeries& c = f_.coeff(d);
      if (max_abs_coeff(c) == 0.0) continue;
      const double scale = eps_ * d;
      // constant part
      const double c0 = c.coeff(0).real();
      if (c0 != 0.0)
        for (int n = 0; n < M_; ++n)
          acc[static_cast<size_t>(n)] += scale * c0 * powv_[static_cast<size_t>(n)];
      // banded part with the frame shift folded into the coefficients
      for (int kk = 1; kk <= c.max_mode(); ++kk) {
        const cplx ck = c.coeff(kk) * std::polar(1.0, kTwoPi * kk * shift);
        if (ck == cplx{0, 0}) continue;
        const double cr = 2.0 * ck.real(), ci = -2.0 * ck.imag();
        const double* ct = cos_table_[static_cast<size_t>(kk)].data();
        const double* st = sin_table_[static_cast<size_t>(kk)].data();
        for (int n = 0; n < M_; ++n)
          acc[static_cast<size_t>(n)] +=
              scale * (cr * ct[n] + ci * st[n]) * powv_[static_cast<size_t>(n)];
      }
    }
  }
  g.from_grid_half(acc, out);
  for (int k = 1; k <= K_; ++k) out[static_cast<size_t>(k)] *= cplx{0.0, kTwoPi * k};
  out[0] = cplx{0, 0};  // mean-zero preserved exactly
}

void KdvIntegrator::step(std::vector<cplx>& u, double t, double dt) {
  if (dt != dt_cached_) refresh_coefficients(dt);
  const size_t nb = u.size();
  nonlinear_term(u, t, nu_);
  for (size_t i = 0; i < nb; ++i) stage_[i] = e_half_[i] * u[i] + q_half_[i] * nu_[i];
  nonlinear_term(stage_, t + 0.5 * dt, na_);
  for (size_t i = 0; i < nb; ++i) stage_[i] = e_half_[i] * u[i] + q_half_[i] * na_[i];
  nonlinear_term(stage_, t + 0.5 * dt, nb_);
  for (size_t i = 0; i < nb; ++i)
    stage_[i] = e_half_[i] * (e_half_[i] * u[i] + q_half_[i] * nu_[i]) +
                q_half_[i] * (2.0 * nb_[i] - nu_[i]);
  nonlinear_term(stage_, t + dt, nc_);
  for (size_t i = 0; i < nb; ++i)
    u[i] = e_full_[i] * u[i] + f1_[i] * nu_[i] + f2_[i] * 2.0 * (na_[i] + nb_[i]) +
           f3_[i] * nc_[i];
  if (!std::isfinite(u[1].real()) || !std::isfinite(u[1].imag()))
    throw std::runtime_error("kdv integration produced non-finite values");
}

void KdvIntegrator::step_midpoint(std::vector<cplx>& u, double t, double dt) {
  if (dt != dt_cached_) {
    refresh_coefficients(dt);
    warm_valid_ = false;
  }
  const size_t nb = u.size();
  // physical-midpoint fixed point: w = e^{L dt/2} u + (dt/2) N(w, t + dt/2),
  // then u <- e^{L dt/2} (2 w) - e^{L dt} u
  for (size_t i = 0; i < nb; ++i) nu_[i] = e_half_[i] * u[i];
  if (warm_valid_) {
    // warm start from the previous step's midpoint force, phase-advanced
    for (size_t i = 0; i < nb; ++i) stage_[i] = nu_[i] + 0.5 * dt * e_full_[i] * na_[i];
  } else {
    stage_ = nu_;
  }
  const double tmid = t + 0.5 * dt;
  // Picard with Anderson(1) mixing: x_{k+1} = g_k - theta (g_k - g_{k-1}),
  // theta = <f_k, f_k - f_{k-1}> / ||f_k - f_{k-1}||^2, f = g - x
  bool have_prev = false;
  ++fp_steps;
  for (int it = 0; it < 80; ++it) {
    ++fp_iters_total;
    nonlinear_term(stage_, tmid, na_);
    double diff2 = 0.0;
    double num = 0.0, den = 0.0;
    for (size_t i = 1; i < nb; ++i) {
      const cplx g = nu_[i] + 0.5 * dt * na_[i];
      const cplx f = g - stage_[i];
      diff2 = std::max(diff2, std::norm(f));
      if (have_prev) {
        const cplx df = f - aa_fprev_[i];
        num += f.real() * df.real() + f.imag() * df.imag();
        den += std::norm(df);
      }
      aa_g_[i] = g;
      aa_f_[i] = f;
    }
    if (diff2 < 1e-24) {
      for (size_t i = 1; i < nb; ++i) stage_[i] = aa_g_[i];
      break;
    }
    double theta = 0.0;
    if (have_prev && den > 0.0) theta = std::clamp(num / den, -1.0, 1.0);
    for (size_t i = 1; i < nb; ++i) {
      const cplx mixed = aa_g_[i] - theta * (aa_g_[i] - aa_gprev_[i]);
      aa_gprev_[i] = aa_g_[i];
      aa_fprev_[i] = aa_f_[i];
      stage_[i] = mixed;
    }
    have_prev = true;
  }
  warm_valid_ = true;
  for (size_t i = 1; i < nb; ++i)
    u[i] = e_half_[i] * (2.0 * stage_[i]) - e_full_[i] * u[i];
  if (!std::isfinite(u[1].real()) || !std::isfinite(u[1].imag()))
    throw std::runtime_error("kdv integration produced non-finite values");
}

std::vector<cplx> KdvIntegrator::pack(const FourierSeries& u) const {
  std::vector<cplx> half(static_cast<size_t>(K_) + 1);
  for (int k = 0; k <= K_; ++k) half[static_cast<size_t>(k)] = u.coeff(k);
  half[0] = cplx{0, 0};
  return half;
}

FourierSeries KdvIntegrator::unpack(const std::vector<cplx>& half) const {
  FourierSeries u(K_, true);
  for (int k = 1; k <= K_; ++k) u.set_pair(k, half[static_cast<size_t>(k)]);
  return u;
}

double KdvIntegrator::stable_dt(const FourierSeries& u0, double safety) const {
  const double umax = max_abs_value(u0) + 0.2;
  return safety / (6.0 * umax * kTwoPi * K_);
}

double hamiltonian(const FourierSeries& u) {
  double quad = 0.0;
  for (int k = 1; k <= u.max_mode(); ++k)
    quad += (kTwoPi * k) * (kTwoPi * k) * std::norm(u.coeff(k));
  // one-sided sum doubled: int u_x^2 = sum (2 pi k)^2 |u_k|^2 over all k
  const int M = good_grid_size(3 * u.max_mode() + 1, 0);
  RealGrid& g = grid_for(M);
  auto gu = g.scratch(0);
  g.to_grid(u, gu);
  double cubic = 0.0;
  for (int n = 0; n < M; ++n) {
    const double v = gu[static_cast<size_t>(n)];
    cubic += v * v * v;
  }
  cubic /= M;
  return quad + cubic;
}

double momentum(const FourierSeries& u) {
  double m = 0.5 * std::norm(u.coeff(0));
  for (int k = 1; k <= u.max_mode(); ++k) m += std::norm(u.coeff(k));
  return m;
}

double mean(const FourierSeries& u) { return u.coeff(0).real(); }

double orbit_distance(const FourierSeries& u, const TravelingWave& wave, double s) {
  const FourierSeries& q = wave.profile;
  const int K = std::max(u.max_mode(), q.max_mode());
  // ||u - q(.-sigma)||_s^2 = A + B - 2 C(sigma) over mean-zero inputs, with
  // the reality-paired sums folded onto positive modes
  double uu = std::pow(jbracket(0), 2.0 * s) * std::norm(u.coeff(0));
  double qq = 0.0;
  std::vector<cplx> a(static_cast<size_t>(K) + 1, cplx{0, 0});
  for (int k = 1; k <= K; ++k) {
    const double w = 2.0 * std::pow(jbracket(k), 2.0 * s);
    uu += w * std::norm(u.coeff(k));
    qq += w * std::norm(q.coeff(k));
    a[static_cast<size_t>(k)] = w * u.coeff(k) * std::conj(q.coeff(k));
  }
  auto corr = [&](double sigma) {
    double c = 0.0;
    for (int k = 1; k <= K; ++k)
      c += (a[static_cast<size_t>(k)] * std::polar(1.0, kTwoPi * k * sigma)).real();
    return c;
  };
  const int scan = 512;
  double best_sigma = 0.0, best = -1e300;
  for (int i = 0; i < scan; ++i) {
    const double sg = static_cast<double>(i) / scan;
    const double c = corr(sg);
    if (c > best) {
      best = c;
      best_sigma = sg;
    }
  }
  double lo = best_sigma - 1.0 / scan, hi = best_sigma + 1.0 / scan;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double c1 = corr(x1), c2 = corr(x2);
  for (int it = 0; it < 60; ++it) {
    if (c1 < c2) {
      lo = x1;
      x1 = x2;
      c1 = c2;
      x2 = lo + gr * (hi - lo);
      c2 = corr(x2);
    } else {
      hi = x2;
      x2 = x1;
      c2 = c1;
      x1 = hi - gr * (hi - lo);
      c1 = corr(x1);
    }
  }
  best = std::max(c1, c2);
  const double d2 = uu + qq - 2.0 * best;
  return std::sqrt(std::max(d2, 0.0));
}

namespace {

StabilityRow run_one(const TravelingWave& wave, const PerturbationDensity& f,
                     const StabilityConfig& cfg, double eps, double dt) {
  const auto t0 = std::chrono::steady_clock::now();
  const int K = wave.profile.max_mode();
  StabilityRow row;
  row.eps = eps;
  row.horizon = eps > 0.0 ? cfg.horizon_factor / (eps * eps) : cfg.companion_horizon;

  // seeded mean-zero perturbation, normalized in H^s
  FourierSeries pert(K, true);
  {
    Rng rng(cfg.seed);
    for (int k = 1; k <= std::min(cfg.perturbation_band, K); ++k)
      pert.set_pair(k, cplx{uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)});
    const double n = sobolev_norm(pert, cfg.sobolev_s);
    if (n > 0.0) pert *= 1.0 / n;
  }
  FourierSeries u0 = wave.profile;
  {
    FourierSeries ep = pert;
    ep *= eps;
    u0 += ep;
  }

  KdvIntegrator sim(K, eps, f, wave.speed);
  std::vector<cplx> state = sim.pack(u0);
  const double H0 = hamiltonian(u0), M0 = momentum(u0);

  const long steps = std::lround(row.horizon / dt);
  row.steps = steps;
  double max_dist = orbit_distance(u0, wave, cfg.sobolev_s);
  double t = 0.0;
  // eps > 0 horizons are O(eps^{-2}): the symplectic midpoint keeps the
  // energy error bounded there; the companion is a fixed point of the
  // exponential scheme and runs exactly.
  const bool conservative = eps > 0.0;
  try {
    for (long s = 0; s < steps; ++s) {
      if (conservative)
        sim.step_midpoint(state, t, dt);
      else
        sim.step(state, t, dt);
      t += dt;
      if ((s + 1) % cfg.sample_stride == 0 || s + 1 == steps) {
        const FourierSeries u = sim.unpack(state);
        max_dist = std::max(max_dist, orbit_distance(u, wave, cfg.sobolev_s));
        if (eps > 0.0 && max_dist / eps > 2.0 * cfg.ratio_bound) break;  // fate sealed
      }
    }
  } catch (const std::runtime_error&) {
    row.aborted_at = t;
  }
  const FourierSeries uT = sim.unpack(state);
  row.max_ratio = eps > 0.0 ? max_dist / eps : max_dist;
  row.h_drift = std::abs(hamiltonian(uT) - H0) / std::max(std::abs(H0), 1e-300);
  row.m_drift = std::abs(momentum(uT) - M0) / std::max(std::abs(M0), 1e-300);
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

}  // namespace

StabilityTable stability_experiment(const TravelingWave& wave, const PerturbationDensity& f,
                                    const StabilityConfig& cfg) {
  StabilityTable table;
  table.resolution = wave.profile.max_mode();
  double dt = cfg.dt;
  if (dt <= 0.0) {
    KdvIntegrator probe(wave.profile.max_mode(), 0.0, PerturbationDensity::polynomial({0.0}),
                        wave.speed);
    dt = probe.stable_dt(wave.profile);
  }
  table.dt = dt;

  // longest horizons first so parallel workers balance
  std::vector<double> eps_sorted = cfg.eps_list;
  std::sort(eps_sorted.begin(), eps_sorted.end());
  table.rows.resize(eps_sorted.size());
  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  const int threads = std::max(1, cfg.threads);
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= eps_sorted.size()) return;
      table.rows[i] = run_one(wave, f, cfg, eps_sorted[i], dt);
    }
  };
  if (threads == 1 || eps_sorted.size() <= 1) {
    worker();
  } else {
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  // report in the caller's order (descending eps reads naturally)
  std::sort(table.rows.begin(), table.rows.end(),
            [](const StabilityRow& a, const StabilityRow& b) { return a.eps > b.eps; });
  return table;
}

void write_stability_csv(std::ostream& os, const StabilityTable& table,
                         std::uint64_t config_hash) {
  os << "# config_hash=" << config_hash << " resolution=" << table.resolution
     << " dt=" << format_full(table.dt) << "\n";
  os << "eps,T,max_ratio,H_drift,M_drift,aborted_at\n";
  for (const auto& r : table.rows)
    os << format_full(r.eps) << ',' << format_full(r.horizon) << ',' << format_full(r.max_ratio)
       << ',' << format_full(r.h_drift) << ',' << format_full(r.m_drift) << ','
       << format_full(r.aborted_at) << '\n';
}

}  // namespace kdvlab
