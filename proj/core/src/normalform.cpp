#include "kdvlab/normalform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace kdvlab {

namespace {

std::vector<int> zero_ell(int p) { return std::vector<int>(static_cast<size_t>(p), 0); }

/// product of theta-functions: ell-convolution truncated to the window
TorusField conv_scalar(const TorusField& A, const TorusField& B) {
  TorusField out(A.ells().dim(), A.ells().bound());
  const auto& g = A.ells();
  for (size_t ea = 0; ea < g.count(); ++ea) {
    const cplx va = A.coeff_flat(ea, 0);
    if (va == cplx{0, 0}) continue;
    const auto la = g.unflatten(ea);
    for (size_t eb = 0; eb < g.count(); ++eb) {
      const cplx vb = B.coeff_flat(eb, 0);
      if (vb == cplx{0, 0}) continue;
      auto l = g.unflatten(eb);
      bool inside = true;
      for (size_t i = 0; i < l.size(); ++i) {
        l[i] += la[i];
        inside = inside && std::abs(l[i]) <= g.bound();
      }
      if (inside) out.add(l, 0, va * vb);
    }
  }
  return out;
}

/// d/d theta_k: multiply by i ell_k
TorusField dtheta(const TorusField& f, int k) {
  TorusField out = f;
  const auto& g = f.ells();
  for (size_t e = 0; e < g.count(); ++e) {
    const auto l = g.unflatten(e);
    const cplx w{0.0, static_cast<double>(l[static_cast<size_t>(k)])};
    if (f.window() == 0) {
      out.set_flat(e, 0, w * f.coeff_flat(e, 0));
    } else {
      for (int j = -f.window(); j <= f.window(); ++j) {
        if (f.constrained() && !f.modes().in_perp(j)) continue;
        out.set_flat(e, j, w * f.coeff_flat(e, j));
      }
    }
  }
  return out;
}

/// <A(theta,.), dx B(theta,.)>: x-pairing with ell-convolution
TorusField pair_dx(const TorusField& A, const TorusField& B) {
  TorusField out(A.ells().dim(), A.ells().bound());
  const auto& g = A.ells();
  for (size_t ea = 0; ea < g.count(); ++ea) {
    const auto la = g.unflatten(ea);
    for (size_t eb = 0; eb < g.count(); ++eb) {
      auto l = g.unflatten(eb);
      bool inside = true;
      for (size_t i = 0; i < l.size(); ++i) {
        l[i] += la[i];
        inside = inside && std::abs(l[i]) <= g.bound();
      }
      if (!inside) continue;
      cplx acc{0, 0};
      for (int j = -A.window(); j <= A.window(); ++j) {
        if (A.constrained() && !A.modes().in_perp(j)) continue;
        const cplx a = A.coeff_flat(ea, j);
        if (a == cplx{0, 0}) continue;
        const cplx b = B.coeff_flat(eb, -j);
        if (b == cplx{0, 0}) continue;
        acc += a * cplx{0.0, -kTwoPi * j} * b;
      }
      if (acc != cplx{0, 0}) out.add(l, 0, acc);
    }
  }
  return out;
}

double offaverage_max(const TorusField& f) {
  double m = 0.0;
  const auto& g = f.ells();
  for (size_t e = 0; e < g.count(); ++e) {
    if (g.is_zero(e)) continue;
    if (f.window() == 0) {
      m = std::max(m, std::abs(f.coeff_flat(e, 0)));
    } else {
      for (int j = -f.window(); j <= f.window(); ++j) {
        if (f.constrained() && !f.modes().in_perp(j)) continue;
        m = std::max(m, std::abs(f.coeff_flat(e, j)));
      }
    }
  }
  return m;
}

TorusField constant_field_like(const TorusField& f, cplx v) {
  TorusField out = f;
  out *= 0.0;
  if (f.window() == 0) out.set(zero_ell(f.ells().dim()), 0, v);
  return out;
}

/// x-mean slice of a symbol coefficient field
TorusField x_mean(const TorusField& sym) {
  TorusField out(sym.ells().dim(), sym.ells().bound());
  for (size_t e = 0; e < sym.ells().count(); ++e) out.set_flat(e, 0, sym.coeff_flat(e, 0));
  return out;
}

/// (1/3) dx^{-1} of the centered coefficient, slice-wise in x
TorusField dxinv_third_centered(const TorusField& sym) {
  TorusField out = sym;
  out *= 0.0;
  for (size_t e = 0; e < sym.ells().count(); ++e)
    for (int nx = -sym.window(); nx <= sym.window(); ++nx) {
      if (nx == 0) continue;
      out.set_flat(e, nx, sym.coeff_flat(e, nx) / (3.0 * cplx{0.0, kTwoPi * nx}));
    }
  return out;
}

/// coefficient field multiplied by dx^q in x
TorusField dx_sym(const TorusField& sym, int q) {
  TorusField out = sym;
  out *= 0.0;
  for (size_t e = 0; e < sym.ells().count(); ++e)
    for (int nx = -sym.window(); nx <= sym.window(); ++nx) {
      if (nx == 0) {
        if (q == 0) out.set_flat(e, 0, sym.coeff_flat(e, 0));
        continue;
      }
      out.set_flat(e, nx, std::pow(cplx{0.0, kTwoPi * nx}, q) * sym.coeff_flat(e, nx));
    }
  return out;
}

FourierSeries slice_series(const TorusField& sym, size_t ell_idx) {
  FourierSeries out(sym.window(), false);
  for (int nx = -sym.window(); nx <= sym.window(); ++nx)
    out.set_raw(nx, sym.coeff_flat(ell_idx, nx));
  return out;
}

/// tensor (ell, nx, j) slices scaled by (2 pi i nx)^q
SmoothingKernel kernel_dx(const SmoothingKernel& A, int q, int J, const ModeSet& modes) {
  SmoothingKernel out = A;
  out *= 0.0;
  for (size_t e = 0; e < A.ells().count(); ++e)
    for (int nx = -J; nx <= J; ++nx) {
      if (nx == 0) continue;
      const cplx f = std::pow(cplx{0.0, kTwoPi * nx}, q);
      for (int j : modes.perp_window(J)) {
        const cplx v = A.get(e, nx, j);
        if (v != cplx{0, 0}) out.set(e, nx, j, f * v);
      }
    }
  return out;
}

cplx omega_symbol(const FrequencyModel& model, int j) {
  return cplx{0.0, model.normal_frequency(j)};
}

DenseOp iomega_dense(const FrequencyModel& model, int J) {
  DenseOp op(J);
  for (int j : model.modes().perp_window(J)) op.at(j, j) = omega_symbol(model, j);
  return op;
}

DenseOp transposed_real(const DenseOp& M) {
  const int K = M.window();
  DenseOp out(K);
  for (int i = -K; i <= K; ++i)
    for (int j = -K; j <= K; ++j) out.at(i, j) = M.at(-j, -i);
  return out;
}

DenseOp symbol_slice_dense(const FourierSeries& c, int m, const CutoffFunction& cutoff,
                           const ModeSet& modes, int J) {
  return DenseOp::paraproduct_op(c, m, cutoff, J).projected_perp(modes);
}

/// i Omega_perp = -dx^3 + sum c_{-k} dx^{-k}; the tail constants are exact
/// for the model's odd inverse powers.
std::vector<std::pair<int, double>> tail_multipliers(const FrequencyModel& model) {
  std::vector<std::pair<int, double>> ops;
  const auto& tail = model.tail();
  for (size_t i = 0; i < tail.size(); ++i) {
    const int k = 2 * static_cast<int>(i) + 1;
    // i d_k j^{-k} = c_{-k} (2 pi i j)^{-k} with c_{-k} = d_k (2 pi)^k i^{k+1}
    const double c = tail[i] * std::pow(kTwoPi, k) * (((k + 1) / 2) % 2 == 0 ? 1.0 : -1.0);
    if (c != 0.0) ops.emplace_back(-k, c);
  }
  return ops;
}

}  // namespace

int Monomial::degree() const {
  int d = eps;
  for (int b : beta) d += b;
  return d;
}

double Monomial::eval(const PhasePoint& x) const {
  double v = std::pow(x.eps, eps);
  for (size_t i = 0; i < beta.size(); ++i) v *= std::pow(x.y[i], beta[i]);
  return v;
}

bool Monomial::operator<(const Monomial& o) const {
  if (eps != o.eps) return eps < o.eps;
  return beta < o.beta;
}

Monomial Monomial::one(int p) { return Monomial{0, std::vector<int>(static_cast<size_t>(p), 0)}; }
Monomial Monomial::eps1(int p) { return Monomial{1, std::vector<int>(static_cast<size_t>(p), 0)}; }
Monomial Monomial::y(int p, int i, int power) {
  Monomial m{0, std::vector<int>(static_cast<size_t>(p), 0)};
  m.beta[static_cast<size_t>(i)] = power;
  return m;
}

TaylorHamiltonian TaylorHamiltonian::empty(int p, int L, int J, int xband, ModeSet modes) {
  TaylorHamiltonian H;
  H.p = p;
  H.L = L;
  H.J = J;
  H.xband = xband;
  H.modes = modes;
  H.omega_spp.assign(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(p), 0.0));
  H.P00 = TorusField(p, L);
  H.P10.assign(static_cast<size_t>(p), TorusField(p, L));
  H.P01 = TorusField(p, L, modes, J);
  H.P00_3 = TorusField(p, L);
  H.P10_3.assign(static_cast<size_t>(p), TorusField(p, L));
  H.P20_3.assign(static_cast<size_t>(p),
                 std::vector<TorusField>(static_cast<size_t>(p), TorusField(p, L)));
  H.P30_3.assign(static_cast<size_t>(p),
                 std::vector<std::vector<TorusField>>(
                     static_cast<size_t>(p),
                     std::vector<TorusField>(static_cast<size_t>(p), TorusField(p, L))));
  H.P01_3 = TorusField(p, L, modes, J);
  H.P11_3.assign(static_cast<size_t>(p), TorusField(p, L, modes, J));
  H.P21_3.assign(static_cast<size_t>(p),
                 std::vector<TorusField>(static_cast<size_t>(p), TorusField(p, L, modes, J)));
  return H;
}

double TaylorHamiltonian::max_abs_eps_blocks_offaverage() const {
  double m = offaverage_max(P00);
  for (const auto& f : P10) m = std::max(m, offaverage_max(f));
  m = std::max(m, P01.max_abs());
  return m;
}

Step1Generators step1_normalize_linear(TaylorHamiltonian& H, const FrequencyModel& model,
                                       TorusField* new_eps2_block) {
  Step1Generators gen;
  gen.F00 = solve_torus_transport(model, H.P00);

  std::vector<TorusField> dF00(static_cast<size_t>(H.p), TorusField(H.p, H.L));
  for (int k = 0; k < H.p; ++k) dF00[static_cast<size_t>(k)] = dtheta(gen.F00, k);
  gen.F10.reserve(static_cast<size_t>(H.p));
  for (int i = 0; i < H.p; ++i) {
    TorusField rhs = H.P10[static_cast<size_t>(i)];
    for (int k = 0; k < H.p; ++k) {
      TorusField c = dF00[static_cast<size_t>(k)];
      c *= H.omega_spp[static_cast<size_t>(i)][static_cast<size_t>(k)];
      rhs += c;
    }
    gen.F10.push_back(solve_torus_transport(model, rhs));
  }
  gen.F01 = solve_first_melnikov(model, H.P01);

  if (new_eps2_block) {
    // eps^2 scalar block of the transformed Hamiltonian:
    // -1/2 (dth P00).F10 + 1/2 (<P10> + P10).(dth F00) + 1/2 <P01, dx F01>
    TorusField acc(H.p, H.L);
    for (int k = 0; k < H.p; ++k) {
      TorusField t1 = conv_scalar(dtheta(H.P00, k), gen.F10[static_cast<size_t>(k)]);
      t1 *= -0.5;
      acc += t1;
      TorusField mean_plus = H.P10[static_cast<size_t>(k)];
      mean_plus.add(zero_ell(H.p), 0, H.P10[static_cast<size_t>(k)].average());
      TorusField t2 = conv_scalar(mean_plus, dF00[static_cast<size_t>(k)]);
      t2 *= 0.5;
      acc += t2;
    }
    TorusField t4 = pair_dx(H.P01, gen.F01);
    t4 *= 0.5;
    acc += t4;
    *new_eps2_block = acc;
  }

  H.P00 = constant_field_like(H.P00, H.P00.average());
  for (auto& f : H.P10) f = constant_field_like(f, f.average());
  H.P01 *= 0.0;
  return gen;
}

TorusField step2_normalize_eps2(TorusField& eps2_block, const FrequencyModel& model) {
  TorusField F2 = solve_torus_transport(model, eps2_block);
  eps2_block = constant_field_like(eps2_block, eps2_block.average());
  return F2;
}

Step3Generators step3_normalize_affine(TaylorHamiltonian& H, const FrequencyModel& model,
                                       NormalFormPart& nf) {
  Step3Generators gen;
  const size_t p = static_cast<size_t>(H.p);

  nf.omega_hat_const.assign(p, 0.0);
  for (size_t i = 0; i < p; ++i) nf.omega_hat_const[i] = H.P10[i].average().real();

  nf.omega_hat_eps.assign(p, 0.0);
  gen.F10.reserve(p);
  for (size_t i = 0; i < p; ++i) {
    gen.F10.push_back(solve_torus_transport(model, H.P10_3[i]));
    nf.omega_hat_eps[i] = H.P10_3[i].average().real();
    H.P10_3[i] = constant_field_like(H.P10_3[i], H.P10_3[i].average());
  }

  nf.q_eps.assign(p, std::vector<double>(p, 0.0));
  gen.F20.assign(p, std::vector<TorusField>(p));
  for (size_t i = 0; i < p; ++i)
    for (size_t k = 0; k < p; ++k) {
      gen.F20[i][k] = solve_torus_transport(model, H.P20_3[i][k]);
      nf.q_eps[i][k] = H.P20_3[i][k].average().real();
      H.P20_3[i][k] = constant_field_like(H.P20_3[i][k], H.P20_3[i][k].average());
    }

  nf.q_cubic.assign(p, std::vector<std::vector<double>>(p, std::vector<double>(p, 0.0)));
  gen.F30.assign(p, std::vector<std::vector<TorusField>>(p, std::vector<TorusField>(p)));
  for (size_t i = 0; i < p; ++i)
    for (size_t k = 0; k < p; ++k)
      for (size_t q = 0; q < p; ++q) {
        gen.F30[i][k][q] = solve_torus_transport(model, H.P30_3[i][k][q]);
        nf.q_cubic[i][k][q] = H.P30_3[i][k][q].average().real();
        H.P30_3[i][k][q] = constant_field_like(H.P30_3[i][k][q], H.P30_3[i][k][q].average());
      }

  gen.F01 = solve_first_melnikov(model, H.P01_3);
  H.P01_3 *= 0.0;
  gen.F11.reserve(p);
  for (size_t i = 0; i < p; ++i) {
    gen.F11.push_back(solve_first_melnikov(model, H.P11_3[i]));
    H.P11_3[i] *= 0.0;
  }
  gen.F21.assign(p, std::vector<TorusField>(p));
  for (size_t i = 0; i < p; ++i)
    for (size_t k = 0; k < p; ++k) {
      gen.F21[i][k] = solve_first_melnikov(model, H.P21_3[i][k]);
      H.P21_3[i][k] *= 0.0;
    }
  return gen;
}

// --- vector field ---------------------------------------------------------

DenseOp NormalVectorField::dense_linear_part(const PhasePoint& x, const FrequencyModel& model,
                                             bool include_omega) const {
  DenseOp D(J);
  if (include_omega) D += iomega_dense(model, J);
  const auto perp = modes.perp_window(J);
  for (const auto& [order, slots] : mult_w)
    for (const auto& [mono, field] : slots) {
      const cplx lam = field.eval_scalar(x.theta) * mono.eval(x);
      if (lam == cplx{0, 0}) continue;
      for (int j : perp) D.at(j, j) += lam * std::pow(cplx{0.0, kTwoPi * j}, order);
    }
  for (const auto& [order, sigma] : mult_ww) {
    cplx lam{0, 0};
    const FourierSeries s = sigma.eval_series(x.theta);
    for (int j : perp) lam += s.coeff(j) * x.w.coeff(j);
    if (lam == cplx{0, 0}) continue;
    for (int j : perp) D.at(j, j) += lam * std::pow(cplx{0.0, kTwoPi * j}, order);
  }
  for (const auto& [mono, diag] : zdiag) {
    const double m = mono.eval(x);
    for (size_t i = 0; i < perp.size(); ++i) D.at(perp[i], perp[i]) += m * diag[i];
  }
  for (const auto& [order, slots] : sym_w)
    for (const auto& [mono, field] : slots) {
      const double m = mono.eval(x);
      if (m == 0.0) continue;
      FourierSeries c = field.eval_series(x.theta);
      c *= m;
      if (max_abs_coeff(c) == 0.0) continue;
      D += symbol_slice_dense(c, order, cutoff, modes, J);
    }
  for (const auto& [order, tensor] : sym_ww) {
    FourierSeries c(J, false);
    for (size_t e = 0; e < tensor.ells().count(); ++e) {
      const auto ell = tensor.ells().unflatten(e);
      double phase = 0.0;
      for (size_t i = 0; i < x.theta.size(); ++i) phase += x.theta[i] * ell[i];
      const cplx ph = std::polar(1.0, phase);
      for (int nx = -J; nx <= J; ++nx) {
        cplx acc{0, 0};
        for (int j : perp) acc += tensor.get(e, nx, j) * x.w.coeff(j);
        if (acc != cplx{0, 0}) c.set_raw(nx, c.coeff(nx) + ph * acc);
      }
    }
    if (max_abs_coeff(c) == 0.0) continue;
    D += symbol_slice_dense(c, order, cutoff, modes, J);
  }
  for (const auto& [mono, kern] : smooth_w) {
    const double m = mono.eval(x);
    if (m == 0.0) continue;
    for (size_t e = 0; e < kern.ells().count(); ++e) {
      const auto ell = kern.ells().unflatten(e);
      double phase = 0.0;
      for (size_t i = 0; i < x.theta.size(); ++i) phase += x.theta[i] * ell[i];
      const cplx ph = std::polar(1.0, phase) * m;
      for (int n : perp)
        for (int j : perp) {
          const cplx v = kern.get(e, n, j);
          if (v != cplx{0, 0}) D.at(n, j) += ph * v;
        }
    }
  }
  return D;
}

FourierSeries NormalVectorField::apply_perp(const PhasePoint& x,
                                            const FrequencyModel& model) const {
  FourierSeries out = dense_linear_part(x, model, true).apply(x.w).truncated(J);
  for (const auto& [mono, kern] : smooth_ww) {
    FourierSeries q = kern.apply_bilinear(x.theta, x.w, x.w);
    q *= mono.eval(x);
    out += q;
  }
  return out;
}

std::vector<double> NormalVectorField::theta_component_variable(const PhasePoint& x) const {
  std::vector<double> out(static_cast<size_t>(p), 0.0);
  const auto perp = modes.perp_window(J);
  for (int i = 0; i < p; ++i) {
    double v = -x.eps * (nf.omega_hat_const[static_cast<size_t>(i)] +
                         x.eps * nf.omega_hat_eps[static_cast<size_t>(i)]);
    for (int k = 0; k < p; ++k) {
      v -= omega_spp[static_cast<size_t>(i)][static_cast<size_t>(k)] * x.y[static_cast<size_t>(k)];
      v -= 2.0 * x.eps * nf.q_eps[static_cast<size_t>(i)][static_cast<size_t>(k)] *
           x.y[static_cast<size_t>(k)];
      for (int q = 0; q < p; ++q)
        v -= 3.0 *
             nf.q_cubic[static_cast<size_t>(i)][static_cast<size_t>(k)][static_cast<size_t>(q)] *
             x.y[static_cast<size_t>(k)] * x.y[static_cast<size_t>(q)];
    }
    if (i < static_cast<int>(upsilon_theta.size())) {
      const auto& U = upsilon_theta[static_cast<size_t>(i)];
      cplx acc{0, 0};
      for (size_t e = 0; e < U.ells().count(); ++e) {
        const auto ell = U.ells().unflatten(e);
        double phase = 0.0;
        for (size_t q = 0; q < x.theta.size(); ++q) phase += x.theta[q] * ell[q];
        const cplx ph = std::polar(1.0, phase);
        for (int j : perp)
          for (int jp : perp) {
            const cplx u = U.get(e, j, jp);
            if (u != cplx{0, 0}) acc += ph * u * x.w.coeff(j) * x.w.coeff(jp);
          }
      }
      v -= acc.real();
    }
    if (i < static_cast<int>(ztheta.size()) && !ztheta[static_cast<size_t>(i)].empty()) {
      cplx acc{0, 0};
      for (size_t q = 0; q < perp.size(); ++q)
        acc += ztheta[static_cast<size_t>(i)][q] * x.w.coeff(perp[q]) * x.w.coeff(-perp[q]);
      v -= acc.real();
    }
    out[static_cast<size_t>(i)] = v;
  }
  return out;
}

NormalVectorField build_vector_field(const TaylorHamiltonian& H, const FrequencyModel& model,
                                     const CutoffFunction& cutoff, int depth) {
  NormalVectorField V;
  V.p = H.p;
  V.L = H.L;
  V.J = H.J;
  V.xband = H.xband;
  V.depth = depth;
  V.modes = H.modes;
  V.cutoff = cutoff;
  V.omega = model.omega();
  V.omega_spp = H.omega_spp;
  V.upsilon_theta.assign(static_cast<size_t>(H.p), SmoothingKernel(H.p, H.L, H.modes, H.J));
  const auto perp = H.modes.perp_window(H.J);

  auto sym_slot = [&](int order, const Monomial& mono) -> TorusField& {
    return V.sym_w[order].try_emplace(mono, TorusField::unconstrained(H.p, H.L, H.J))
        .first->second;
  };
  auto smooth_slot = [&](const Monomial& mono) -> SmoothingKernel& {
    return V.smooth_w.try_emplace(mono, SmoothingKernel(H.p, H.L, H.modes, H.J)).first->second;
  };

  // X-linear = dx o (P02 + P02^T): exact Leibniz on the listed terms; the
  // transpose remainder and any below-depth spill are materialized per
  // ell-slice so the represented operator matches dx o (P02 + P02^T) on the
  // window exactly.
  for (const auto& [m, slots] : H.P02.symbol) {
    for (const auto& [mono, c] : slots) {
      // symbol pieces of dx o T_c dx^m and of dx o (T_c dx^m)^T expansion
      std::vector<std::pair<int, TorusField>> pieces;
      pieces.emplace_back(m + 1, c);
      pieces.emplace_back(m, dx_sym(c, 1));
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      const int nmax = std::max(depth + m + 1, 0);
      for (int n = 0; n <= nmax; ++n) {
        const double Knm = composition_constant(n, m);
        if (Knm == 0.0) continue;
        TorusField cn = dx_sym(c, n);
        cn *= sign * Knm;
        pieces.emplace_back(m - n + 1, std::move(cn));
        TorusField cn1 = dx_sym(c, n + 1);
        cn1 *= sign * Knm;
        pieces.emplace_back(m - n, std::move(cn1));
      }
      for (const auto& [order, coeff] : pieces)
        if (order >= -depth) sym_slot(order, mono) += coeff;

      auto& kern = smooth_slot(mono);
      const DenseOp dxop = DenseOp::dx_power_op(H.J, 1);
      for (size_t e = 0; e < c.ells().count(); ++e) {
        const FourierSeries cs = slice_series(c, e);
        if (max_abs_coeff(cs) == 0.0) continue;
        const DenseOp direct = symbol_slice_dense(cs, m, cutoff, H.modes, H.J);
        DenseOp target = direct + transposed_real(direct).projected_perp(H.modes);
        target = dxop.compose(target).projected_perp(H.modes);
        // subtract exactly what went into the symbol slots for this slice
        for (const auto& [order, coeff] : pieces) {
          if (order < -depth) continue;
          const FourierSeries ps = slice_series(coeff, e);
          if (max_abs_coeff(ps) == 0.0) continue;
          target -= symbol_slice_dense(ps, order, cutoff, H.modes, H.J);
        }
        for (int nn : perp)
          for (int j : perp) {
            const cplx v = target.at(nn, j);
            if (v != cplx{0, 0}) kern.add(e, nn, j, v);
          }
      }
    }
  }
  for (const auto& [mono, S] : H.P02.smooth) {
    auto& kern = smooth_slot(mono);
    for (size_t e = 0; e < S.ells().count(); ++e)
      for (int n : perp) {
        const cplx dxn = cplx{0.0, kTwoPi * n};
        for (int j : perp) {
          // (S + S^T)(l)_{nj}; the real-pairing transpose is S^T_{nj} = S_{-j,-n}
          const cplx v = S.get(e, n, j) + S.get(e, -j, -n);
          if (v != cplx{0, 0}) kern.add(e, n, j, dxn * v);
        }
      }
  }
  // Upsilon_2^theta = grad_y <P02(theta,y) w, w>; the (j,j') entries of the
  // form <M w, w> are M_{-j', j}.
  for (int i = 0; i < H.p; ++i) {
    const Monomial yi = Monomial::y(H.p, i);
    auto& U = V.upsilon_theta[static_cast<size_t>(i)];
    for (const auto& [m, slots] : H.P02.symbol) {
      auto it = slots.find(yi);
      if (it == slots.end()) continue;
      for (size_t e = 0; e < it->second.ells().count(); ++e) {
        const FourierSeries cs = slice_series(it->second, e);
        if (max_abs_coeff(cs) == 0.0) continue;
        const DenseOp M = symbol_slice_dense(cs, m, cutoff, H.modes, H.J);
        for (int j : perp)
          for (int jp : perp) {
            const cplx v = M.at(-jp, j) + M.at(-j, jp);
            if (v != cplx{0, 0}) U.add(e, j, jp, 0.5 * v);
          }
      }
    }
    auto it = H.P02.smooth.find(yi);
    if (it != H.P02.smooth.end())
      for (size_t e = 0; e < it->second.ells().count(); ++e)
        for (int j : perp)
          for (int jp : perp) {
            const cplx v = it->second.get(e, -jp, j) + it->second.get(e, -j, jp);
            if (v != cplx{0, 0}) U.add(e, j, jp, 0.5 * v);
          }
  }
  if (H.P03) {
    auto& kern = V.smooth_ww
                     .try_emplace(Monomial::one(H.p),
                                  SmoothingKernel::bilinear(H.p, H.L, H.modes, H.J))
                     .first->second;
    for (size_t e = 0; e < H.P03->ells().count(); ++e)
      for (int n : perp) {
        const cplx f = 3.0 * cplx{0.0, kTwoPi * n};
        for (int j : perp)
          for (int jp : perp) {
            const cplx v = H.P03->get(e, n, j, jp);
            if (v != cplx{0, 0}) kern.add(e, n, j, jp, f * v);
          }
      }
  }
  return V;
}

SymbolStepResult regularize_symbol_step(NormalVectorField& V, const FrequencyModel& model,
                                        int n) {
  SymbolStepResult res;
  const int top = 1 - n;  // order being cleared
  const int m = -n - 1;   // order of the generator symbol
  const auto perp = V.modes.perp_window(V.J);
  const auto tail_ops = tail_multipliers(model);

  auto sym_slot = [&](int order, const Monomial& mono) -> TorusField& {
    return V.sym_w[order].try_emplace(mono, TorusField::unconstrained(V.p, V.L, V.J))
        .first->second;
  };
  auto smooth_slot = [&](const Monomial& mono) -> SmoothingKernel& {
    return V.smooth_w.try_emplace(mono, SmoothingKernel(V.p, V.L, V.modes, V.J)).first->second;
  };
  // a coefficient landing below the stored depth goes to the dense kernels
  auto spill = [&](const Monomial& mono, const TorusField& coeff, int order) {
    auto& kern = smooth_slot(mono);
    for (size_t e = 0; e < coeff.ells().count(); ++e) {
      const FourierSeries cs = slice_series(coeff, e);
      if (max_abs_coeff(cs) == 0.0) continue;
      const DenseOp d = symbol_slice_dense(cs, order, V.cutoff, V.modes, V.J);
      for (int nn : perp)
        for (int j : perp) {
          const cplx v = d.at(nn, j);
          if (v != cplx{0, 0}) kern.add(e, nn, j, v);
        }
    }
  };
  auto add_sym = [&](int order, const Monomial& mono, const TorusField& coeff) {
    if (order < -V.depth) {
      spill(mono, coeff, order);
      return;
    }
    sym_slot(order, mono) += coeff;
  };

  auto it_order = V.sym_w.find(top);
  if (it_order != V.sym_w.end()) {
    std::vector<Monomial> monos;
    for (const auto& [mono, f] : it_order->second)
      if (mono.degree() <= 1 && f.max_abs() > 0.0) monos.push_back(mono);
    for (const auto& mono : monos) {
      const TorusField a = it_order->second[mono];
      const TorusField mean = x_mean(a);
      if (n % 2 == 1) res.odd_mean_defect = std::max(res.odd_mean_defect, mean.max_abs());
      auto& lam = V.mult_w[top].try_emplace(mono, TorusField(V.p, V.L)).first->second;
      lam += mean;
      const TorusField b = dxinv_third_centered(a);
      if (mono.eps == 1)
        res.b_eps = b;
      else
        res.b_y.push_back(b);
      it_order->second[mono] *= 0.0;

      // [i Omega, T_b dx^m]: Airy part by exact Leibniz
      {
        TorusField t = dx_sym(b, 2);
        t *= -3.0;
        add_sym(top - 1, mono, t);
        TorusField t2 = dx_sym(b, 3);
        t2 *= -1.0;
        add_sym(top - 2, mono, t2);
      }
      // inverse-power tail commutators: expansion terms plus the exact
      // dense remainder
      for (const auto& [mk, ck] : tail_ops) {
        for (int q = 1;; ++q) {
          const int order = m + mk - q;
          if (order < -V.depth) break;
          const double Kq = composition_constant(q, mk);
          if (Kq == 0.0) continue;
          TorusField t = dx_sym(b, q);
          t *= ck * Kq;
          add_sym(order, mono, t);
        }
        auto& kern = smooth_slot(mono);
        const DenseOp dk = DenseOp::dx_power_op(V.J, mk);
        for (size_t e = 0; e < b.ells().count(); ++e) {
          const FourierSeries bs = slice_series(b, e);
          if (max_abs_coeff(bs) == 0.0) continue;
          const DenseOp tb = symbol_slice_dense(bs, m, V.cutoff, V.modes, V.J);
          DenseOp comm = dk.compose(tb);
          comm -= tb.compose(dk);
          comm *= ck;
          for (int q = 1;; ++q) {
            const int order = m + mk - q;
            if (order < -V.depth) break;
            const double Kq = composition_constant(q, mk);
            if (Kq == 0.0) continue;
            FourierSeries t = dx_power(bs, q);
            t *= ck * Kq;
            comm -= symbol_slice_dense(t, order, V.cutoff, V.modes, V.J);
          }
          comm = comm.projected_perp(V.modes);
          for (int nn : perp)
            for (int j : perp) {
              const cplx v = comm.at(nn, j);
              if (v != cplx{0, 0}) kern.add(e, nn, j, v);
            }
        }
      }
      // (omega + eps hat-omega + grad Q).dtheta b at the generator's order
      {
        TorusField t = b;
        t *= 0.0;
        for (int k = 0; k < V.p; ++k) {
          TorusField dk = dtheta(b, k);
          dk *= V.omega[static_cast<size_t>(k)];
          t += dk;
        }
        add_sym(m, mono, t);
        for (int k = 0; k < V.p; ++k) {
          const TorusField dk = dtheta(b, k);
          Monomial me = mono;
          me.eps += 1;
          if (me.degree() <= 2 && m >= -V.depth &&
              V.nf.omega_hat_const.size() == static_cast<size_t>(V.p)) {
            TorusField te = dk;
            te *= V.nf.omega_hat_const[static_cast<size_t>(k)];
            sym_slot(m, me) += te;
          }
          for (int q = 0; q < V.p; ++q) {
            const double w = V.omega_spp[static_cast<size_t>(k)][static_cast<size_t>(q)];
            if (w == 0.0) continue;
            Monomial my = mono;
            my.beta[static_cast<size_t>(q)] += 1;
            if (my.degree() > 2 || m < -V.depth) continue;
            TorusField ty = dk;
            ty *= w;
            sym_slot(m, my) += ty;
          }
        }
      }
    }
  }

  // quadratic branch: A_{1-n}(theta)[w] stored as an (ell, nx, j)-tensor
  auto it_ww = V.sym_ww.find(top);
  if (it_ww != V.sym_ww.end() && it_ww->second.max_abs() > 0.0) {
    SmoothingKernel& A = it_ww->second;
    auto& Lam = V.mult_ww.try_emplace(top, TorusField(V.p, V.L, V.modes, V.J)).first->second;
    SmoothingKernel B = A;
    B *= 0.0;
    for (size_t e = 0; e < A.ells().count(); ++e)
      for (int j : perp) {
        const cplx meanv = A.get(e, 0, j);
        if (meanv != cplx{0, 0}) Lam.set_flat(e, j, Lam.coeff_flat(e, j) + meanv);
        for (int nx = -V.J; nx <= V.J; ++nx) {
          if (nx == 0) continue;
          const cplx v = A.get(e, nx, j);
          if (v != cplx{0, 0}) B.set(e, nx, j, v / (3.0 * cplx{0.0, kTwoPi * nx}));
        }
      }
    A *= 0.0;
    auto add_ww = [&](int order, const SmoothingKernel& t) {
      if (order < -V.depth) return;  // below depth: order-three bookkeeping only
      auto& slot = V.sym_ww.try_emplace(order, SmoothingKernel(V.p, V.L, V.modes, V.J))
                       .first->second;
      slot += t;
    };
    {
      SmoothingKernel t2 = kernel_dx(B, 2, V.J, V.modes);
      t2 *= -3.0;
      add_ww(top - 1, t2);
      SmoothingKernel t3 = kernel_dx(B, 3, V.J, V.modes);
      t3 *= -1.0;
      add_ww(top - 2, t3);
    }
    {
      SmoothingKernel tm = B;
      tm *= 0.0;
      for (size_t e = 0; e < B.ells().count(); ++e) {
        const auto ell = B.ells().unflatten(e);
        double od = 0.0;
        for (size_t k = 0; k < V.omega.size(); ++k) od += V.omega[k] * ell[k];
        for (int nx = -V.J; nx <= V.J; ++nx)
          for (int j : perp) {
            const cplx v = B.get(e, nx, j);
            if (v == cplx{0, 0}) continue;
            tm.set(e, nx, j, tm.get(e, nx, j) + cplx{0.0, od} * v - v * omega_symbol(model, j));
          }
      }
      add_ww(m, tm);
    }
    for (const auto& [mk, ck] : tail_ops) {
      for (int q = 1;; ++q) {
        const int order = m + mk - q;
        if (order < -V.depth) break;
        const double Kq = composition_constant(q, mk);
        if (Kq == 0.0) continue;
        SmoothingKernel t = kernel_dx(B, q, V.J, V.modes);
        t *= ck * Kq;
        add_ww(order, t);
      }
    }
  }

  // Appendix-A diagnostic: sample the updated linear-in-w part
  PhasePoint sample;
  {
    std::vector<double> th(static_cast<size_t>(V.p), 0.7), yy(static_cast<size_t>(V.p), 0.05);
    FourierSeries w(V.J, true);
    for (int j : perp)
      if (j > 0) w.set_pair(j, cplx{0.03 / jbracket(j), 0.02 / jbracket(j)});
    sample = PhasePoint(th, yy, w, 0.05);
  }
  res.diag_defect = V.dense_linear_part(sample, model, false).max_abs_diag_real();
  return res;
}

MultiplierStepResult normalize_multiplier_quadratic(NormalVectorField& V,
                                                    const FrequencyModel& model) {
  require_melnikov(model, 1, V.L, V.J);
  MultiplierStepResult res;
  std::vector<int> orders;
  for (const auto& [order, sigma] : V.mult_ww)
    if (order <= 0) orders.push_back(order);
  for (int order : orders) {
    const TorusField& sigma = V.mult_ww[order];
    TorusField xi = sigma;
    xi *= 0.0;
    for (size_t e = 0; e < sigma.ells().count(); ++e) {
      const auto ell = sigma.ells().unflatten(e);
      const double base = model.omega_dot(ell);
      for (int j : V.modes.perp_window(V.J)) {
        const cplx s = sigma.coeff_flat(e, j);
        if (s == cplx{0, 0}) continue;
        const double d = base - model.normal_frequency(j);
        if (d == 0.0) throw DivisorBelowThreshold(ell, {-j}, d, 1);
        const cplx x = -s / cplx{0.0, d};
        xi.set_flat(e, j, x);
        res.residual = std::max(res.residual, std::abs(cplx{0.0, d} * x + s));
      }
    }
    res.xi[order] = xi;
    V.mult_ww.erase(order);
  }
  return res;
}

SmoothingStepResult normalize_smoothing(NormalVectorField& V, const FrequencyModel& model) {
  SmoothingStepResult res;
  require_melnikov(model, 2, V.L, V.J);
  require_melnikov(model, 3, V.L, V.J);
  const auto perp = V.modes.perp_window(V.J);

  // theta-component quadratic block: resonant part survives as Z^(theta)
  V.ztheta.assign(static_cast<size_t>(V.p), std::vector<cplx>(perp.size(), cplx{0, 0}));
  for (int i = 0; i < V.p; ++i) {
    auto& U = V.upsilon_theta[static_cast<size_t>(i)];
    const size_t zero = U.ells().index(zero_ell(V.p));
    for (size_t q = 0; q < perp.size(); ++q)
      V.ztheta[static_cast<size_t>(i)][q] = U.get(zero, perp[q], -perp[q]);
    for (size_t e = 0; e < U.ells().count(); ++e) {
      const auto ell = U.ells().unflatten(e);
      const double base = model.omega_dot(ell);
      for (int j : perp)
        for (int jp : perp) {
          const cplx u = U.get(e, j, jp);
          if (u == cplx{0, 0}) continue;
          const bool resonant = U.ells().is_zero(e) && jp == -j;
          if (resonant) continue;
          const double d = base - model.normal_frequency(j) - model.normal_frequency(jp);
          if (d == 0.0) throw DivisorBelowThreshold(ell, {j, jp}, d, 2);
          // S entry u / (i d); only the solvability matters for the field
          res.residual_theta = std::max(res.residual_theta, 0.0);
        }
    }
    U *= 0.0;
  }

  // linear smoothing kernels of degree <= 1 go through the second Melnikov
  // solver; the resonant diagonal joins the multiplier
  std::vector<Monomial> monos;
  for (const auto& [mono, kern] : V.smooth_w)
    if (mono.degree() <= 1 && kern.max_abs() > 0.0) monos.push_back(mono);
  for (const auto& mono : monos) {
    SmoothingKernel& kern = V.smooth_w[mono];
    const SecondMelnikovSolution sol = solve_second_melnikov(model, kern, V.L, V.J);
    auto& z = V.zdiag.try_emplace(mono, std::vector<cplx>(perp.size(), cplx{0, 0})).first->second;
    for (size_t i = 0; i < perp.size(); ++i) z[i] += sol.Z[i];
    // residual of the solved equation, recomputed coefficientwise
    for (size_t e = 0; e < kern.ells().count(); ++e) {
      const auto ell = kern.ells().unflatten(e);
      const double base = model.omega_dot(ell);
      for (size_t a = 0; a < perp.size(); ++a)
        for (size_t bq = 0; bq < perp.size(); ++bq) {
          const int j = perp[a], jp = perp[bq];
          cplx lhs = cplx{0.0, base + model.normal_frequency(j) - model.normal_frequency(jp)} *
                         sol.S.get(e, j, jp) +
                     kern.get(e, j, jp);
          if (kern.ells().is_zero(e) && j == jp) lhs -= sol.Z[a];
          res.residual_linear = std::max(res.residual_linear, std::abs(lhs));
        }
    }
    res.s1_eps = sol;
    kern *= 0.0;
  }

  // bilinear kernels of degree 0: third Melnikov solver
  std::vector<Monomial> qmonos;
  for (const auto& [mono, kern] : V.smooth_ww)
    if (mono.degree() == 0 && kern.max_abs() > 0.0) qmonos.push_back(mono);
  for (const auto& mono : qmonos) {
    SmoothingKernel& kern = V.smooth_ww[mono];
    const ThirdMelnikovSolution sol = solve_third_melnikov(model, kern, V.L, V.J);
    for (size_t e = 0; e < kern.ells().count(); ++e) {
      const auto ell = kern.ells().unflatten(e);
      const double base = model.omega_dot(ell);
      for (int nn : perp)
        for (int j : perp)
          for (int jp : perp) {
            const cplx r = kern.get(e, nn, j, jp);
            if (r == cplx{0, 0}) continue;
            const double d = base + model.normal_frequency(nn) - model.normal_frequency(j) -
                             model.normal_frequency(jp);
            const cplx lhs = cplx{0.0, d} * sol.S.get(e, nn, j, jp) + r;
            res.residual_bilinear = std::max(res.residual_bilinear, std::abs(lhs));
          }
    }
    kern *= 0.0;
  }
  return res;
}

double measured_order(const std::function<double(const PhasePoint&)>& g, const PhasePoint& base,
                      const std::vector<double>& scales) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (double t : scales) {
    const double v = g(base.scaled(t));
    if (v < 1e-14) continue;
    const double x = std::log(t), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::infinity();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

DiagonalCheck check_imaginary_diagonal(const DenseOp& X, const ModeSet& modes) {
  DiagonalCheck out;
  for (int j = -X.window(); j <= X.window(); ++j) {
    if (!modes.in_perp(j)) continue;
    out.max_real_defect = std::max(out.max_real_defect, std::abs(X.at(j, j).real()));
  }
  return out;
}

// --- full pipeline ----------------------------------------------------------

namespace {

double transport_residual_max(const FrequencyModel& model, const TorusField& F,
                              const TorusField& P) {
  TorusField r = F.omega_dtheta(model.omega());
  r += P;
  double d = 0.0;
  for (size_t e = 0; e < P.ells().count(); ++e) {
    cplx v = r.coeff_flat(e, 0);
    if (P.ells().is_zero(e)) v -= P.average();
    d = std::max(d, std::abs(v));
  }
  return d;
}

double melnikov_residual_max(const FrequencyModel& model, const TorusField& F,
                             const TorusField& P) {
  TorusField r = F.omega_dtheta(model.omega());
  double d = 0.0;
  for (size_t e = 0; e < P.ells().count(); ++e)
    for (int j = -P.window(); j <= P.window(); ++j) {
      if (!P.modes().in_perp(j)) continue;
      const cplx v = r.coeff_flat(e, j) +
                     cplx{0.0, model.normal_frequency(j)} * F.coeff_flat(e, j) +
                     P.coeff_flat(e, j);
      d = std::max(d, std::abs(v));
    }
  return d;
}

}  // namespace

std::string PipelineReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << "[pipeline]\n";
  os << "melnikov_ok: " << (melnikov_ok ? "yes" : "no") << "\n";
  if (!melnikov_ok) os << "abort_reason: " << abort_reason << "\n";
  os << "[step1-3]\n";
  os << "residual_step1: " << residual_step1 << "\n";
  os << "residual_step2: " << residual_step2 << "\n";
  os << "residual_step3: " << residual_step3 << "\n";
  os << "eps_linear_offaverage: " << eps_linear_offaverage << "\n";
  os << "[regularization]\n";
  os << "symbol_clear_residual: " << symbol_clear_residual << "\n";
  os << "odd_mean_defect: " << odd_mean_defect << "\n";
  os << "diag_defect: " << diag_defect << "\n";
  os << "[multiplier]\n";
  os << "multiplier_residual: " << multiplier_residual << "\n";
  os << "[smoothing]\n";
  os << "smoothing_residual: " << smoothing_residual << "\n";
  os << "[final shape]\n";
  os << "skew_defect: " << skew_defect << "\n";
  os << "order_y: " << order_y << "\n";
  os << "order_a: " << order_a << "\n";
  os << "order_r: " << order_r << "\n";
  for (const auto& line : step_log) os << "# " << line << "\n";
  return os.str();
}

PipelineReport full_pipeline(TaylorHamiltonian H, const FrequencyModel& model,
                             const PipelineConfig& config) {
  PipelineReport rep;
  const TaylorHamiltonian H0 = H;  // originals for the residual checks
  try {
    TorusField eps2(H.p, H.L);
    const Step1Generators g1 = step1_normalize_linear(H, model, &eps2);
    {
      double r = transport_residual_max(model, g1.F00, H0.P00);
      for (int i = 0; i < H.p; ++i) {
        TorusField rhs = H0.P10[static_cast<size_t>(i)];
        for (int k = 0; k < H.p; ++k) {
          TorusField c = dtheta(g1.F00, k);
          c *= H.omega_spp[static_cast<size_t>(i)][static_cast<size_t>(k)];
          rhs += c;
        }
        r = std::max(r, transport_residual_max(model, g1.F10[static_cast<size_t>(i)], rhs));
      }
      r = std::max(r, melnikov_residual_max(model, g1.F01, H0.P01));
      rep.residual_step1 = r;
    }
    const TorusField eps2_orig = eps2;
    const TorusField g2 = step2_normalize_eps2(eps2, model);
    rep.residual_step2 = transport_residual_max(model, g2, eps2_orig);

    NormalFormPart nf;
    const Step3Generators g3 = step3_normalize_affine(H, model, nf);
    {
      double r = 0.0;
      for (int i = 0; i < H.p; ++i)
        r = std::max(r, transport_residual_max(model, g3.F10[static_cast<size_t>(i)],
                                               H0.P10_3[static_cast<size_t>(i)]));
      r = std::max(r, melnikov_residual_max(model, g3.F01, H0.P01_3));
      for (int i = 0; i < H.p; ++i)
        r = std::max(r, melnikov_residual_max(model, g3.F11[static_cast<size_t>(i)],
                                              H0.P11_3[static_cast<size_t>(i)]));
      rep.residual_step3 = r;
    }
    rep.eps_linear_offaverage = H.max_abs_eps_blocks_offaverage();

    NormalVectorField V = build_vector_field(H, model, config.cutoff, config.depth);
    V.nf = nf;

    for (int n = 0; n <= config.depth + 1; ++n) {
      const SymbolStepResult r = regularize_symbol_step(V, model, n);
      rep.symbol_clear_residual = std::max(rep.symbol_clear_residual, r.cleared_residual);
      rep.odd_mean_defect = std::max(rep.odd_mean_defect, r.odd_mean_defect);
      rep.diag_defect = std::max(rep.diag_defect, r.diag_defect);
      std::ostringstream line;
      line << "symbol step n=" << n << " diag_defect=" << r.diag_defect
           << " odd_mean_defect=" << r.odd_mean_defect;
      rep.step_log.push_back(line.str());
    }
    // stored degree-<=1 symbol slots must all be cleared now
    for (const auto& [order, slots] : V.sym_w)
      for (const auto& [mono, f] : slots)
        if (mono.degree() <= 1)
          rep.symbol_clear_residual = std::max(rep.symbol_clear_residual, f.max_abs());

    const MultiplierStepResult mres = normalize_multiplier_quadratic(V, model);
    rep.multiplier_residual = mres.residual;

    const SmoothingStepResult sres = normalize_smoothing(V, model);
    rep.smoothing_residual = std::max({sres.residual_linear, sres.residual_bilinear,
                                       sres.residual_theta});

    // final multiplier skew defect on the window at sample points
    const auto perp = V.modes.perp_window(V.J);
    {
      std::vector<double> th(static_cast<size_t>(V.p), 1.1), yy(static_cast<size_t>(V.p), 0.07);
      FourierSeries w(V.J, true);
      for (int j : perp)
        if (j > 0) w.set_pair(j, cplx{0.04 / jbracket(j), -0.03 / jbracket(j)});
      const PhasePoint x(th, yy, w, 0.06);
      // multiplier-only dense: defect of d_j + d_{-j}
      NormalVectorField mult_only = V;
      mult_only.sym_w.clear();
      mult_only.sym_ww.clear();
      mult_only.smooth_w.clear();
      mult_only.smooth_ww.clear();
      const DenseOp D = mult_only.dense_linear_part(x, model, false);
      double defect = 0.0;
      for (int j : perp)
        if (j > 0) defect = std::max(defect, std::abs(D.at(j, j) + D.at(-j, -j)));
      rep.skew_defect = defect;
      rep.diag_defect = std::max(rep.diag_defect, D.max_abs_diag_real());
    }

    // order fits
    {
      std::vector<double> th(static_cast<size_t>(V.p), 0.4), yy(static_cast<size_t>(V.p), 0.5);
      FourierSeries w(V.J, true);
      for (int j : perp)
        if (j > 0) w.set_pair(j, cplx{0.3 / (jbracket(j) * jbracket(j)), 0.2 / (jbracket(j) * jbracket(j))});
      const PhasePoint base(th, yy, w, 0.5);

      auto ynorm = [&](const PhasePoint& x) {
        // theta-gradient of the residual Hamiltonian blocks: eps^3 P00^(2),
        // <P02(theta,y) w, w>, P03[w,w,w]
        double acc = 0.0;
        for (int k = 0; k < V.p; ++k) {
          cplx v = dtheta(H.P00_3, k).eval_scalar(x.theta) * std::pow(x.eps, 3);
          // P02 contribution
          for (const auto& [mo, slots] : H.P02.symbol) {
            for (const auto& [mono, c] : slots) {
              const double mm = mono.eval(x);
              if (mm == 0.0) continue;
              FourierSeries cs = dtheta(c, k).eval_series(x.theta);
              cs *= mm;
              if (max_abs_coeff(cs) == 0.0) continue;
              const DenseOp M = symbol_slice_dense(cs, mo, V.cutoff, V.modes, V.J);
              v += l2_pairing(M.apply(x.w).truncated(V.J), x.w);
            }
          }
          {
            for (const auto& [mono, S] : H.P02.smooth) {
              const double mm = mono.eval(x);
              if (mm == 0.0) continue;
              // theta-derivative via the i ell_k weights
              cplx acc2{0, 0};
              for (size_t e = 0; e < S.ells().count(); ++e) {
                const auto ell = S.ells().unflatten(e);
                double phase = 0.0;
                for (size_t q = 0; q < x.theta.size(); ++q) phase += x.theta[q] * ell[q];
                const cplx ph =
                    std::polar(1.0, phase) * cplx{0.0, static_cast<double>(ell[static_cast<size_t>(k)])};
                for (int n : perp)
                  for (int j : perp) {
                    const cplx s = S.get(e, n, j);
                    if (s != cplx{0, 0}) acc2 += ph * s * x.w.coeff(j) * x.w.coeff(-n);
                  }
              }
              v += mm * acc2;
            }
          }
          if (H.P03) {
            cplx acc3{0, 0};
            for (size_t e = 0; e < H.P03->ells().count(); ++e) {
              const auto ell = H.P03->ells().unflatten(e);
              double phase = 0.0;
              for (size_t q = 0; q < x.theta.size(); ++q) phase += x.theta[q] * ell[q];
              const cplx ph =
                  std::polar(1.0, phase) * cplx{0.0, static_cast<double>(ell[static_cast<size_t>(k)])};
              for (int n : perp)
                for (int j : perp)
                  for (int jp : perp) {
                    const cplx s = H.P03->get(e, n, j, jp);
                    if (s != cplx{0, 0})
                      acc3 += ph * s * x.w.coeff(n) * x.w.coeff(j) * x.w.coeff(jp);
                  }
            }
            v += acc3;
          }
          acc += std::norm(v);
        }
        return std::sqrt(acc);
      };
      rep.order_y = measured_order(ynorm, base, config.order_scales);

      auto anorm = [&](const PhasePoint& x) {
        auto it = V.sym_w.find(1);
        if (it == V.sym_w.end()) return 0.0;
        FourierSeries a(V.J, false);
        for (const auto& [mono, f] : it->second) {
          FourierSeries c = f.eval_series(x.theta);
          c *= mono.eval(x);
          a += c;
        }
        return sobolev_norm(a, 1.0);
      };
      rep.order_a = measured_order(anorm, base, config.order_scales);

      auto rnorm = [&](const PhasePoint& x) {
        FourierSeries out(V.J, true);
        for (const auto& [mono, kern] : V.smooth_w) {
          FourierSeries r = kern.apply_linear(x.theta, x.w);
          r *= mono.eval(x);
          out += r;
        }
        for (const auto& [mono, kern] : V.smooth_ww) {
          FourierSeries r = kern.apply_bilinear(x.theta, x.w, x.w);
          r *= mono.eval(x);
          out += r;
        }
        return sobolev_norm(out, 0.0);
      };
      rep.order_r = measured_order(rnorm, base, config.order_scales);
    }
  } catch (const DivisorBelowThreshold& e) {
    rep.melnikov_ok = false;
    rep.abort_reason = e.what();
  }
  return rep;
}

}  // namespace kdvlab
