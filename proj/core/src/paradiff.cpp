#include "kdvlab/paradiff.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "kdvlab/grid.hpp"

namespace kdvlab {

namespace {

double bump(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

cplx dx_symbol(int k, int m) {
  if (k == 0) return m == 0 ? cplx{1.0, 0.0} : cplx{0.0, 0.0};
  return std::pow(cplx{0.0, kTwoPi * k}, m);
}

}  // namespace

CutoffFunction::CutoffFunction(double inner, double outer) : eps_inner(inner), eps_outer(outer) {
  if (!(0.0 < inner && inner < outer && outer < 1.0))
    throw std::invalid_argument("cut-off requires 0 < eps_inner < eps_outer < 1");
}

double CutoffFunction::operator()(double eta, double xi) const {
  const double t = std::abs(eta) / jbracket(xi);
  if (t <= eps_inner) return 1.0;
  if (t >= eps_outer) return 0.0;
  const double s = (t - eps_inner) / (eps_outer - eps_inner);
  return bump(1.0 - s) / (bump(s) + bump(1.0 - s));
}

DenseOp DenseOp::identity(int K) {
  DenseOp op(K);
  for (int k = -K; k <= K; ++k) op.at(k, k) = 1.0;
  return op;
}

DenseOp DenseOp::multiplier(int K, const std::function<cplx(int)>& symbol) {
  DenseOp op(K);
  for (int k = -K; k <= K; ++k) op.at(k, k) = symbol(k);
  return op;
}

DenseOp DenseOp::dx_power_op(int K, int m) {
  return multiplier(K, [m](int k) { return dx_symbol(k, m); });
}

DenseOp DenseOp::paraproduct_op(const FourierSeries& a, int m, const CutoffFunction& cutoff,
                                int K) {
  DenseOp op(K);
  const int A = a.max_mode();
  for (int col = -K; col <= K; ++col) {
    const cplx sym = dx_symbol(col, m);
    if (sym == cplx{0.0, 0.0}) continue;
    const int lo = std::max(-K - col, -A), hi = std::min(K - col, A);
    for (int eta = lo; eta <= hi; ++eta) {
      const double psi = cutoff(eta, col);
      if (psi == 0.0) continue;
      const cplx ae = a.coeff(eta);
      if (ae == cplx{0.0, 0.0}) continue;
      op.at(col + eta, col) += psi * ae * sym;
    }
  }
  return op;
}

DenseOp DenseOp::compose(const DenseOp& rhs) const {
  if (rhs.K_ != K_) throw std::invalid_argument("window mismatch in compose");
  const int n = 2 * K_ + 1;
  DenseOp out(K_);
  const cplx* A = a_.data();
  const cplx* B = rhs.a_.data();
  cplx* C = out.a_.data();
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const cplx aik = A[static_cast<size_t>(i) * n + k];
      if (aik == cplx{0.0, 0.0}) continue;
      const cplx* brow = B + static_cast<size_t>(k) * n;
      cplx* crow = C + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return out;
}

DenseOp DenseOp::adjointed() const {
  DenseOp out(K_);
  for (int i = -K_; i <= K_; ++i)
    for (int j = -K_; j <= K_; ++j) out.at(i, j) = std::conj(at(j, i));
  return out;
}

DenseOp& DenseOp::operator+=(const DenseOp& o) {
  if (o.K_ != K_) throw std::invalid_argument("window mismatch in +=");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

DenseOp& DenseOp::operator-=(const DenseOp& o) {
  if (o.K_ != K_) throw std::invalid_argument("window mismatch in -=");
  for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

DenseOp& DenseOp::operator*=(double s) {
  for (auto& v : a_) v *= s;
  return *this;
}

FourierSeries DenseOp::apply(const FourierSeries& u) const {
  FourierSeries out(K_, false);
  for (int i = -K_; i <= K_; ++i) {
    cplx acc{0.0, 0.0};
    for (int j = -std::min(K_, u.max_mode()); j <= std::min(K_, u.max_mode()); ++j)
      acc += at(i, j) * u.coeff(j);
    out.set_raw(i, acc);
  }
  return out;
}

double DenseOp::column_norm(int j, double s) const {
  double acc = 0.0;
  for (int i = -K_; i <= K_; ++i) {
    const double v = std::abs(at(i, j));
    if (v == 0.0) continue;
    acc += std::pow(jbracket(i), 2.0 * s) * v * v;
  }
  return std::sqrt(acc);
}

double DenseOp::max_abs() const {
  double m = 0.0;
  for (const auto& v : a_) m = std::max(m, std::abs(v));
  return m;
}

double DenseOp::max_abs_diag_real() const {
  double m = 0.0;
  for (int k = -K_; k <= K_; ++k) m = std::max(m, std::abs(at(k, k).real()));
  return m;
}

DenseOp DenseOp::projected_perp(const ModeSet& modes) const {
  DenseOp out(K_);
  for (int i = -K_; i <= K_; ++i) {
    if (!modes.in_perp(i)) continue;
    for (int j = -K_; j <= K_; ++j)
      if (modes.in_perp(j)) out.at(i, j) = at(i, j);
  }
  return out;
}

SymbolExpansion SymbolExpansion::single(int order, FourierSeries coeff, int depth) {
  SymbolExpansion e;
  e.base_order = order;
  e.depth = depth;
  e.terms.push_back({order, std::move(coeff)});
  return e;
}

void SymbolExpansion::add_term(int order, const FourierSeries& coeff) {
  for (auto& t : terms) {
    if (t.order == order) {
      if (t.coeff.max_mode() < coeff.max_mode()) {
        FourierSeries widened = coeff;
        for (int k = -t.coeff.max_mode(); k <= t.coeff.max_mode(); ++k)
          widened.set_raw(k, widened.coeff(k) + t.coeff.coeff(k));
        t.coeff = widened;
      } else {
        for (int k = -coeff.max_mode(); k <= coeff.max_mode(); ++k)
          t.coeff.set_raw(k, t.coeff.coeff(k) + coeff.coeff(k));
      }
      return;
    }
  }
  terms.push_back({order, coeff});
  std::sort(terms.begin(), terms.end(),
            [](const SymbolTerm& a, const SymbolTerm& b) { return a.order > b.order; });
}

const FourierSeries* SymbolExpansion::term_at(int order) const {
  for (const auto& t : terms)
    if (t.order == order) return &t.coeff;
  return nullptr;
}

DenseOp SymbolExpansion::dense_terms(const CutoffFunction& cutoff, int K) const {
  DenseOp acc(K);
  for (const auto& t : terms) acc += DenseOp::paraproduct_op(t.coeff, t.order, cutoff, K);
  return acc;
}

double composition_constant(int n, int m) {
  if (n == 0) return 1.0;
  if (n < 0) throw std::invalid_argument("n must be >= 0");
  static std::map<std::pair<int, int>, double> memo;
  const auto key = std::make_pair(n, m);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  double v;
  if (m == 0) {
    v = 0.0;
  } else if (m > 0) {
    // dx^m o T = dx o (dx^{m-1} o T): K_{n,m} = K_{n,m-1} + K_{n-1,m-1}
    v = composition_constant(n, m - 1) + composition_constant(n - 1, m - 1);
  } else {
    // downward: K_{n,m} = K_{n,m+1} - K_{n-1,m}
    v = composition_constant(n, m + 1) - composition_constant(n - 1, m);
  }
  memo[key] = v;
  return v;
}

FourierSeries paraproduct(const FourierSeries& a, const FourierSeries& u,
                          const CutoffFunction& cutoff) {
  const int K = std::max(a.max_mode(), u.max_mode());
  FourierSeries out(K, false);
  for (int xi = -u.max_mode(); xi <= u.max_mode(); ++xi) {
    const cplx uxi = u.coeff(xi);
    if (uxi == cplx{0.0, 0.0}) continue;
    for (int eta = -a.max_mode(); eta <= a.max_mode(); ++eta) {
      const int k = eta + xi;
      if (k < -K || k > K) continue;
      const double psi = cutoff(eta, xi);
      if (psi == 0.0) continue;
      const cplx ae = a.coeff(eta);
      if (ae == cplx{0.0, 0.0}) continue;
      out.set_raw(k, out.coeff(k) + psi * ae * uxi);
    }
  }
  return out;
}

FourierSeries bony_remainder(const FourierSeries& a, const FourierSeries& u,
                             const CutoffFunction& cutoff) {
  const int K = std::max(a.max_mode(), u.max_mode());
  // exact (non-dealiased would lose the identity): convolution truncated to K
  FourierSeries prod(K, false);
  for (int k = -K; k <= K; ++k) {
    cplx acc{0.0, 0.0};
    for (int eta = -a.max_mode(); eta <= a.max_mode(); ++eta) {
      const int xi = k - eta;
      if (xi < -u.max_mode() || xi > u.max_mode()) continue;
      acc += a.coeff(eta) * u.coeff(xi);
    }
    prod.set_raw(k, acc);
  }
  return prod - paraproduct(a, u, cutoff) - paraproduct(u, a, cutoff);
}

namespace {

/// Accumulates the expansion of (T_a dx^ma) o (T_b dx^mb) to depth N.
void accumulate_pair(SymbolExpansion& out, const FourierSeries& a, int ma, const FourierSeries& b,
                     int mb, int N) {
  const int nmax = N + ma + mb;
  if (nmax < 0) return;
  out.add_term(ma + mb, dealiased_product(a, b));
  for (int n = 1; n <= nmax; ++n) {
    const double Knm = composition_constant(n, ma);
    if (Knm == 0.0) continue;
    FourierSeries corr = dealiased_product(a, dx_power(b, n));
    corr *= Knm;
    out.add_term(ma + mb - n, corr);
  }
}

void prune_below(SymbolExpansion& e, int lowest) {
  e.terms.erase(std::remove_if(e.terms.begin(), e.terms.end(),
                               [lowest](const SymbolTerm& t) { return t.order < lowest; }),
                e.terms.end());
}

}  // namespace

SymbolExpansion compose_expansion(const SymbolExpansion& A, const SymbolExpansion& B, int N,
                                  const CutoffFunction& cutoff, int K) {
  for (const auto& t : A.terms)
    if (t.coeff.max_mode() > K) throw std::invalid_argument("coefficient window exceeds K");
  for (const auto& t : B.terms)
    if (t.coeff.max_mode() > K) throw std::invalid_argument("coefficient window exceeds K");

  SymbolExpansion out;
  out.base_order = A.base_order + B.base_order;
  out.depth = N;
  for (const auto& ta : A.terms)
    for (const auto& tb : B.terms) accumulate_pair(out, ta.coeff, ta.order, tb.coeff, tb.order, N);
  prune_below(out, -N);

  DenseOp exact = A.dense_terms(cutoff, K).compose(B.dense_terms(cutoff, K));
  if (A.remainder || B.remainder) {
    // remainders of the inputs participate in the exact composition
    DenseOp da = A.dense_terms(cutoff, K), db = B.dense_terms(cutoff, K);
    if (A.remainder) da += *A.remainder;
    if (B.remainder) db += *B.remainder;
    exact = da.compose(db);
  }
  out.remainder = exact - out.dense_terms(cutoff, K);
  return out;
}

SymbolExpansion commutator_expansion(const SymbolExpansion& A, const SymbolExpansion& B, int N,
                                     const CutoffFunction& cutoff, int K) {
  SymbolExpansion ab = compose_expansion(A, B, N, cutoff, K);
  SymbolExpansion ba = compose_expansion(B, A, N, cutoff, K);
  SymbolExpansion out;
  out.base_order = ab.base_order - 1;
  out.depth = N;
  for (const auto& t : ab.terms) out.add_term(t.order, t.coeff);
  for (auto t : ba.terms) {
    t.coeff *= -1.0;
    out.add_term(t.order, t.coeff);
  }
  // the top order cancels exactly: T_{ab} dx^{m+m'} - T_{ba} dx^{m+m'} = 0
  out.terms.erase(std::remove_if(out.terms.begin(), out.terms.end(),
                                 [](const SymbolTerm& t) {
                                   return max_abs_coeff(t.coeff) == 0.0;
                                 }),
                  out.terms.end());
  out.remainder = (*ab.remainder) - (*ba.remainder);
  return out;
}

SymbolExpansion adjoint_expansion(const SymbolExpansion& A, int N, const CutoffFunction& cutoff,
                                  int K) {
  SymbolExpansion out;
  out.base_order = A.base_order;
  out.depth = N;
  for (const auto& t : A.terms) {
    const int m = t.order;
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    const int nmax = N + m;
    if (nmax < 0) continue;
    out.add_term(m, sign * t.coeff);
    for (int n = 1; n <= nmax; ++n) {
      const double Knm = composition_constant(n, m);
      if (Knm == 0.0) continue;
      out.add_term(m - n, (sign * Knm) * dx_power(t.coeff, n));
    }
  }
  prune_below(out, -N);
  DenseOp exact = A.dense_terms(cutoff, K);
  if (A.remainder) exact += *A.remainder;
  out.remainder = exact.adjointed() - out.dense_terms(cutoff, K);
  return out;
}

std::pair<FourierSeries, FourierSeries> paralinearize_composition(const PerturbationDensity& f,
                                                                  const FourierSeries& u,
                                                                  const CutoffFunction& cutoff) {
  FourierSeries g = f.zeta_derivative(u, 1);
  FourierSeries b = f.zeta_derivative(u, 2);
  FourierSeries R = g - paraproduct(b, u, cutoff).truncated(u.max_mode());
  return {b, R};
}

SmoothingFit measured_smoothing(const DenseOp& R, int mode_lo, int mode_hi, double s) {
  if (mode_hi - mode_lo + 1 < 8) throw std::invalid_argument("mode range must hold >= 8 probes");
  if (mode_hi > R.window()) throw std::invalid_argument("mode range exceeds window");
  SmoothingFit fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  bool any_above = false;
  for (int j = mode_lo; j <= mode_hi; ++j) {
    const double norm = R.column_norm(j, s);
    fit.modes.push_back(j);
    fit.norms.push_back(norm);
    if (norm < 1e-14) continue;
    any_above = true;
    const double x = std::log(jbracket(j)), y = std::log(norm);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (!any_above || n < 2) {
    fit.below_floor = true;
    fit.slope = -std::numeric_limits<double>::infinity();
    return fit;
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return fit;
}

void write_expansion_csv(std::ostream& os, const SymbolExpansion& e) {
  os << "order,mode,re,im\n";
  os.precision(17);
  for (const auto& t : e.terms)
    for (int k = -t.coeff.max_mode(); k <= t.coeff.max_mode(); ++k) {
      const cplx v = t.coeff.coeff(k);
      os << t.order << ',' << k << ',' << v.real() << ',' << v.imag() << '\n';
    }
}

void write_smoothing_fit_csv(std::ostream& os, const SmoothingFit& fit) {
  os << "j,norm,fitted_slope\n";
  os.precision(17);
  for (size_t i = 0; i < fit.modes.size(); ++i)
    os << fit.modes[i] << ',' << fit.norms[i] << ',' << fit.slope << '\n';
}

}  // namespace kdvlab
