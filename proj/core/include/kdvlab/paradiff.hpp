#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "kdvlab/density.hpp"
#include "kdvlab/fourier.hpp"

namespace kdvlab {

/// Admissible cut-off: psi(eta, xi) = chi(|eta| / <xi>) with a C-infinity
/// transition from 1 on [0, eps_inner] to 0 on [eps_outer, inf).
struct CutoffFunction {
  double eps_inner = 0.1;
  double eps_outer = 0.2;

  CutoffFunction() = default;
  CutoffFunction(double inner, double outer);

  double operator()(double eta, double xi) const;
};

/// Dense matrix of an operator on the two-sided mode window |k| <= K,
/// entry (row k, col l) in row-major order. The exact-oracle container every
/// expansion is checked against.
class DenseOp {
 public:
  DenseOp() : K_(0), a_(1) {}
  explicit DenseOp(int K) : K_(K), a_(static_cast<size_t>(2 * K + 1) * (2 * K + 1)) {}

  static DenseOp identity(int K);
  static DenseOp multiplier(int K, const std::function<cplx(int)>& symbol);
  static DenseOp dx_power_op(int K, int m);
  /// Matrix of T_a dx^m (same mode-0 convention as dx_power).
  static DenseOp paraproduct_op(const FourierSeries& a, int m, const CutoffFunction& cutoff, int K);

  int window() const { return K_; }
  cplx at(int row, int col) const { return a_[idx(row, col)]; }
  cplx& at(int row, int col) { return a_[idx(row, col)]; }

  DenseOp compose(const DenseOp& rhs) const;  // this o rhs
  DenseOp adjointed() const;                  // conjugate transpose
  DenseOp& operator+=(const DenseOp& o);
  DenseOp& operator-=(const DenseOp& o);
  DenseOp& operator*=(double s);
  friend DenseOp operator+(DenseOp a, const DenseOp& b) { return a += b; }
  friend DenseOp operator-(DenseOp a, const DenseOp& b) { return a -= b; }

  FourierSeries apply(const FourierSeries& u) const;
  /// H^s norm of the image of the single mode e_j.
  double column_norm(int j, double s = 0.0) const;

  double max_abs() const;
  double max_abs_diag_real() const;

  /// Zeroes rows/columns at modes outside S_perp (the Pi_perp sandwich).
  DenseOp projected_perp(const ModeSet& modes) const;

 private:
  size_t idx(int row, int col) const {
    return static_cast<size_t>(row + K_) * static_cast<size_t>(2 * K_ + 1) +
           static_cast<size_t>(col + K_);
  }
  int K_;
  std::vector<cplx> a_;
};

struct SymbolTerm {
  int order;
  FourierSeries coeff;
};

/// Finite expansion sum_k T_{a_{m-k}} dx^{m-k} plus an optional dense
/// remainder; orders run strictly decreasing from base_order down to -depth.
struct SymbolExpansion {
  int base_order = 0;
  int depth = 0;
  std::vector<SymbolTerm> terms;
  std::optional<DenseOp> remainder;

  static SymbolExpansion single(int order, FourierSeries coeff, int depth);

  void add_term(int order, const FourierSeries& coeff);
  const FourierSeries* term_at(int order) const;
  /// Dense matrix of the listed terms (remainder excluded).
  DenseOp dense_terms(const CutoffFunction& cutoff, int K) const;
};

/// Combinatorial constant K_{n,m} of the composition expansion of
/// dx^m o T_a (K_{1,m} = m, K_{n,0} = 0); computed by the recursion obtained
/// from composing one derivative at a time, downward through dx^{-1} for
/// negative m.
double composition_constant(int n, int m);

FourierSeries paraproduct(const FourierSeries& a, const FourierSeries& u,
                          const CutoffFunction& cutoff);

/// a*u - T_a u - T_u a; the identity holds exactly in coefficients.
FourierSeries bony_remainder(const FourierSeries& a, const FourierSeries& u,
                             const CutoffFunction& cutoff);

/// Expansion of A o B with leading term T_{ab} dx^{m+m'} and corrections
/// K_{n,m} T_{a dx^n b} dx^{m+m'-n}; remainder = dense(A o B) - dense(terms)
/// on the shared window.
SymbolExpansion compose_expansion(const SymbolExpansion& A, const SymbolExpansion& B, int N,
                                  const CutoffFunction& cutoff, int K);

/// Expansion of [A, B] with leading term T_{m a dx b - m' b dx a}.
SymbolExpansion commutator_expansion(const SymbolExpansion& A, const SymbolExpansion& B, int N,
                                     const CutoffFunction& cutoff, int K);

/// Expansion of the L2-adjoint (conjugate transpose on the window).
SymbolExpansion adjoint_expansion(const SymbolExpansion& A, int N, const CutoffFunction& cutoff,
                                  int K);

/// Bony para-linearization of u -> d_z f(x, u(x)): returns (b, R) with
/// d_z f(x,u) = T_b u + R and b = d_z^2 f(x, u).
std::pair<FourierSeries, FourierSeries> paralinearize_composition(const PerturbationDensity& f,
                                                                  const FourierSeries& u,
                                                                  const CutoffFunction& cutoff);

struct SmoothingFit {
  double slope = 0.0;
  std::vector<int> modes;
  std::vector<double> norms;
  bool below_floor = false;  // all probe norms < 1e-14; slope reported -inf
};

/// Least-squares slope of log ||R e_j||_s against log <j> over single-mode
/// probes j = mode_lo..mode_hi; rejects ranges with fewer than 8 points.
SmoothingFit measured_smoothing(const DenseOp& R, int mode_lo, int mode_hi, double s = 0.0);

void write_expansion_csv(std::ostream& os, const SymbolExpansion& e);
void write_smoothing_fit_csv(std::ostream& os, const SmoothingFit& fit);

}  // namespace kdvlab
