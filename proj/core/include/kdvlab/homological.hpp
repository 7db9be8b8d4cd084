#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kdvlab/spectrum.hpp"

namespace kdvlab {

/// Raised when a divisor on the configured window falls below its Melnikov
/// threshold (or vanishes exactly); the offending tuple identifies the
/// omega sample to discard.
class DivisorBelowThreshold : public std::runtime_error {
 public:
  DivisorBelowThreshold(std::vector<int> ell, std::vector<int> j_list, double value, int order);
  const std::vector<int>& ell() const { return ell_; }
  const std::vector<int>& j_list() const { return j_list_; }
  double value() const { return value_; }
  int order() const { return order_; }

 private:
  std::vector<int> ell_;
  std::vector<int> j_list_;
  double value_;
  int order_;
};

/// Multi-index ell in [-L, L]^p, flattened.
class EllGrid {
 public:
  EllGrid() : p_(0), L_(0), count_(1) {}
  EllGrid(int p, int L);
  int dim() const { return p_; }
  int bound() const { return L_; }
  size_t count() const { return count_; }
  size_t index(const std::vector<int>& ell) const;
  std::vector<int> unflatten(size_t idx) const;
  size_t negated(size_t idx) const;
  bool is_zero(size_t idx) const;

 private:
  int p_, L_;
  size_t count_;
};

/// theta-Fourier coefficients over ell in [-L,L]^p, scalar-valued or
/// j-indexed over an S_perp window. Reality: coeff(-ell,-j) = conj(coeff).
class TorusField {
 public:
  TorusField() = default;
  /// Scalar-valued field (no j index).
  TorusField(int p, int L);
  /// Field of functions supported on S_perp within |j| <= window.
  TorusField(int p, int L, ModeSet modes, int window);

  /// Field of plain x-functions (coefficient symbols): j unconstrained,
  /// mean included.
  static TorusField unconstrained(int p, int L, int window);

  bool has_space_index() const { return window_ > 0; }
  bool constrained() const { return constrained_; }
  const EllGrid& ells() const { return ells_; }
  const ModeSet& modes() const { return modes_; }
  int window() const { return window_; }

  cplx coeff(const std::vector<int>& ell, int j = 0) const;
  void set(const std::vector<int>& ell, int j, cplx v);
  void add(const std::vector<int>& ell, int j, cplx v);
  cplx coeff_flat(size_t ell_idx, int j = 0) const;
  void set_flat(size_t ell_idx, int j, cplx v);

  double reality_defect() const;
  double max_abs() const;
  TorusField& operator+=(const TorusField& o);
  TorusField& operator-=(const TorusField& o);
  TorusField& operator*=(double s);
  friend TorusField operator+(TorusField a, const TorusField& b) { return a += b; }
  friend TorusField operator-(TorusField a, const TorusField& b) { return a -= b; }

  /// theta-average: the ell = 0 slice.
  cplx average(int j = 0) const;

  /// omega . d_theta applied coefficientwise: multiplies by i omega.ell.
  TorusField omega_dtheta(const std::vector<double>& omega) const;

  /// Evaluate at a fixed theta; scalar fields give the j = 0 entry.
  cplx eval_scalar(const std::vector<double>& theta) const;
  FourierSeries eval_series(const std::vector<double>& theta) const;

 private:
  size_t jslots() const { return window_ > 0 ? static_cast<size_t>(2 * window_ + 1) : 1; }
  size_t jindex(int j) const;

  EllGrid ells_;
  ModeSet modes_;
  int window_ = 0;  // 0 => scalar-valued
  bool constrained_ = true;
  std::vector<cplx> c_;
};

/// Coefficients of a smoothing operator: linear kernels (ell, j, j') or
/// bilinear kernels (ell, n, j, j'); n, j, j' run over the S_perp window.
class SmoothingKernel {
 public:
  SmoothingKernel() = default;
  /// linear: entries (ell, j_out, j_in)
  SmoothingKernel(int p, int L, ModeSet modes, int window);
  /// bilinear: entries (ell, n_out, j_in, jp_in)
  static SmoothingKernel bilinear(int p, int L, ModeSet modes, int window);

  bool is_bilinear() const { return bilinear_; }
  const EllGrid& ells() const { return ells_; }
  const ModeSet& modes() const { return modes_; }
  int window() const { return window_; }

  cplx get(size_t ell_idx, int n, int j, int jp = 0) const;
  void set(size_t ell_idx, int n, int j, cplx v);               // linear (j_out=n, j_in=j)
  void set(size_t ell_idx, int n, int j, int jp, cplx v);       // bilinear
  void add(size_t ell_idx, int n, int j, cplx v);
  void add(size_t ell_idx, int n, int j, int jp, cplx v);

  double max_abs() const;
  double reality_defect() const;
  SmoothingKernel& operator+=(const SmoothingKernel& o);
  SmoothingKernel& operator-=(const SmoothingKernel& o);
  SmoothingKernel& operator*=(double s);

  /// Per-ell max-abs norms, the decay bookkeeping surface for tests.
  std::vector<double> per_ell_norms() const;

  /// Linear kernels only: dense operator at a fixed theta.
  FourierSeries apply_linear(const std::vector<double>& theta, const FourierSeries& w) const;
  /// Bilinear kernels: value at fixed theta on the pair (w, v).
  FourierSeries apply_bilinear(const std::vector<double>& theta, const FourierSeries& w,
                               const FourierSeries& v) const;

 private:
  size_t nb() const { return static_cast<size_t>(2 * window_ + 1); }
  size_t idx(size_t ell_idx, int n, int j, int jp) const;

  EllGrid ells_;
  ModeSet modes_;
  int window_ = 0;
  bool bilinear_ = false;
  std::vector<cplx> c_;
};

/// Validates the order-0 condition |omega.ell| >= gamma/<ell>^tau on the
/// whole window before any division (abort exactly when check_melnikov
/// would report a violator).
void require_melnikov(const FrequencyModel& model, int order, int L, int J);

/// omega . d_theta F + P = <P>_theta ; F has zero theta-average.
TorusField solve_torus_transport(const FrequencyModel& model, const TorusField& P);

/// (omega . d_theta + i Omega_perp) F + P = 0.
TorusField solve_first_melnikov(const FrequencyModel& model, const TorusField& P);

/// -3 dx b + a = <a>_x with b = (1/3) dx^{-1}(a - <a>_x); unconditional.
FourierSeries solve_x_transport(const FourierSeries& a);

struct SecondMelnikovSolution {
  SmoothingKernel S;                 // linear kernel
  std::vector<cplx> Z;               // diagonal multiplier, indexed over the window
  std::vector<int> window_modes;     // modes corresponding to Z entries
  double max_amplification = 0.0;
};

/// omega . d_theta S + [i Omega_perp, S] + R = Z with the resonant slots
/// (ell, j, j) = (0, j, j) routed to the diagonal multiplier Z.
SecondMelnikovSolution solve_second_melnikov(const FrequencyModel& model,
                                             const SmoothingKernel& R, int L, int J);

struct ThirdMelnikovSolution {
  SmoothingKernel S;  // bilinear kernel
  double max_amplification = 0.0;
  double amplification_bound = 0.0;  // gamma^{-1} <ell>^tau <j>^2 <j'>^2 <n>^2
};

/// Bilinear smoothing homological equation with divisors
/// omega.ell + Omega_n - Omega_j - Omega_j'.
ThirdMelnikovSolution solve_third_melnikov(const FrequencyModel& model, const SmoothingKernel& R,
                                           int L, int J);

struct MultiplierSolution {
  TorusField xi;
  double max_amplification = 0.0;
};

/// (omega . d_theta + i Omega_perp) a_Xi + a_Lambda = 0; same divisor family
/// as the first Melnikov solver, with the tau-loss amplification recorded.
MultiplierSolution solve_multiplier_homological(const FrequencyModel& model,
                                                const TorusField& lambda);

void write_torus_field_csv(std::ostream& os, const TorusField& f);
void write_kernel_csv(std::ostream& os, const SmoothingKernel& k);

}  // namespace kdvlab
