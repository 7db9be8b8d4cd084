#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace kdvlab {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Japanese bracket <n> = max(1, |n|).
inline double jbracket(double n) { return std::max(1.0, std::abs(n)); }

/// Truncated two-sided Fourier coefficients of a real 1-periodic function,
/// convention u(x) = sum_{|k|<=K} c_k e^{2 pi i k x} with c_{-k} = conj(c_k).
class FourierSeries {
 public:
  FourierSeries() : max_mode_(0), mean_zero_(false), c_(1, cplx{0.0, 0.0}) {}
  explicit FourierSeries(int max_mode, bool mean_zero = false)
      : max_mode_(max_mode), mean_zero_(mean_zero), c_(2 * max_mode + 1) {
    if (max_mode < 0) throw std::invalid_argument("max_mode must be >= 0");
  }

  int max_mode() const { return max_mode_; }
  bool mean_zero() const { return mean_zero_; }

  cplx coeff(int k) const {
    if (k < -max_mode_ || k > max_mode_) return {0.0, 0.0};
    return c_[static_cast<size_t>(k + max_mode_)];
  }

  /// Sets c_k and c_{-k} = conj(v) in one call; keeps the reality invariant.
  void set_pair(int k, cplx v) {
    check_range(k);
    if (k == 0) {
      if (mean_zero_ && std::abs(v) != 0.0)
        throw std::invalid_argument("mean-zero series cannot take a mean");
      c_[static_cast<size_t>(max_mode_)] = cplx{v.real(), 0.0};
      return;
    }
    c_[static_cast<size_t>(k + max_mode_)] = v;
    c_[static_cast<size_t>(-k + max_mode_)] = std::conj(v);
  }

  /// Raw coefficient write; callers are responsible for reality.
  void set_raw(int k, cplx v) {
    check_range(k);
    c_[static_cast<size_t>(k + max_mode_)] = v;
  }

  void add_pair(int k, cplx v) { set_pair(k, coeff(k) + v); }

  std::span<const cplx> raw() const { return c_; }
  std::span<cplx> raw() { return c_; }

  /// Max deviation from c_{-k} = conj(c_k) (and from a vanishing mean when
  /// the mean-zero flag is set).
  double reality_defect() const;
  bool is_real(double tol = 1e-12) const { return reality_defect() <= tol; }

  /// Marks the series as mean-zero and zeroes c_0.
  FourierSeries& drop_mean() {
    c_[static_cast<size_t>(max_mode_)] = {0.0, 0.0};
    mean_zero_ = true;
    return *this;
  }

  double mean() const { return coeff(0).real(); }

  /// Copies into a window of size K, discarding modes beyond it.
  FourierSeries truncated(int K) const;

  FourierSeries& operator+=(const FourierSeries& o);
  FourierSeries& operator-=(const FourierSeries& o);
  FourierSeries& operator*=(double a);
  friend FourierSeries operator+(FourierSeries a, const FourierSeries& b) { return a += b; }
  friend FourierSeries operator-(FourierSeries a, const FourierSeries& b) { return a -= b; }
  friend FourierSeries operator*(double a, FourierSeries u) { return u *= a; }

 private:
  void check_range(int k) const {
    if (k < -max_mode_ || k > max_mode_) throw std::out_of_range("mode outside window");
  }

  int max_mode_;
  bool mean_zero_;
  std::vector<cplx> c_;
};

/// Tangential site set S_+ together with the derived S = S_+ u (-S_+) and
/// S_perp = Z \ (S u {0}) intersected with the truncation window.
class ModeSet {
 public:
  ModeSet() = default;
  explicit ModeSet(std::vector<int> s_plus);

  const std::vector<int>& s_plus() const { return s_plus_; }
  int dim() const { return static_cast<int>(s_plus_.size()); }

  bool in_s(int j) const;
  bool in_perp(int j) const { return j != 0 && !in_s(j); }

  /// All perp modes with |j| <= window, in increasing order.
  std::vector<int> perp_window(int window) const;

 private:
  std::vector<int> s_plus_;
};

/// State (theta, y, w; eps) of the truncated normal-form phase space.
struct PhasePoint {
  std::vector<double> theta;
  std::vector<double> y;
  FourierSeries w;
  double eps = 0.0;

  PhasePoint() = default;
  PhasePoint(std::vector<double> th, std::vector<double> yy, FourierSeries ww, double e);

  /// Scale (y, w, eps) by t, keeping theta; the probe used by order fits.
  PhasePoint scaled(double t) const;
};

void check_support_in_perp(const FourierSeries& w, const ModeSet& modes);

double sobolev_norm(const FourierSeries& u, double s);

/// Coefficientwise (2 pi i k)^m; mode 0 is preserved for m = 0, zeroed for
/// m < 0 and killed by any m >= 1.
FourierSeries dx_power(const FourierSeries& u, int m);

FourierSeries project_perp(const FourierSeries& u, const ModeSet& modes);

/// W(u, v) = int_0^1 (dx^{-1} u) v dx on mean-zero inputs; antisymmetric.
double symplectic_form(const FourierSeries& u, const FourierSeries& v);

/// Pointwise product evaluated alias-free and truncated back to
/// max(Ka, Kb); the 2/3-rule contract of every quadratic operation.
FourierSeries dealiased_product(const FourierSeries& a, const FourierSeries& b);

/// L2 pairing int_0^1 u v dx of real series.
double l2_pairing(const FourierSeries& u, const FourierSeries& v);

double max_abs_coeff(const FourierSeries& u);
double max_abs_value(const FourierSeries& u);

/// Serialization as CSV rows "k,re,im" (shared by all experiment outputs).
void write_series_csv(std::ostream& os, const FourierSeries& u);
FourierSeries read_series_csv(std::istream& is);

}  // namespace kdvlab
