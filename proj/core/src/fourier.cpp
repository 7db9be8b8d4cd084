#include "kdvlab/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "kdvlab/grid.hpp"

namespace kdvlab {

double FourierSeries::reality_defect() const {
  double d = 0.0;
  for (int k = 0; k <= max_mode_; ++k) {
    d = std::max(d, std::abs(coeff(-k) - std::conj(coeff(k))));
  }
  if (mean_zero_) d = std::max(d, std::abs(coeff(0)));
  return d;
}

FourierSeries FourierSeries::truncated(int K) const {
  FourierSeries out(K, mean_zero_);
  const int m = std::min(K, max_mode_);
  for (int k = -m; k <= m; ++k) out.set_raw(k, coeff(k));
  return out;
}

FourierSeries& FourierSeries::operator+=(const FourierSeries& o) {
  if (o.max_mode_ > max_mode_) throw std::invalid_argument("window mismatch in +=");
  for (int k = -o.max_mode_; k <= o.max_mode_; ++k) set_raw(k, coeff(k) + o.coeff(k));
  mean_zero_ = mean_zero_ && o.mean_zero_;
  return *this;
}

FourierSeries& FourierSeries::operator-=(const FourierSeries& o) {
  if (o.max_mode_ > max_mode_) throw std::invalid_argument("window mismatch in -=");
  for (int k = -o.max_mode_; k <= o.max_mode_; ++k) set_raw(k, coeff(k) - o.coeff(k));
  mean_zero_ = mean_zero_ && o.mean_zero_;
  return *this;
}

FourierSeries& FourierSeries::operator*=(double a) {
  for (auto& v : c_) v *= a;
  return *this;
}

ModeSet::ModeSet(std::vector<int> s_plus) : s_plus_(std::move(s_plus)) {
  std::sort(s_plus_.begin(), s_plus_.end());
  for (int n : s_plus_)
    if (n <= 0) throw std::invalid_argument("S_+ must contain positive integers");
  if (std::adjacent_find(s_plus_.begin(), s_plus_.end()) != s_plus_.end())
    throw std::invalid_argument("S_+ entries must be distinct");
}

bool ModeSet::in_s(int j) const {
  return std::binary_search(s_plus_.begin(), s_plus_.end(), std::abs(j)) && j != 0;
}

std::vector<int> ModeSet::perp_window(int window) const {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(2 * window));
  for (int j = -window; j <= window; ++j)
    if (in_perp(j)) out.push_back(j);
  return out;
}

PhasePoint::PhasePoint(std::vector<double> th, std::vector<double> yy, FourierSeries ww, double e)
    : theta(std::move(th)), y(std::move(yy)), w(std::move(ww)), eps(e) {
  if (theta.size() != y.size()) throw std::invalid_argument("theta/y dimension mismatch");
  if (eps < 0.0) throw std::invalid_argument("eps must be nonnegative");
}

PhasePoint PhasePoint::scaled(double t) const {
  PhasePoint p = *this;
  for (auto& v : p.y) v *= t;
  p.w *= t;
  p.eps *= t;
  return p;
}

void check_support_in_perp(const FourierSeries& w, const ModeSet& modes) {
  for (int k = -w.max_mode(); k <= w.max_mode(); ++k) {
    if (std::abs(w.coeff(k)) != 0.0 && !modes.in_perp(k))
      throw std::invalid_argument("w has support outside S_perp");
  }
}

double sobolev_norm(const FourierSeries& u, double s) {
  double acc = 0.0;
  for (int k = -u.max_mode(); k <= u.max_mode(); ++k) {
    const double a = std::abs(u.coeff(k));
    if (a == 0.0) continue;
    acc += std::pow(jbracket(k), 2.0 * s) * a * a;
  }
  return std::sqrt(acc);
}

FourierSeries dx_power(const FourierSeries& u, int m) {
  FourierSeries out(u.max_mode(), u.mean_zero() || m < 0 || m >= 1);
  for (int k = -u.max_mode(); k <= u.max_mode(); ++k) {
    if (k == 0) {
      if (m == 0) out.set_raw(0, u.coeff(0));
      continue;
    }
    out.set_raw(k, std::pow(cplx{0.0, kTwoPi * k}, m) * u.coeff(k));
  }
  return out;
}

FourierSeries project_perp(const FourierSeries& u, const ModeSet& modes) {
  FourierSeries out(u.max_mode(), true);
  for (int k = -u.max_mode(); k <= u.max_mode(); ++k)
    if (modes.in_perp(k)) out.set_raw(k, u.coeff(k));
  return out;
}

double symplectic_form(const FourierSeries& u, const FourierSeries& v) {
  if (std::abs(u.coeff(0)) > 1e-13 || std::abs(v.coeff(0)) > 1e-13)
    throw std::invalid_argument("symplectic form requires mean-zero input");
  // int (dx^{-1} u) v = sum_k u_k v_{-k} / (2 pi i k)
  cplx acc{0.0, 0.0};
  const int K = std::min(u.max_mode(), v.max_mode());
  for (int k = -K; k <= K; ++k) {
    if (k == 0) continue;
    acc += u.coeff(k) * v.coeff(-k) / cplx{0.0, kTwoPi * k};
  }
  return acc.real();
}

FourierSeries dealiased_product(const FourierSeries& a, const FourierSeries& b) {
  const int K = std::max(a.max_mode(), b.max_mode());
  const int M = good_grid_size(a.max_mode() + b.max_mode() + K, 0);
  RealGrid& g = grid_for(M);
  auto ga = g.scratch(0), gb = g.scratch(1);
  g.to_grid(a, ga);
  g.to_grid(b, gb);
  for (int n = 0; n < M; ++n) ga[static_cast<size_t>(n)] *= gb[static_cast<size_t>(n)];
  FourierSeries out(K, false);
  g.from_grid(ga, out);
  if (a.mean_zero() && b.mean_zero()) {
    // product of mean-zero functions generally has a mean; keep it.
  }
  return out;
}

double l2_pairing(const FourierSeries& u, const FourierSeries& v) {
  cplx acc{0.0, 0.0};
  const int K = std::min(u.max_mode(), v.max_mode());
  for (int k = -K; k <= K; ++k) acc += u.coeff(k) * v.coeff(-k);
  return acc.real();
}

double max_abs_coeff(const FourierSeries& u) {
  double m = 0.0;
  for (const auto& v : u.raw()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_value(const FourierSeries& u) {
  const int M = good_grid_size(2 * u.max_mode(), 64);
  RealGrid& g = grid_for(M);
  auto gu = g.scratch(0);
  g.to_grid(u, gu);
  double m = 0.0;
  for (int n = 0; n < M; ++n) m = std::max(m, std::abs(gu[static_cast<size_t>(n)]));
  return m;
}

void write_series_csv(std::ostream& os, const FourierSeries& u) {
  os << "k,re,im\n";
  os.precision(17);
  for (int k = -u.max_mode(); k <= u.max_mode(); ++k) {
    const cplx v = u.coeff(k);
    os << k << ',' << v.real() << ',' << v.imag() << '\n';
  }
}

FourierSeries read_series_csv(std::istream& is) {
  std::string line;
  std::vector<std::pair<int, cplx>> rows;
  int kmax = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'k') continue;
    std::istringstream ss(line);
    int k;
    double re, im;
    char comma;
    if (ss >> k >> comma >> re >> comma >> im) {
      rows.emplace_back(k, cplx{re, im});
      kmax = std::max(kmax, std::abs(k));
    }
  }
  FourierSeries u(kmax, false);
  for (auto& [k, v] : rows) u.set_raw(k, v);
  return u;
}

}  // namespace kdvlab
