#include "kdvlab/homological.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace kdvlab {

namespace {

std::string tuple_string(const std::vector<int>& ell, const std::vector<int>& j_list,
                         double value, int order) {
  std::ostringstream os;
  os << "divisor below threshold (order " << order << ") at ell=(";
  for (size_t i = 0; i < ell.size(); ++i) os << (i ? "," : "") << ell[i];
  os << ") j=(";
  for (size_t i = 0; i < j_list.size(); ++i) os << (i ? "," : "") << j_list[i];
  os << ") value=" << value;
  return os.str();
}

double ell_bracket(const std::vector<int>& ell) {
  double s = 0.0;
  for (int v : ell) s += static_cast<double>(v) * v;
  return std::max(1.0, std::sqrt(s));
}

}  // namespace

DivisorBelowThreshold::DivisorBelowThreshold(std::vector<int> ell, std::vector<int> j_list,
                                             double value, int order)
    : std::runtime_error(tuple_string(ell, j_list, value, order)),
      ell_(std::move(ell)),
      j_list_(std::move(j_list)),
      value_(value),
      order_(order) {}

EllGrid::EllGrid(int p, int L) : p_(p), L_(L) {
  if (p < 0 || L < 0) throw std::invalid_argument("bad EllGrid dimensions");
  count_ = 1;
  for (int i = 0; i < p; ++i) count_ *= static_cast<size_t>(2 * L + 1);
}

size_t EllGrid::index(const std::vector<int>& ell) const {
  if (static_cast<int>(ell.size()) != p_) throw std::invalid_argument("ell dimension mismatch");
  size_t idx = 0;
  for (int i = p_ - 1; i >= 0; --i) {
    const int v = ell[static_cast<size_t>(i)];
    if (v < -L_ || v > L_) throw std::out_of_range("ell outside window");
    idx = idx * static_cast<size_t>(2 * L_ + 1) + static_cast<size_t>(v + L_);
  }
  return idx;
}

std::vector<int> EllGrid::unflatten(size_t idx) const {
  std::vector<int> ell(static_cast<size_t>(p_));
  for (int i = 0; i < p_; ++i) {
    ell[static_cast<size_t>(i)] = static_cast<int>(idx % static_cast<size_t>(2 * L_ + 1)) - L_;
    idx /= static_cast<size_t>(2 * L_ + 1);
  }
  return ell;
}

size_t EllGrid::negated(size_t idx) const {
  auto ell = unflatten(idx);
  for (auto& v : ell) v = -v;
  return index(ell);
}

bool EllGrid::is_zero(size_t idx) const {
  const auto ell = unflatten(idx);
  return std::all_of(ell.begin(), ell.end(), [](int v) { return v == 0; });
}

TorusField::TorusField(int p, int L) : ells_(p, L), window_(0), c_(ells_.count(), cplx{0, 0}) {}

TorusField::TorusField(int p, int L, ModeSet modes, int window)
    : ells_(p, L),
      modes_(std::move(modes)),
      window_(window),
      c_(ells_.count() * static_cast<size_t>(2 * window + 1), cplx{0, 0}) {
  if (window <= 0) throw std::invalid_argument("window must be positive for j-indexed fields");
}

TorusField TorusField::unconstrained(int p, int L, int window) {
  TorusField f(p, L, ModeSet(std::vector<int>{}), window);
  f.constrained_ = false;
  return f;
}

size_t TorusField::jindex(int j) const {
  if (window_ == 0) {
    if (j != 0) throw std::out_of_range("scalar field has no space index");
    return 0;
  }
  if (j < -window_ || j > window_) throw std::out_of_range("j outside window");
  return static_cast<size_t>(j + window_);
}

cplx TorusField::coeff(const std::vector<int>& ell, int j) const {
  return c_[ells_.index(ell) * jslots() + jindex(j)];
}

void TorusField::set(const std::vector<int>& ell, int j, cplx v) {
  if (window_ > 0 && constrained_ && !modes_.in_perp(j))
    throw std::invalid_argument("support must lie in S_perp");
  c_[ells_.index(ell) * jslots() + jindex(j)] = v;
}

void TorusField::add(const std::vector<int>& ell, int j, cplx v) {
  set(ell, j, coeff(ell, j) + v);
}

cplx TorusField::coeff_flat(size_t ell_idx, int j) const {
  return c_[ell_idx * jslots() + jindex(j)];
}

void TorusField::set_flat(size_t ell_idx, int j, cplx v) {
  if (window_ > 0 && constrained_ && !modes_.in_perp(j))
    throw std::invalid_argument("support must lie in S_perp");
  c_[ell_idx * jslots() + jindex(j)] = v;
}

double TorusField::reality_defect() const {
  double d = 0.0;
  for (size_t e = 0; e < ells_.count(); ++e) {
    const size_t en = ells_.negated(e);
    if (window_ == 0) {
      d = std::max(d, std::abs(c_[en] - std::conj(c_[e])));
    } else {
      for (int j = -window_; j <= window_; ++j)
        d = std::max(d, std::abs(c_[en * jslots() + jindex(-j)] -
                                 std::conj(c_[e * jslots() + jindex(j)])));
    }
  }
  return d;
}

double TorusField::max_abs() const {
  double m = 0.0;
  for (const auto& v : c_) m = std::max(m, std::abs(v));
  return m;
}

TorusField& TorusField::operator+=(const TorusField& o) {
  if (o.c_.size() != c_.size()) throw std::invalid_argument("field shape mismatch");
  for (size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

TorusField& TorusField::operator-=(const TorusField& o) {
  if (o.c_.size() != c_.size()) throw std::invalid_argument("field shape mismatch");
  for (size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

TorusField& TorusField::operator*=(double s) {
  for (auto& v : c_) v *= s;
  return *this;
}

cplx TorusField::average(int j) const {
  std::vector<int> zero(static_cast<size_t>(ells_.dim()), 0);
  return coeff(zero, j);
}

TorusField TorusField::omega_dtheta(const std::vector<double>& omega) const {
  TorusField out = *this;
  for (size_t e = 0; e < ells_.count(); ++e) {
    const auto ell = ells_.unflatten(e);
    double od = 0.0;
    for (size_t i = 0; i < omega.size(); ++i) od += omega[i] * ell[i];
    for (size_t s = 0; s < jslots(); ++s)
      out.c_[e * jslots() + s] = cplx{0.0, od} * c_[e * jslots() + s];
  }
  return out;
}

cplx TorusField::eval_scalar(const std::vector<double>& theta) const {
  cplx acc{0, 0};
  for (size_t e = 0; e < ells_.count(); ++e) {
    const auto ell = ells_.unflatten(e);
    double phase = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) phase += theta[i] * ell[i];
    acc += c_[e * jslots()] * std::polar(1.0, phase);
  }
  return acc;
}

FourierSeries TorusField::eval_series(const std::vector<double>& theta) const {
  FourierSeries out(window_ > 0 ? window_ : 0, window_ > 0 && constrained_);
  for (size_t e = 0; e < ells_.count(); ++e) {
    const auto ell = ells_.unflatten(e);
    double phase = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) phase += theta[i] * ell[i];
    const cplx ph = std::polar(1.0, phase);
    for (int j = -window_; j <= window_; ++j) {
      const cplx v = c_[e * jslots() + jindex(j)];
      if (v != cplx{0, 0}) out.set_raw(j, out.coeff(j) + ph * v);
    }
  }
  return out;
}

SmoothingKernel::SmoothingKernel(int p, int L, ModeSet modes, int window)
    : ells_(p, L), modes_(std::move(modes)), window_(window), bilinear_(false) {
  c_.assign(ells_.count() * nb() * nb(), cplx{0, 0});
}

SmoothingKernel SmoothingKernel::bilinear(int p, int L, ModeSet modes, int window) {
  SmoothingKernel k;
  k.ells_ = EllGrid(p, L);
  k.modes_ = std::move(modes);
  k.window_ = window;
  k.bilinear_ = true;
  k.c_.assign(k.ells_.count() * k.nb() * k.nb() * k.nb(), cplx{0, 0});
  return k;
}

size_t SmoothingKernel::idx(size_t ell_idx, int n, int j, int jp) const {
  const size_t b = nb();
  const size_t ni = static_cast<size_t>(n + window_);
  const size_t ji = static_cast<size_t>(j + window_);
  if (!bilinear_) return (ell_idx * b + ni) * b + ji;
  const size_t pi = static_cast<size_t>(jp + window_);
  return ((ell_idx * b + ni) * b + ji) * b + pi;
}

cplx SmoothingKernel::get(size_t ell_idx, int n, int j, int jp) const {
  return c_[idx(ell_idx, n, j, jp)];
}

void SmoothingKernel::set(size_t ell_idx, int n, int j, cplx v) {
  if (bilinear_) throw std::logic_error("bilinear kernel needs four indices");
  c_[idx(ell_idx, n, j, 0)] = v;
}

void SmoothingKernel::set(size_t ell_idx, int n, int j, int jp, cplx v) {
  if (!bilinear_) throw std::logic_error("linear kernel takes three indices");
  c_[idx(ell_idx, n, j, jp)] = v;
}

void SmoothingKernel::add(size_t ell_idx, int n, int j, cplx v) {
  if (bilinear_) throw std::logic_error("bilinear kernel needs four indices");
  c_[idx(ell_idx, n, j, 0)] += v;
}

void SmoothingKernel::add(size_t ell_idx, int n, int j, int jp, cplx v) {
  if (!bilinear_) throw std::logic_error("linear kernel takes three indices");
  c_[idx(ell_idx, n, j, jp)] += v;
}

double SmoothingKernel::max_abs() const {
  double m = 0.0;
  for (const auto& v : c_) m = std::max(m, std::abs(v));
  return m;
}

double SmoothingKernel::reality_defect() const {
  double d = 0.0;
  const auto perp = modes_.perp_window(window_);
  for (size_t e = 0; e < ells_.count(); ++e) {
    const size_t en = ells_.negated(e);
    for (int n : perp)
      for (int j : perp) {
        if (!bilinear_) {
          d = std::max(d, std::abs(get(en, -n, -j) - std::conj(get(e, n, j))));
        } else {
          for (int jp : perp)
            d = std::max(d, std::abs(get(en, -n, -j, -jp) - std::conj(get(e, n, j, jp))));
        }
      }
  }
  return d;
}

SmoothingKernel& SmoothingKernel::operator+=(const SmoothingKernel& o) {
  if (o.c_.size() != c_.size() || o.bilinear_ != bilinear_)
    throw std::invalid_argument("kernel shape mismatch");
  for (size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
  return *this;
}

SmoothingKernel& SmoothingKernel::operator-=(const SmoothingKernel& o) {
  if (o.c_.size() != c_.size() || o.bilinear_ != bilinear_)
    throw std::invalid_argument("kernel shape mismatch");
  for (size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
  return *this;
}

SmoothingKernel& SmoothingKernel::operator*=(double s) {
  for (auto& v : c_) v *= s;
  return *this;
}

std::vector<double> SmoothingKernel::per_ell_norms() const {
  const size_t block = c_.size() / ells_.count();
  std::vector<double> out(ells_.count(), 0.0);
  for (size_t e = 0; e < ells_.count(); ++e)
    for (size_t i = 0; i < block; ++i)
      out[e] = std::max(out[e], std::abs(c_[e * block + i]));
  return out;
}

FourierSeries SmoothingKernel::apply_linear(const std::vector<double>& theta,
                                            const FourierSeries& w) const {
  if (bilinear_) throw std::logic_error("apply_linear on bilinear kernel");
  FourierSeries out(window_, true);
  const auto perp = modes_.perp_window(window_);
  for (size_t e = 0; e < ells_.count(); ++e) {
    const auto ell = ells_.unflatten(e);
    double phase = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) phase += theta[i] * ell[i];
    const cplx ph = std::polar(1.0, phase);
    for (int n : perp) {
      cplx acc{0, 0};
      for (int j : perp) acc += get(e, n, j) * w.coeff(j);
      if (acc != cplx{0, 0}) out.set_raw(n, out.coeff(n) + ph * acc);
    }
  }
  return out;
}

FourierSeries SmoothingKernel::apply_bilinear(const std::vector<double>& theta,
                                              const FourierSeries& w,
                                              const FourierSeries& v) const {
  if (!bilinear_) throw std::logic_error("apply_bilinear on linear kernel");
  FourierSeries out(window_, true);
  const auto perp = modes_.perp_window(window_);
  for (size_t e = 0; e < ells_.count(); ++e) {
    const auto ell = ells_.unflatten(e);
    double phase = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) phase += theta[i] * ell[i];
    const cplx ph = std::polar(1.0, phase);
    for (int n : perp) {
      cplx acc{0, 0};
      for (int j : perp) {
        const cplx wj = w.coeff(j);
        if (wj == cplx{0, 0}) continue;
        for (int jp : perp) acc += get(e, n, j, jp) * wj * v.coeff(jp);
      }
      if (acc != cplx{0, 0}) out.set_raw(n, out.coeff(n) + ph * acc);
    }
  }
  return out;
}

void require_melnikov(const FrequencyModel& model, int order, int L, int J) {
  const auto violators = check_melnikov(model, order, L, J);
  if (!violators.empty()) {
    const auto& v = violators.front();
    throw DivisorBelowThreshold(v.ell, v.j_list, v.divisor_value, v.condition_order);
  }
}

TorusField solve_torus_transport(const FrequencyModel& model, const TorusField& P) {
  require_melnikov(model, 0, P.ells().bound(), std::max(1, P.window()));
  TorusField F = P;
  F *= 0.0;
  for (size_t e = 0; e < P.ells().count(); ++e) {
    const auto ell = P.ells().unflatten(e);
    if (P.ells().is_zero(e)) continue;  // F has zero average
    const cplx div{0.0, model.omega_dot(ell)};
    if (P.window() == 0) {
      F.set_flat(e, 0, -P.coeff_flat(e, 0) / div);
    } else {
      for (int j = -P.window(); j <= P.window(); ++j) {
        if (!P.modes().in_perp(j)) continue;
        F.set_flat(e, j, -P.coeff_flat(e, j) / div);
      }
    }
  }
  return F;
}

TorusField solve_first_melnikov(const FrequencyModel& model, const TorusField& P) {
  if (P.window() == 0) throw std::invalid_argument("first Melnikov solver needs a j-indexed field");
  require_melnikov(model, 1, P.ells().bound(), P.window());
  TorusField F = P;
  F *= 0.0;
  for (size_t e = 0; e < P.ells().count(); ++e) {
    const auto ell = P.ells().unflatten(e);
    const double base = model.omega_dot(ell);
    for (int j = -P.window(); j <= P.window(); ++j) {
      if (!P.modes().in_perp(j)) continue;
      F.set_flat(e, j, -P.coeff_flat(e, j) / cplx{0.0, base + model.normal_frequency(j)});
    }
  }
  return F;
}

FourierSeries solve_x_transport(const FourierSeries& a) {
  FourierSeries centered = a;
  centered.set_raw(0, cplx{0, 0});
  FourierSeries b = dx_power(centered, -1);
  b *= (1.0 / 3.0);
  return b;
}

SecondMelnikovSolution solve_second_melnikov(const FrequencyModel& model,
                                             const SmoothingKernel& R, int L, int J) {
  if (R.is_bilinear()) throw std::invalid_argument("second Melnikov solver takes a linear kernel");
  require_melnikov(model, 2, L, J);
  SecondMelnikovSolution sol;
  sol.S = R;
  sol.S *= 0.0;
  const auto perp = R.modes().perp_window(R.window());
  sol.window_modes = perp;
  sol.Z.assign(perp.size(), cplx{0, 0});
  for (size_t e = 0; e < R.ells().count(); ++e) {
    const auto ell = R.ells().unflatten(e);
    const bool ell_zero = R.ells().is_zero(e);
    const double base = model.omega_dot(ell);
    for (size_t a = 0; a < perp.size(); ++a) {
      const int j = perp[a];
      for (int jp : perp) {
        const cplx r = R.get(e, j, jp);
        if (ell_zero && jp == j) {
          if (j == perp[a]) sol.Z[a] += r;  // resonant slot routed to Z
          continue;
        }
        if (r == cplx{0, 0}) continue;
        const double d = base + model.normal_frequency(j) - model.normal_frequency(jp);
        if (d == 0.0)
          throw DivisorBelowThreshold(ell, {j, -jp}, d, 2);
        const cplx s = -r / cplx{0.0, d};
        sol.S.set(e, j, jp, s);
        sol.max_amplification = std::max(sol.max_amplification, std::abs(s) / std::abs(r));
      }
    }
  }
  return sol;
}

ThirdMelnikovSolution solve_third_melnikov(const FrequencyModel& model, const SmoothingKernel& R,
                                           int L, int J) {
  if (!R.is_bilinear()) throw std::invalid_argument("third Melnikov solver takes a bilinear kernel");
  require_melnikov(model, 3, L, J);
  ThirdMelnikovSolution sol;
  sol.S = R;
  sol.S *= 0.0;
  const auto perp = R.modes().perp_window(R.window());
  const double gamma = model.gamma(), tau = model.tau();
  for (size_t e = 0; e < R.ells().count(); ++e) {
    const auto ell = R.ells().unflatten(e);
    const double base = model.omega_dot(ell);
    const double lb = std::pow(ell_bracket(ell), tau);
    for (int n : perp)
      for (int j : perp)
        for (int jp : perp) {
          const cplx r = R.get(e, n, j, jp);
          if (r == cplx{0, 0}) continue;
          const double d =
              base + model.normal_frequency(n) - model.normal_frequency(j) - model.normal_frequency(jp);
          if (d == 0.0) throw DivisorBelowThreshold(ell, {n, -j, -jp}, d, 3);
          const cplx s = -r / cplx{0.0, d};
          sol.S.set(e, n, j, jp, s);
          sol.max_amplification = std::max(sol.max_amplification, std::abs(s) / std::abs(r));
          const double bound = lb * jbracket(j) * jbracket(j) * jbracket(jp) * jbracket(jp) *
                               jbracket(n) * jbracket(n) / gamma;
          sol.amplification_bound = std::max(sol.amplification_bound, bound);
        }
  }
  return sol;
}

MultiplierSolution solve_multiplier_homological(const FrequencyModel& model,
                                                const TorusField& lambda) {
  MultiplierSolution sol;
  sol.xi = solve_first_melnikov(model, lambda);
  for (size_t e = 0; e < lambda.ells().count(); ++e)
    for (int j = -lambda.window(); j <= lambda.window(); ++j) {
      if (!lambda.modes().in_perp(j)) continue;
      const cplx l = lambda.coeff_flat(e, j);
      if (l == cplx{0, 0}) continue;
      sol.max_amplification =
          std::max(sol.max_amplification, std::abs(sol.xi.coeff_flat(e, j)) / std::abs(l));
    }
  return sol;
}

void write_torus_field_csv(std::ostream& os, const TorusField& f) {
  os << "ell,n,j,jp,re,im\n";
  os.precision(17);
  for (size_t e = 0; e < f.ells().count(); ++e) {
    const auto ell = f.ells().unflatten(e);
    std::ostringstream ls;
    for (size_t i = 0; i < ell.size(); ++i) ls << (i ? " " : "") << ell[i];
    if (f.window() == 0) {
      const cplx v = f.coeff_flat(e, 0);
      os << ls.str() << ",,,," << v.real() << ',' << v.imag() << '\n';
    } else {
      for (int j = -f.window(); j <= f.window(); ++j) {
        if (!f.modes().in_perp(j)) continue;
        const cplx v = f.coeff_flat(e, j);
        os << ls.str() << ",," << j << ",," << v.real() << ',' << v.imag() << '\n';
      }
    }
  }
}

void write_kernel_csv(std::ostream& os, const SmoothingKernel& k) {
  os << "ell,n,j,jp,re,im\n";
  os.precision(17);
  const auto perp = k.modes().perp_window(k.window());
  for (size_t e = 0; e < k.ells().count(); ++e) {
    const auto ell = k.ells().unflatten(e);
    std::ostringstream ls;
    for (size_t i = 0; i < ell.size(); ++i) ls << (i ? " " : "") << ell[i];
    for (int n : perp)
      for (int j : perp) {
        if (!k.is_bilinear()) {
          const cplx v = k.get(e, n, j);
          if (v != cplx{0, 0})
            os << ls.str() << ',' << n << ',' << j << ",," << v.real() << ',' << v.imag() << '\n';
        } else {
          for (int jp : perp) {
            const cplx v = k.get(e, n, j, jp);
            if (v != cplx{0, 0})
              os << ls.str() << ',' << n << ',' << j << ',' << jp << ',' << v.real() << ','
                 << v.imag() << '\n';
          }
        }
      }
  }
}

}  // namespace kdvlab
