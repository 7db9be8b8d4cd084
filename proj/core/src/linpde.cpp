#include "kdvlab/linpde.hpp"

#include <cmath>
#include <ostream>

#include "kdvlab/csv.hpp"

namespace kdvlab {

namespace {

/// right-hand side without the frozen multiplier part
FourierSeries variable_rhs(const LinearPDEProblem& p, double t, const FourierSeries& w,
                           const std::vector<cplx>& frozen, const std::vector<int>& perp) {
  FourierSeries out(p.galerkin_cut, true);
  // (d(t) - d_frozen) w
  for (size_t i = 0; i < perp.size(); ++i) {
    const int j = perp[i];
    const cplx dd = p.multiplier(t, j) - frozen[i];
    if (dd != cplx{0, 0}) out.set_raw(j, dd * w.coeff(j));
  }
  if (p.coeff_a) {
    const FourierSeries a = p.coeff_a(t);
    FourierSeries tw = paraproduct(a, dx_power(w, 1), p.cutoff).truncated(p.galerkin_cut);
    for (int j : perp) out.set_raw(j, out.coeff(j) + tw.coeff(j));
  }
  if (p.forcing) {
    const FourierSeries f = p.forcing(t);
    for (int j : perp) out.set_raw(j, out.coeff(j) + f.coeff(j));
  }
  return out;
}

}  // namespace

double multiplier_skew_defect(const LinearPDEProblem& p, double t) {
  double defect = 0.0;
  for (int j : p.modes.perp_window(p.galerkin_cut)) {
    const cplx d = p.multiplier(t, j);
    defect = std::max(defect, std::abs(d.real()));
    defect = std::max(defect, std::abs(d + p.multiplier(t, -j)));
  }
  return defect;
}

Trajectory galerkin_solve(const LinearPDEProblem& p, double dt, int store_every) {
  const auto perp = p.modes.perp_window(p.galerkin_cut);
  const size_t nb = perp.size();

  FourierSeries w = p.w0.truncated(p.galerkin_cut);
  w.drop_mean();
  for (int j = -p.galerkin_cut; j <= p.galerkin_cut; ++j)
    if (!p.modes.in_perp(j)) w.set_raw(j, cplx{0, 0});

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(w);

  const long steps = std::lround(p.horizon / dt);
  std::vector<cplx> frozen(nb), e_half(nb), e_full(nb);
  for (long step = 0; step < steps; ++step) {
    const double t = step * dt;
    for (size_t i = 0; i < nb; ++i) {
      frozen[i] = p.multiplier(t, perp[i]);
      e_half[i] = std::exp(frozen[i] * (dt / 2.0));
      e_full[i] = std::exp(frozen[i] * dt);
    }
    auto propagate = [&](const FourierSeries& u, const std::vector<cplx>& e) {
      FourierSeries out = u;
      for (size_t i = 0; i < nb; ++i) out.set_raw(perp[i], e[i] * u.coeff(perp[i]));
      return out;
    };
    // classical RK4 on the integrating-factor form: stages evaluated on
    // propagated states, combined with exact exponentials
    const FourierSeries k1 = variable_rhs(p, t, w, frozen, perp);
    FourierSeries u2 = w;
    {
      FourierSeries h = k1;
      h *= dt / 2.0;
      u2 += h;
    }
    u2 = propagate(u2, e_half);
    FourierSeries k2(p.galerkin_cut, true);
    {
      const FourierSeries r = variable_rhs(p, t + dt / 2.0, u2, frozen, perp);
      k2 = r;
    }
    // pull k2 back to tau = 0 frame: k2_0 = e^{-D dt/2} k2
    FourierSeries k2b = k2;
    for (size_t i = 0; i < nb; ++i) k2b.set_raw(perp[i], k2.coeff(perp[i]) / e_half[i]);
    FourierSeries u3 = w;
    {
      FourierSeries h = k2b;
      h *= dt / 2.0;
      u3 += h;
    }
    u3 = propagate(u3, e_half);
    FourierSeries k3 = variable_rhs(p, t + dt / 2.0, u3, frozen, perp);
    FourierSeries k3b = k3;
    for (size_t i = 0; i < nb; ++i) k3b.set_raw(perp[i], k3.coeff(perp[i]) / e_half[i]);
    FourierSeries u4 = w;
    {
      FourierSeries h = k3b;
      h *= dt;
      u4 += h;
    }
    u4 = propagate(u4, e_full);
    FourierSeries k4 = variable_rhs(p, t + dt, u4, frozen, perp);
    FourierSeries k4b = k4;
    for (size_t i = 0; i < nb; ++i) k4b.set_raw(perp[i], k4.coeff(perp[i]) / e_full[i]);

    FourierSeries incr = k1;
    {
      FourierSeries t2 = k2b;
      t2 *= 2.0;
      incr += t2;
      FourierSeries t3 = k3b;
      t3 *= 2.0;
      incr += t3;
      incr += k4b;
    }
    incr *= dt / 6.0;
    w += incr;
    w = propagate(w, e_full);
    // hermitian cleanup: negative modes mirror the positive ones
    for (size_t i = 0; i < nb; ++i)
      if (perp[i] > 0) w.set_raw(-perp[i], std::conj(w.coeff(perp[i])));

    if ((step + 1) % store_every == 0 || step + 1 == steps) {
      traj.times.push_back((step + 1) * dt);
      traj.states.push_back(w);
    }
  }
  return traj;
}

EnergyReport energy_defect(const LinearPDEProblem& p, const Trajectory& traj, double s) {
  EnergyReport rep;
  const auto perp = p.modes.perp_window(p.galerkin_cut);
  for (size_t i = 0; i < traj.times.size(); ++i) {
    const double t = traj.times[i];
    const FourierSeries& w = traj.states[i];
    // dt ||dx^s w||^2 = 2 <dx^s w, dx^s (D w + T_a dx w + f)>
    FourierSeries rhs(p.galerkin_cut, true);
    for (int j : perp) rhs.set_raw(j, p.multiplier(t, j) * w.coeff(j));
    if (p.coeff_a) {
      const FourierSeries a = p.coeff_a(t);
      FourierSeries tw = paraproduct(a, dx_power(w, 1), p.cutoff).truncated(p.galerkin_cut);
      for (int j : perp) rhs.set_raw(j, rhs.coeff(j) + tw.coeff(j));
    }
    double fnorm = 0.0;
    if (p.forcing) {
      const FourierSeries f = p.forcing(t);
      fnorm = sobolev_norm(f, s);
      for (int j : perp) rhs.set_raw(j, rhs.coeff(j) + f.coeff(j));
    }
    double deriv = 0.0;
    for (int j : perp) {
      const double wgt = std::pow(jbracket(j), 2.0 * s);
      deriv += 2.0 * wgt * (std::conj(w.coeff(j)) * rhs.coeff(j)).real();
    }
    const double ns = sobolev_norm(w, s);
    rep.times.push_back(t);
    rep.norms.push_back(ns);
    rep.derivative.push_back(deriv);
    const double defect = std::abs(deriv) - 2.0 * fnorm * ns;
    rep.defect.push_back(defect);
    rep.max_defect = std::max(rep.max_defect, defect);
    if (p.coeff_a && ns > 0.0) {
      const double anorm = sobolev_norm(p.coeff_a(t), 2.0);
      if (anorm > 0.0)
        rep.worst_constant = std::max(rep.worst_constant, defect / (anorm * ns * ns));
    }
  }
  return rep;
}

void write_energy_csv(std::ostream& os, const EnergyReport& rep, std::uint64_t config_hash) {
  os << "# config_hash=" << config_hash << " worst_constant=" << format_full(rep.worst_constant)
     << "\n";
  os << "t,norm_s,energy_defect\n";
  for (size_t i = 0; i < rep.times.size(); ++i)
    os << format_full(rep.times[i]) << ',' << format_full(rep.norms[i]) << ','
       << format_full(rep.defect[i]) << '\n';
}

}  // namespace kdvlab
