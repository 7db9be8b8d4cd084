#pragma once

#include <functional>
#include <vector>

#include "kdvlab/fourier.hpp"
#include "kdvlab/paradiff.hpp"

namespace kdvlab {

/// Linear para-differential Cauchy problem
///   dt w = D(t)[w] + Pi_perp T_{a(t)} dx w + f(t),  w(0) = w0,
/// Galerkin-truncated to |j| <= galerkin_cut inside S_perp. The multiplier
/// symbol d(t, j) must be skew (purely imaginary, odd in j) per sample.
struct LinearPDEProblem {
  std::function<cplx(double, int)> multiplier;        // d(t, j)
  int multiplier_order = 3;                           // m in {1, 3}
  std::function<FourierSeries(double)> coeff_a;       // may be null (a = 0)
  std::function<FourierSeries(double)> forcing;       // may be null (f = 0)
  FourierSeries w0;
  ModeSet modes;
  double horizon = 1.0;
  int galerkin_cut = 64;
  double sobolev_s = 2.0;
  CutoffFunction cutoff;
};

/// Max deviation of the sampled multiplier from skew-adjointness
/// (d real part, and d(-j) + d(j)) over the window.
double multiplier_skew_defect(const LinearPDEProblem& p, double t);

struct Trajectory {
  std::vector<double> times;
  std::vector<FourierSeries> states;
};

/// Four-stage explicit integrating-factor scheme: the multiplier frozen at
/// the step start is removed by its exact exponential (so the constant
/// stiff part costs nothing), the rest is advanced with classical RK4.
Trajectory galerkin_solve(const LinearPDEProblem& p, double dt, int store_every = 1);

struct EnergyReport {
  std::vector<double> times;
  std::vector<double> norms;           // ||w(t)||_s
  std::vector<double> derivative;      // dt ||dx^s w||^2, from the equation
  std::vector<double> defect;          // |derivative| - forcing allowance
  double worst_constant = 0.0;         // measured C in the commutator bound
  double max_defect = 0.0;
};

/// Verifies |dt ||dx^s w||^2| <= C ||a(t)||_2 ||w||_s^2 + 2 ||f||_s ||w||_s
/// along a computed trajectory, reporting the worst measured constant.
EnergyReport energy_defect(const LinearPDEProblem& p, const Trajectory& traj, double s);

void write_energy_csv(std::ostream& os, const EnergyReport& rep, std::uint64_t config_hash);

}  // namespace kdvlab
