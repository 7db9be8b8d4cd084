#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "kdvlab/density.hpp"
#include "kdvlab/fourier.hpp"

namespace kdvlab {

/// Cnoidal traveling wave: mean-zero profile q and speed c with
/// -q''' + 6 q q' + c q' = 0.
struct TravelingWave {
  FourierSeries profile;
  double speed = 0.0;
  double amplitude = 0.0;         // half peak-to-trough
  double elliptic_parameter = 0;  // m of the cn^2 family
};

/// Builds the cn^2-family wave of the requested amplitude (half
/// peak-to-trough), 1-periodic and mean-zero, at the given resolution.
TravelingWave cnoidal(double amplitude, int max_mode);

/// ||-q''' + 6qq' + c q'||_0 at the profile's resolution.
double traveling_wave_residual(const TravelingWave& wave);

/// -dx^3 u + 6 u dx u + eps dx[d_z f(x, u)], dealiased, mean-zero output.
FourierSeries kdv_rhs(const FourierSeries& u, double eps, const PerturbationDensity& f);

/// Pseudo-spectral integrator for the perturbed KdV flow with the linear
/// part L = -dx^3 + frame_speed dx removed by a fourth-order exponential
/// scheme. With frame_speed = c the cnoidal wave is a fixed point and the
/// scheme preserves it to round-off.
class KdvIntegrator {
 public:
  KdvIntegrator(int max_mode, double eps, PerturbationDensity f, double frame_speed = 0.0,
                bool nonlinear = true);

  int max_mode() const { return K_; }
  int grid_points() const { return M_; }
  double frame_speed() const { return frame_speed_; }

  /// One step of length dt from time t (t only matters in a moving frame
  /// with an x-dependent density). Throws on non-finite values.
  void step(std::vector<cplx>& half, double t, double dt);

  /// Midpoint rule in the integrating-factor frame, solved by fixed-point
  /// iteration (needs dt below ~1/(6 max|u| 2 pi K)). Symplectic for the
  /// dx-Poisson structure: the energy error stays bounded instead of
  /// feeding back into the orbit, which is what the eps^{-2}-horizon runs
  /// need. Second order.
  void step_midpoint(std::vector<cplx>& half, double t, double dt);

  std::vector<cplx> pack(const FourierSeries& u) const;
  FourierSeries unpack(const std::vector<cplx>& half) const;

  /// Largest stable step against the advective frozen-coefficient bound
  /// 6 max|u| 2 pi K, with the given safety factor.
  double stable_dt(const FourierSeries& u0, double safety = 2.4) const;

 private:
  void refresh_coefficients(double dt);
  void nonlinear_term(const std::vector<cplx>& half, double t, std::vector<cplx>& out);

  int K_;
  int M_;
  double eps_;
  PerturbationDensity f_;
  double frame_speed_;
  bool nonlinear_;
  bool x_dependent_density_ = false;
  bool cubic_only_ = false;
  bool warm_valid_ = false;

 public:
  long fp_iters_total = 0;   // fixed-point diagnostics
  long fp_steps = 0;

 private:
  double dt_cached_ = -1.0;
  std::vector<cplx> lin_;                       // L symbol, i((2 pi k)^3 + c 2 pi k)
  std::vector<cplx> e_full_, e_half_, q_half_;  // exponentials and h/2 phi1(z/2)
  std::vector<cplx> f1_, f2_, f3_;              // Cox-Matthews weights (times h)
  std::vector<std::vector<double>> cos_table_, sin_table_;  // density band tables
  std::vector<double> powv_;
  std::vector<cplx> na_, nb_, nc_, nu_, stage_;
  std::vector<cplx> aa_g_, aa_f_, aa_gprev_, aa_fprev_;
};

double hamiltonian(const FourierSeries& u);
double momentum(const FourierSeries& u);
double mean(const FourierSeries& u);

/// min over shifts of ||u - q(. - sigma)||_s; coarse grid scan refined by
/// golden-section.
double orbit_distance(const FourierSeries& u, const TravelingWave& wave, double s);

struct StabilityRow {
  double eps = 0.0;
  double horizon = 0.0;
  double max_ratio = 0.0;  // max_t dist/eps (absolute distance when eps = 0)
  double h_drift = 0.0;    // relative
  double m_drift = 0.0;    // relative
  double aborted_at = -1.0;
  long steps = 0;
  double seconds = 0.0;
};

struct StabilityConfig {
  std::vector<double> eps_list;
  double sobolev_s = 1.0;
  double horizon_factor = 1.0;   // T = factor * eps^{-2}
  double companion_horizon = 10.0;
  double dt = 0.0;               // 0: automatic from the advective bound
  double ratio_bound = 10.0;
  int perturbation_band = 32;
  std::uint64_t seed = 1;
  int sample_stride = 512;
  int threads = 2;
};

struct StabilityTable {
  std::vector<StabilityRow> rows;
  double dt = 0.0;
  int resolution = 0;
};

/// The eps-scan harness: integrates u0 = q + eps p to T = factor/eps^2 in
/// the co-moving frame, recording max orbit-distance/eps and the invariant
/// drifts. The eps = 0 companion runs to companion_horizon.
StabilityTable stability_experiment(const TravelingWave& wave, const PerturbationDensity& f,
                                    const StabilityConfig& config);

void write_stability_csv(std::ostream& os, const StabilityTable& table, std::uint64_t config_hash);

}  // namespace kdvlab
