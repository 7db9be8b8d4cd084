#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "kdvlab/fourier.hpp"

namespace kdvlab {

/// Frequency data: tangential omega over S_+ and normal frequencies with
/// cubic asymptotics Omega_j = (2 pi j)^3 + sum_k d_k j^{-k}. Only odd
/// inverse powers are allowed so that Omega is odd and i*Omega_perp is a
/// real operator; tail_coeffs[i] multiplies j^{-(2i+1)}.
class FrequencyModel {
 public:
  FrequencyModel(ModeSet modes, std::vector<double> omega, std::vector<double> tail_coeffs,
                 double tau, double gamma);

  const ModeSet& modes() const { return modes_; }
  const std::vector<double>& omega() const { return omega_; }
  const std::vector<double>& tail() const { return tail_; }
  double tau() const { return tau_; }
  double gamma() const { return gamma_; }

  /// Omega_j for j in S_perp.
  double normal_frequency(int j) const;
  double tail_bound() const;

  double omega_dot(const std::vector<int>& ell) const;

 private:
  ModeSet modes_;
  std::vector<double> omega_;
  std::vector<double> tail_;
  double tau_;
  double gamma_;
};

/// A near-resonant tuple reported by the Melnikov scan.
struct ResonanceTuple {
  std::vector<int> ell;
  std::vector<int> j_list;
  double divisor_value = 0.0;
  int condition_order = 0;
};

/// omega . ell + sum Omega_{j} for j in j_list.
double divisor(const FrequencyModel& model, const std::vector<int>& ell,
               const std::vector<int>& j_list);

/// Enumerates admissible tuples of the given Melnikov order on the window
/// |ell|_inf <= L, |j| <= J whose divisor modulus falls below the
/// order-specific threshold (with the <j>^2 weights at order 3). An empty
/// list means omega passes on the window.
std::vector<ResonanceTuple> check_melnikov(const FrequencyModel& model, int order, int L, int J);

/// Smallest margin |divisor| * weights / (gamma / <ell>^tau ... ) over all
/// four condition families on the window: the largest gamma that omega
/// still violates. Exact companion of check_melnikov used by the Monte
/// Carlo scan (violation at gamma <=> margin < gamma).
double melnikov_margin(const FrequencyModel& model, int L, int J);

struct FermatScanResult {
  long min_abs = 0;
  std::array<int, 3> witness{};  // sorted ascending
};

/// Brute force over admissible triples 1 <= |j_i| <= J (pairwise sums
/// nonzero) of min |j1^3+j2^3+j3^3|; aborts if a zero is found.
FermatScanResult fermat_cube_scan(int J);

/// All nontrivial zero quadruples j1^3+j2^3+j3^3+j4^3 = 0 with |j_i| <= J,
/// one canonical representative per permutation/global-sign class.
std::vector<std::array<int, 4>> four_wave_scan(int J);

struct MeasureRow {
  double gamma = 0.0;
  double excluded_fraction = 0.0;
  double stderr_binomial = 0.0;
};

struct MeasureTable {
  std::vector<MeasureRow> rows;
  double fitted_slope = 0.0;  // log-log slope of excluded_fraction vs gamma
  int L = 0, J = 0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
};

/// Monte Carlo estimate of the gamma-excluded fraction of a box Pi in
/// omega-space; model_family maps a sampled omega to the frequency model
/// (tail coefficients analytic in omega). Deterministic given (seed,
/// threads-independent partition).
MeasureTable measure_estimate(const std::function<FrequencyModel(const std::vector<double>&)>& model_family,
                              const std::vector<std::pair<double, double>>& box,
                              const std::vector<double>& gamma_list, std::uint64_t samples,
                              std::uint64_t seed, int L, int J, int threads = 1);

void write_resonance_csv(std::ostream& os, const std::vector<ResonanceTuple>& tuples);
void write_measure_csv(std::ostream& os, const MeasureTable& table, std::uint64_t config_hash);

}  // namespace kdvlab
