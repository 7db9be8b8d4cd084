#include "kdvlab/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include "kdvlab/csv.hpp"

namespace kdvlab {

namespace {

double ell_bracket(const std::vector<int>& ell) {
  double s = 0.0;
  for (int v : ell) s += static_cast<double>(v) * v;
  return std::max(1.0, std::sqrt(s));
}

bool is_zero(const std::vector<int>& ell) {
  return std::all_of(ell.begin(), ell.end(), [](int v) { return v == 0; });
}

/// Iterates ell over [-L, L]^p.
class EllRange {
 public:
  EllRange(int p, int L) : p_(p), L_(L), ell_(static_cast<size_t>(p), -L), done_(p == 0) {}
  bool next(std::vector<int>& out) {
    if (done_) return false;
    out = ell_;
    for (int i = 0; i < p_; ++i) {
      if (ell_[static_cast<size_t>(i)] < L_) {
        ++ell_[static_cast<size_t>(i)];
        return true;
      }
      ell_[static_cast<size_t>(i)] = -L_;
    }
    done_ = true;
    return true;
  }

 private:
  int p_, L_;
  std::vector<int> ell_;
  bool done_;
};

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97f4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double unit_double(uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace

FrequencyModel::FrequencyModel(ModeSet modes, std::vector<double> omega,
                               std::vector<double> tail_coeffs, double tau, double gamma)
    : modes_(std::move(modes)),
      omega_(std::move(omega)),
      tail_(std::move(tail_coeffs)),
      tau_(tau),
      gamma_(gamma) {
  if (static_cast<int>(omega_.size()) != modes_.dim())
    throw std::invalid_argument("omega dimension must match |S_+|");
  if (!(tau_ > static_cast<double>(modes_.dim())))
    throw std::invalid_argument("tau must exceed |S_+|");
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
}

double FrequencyModel::normal_frequency(int j) const {
  if (j == 0) throw std::invalid_argument("normal frequency undefined at j = 0");
  const double tpj = kTwoPi * j;
  double v = tpj * tpj * tpj;
  double inv = 1.0 / j;
  double p = inv;  // j^{-1}
  for (double d : tail_) {
    v += d * p;
    p *= inv * inv;  // next odd power
  }
  return v;
}

double FrequencyModel::tail_bound() const {
  double s = 0.0;
  for (double d : tail_) s += std::abs(d);
  return s;
}

double FrequencyModel::omega_dot(const std::vector<int>& ell) const {
  if (ell.size() != omega_.size()) throw std::invalid_argument("ell dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < ell.size(); ++i) s += omega_[i] * ell[i];
  return s;
}

double divisor(const FrequencyModel& model, const std::vector<int>& ell,
               const std::vector<int>& j_list) {
  double s = model.omega_dot(ell);
  for (int j : j_list) {
    if (!model.modes().in_perp(j)) throw std::invalid_argument("j_list entry outside S_perp");
    s += model.normal_frequency(j);
  }
  return s;
}

std::vector<ResonanceTuple> check_melnikov(const FrequencyModel& model, int order, int L, int J) {
  if (order < 0 || order > 3) throw std::invalid_argument("order must be 0..3");
  const double gamma = model.gamma();
  const double tau = model.tau();
  const auto perp = model.modes().perp_window(J);
  std::vector<double> Om(perp.size());
  for (size_t i = 0; i < perp.size(); ++i) Om[i] = model.normal_frequency(perp[i]);

  std::vector<ResonanceTuple> out;
  std::vector<int> ell;
  EllRange range(model.modes().dim(), L);
  while (range.next(ell)) {
    const double lb = ell_bracket(ell);
    const double thr = gamma / std::pow(lb, tau);
    const double base = model.omega_dot(ell);
    const bool ell_zero = is_zero(ell);
    switch (order) {
      case 0: {
        if (ell_zero) break;
        if (std::abs(base) < thr) out.push_back({ell, {}, base, 0});
        break;
      }
      case 1: {
        for (size_t i = 0; i < perp.size(); ++i) {
          const double d = base + Om[i];
          if (std::abs(d) < thr) out.push_back({ell, {perp[i]}, d, 1});
        }
        break;
      }
      case 2: {
        for (size_t i = 0; i < perp.size(); ++i)
          for (size_t k = i; k < perp.size(); ++k) {
            if (ell_zero && perp[i] + perp[k] == 0) continue;
            const double d = base + Om[i] + Om[k];
            if (std::abs(d) < thr) out.push_back({ell, {perp[i], perp[k]}, d, 2});
          }
        break;
      }
      case 3: {
        for (size_t i = 0; i < perp.size(); ++i)
          for (size_t k = i; k < perp.size(); ++k) {
            if (perp[i] + perp[k] == 0) continue;
            for (size_t q = k; q < perp.size(); ++q) {
              if (perp[i] + perp[q] == 0 || perp[k] + perp[q] == 0) continue;
              const double d = base + Om[i] + Om[k] + Om[q];
              const double w = jbracket(perp[i]) * jbracket(perp[i]) * jbracket(perp[k]) *
                               jbracket(perp[k]) * jbracket(perp[q]) * jbracket(perp[q]);
              if (std::abs(d) < thr / w) out.push_back({ell, {perp[i], perp[k], perp[q]}, d, 3});
            }
          }
        break;
      }
    }
  }
  return out;
}

namespace {

/// Margins above one are reported approximately (the exclusion thresholds
/// gamma/<ell>^tau * weights never exceed one, so exactness below one is
/// what the Monte Carlo needs).
struct MarginScanner {
  const std::vector<double>& Om;  // ascending (Omega is monotone in j)
  double best = std::numeric_limits<double>::infinity();

  void consider(double margin) { best = std::min(best, margin); }

  /// index of first Omega >= t
  size_t lower(double t) const {
    return static_cast<size_t>(std::lower_bound(Om.begin(), Om.end(), t) - Om.begin());
  }
};

}  // namespace

double melnikov_margin(const FrequencyModel& model, int L, int J) {
  const double tau = model.tau();
  const auto perp = model.modes().perp_window(J);
  const size_t n = perp.size();
  std::vector<double> Om(n), w2(n);
  for (size_t i = 0; i < n; ++i) {
    Om[i] = model.normal_frequency(perp[i]);
    w2[i] = jbracket(perp[i]) * jbracket(perp[i]);
  }
  for (size_t i = 1; i < n; ++i)
    if (!(Om[i] > Om[i - 1])) throw std::runtime_error("normal frequencies must be increasing");

  MarginScanner scan{Om};
  std::vector<int> ell;
  EllRange range(model.modes().dim(), L);
  while (range.next(ell)) {
    const double lw = std::pow(ell_bracket(ell), tau);
    const double base = model.omega_dot(ell);
    const bool ell_zero = is_zero(ell);

    // order 0
    if (!ell_zero) scan.consider(std::abs(base) * lw);

    // order 1: root of base + Omega_j = 0
    {
      const size_t p = scan.lower(-base);
      for (size_t c = (p > 0 ? p - 1 : p); c < std::min(p + 2, n); ++c)
        scan.consider(std::abs(base + Om[c]) * lw);
    }

    // order 2: for each j1, best j2 near the root; slot (0, j, -j) excluded
    for (size_t i = 0; i < n; ++i) {
      const double t = -(base + Om[i]);
      const size_t p = scan.lower(t);
      for (size_t c = (p > 0 ? p - 1 : p); c < std::min(p + 2, n); ++c) {
        if (ell_zero && perp[i] + perp[c] == 0) continue;
        scan.consider(std::abs(base + Om[i] + Om[c]) * lw);
      }
    }

    // order 3 with <j>^2 weights; pairwise sums must be nonzero.
    for (size_t i = 0; i < n; ++i) {
      const double s1 = base + Om[i];
      const double wi = w2[i];
      size_t p = n;  // two-pointer: targets descend as j2 ascends
      for (size_t k = i; k < n; ++k) {
        if (perp[i] + perp[k] == 0) continue;
        const double s12 = s1 + Om[k];
        const double t = -s12;
        while (p > 0 && Om[p - 1] >= t) --p;
        // Om[p-1] < t <= Om[p]; candidates p-1, p
        const double wik = wi * w2[k];
        for (size_t c = (p > 0 ? p - 1 : p); c < std::min(p + 1, n); ++c) {
          if (perp[i] + perp[c] == 0 || perp[k] + perp[c] == 0) continue;
          scan.consider(std::abs(s12 + Om[c]) * lw * wik * w2[c]);
        }
      }
    }
  }
  return scan.best;
}

FermatScanResult fermat_cube_scan(int J) {
  if (J < 2) throw std::invalid_argument("fermat scan needs J >= 2");
  std::vector<std::pair<long, int>> cubes;  // (j^3, j) sorted by value
  cubes.reserve(static_cast<size_t>(2 * J));
  for (int j = -J; j <= J; ++j) {
    if (j == 0) continue;
    cubes.emplace_back(static_cast<long>(j) * j * j, j);
  }
  std::sort(cubes.begin(), cubes.end());

  long best = std::numeric_limits<long>::max();
  std::array<int, 3> witness{};
  auto offer = [&](int a, int b, int c, long s) {
    std::array<int, 3> t{a, b, c};
    std::sort(t.begin(), t.end());
    const long v = std::labs(s);
    if (v < best) {
      best = v;
      witness = t;
    } else if (v == best) {
      auto maxabs = [](const std::array<int, 3>& x) {
        return std::max({std::abs(x[0]), std::abs(x[1]), std::abs(x[2])});
      };
      if (maxabs(t) < maxabs(witness) || (maxabs(t) == maxabs(witness) && t < witness))
        witness = t;
    }
  };

  for (int j1 = -J; j1 <= J; ++j1) {
    if (j1 == 0) continue;
    const long c1 = static_cast<long>(j1) * j1 * j1;
    for (int j2 = j1; j2 <= J; ++j2) {
      if (j2 == 0 || j1 + j2 == 0) continue;
      const long s12 = c1 + static_cast<long>(j2) * j2 * j2;
      // nearest cubes to -s12, skipping inadmissible j3
      auto it = std::lower_bound(cubes.begin(), cubes.end(), std::make_pair(-s12, -J - 1));
      for (long off = -3; off <= 3; ++off) {
        auto jt = it + off;
        if (jt < cubes.begin() || jt >= cubes.end()) continue;
        const int j3 = jt->second;
        if (j3 + j1 == 0 || j3 + j2 == 0) continue;
        offer(j1, j2, j3, s12 + jt->first);
      }
    }
  }
  if (best == 0) throw std::runtime_error("cube scan found a zero admissible triple");
  return {best, witness};
}

std::vector<std::array<int, 4>> four_wave_scan(int J) {
  std::vector<int> sites;
  for (int j = -J; j <= J; ++j)
    if (j != 0) sites.push_back(j);

  auto canonical = [](std::array<int, 4> t) {
    std::sort(t.begin(), t.end());
    std::array<int, 4> neg{-t[3], -t[2], -t[1], -t[0]};
    return std::min(t, neg);
  };

  std::set<std::array<int, 4>> classes;
  const size_t n = sites.size();
  for (size_t a = 0; a < n; ++a)
    for (size_t b = a; b < n; ++b)
      for (size_t c = b; c < n; ++c) {
        const long s3 = static_cast<long>(sites[a]) * sites[a] * sites[a] +
                        static_cast<long>(sites[b]) * sites[b] * sites[b] +
                        static_cast<long>(sites[c]) * sites[c] * sites[c];
        for (size_t d = c; d < n; ++d) {
          const long s = s3 + static_cast<long>(sites[d]) * sites[d] * sites[d];
          if (s != 0) continue;
          std::array<int, 4> t{sites[a], sites[b], sites[c], sites[d]};
          bool trivial = false;
          for (int i = 0; i < 4 && !trivial; ++i)
            for (int k = i + 1; k < 4; ++k)
              if (t[static_cast<size_t>(i)] + t[static_cast<size_t>(k)] == 0) {
                trivial = true;
                break;
              }
          if (!trivial) classes.insert(canonical(t));
        }
      }
  return {classes.begin(), classes.end()};
}

MeasureTable measure_estimate(
    const std::function<FrequencyModel(const std::vector<double>&)>& model_family,
    const std::vector<std::pair<double, double>>& box, const std::vector<double>& gamma_list,
    std::uint64_t samples, std::uint64_t seed, int L, int J, int threads) {
  if (samples < 100) throw std::invalid_argument("measure estimate needs >= 100 samples");
  if (gamma_list.empty()) throw std::invalid_argument("gamma list must be nonempty");

  const size_t p = box.size();
  const size_t ng = gamma_list.size();
  threads = std::max(1, threads);

  std::vector<std::vector<std::uint64_t>> counts(static_cast<size_t>(threads),
                                                 std::vector<std::uint64_t>(ng, 0));
  auto worker = [&](int t) {
    std::vector<double> omega(p);
    auto& local = counts[static_cast<size_t>(t)];
    for (std::uint64_t i = static_cast<std::uint64_t>(t); i < samples;
         i += static_cast<std::uint64_t>(threads)) {
      uint64_t state = seed + 0x9E3779B97F4A7C15ull * (i + 1);
      for (size_t d = 0; d < p; ++d) {
        const double u = unit_double(splitmix64(state));
        omega[d] = box[d].first + u * (box[d].second - box[d].first);
      }
      const FrequencyModel model = model_family(omega);
      const double margin = melnikov_margin(model, L, J);
      for (size_t g = 0; g < ng; ++g)
        if (margin < gamma_list[g]) ++local[g];
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  MeasureTable table;
  table.L = L;
  table.J = J;
  table.samples = samples;
  table.seed = seed;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int nfit = 0;
  for (size_t g = 0; g < ng; ++g) {
    std::uint64_t total = 0;
    for (const auto& local : counts) total += local[g];
    const double frac = static_cast<double>(total) / static_cast<double>(samples);
    const double se = std::sqrt(std::max(frac * (1.0 - frac), 0.0) / static_cast<double>(samples));
    table.rows.push_back({gamma_list[g], frac, se});
    if (frac > 0.0) {
      const double x = std::log(gamma_list[g]), y = std::log(frac);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++nfit;
    }
  }
  table.fitted_slope = nfit >= 2 ? (nfit * sxy - sx * sy) / (nfit * sxx - sx * sx) : 0.0;
  return table;
}

void write_resonance_csv(std::ostream& os, const std::vector<ResonanceTuple>& tuples) {
  os << "order,ell,j_list,divisor\n";
  os.precision(17);
  for (const auto& t : tuples) {
    os << t.condition_order << ',';
    for (size_t i = 0; i < t.ell.size(); ++i) os << (i ? " " : "") << t.ell[i];
    os << ',';
    for (size_t i = 0; i < t.j_list.size(); ++i) os << (i ? " " : "") << t.j_list[i];
    os << ',' << t.divisor_value << '\n';
  }
}

void write_measure_csv(std::ostream& os, const MeasureTable& table, std::uint64_t config_hash) {
  os << "# config_hash=" << config_hash << " L=" << table.L << " J=" << table.J
     << " samples=" << table.samples << " seed=" << table.seed
     << " fitted_slope=" << format_full(table.fitted_slope) << "\n";
  os << "gamma,excluded_fraction,stderr\n";
  for (const auto& r : table.rows)
    os << format_full(r.gamma) << ',' << format_full(r.excluded_fraction) << ','
       << format_full(r.stderr_binomial) << '\n';
}

}  // namespace kdvlab
