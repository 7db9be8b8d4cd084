// Batch front-end: parses an experiment configuration, runs the requested
// scan, and writes CSV (and optional SVG plot) artifacts.
//
// Exit codes: 0 pass, 1 assertion failure, 2 usage error, 3 divisor abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "kdvlab/config.hpp"
#include "kdvlab/csv.hpp"
#include "kdvlab/homological.hpp"
#include "kdvlab/kdv.hpp"
#include "kdvlab/linpde.hpp"
#include "kdvlab/normalform.hpp"
#include "kdvlab/paradiff.hpp"
#include "kdvlab/sampledata.hpp"
#include "kdvlab/spectrum.hpp"

namespace fs = std::filesystem;
using namespace kdvlab;

namespace {

struct CliContext {
  Config cfg;
  fs::path out;
  std::uint64_t seed = 1;
  int threads = 2;
  bool plots = false;

  std::ofstream open_out(const std::string& name) const {
    std::ofstream os(out / name);
    if (!os) throw std::runtime_error("cannot open output " + (out / name).string());
    return os;
  }
};

void write_failure_record(const CliContext& ctx, const std::string& command,
                          const std::string& kind, const std::string& detail) {
  std::ofstream os(ctx.out / "failure.txt");
  os << "command=" << command << "\n";
  os << "kind=" << kind << "\n";
  os << "detail=" << detail << "\n";
  os << "config_hash=" << ctx.cfg.hash() << "\n";
}

std::string comment_line(const CliContext& ctx, const std::string& extra) {
  std::ostringstream os;
  os << "config_hash=" << ctx.cfg.hash() << " seed=" << ctx.seed << " " << extra;
  return os.str();
}

int run_paradiff_check(CliContext& ctx) {
  const int K = static_cast<int>(ctx.cfg.get_int("paradiff.max_mode", 96));
  const int N = static_cast<int>(ctx.cfg.get_int("paradiff.depth", 2));
  const int seeds = static_cast<int>(ctx.cfg.get_int("paradiff.seeds", 20));
  const CutoffFunction cutoff{};

  bool ok = true;
  double worst_bony = 0.0, worst_bound = 0.0;
  for (int trial = 0; trial < seeds; ++trial) {
    Rng rng(ctx.seed + static_cast<std::uint64_t>(trial));
    FourierSeries a = random_series(rng, 32, 0.3), u = random_series(rng, 32, 0.3);
    FourierSeries prod(64, false);
    for (int k = -64; k <= 64; ++k) {
      cplx acc{0, 0};
      for (int e = -32; e <= 32; ++e)
        if (std::abs(k - e) <= 32) acc += a.coeff(e) * u.coeff(k - e);
      prod.set_raw(k, acc);
    }
    const FourierSeries rhs =
        paraproduct(a, u, cutoff) + paraproduct(u, a, cutoff) + bony_remainder(a, u, cutoff);
    worst_bony = std::max(worst_bony, max_abs_coeff(prod - rhs));
    const double c = sobolev_norm(paraproduct(a, u, cutoff), 2.0) /
                     (sobolev_norm(a, 1.0) * sobolev_norm(u, 2.0));
    worst_bound = std::max(worst_bound, c);
  }
  ok = ok && worst_bony <= 1e-13;

  Rng rng(ctx.seed);
  FourierSeries a = random_series(rng, K / 4, 6.0), b = random_series(rng, K / 4, 6.0);
  const SymbolExpansion C = compose_expansion(SymbolExpansion::single(1, a, N),
                                              SymbolExpansion::single(0, b, N), N, cutoff, K);
  const SmoothingFit fit = measured_smoothing(*C.remainder, K / 8, (K * 2) / 3);
  ok = ok && fit.slope <= -(N + 1) + 0.5;

  {
    auto os = ctx.open_out("paradiff_expansion.csv");
    os << "# " << comment_line(ctx, "K=" + std::to_string(K) + " N=" + std::to_string(N)) << "\n";
    write_expansion_csv(os, C);
  }
  {
    auto os = ctx.open_out("paradiff_smoothing.csv");
    os << "# " << comment_line(ctx, "slope_bound=" + format_full(-(N + 1) + 0.5)) << "\n";
    write_smoothing_fit_csv(os, fit);
  }
  {
    auto os = ctx.open_out("paradiff_summary.csv");
    os << "# " << comment_line(ctx, "") << "\n";
    os << "metric,value\n";
    os << "bony_defect," << format_full(worst_bony) << "\n";
    os << "paraproduct_bound," << format_full(worst_bound) << "\n";
    os << "compose_remainder_slope," << format_full(fit.slope) << "\n";
  }
  if (ctx.plots) {
    std::vector<double> xs(fit.modes.begin(), fit.modes.end());
    write_svg_plot((ctx.out / "paradiff_smoothing.svg").string(), "remainder smoothing fit", xs,
                   {fit.norms}, true, true);
  }
  if (!ok) {
    write_failure_record(ctx, "paradiff-check", "assertion",
                         "bony_defect=" + format_full(worst_bony) +
                             " slope=" + format_full(fit.slope));
    return 1;
  }
  return 0;
}

int run_resonance_scan(CliContext& ctx) {
  const int fermat_bound = static_cast<int>(ctx.cfg.get_int("resonance.fermat_bound", 200));
  const int fourwave_bound = static_cast<int>(ctx.cfg.get_int("resonance.fourwave_bound", 12));

  const FermatScanResult fermat = fermat_cube_scan(fermat_bound);
  {
    auto os = ctx.open_out("resonance_fermat.csv");
    os << "# " << comment_line(ctx, "bound=" + std::to_string(fermat_bound)) << "\n";
    os << "j1,j2,j3,min_abs\n";
    os << fermat.witness[2] << ',' << fermat.witness[1] << ',' << fermat.witness[0] << ','
       << fermat.min_abs << "\n";
  }
  const auto classes = four_wave_scan(fourwave_bound);
  {
    auto os = ctx.open_out("resonance_fourwave.csv");
    os << "# " << comment_line(ctx, "bound=" + std::to_string(fourwave_bound)) << "\n";
    os << "j1,j2,j3,j4,divisor\n";
    for (const auto& t : classes)
      os << t[3] << ',' << t[2] << ',' << t[1] << ',' << t[0] << ",0\n";
  }
  if (fermat.min_abs < 1) {
    write_failure_record(ctx, "resonance-scan", "assertion", "admissible cube triple summed to 0");
    return 1;
  }
  return 0;
}

FrequencyModel measure_family(const Config& cfg, const std::vector<double>& omega) {
  const double tau = cfg.get_double("measure.tau", 2.5);
  const double gamma = cfg.get_double("measure.gamma_model", 0.5);
  const double d1 = cfg.get_double("measure.d1", 0.5) +
                    cfg.get_double("measure.d1_slope", 0.1) * (omega[0] - 1.0);
  const double d3 =
      cfg.get_double("measure.d3", -0.2) +
      cfg.get_double("measure.d3_slope", 0.05) * (omega.size() > 1 ? omega[1] - 2.0 : 0.0);
  std::vector<int> splus;
  for (int i = 1; i <= static_cast<int>(omega.size()); ++i) splus.push_back(i);
  return FrequencyModel(ModeSet(splus), omega, {d1, d3}, tau, gamma);
}

int run_measure(CliContext& ctx) {
  std::vector<double> gammas{0.4, 0.2, 0.1, 0.05, 0.025};
  if (ctx.cfg.has("measure.gamma_list")) gammas = ctx.cfg.get_double_list("measure.gamma_list");
  if (gammas.empty()) {
    std::cerr << "measure: empty gamma list\n";
    return 2;
  }
  std::vector<double> box_flat{0.2, 2.2, 0.2, 2.2};
  if (ctx.cfg.has("measure.box")) box_flat = ctx.cfg.get_double_list("measure.box");
  if (box_flat.size() % 2 != 0 || box_flat.empty()) {
    std::cerr << "measure: box must list lo,hi pairs\n";
    return 2;
  }
  std::vector<std::pair<double, double>> box;
  for (size_t i = 0; i < box_flat.size(); i += 2) box.emplace_back(box_flat[i], box_flat[i + 1]);
  const auto samples = static_cast<std::uint64_t>(ctx.cfg.get_int("measure.samples", 100000));
  const int L = static_cast<int>(ctx.cfg.get_int("measure.L", 6));
  const int J = static_cast<int>(ctx.cfg.get_int("measure.J", 24));

  const MeasureTable table = measure_estimate(
      [&](const std::vector<double>& omega) { return measure_family(ctx.cfg, omega); }, box,
      gammas, samples, ctx.seed, L, J, ctx.threads);
  {
    auto os = ctx.open_out("measure.csv");
    write_measure_csv(os, table, ctx.cfg.hash());
  }
  if (ctx.plots) {
    std::vector<double> xs, ys;
    for (const auto& r : table.rows) {
      xs.push_back(r.gamma);
      ys.push_back(r.excluded_fraction);
    }
    write_svg_plot((ctx.out / "measure.svg").string(), "excluded fraction vs gamma", xs, {ys},
                   true, true);
  }
  for (size_t i = 1; i < table.rows.size(); ++i)
    if (table.rows[i].excluded_fraction > table.rows[i - 1].excluded_fraction + 1e-12) {
      write_failure_record(ctx, "measure", "assertion", "excluded fraction not monotone");
      return 1;
    }
  return 0;
}

int run_normalform(CliContext& ctx) {
  const int p = static_cast<int>(ctx.cfg.get_int("normalform.splus_count", 1));
  const int L = static_cast<int>(ctx.cfg.get_int("normalform.L", 4));
  const int J = static_cast<int>(ctx.cfg.get_int("normalform.J", 16));
  const int depth = static_cast<int>(ctx.cfg.get_int("normalform.depth", 2));
  const double size = ctx.cfg.get_double("normalform.block_size", 1e-2);
  const double gamma = ctx.cfg.get_double("normalform.gamma", 1e-3);
  const double tau = ctx.cfg.get_double("normalform.tau", 1.5);

  const FrequencyModel model = sampledata::pipeline_model(p, gamma, tau);
  Rng rng(ctx.seed);
  TaylorHamiltonian H = sampledata::random_hamiltonian(rng, model, p, L, J, depth, size);
  PipelineConfig pcfg;
  pcfg.depth = depth;
  const PipelineReport rep = full_pipeline(H, model, pcfg);
  {
    auto os = ctx.open_out("normalform_report.txt");
    os << "# " << comment_line(ctx, "L=" + std::to_string(L) + " J=" + std::to_string(J)) << "\n";
    os << rep.to_text();
  }
  if (!rep.melnikov_ok) {
    write_failure_record(ctx, "normalform", "divisor_abort", rep.abort_reason);
    return 3;
  }
  const bool ok = rep.residual_step1 <= 1e-10 && rep.residual_step3 <= 1e-10 &&
                  rep.eps_linear_offaverage <= 1e-12 && rep.skew_defect <= 1e-12 &&
                  rep.diag_defect <= 1e-12 && rep.order_y >= 2.8 && rep.order_a >= 1.8;
  if (!ok) {
    write_failure_record(ctx, "normalform", "assertion", rep.to_text());
    return 1;
  }
  return 0;
}

int run_linpde(CliContext& ctx) {
  const int N = static_cast<int>(ctx.cfg.get_int("linpde.galerkin_cut", 128));
  const double dt = ctx.cfg.get_double("linpde.dt", 1e-3);
  const double T = ctx.cfg.get_double("linpde.horizon", 1.0);
  const double s = ctx.cfg.get_double("linpde.sobolev_s", 2.0);
  const double eps = ctx.cfg.get_double("linpde.coeff_eps", 1e-2);

  LinearPDEProblem prob;
  prob.modes = ModeSet({1});
  prob.galerkin_cut = N;
  prob.horizon = T;
  prob.sobolev_s = s;
  prob.multiplier = [](double, int j) {
    const double tpj = kTwoPi * j;
    return cplx{0.0, tpj * tpj * tpj};
  };
  Rng rng(ctx.seed);
  prob.w0 = random_perp_series(rng, prob.modes, N, 3.0);
  if (eps != 0.0) {
    FourierSeries a(4, false);
    a.set_pair(1, cplx{eps / 2.0, 0.0});
    prob.coeff_a = [a](double) { return a; };
  }
  const Trajectory traj = galerkin_solve(prob, dt, std::max(1, static_cast<int>(0.01 / dt)));
  const EnergyReport rep = energy_defect(prob, traj, s);
  {
    auto os = ctx.open_out("linpde_energy.csv");
    write_energy_csv(os, rep, ctx.cfg.hash());
  }
  if (ctx.plots)
    write_svg_plot((ctx.out / "linpde_energy.svg").string(), "H^s norm along the trajectory",
                   rep.times, {rep.norms});
  const double drift =
      std::abs(rep.norms.back() - rep.norms.front()) / std::max(rep.norms.front(), 1e-300);
  if (eps == 0.0 && drift > 1e-8) {
    write_failure_record(ctx, "linpde", "assertion", "skew case norm drift " + format_full(drift));
    return 1;
  }
  return 0;
}

int run_stability(CliContext& ctx) {
  StabilityConfig scfg;
  scfg.eps_list = {1e-2};
  if (ctx.cfg.has("stability.eps_list")) scfg.eps_list = ctx.cfg.get_double_list("stability.eps_list");
  if (scfg.eps_list.empty()) {
    std::cerr << "stability: empty eps list\n";
    return 2;
  }
  const double amplitude = ctx.cfg.get_double("stability.amplitude", 1.0);
  const int resolution = static_cast<int>(ctx.cfg.get_int("stability.resolution", 256));
  const int max_mode = (resolution - 2) / 3;
  scfg.sobolev_s = ctx.cfg.get_double("stability.sobolev_s", 1.0);
  scfg.horizon_factor = ctx.cfg.get_double("stability.horizon_factor", 1.0);
  scfg.companion_horizon = ctx.cfg.get_double("stability.companion_horizon", 10.0);
  scfg.dt = ctx.cfg.get_double("stability.dt", 0.0);
  scfg.ratio_bound = ctx.cfg.get_double("stability.ratio_bound", 10.0);
  scfg.perturbation_band = static_cast<int>(ctx.cfg.get_int("stability.perturbation_band", 32));
  scfg.sample_stride = static_cast<int>(ctx.cfg.get_int("stability.sample_stride", 512));
  scfg.seed = ctx.seed;
  scfg.threads = ctx.threads;

  const TravelingWave wave = cnoidal(amplitude, max_mode);
  std::vector<FourierSeries> coeffs(4, FourierSeries(1, false));
  coeffs[3].set_pair(1, cplx{ctx.cfg.get_double("stability.density_cos_amp", 1.0) / 2.0, 0.0});
  const PerturbationDensity f{coeffs};

  const StabilityTable table = stability_experiment(wave, f, scfg);
  {
    auto os = ctx.open_out("stability.csv");
    write_stability_csv(os, table, ctx.cfg.hash());
  }
  for (const auto& r : table.rows) {
    if (r.aborted_at >= 0.0) {
      write_failure_record(ctx, "stability", "integration_abort",
                           "eps=" + format_full(r.eps) + " t=" + format_full(r.aborted_at));
      return 1;
    }
    const double bound = r.eps > 0.0 ? scfg.ratio_bound : 1e-6;
    if (r.max_ratio > bound) {
      write_failure_record(ctx, "stability", "assertion",
                           "eps=" + format_full(r.eps) + " max_ratio=" + format_full(r.max_ratio));
      return 1;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kdvlab: truncated-spectrum laboratory for perturbed KdV normal forms"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::uint64_t seed = 1;
  int threads = 2;
  bool plots = false;
  app.add_option("--config", config_path, "configuration file (key = value with [sections])");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads");
  app.add_flag("--plots", plots, "also write SVG plots");

  for (const char* name :
       {"paradiff-check", "resonance-scan", "measure", "normalform", "linpde", "stability"})
    app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CliContext ctx;
  try {
    if (!config_path.empty()) ctx.cfg = Config::parse_file(config_path);
    ctx.seed = seed;
    if (ctx.cfg.has("seed") && seed_opt->count() == 0)
      ctx.seed = static_cast<std::uint64_t>(ctx.cfg.get_int("seed"));
    ctx.threads = threads;
    ctx.plots = plots || ctx.cfg.get_bool("plots", false);
    ctx.out = out_dir;
    fs::create_directories(ctx.out);
  } catch (const std::exception& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "paradiff-check") return run_paradiff_check(ctx);
    if (command == "resonance-scan") return run_resonance_scan(ctx);
    if (command == "measure") return run_measure(ctx);
    if (command == "normalform") return run_normalform(ctx);
    if (command == "linpde") return run_linpde(ctx);
    if (command == "stability") return run_stability(ctx);
  } catch (const DivisorBelowThreshold& e) {
    write_failure_record(ctx, command, "divisor_abort", e.what());
    std::cerr << "divisor abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    write_failure_record(ctx, command, "error", e.what());
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
