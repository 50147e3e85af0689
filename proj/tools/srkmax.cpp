#include "srkmax/config.hpp"
#include "srkmax/diagnostics.hpp"
#include "srkmax/harness.hpp"
#include "srkmax/io.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace srkmax;

namespace {

enum Exit { ok = 0, band_failure = 1, usage = 2, numerical = 3 };

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<Index> replicas;
  int workers = 0;
  bool json = false;
  std::string tableau;
};

std::uint64_t effective_seed(const Options& o, std::uint64_t from_config) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("SRKMAX_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("SRKMAX_SEED must be an unsigned integer");
    }
  }
  return from_config;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream ss;
  ss << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

fs::path prepare_out(const Options& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw ConfigError("cannot create output directory '" + o.out + "': " + ec.message());
  return fs::path(o.out);
}

void write_summary(const fs::path& dir, Json summary) {
  summary["metadata"] = {{"created", timestamp()}};
  std::ofstream out(dir / "summary.json");
  if (!out) throw ConfigError("cannot write summary.json in '" + dir.string() + "'");
  out << summary.dump(2) << '\n';
}

bool magnetic_drift_free(const DriftSpec& d) {
  if (std::holds_alternative<ZeroDrift>(d)) return true;
  if (const auto* ld = std::get_if<LinearDamping>(&d)) return ld->sigma_m == 0.0;
  return false;
}

std::string verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

// --------------------------------------------------------------------------

int cmd_tableau(const Options& o) {
  const Tableau tab = load_tableau(o.tableau);
  const TableauReport rep = analyze(tab);
  Json mat = Json::array();
  for (Index i = 0; i < rep.stability_matrix.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < rep.stability_matrix.cols(); ++j) row.push_back(rep.stability_matrix(i, j));
    mat.push_back(row);
  }
  Json j{{"name", tab.name},
         {"stages", tab.stages()},
         {"stability_matrix", mat},
         {"algebraically_stable", rep.algebraically_stable},
         {"symplectic", rep.symplectic},
         {"coercivity", to_string(rep.coercivity.kind)},
         {"consistent", rep.consistent_weights}};
  if (rep.coercivity.coercive()) j["alpha"] = rep.coercivity.alpha;
  if (o.json) {
    std::cout << j.dump(2) << '\n';
    return ok;
  }
  std::cout << "tableau " << tab.name << " (s = " << tab.stages() << ")\n";
  std::cout << "stability matrix:\n" << rep.stability_matrix << '\n';
  std::cout << "algebraically stable: " << std::boolalpha << rep.algebraically_stable << '\n';
  std::cout << "symplectic: " << rep.symplectic << '\n';
  std::cout << "coercivity: " << to_string(rep.coercivity.kind);
  if (rep.coercivity.coercive()) std::cout << " (alpha = " << rep.coercivity.alpha << ")";
  std::cout << "\nconsistent: " << rep.consistent_weights << '\n';
  return ok;
}

int cmd_run(const Options& o) {
  Config cfg = load_config(o.config);
  cfg.run.seed = effective_seed(o, cfg.run.seed);
  if (o.replicas) cfg.run.replicas = *o.replicas;
  auto problem = build_problem(cfg);
  const StepperConfig sc = build_stepper_config(cfg);
  const fs::path dir = prepare_out(o);

  const auto trajs = mc_run(problem, sc, {cfg.run.replicas, cfg.run.seed, o.workers, cfg.run.thin});
  const EnergyLawResult energy = energy_law_residual(trajs, *problem);
  write_series_csv(energy.mean_energy, (dir / "report.csv").string());
  write_trajectory_csv(trajs.front(), *problem->op, (dir / "trajectory_0.csv").string());
  write_field_binary({trajs.front().states.back(), problem->op->layout()},
                     (dir / "final_state_0.bin").string());

  Json j{{"command", "run"},
         {"tableau", sc.tableau.name},
         {"tau", sc.tau},
         {"T", problem->T},
         {"replicas", cfg.run.replicas},
         {"seed", cfg.run.seed},
         {"final_mean_energy", energy.mean_energy.values.back()},
         {"final_mean_energy_stderr", energy.mean_energy.stderrs.back()}};
  write_summary(dir, j);
  if (o.json) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "run: " << cfg.run.replicas << " replica(s), tableau " << sc.tableau.name
              << ", tau " << sc.tau << ", T " << problem->T << '\n';
    std::cout << "final mean energy " << energy.mean_energy.values.back() << " +- "
              << energy.mean_energy.stderrs.back() << '\n';
    std::cout << "outputs in " << dir.string() << '\n';
  }
  return ok;
}

int cmd_diagnose(const Options& o) {
  Config cfg = load_config(o.config);
  cfg.run.seed = effective_seed(o, cfg.run.seed);
  if (o.replicas) cfg.run.replicas = *o.replicas;
  auto problem = build_problem(cfg);
  const StepperConfig sc = build_stepper_config(cfg);
  const TableauReport tab = analyze(sc.tableau);
  const fs::path dir = prepare_out(o);

  const auto trajs = mc_run(problem, sc, {cfg.run.replicas, cfg.run.seed, o.workers, 1});
  std::vector<DiagnosticSummary> verdicts;

  const EnergyLawResult energy = energy_law_residual(trajs, *problem);
  write_series_csv(energy.residual, (dir / "energy_law_residual.csv").string());
  write_series_csv(energy.mean_energy, (dir / "report.csv").string());

  const bool no_drift = std::holds_alternative<ZeroDrift>(problem->drift);
  const bool no_noise = problem->diffusion->is_zero();
  if (no_drift && no_noise) {
    double worst = 0.0;
    for (const auto& tr : trajs) {
      const double e0 = problem->op->norm_sq(tr.states.front());
      for (const auto& u : tr.states) {
        const double e = problem->op->norm_sq(u);
        worst = std::max(worst, tab.symplectic ? std::abs(e - e0) / std::max(e0, 1e-300)
                                               : (e - e0) / std::max(e0, 1e-300));
      }
    }
    if (tab.symplectic)
      verdicts.push_back({"energy_conservation", worst <= 1e-10, worst, 1e-10});
    else if (tab.algebraically_stable)
      verdicts.push_back({"energy_non_increasing", worst <= 1e-12, worst, 1e-12});
  } else if (no_drift && !problem->profile.time_dependent()) {
    const double hs = problem->diffusion->hs_norm_sq(0.0);
    const double dev = std::abs(energy.slope - hs);
    const double tol = 3.0 * energy.slope_stderr;
    verdicts.push_back({"energy_trace_law", trajs.size() >= 2 && dev <= tol, dev, tol});
  }

  if (dynamic_cast<const Maxwell2DTM*>(problem->op.get()) &&
      (problem->profile.values.tail(problem->dim() - problem->op->layout()->n_electric).array() ==
       0.0)
          .all() &&
      magnetic_drift_free(problem->drift)) {
    double worst = 0.0;
    for (const auto& tr : trajs) {
      const DiagnosticSeries s = divergence_drift(tr, *problem);
      const double scale = divergence_scale(tr, *problem);
      worst = std::max(worst, s.max_abs() / std::max(scale, 1e-300));
    }
    write_series_csv(divergence_drift(trajs.front(), *problem),
                     (dir / "divergence_drift.csv").string());
    verdicts.push_back({"divergence_conservation", worst <= 1e-12, worst, 1e-12});
  }

  if (dynamic_cast<const SpectralMaxwell*>(problem->op.get()) && is_hamiltonian(problem->drift) &&
      tab.symplectic) {
    const Index N = Index(std::llround(problem->T / sc.tau));
    const NoisePath path = sample_path(cfg.run.seed, N, sc.tau, problem->covariance, 0);
    const TangentFrame frame = tangent_frame_run(sc, problem, path);
    const double res = symplectic_residual(frame, *problem->op);
    verdicts.push_back({"symplectic_residual", res <= 1e-8, res, 1e-8});
  }

  if (trajs.size() >= 30) {
    write_series_csv(moment_probe(trajs, *problem, 2.0), (dir / "moment_p2.csv").string());
  }

  bool all_pass = true;
  Json list = Json::array();
  for (const auto& v : verdicts) {
    all_pass = all_pass && v.pass;
    list.push_back(summary_json(v));
  }
  Json j{{"command", "diagnose"},
         {"tableau", sc.tableau.name},
         {"replicas", cfg.run.replicas},
         {"seed", cfg.run.seed},
         {"energy_slope", energy.slope},
         {"energy_slope_stderr", energy.slope_stderr},
         {"stderr_unavailable", energy.stderr_unavailable},
         {"diagnostics", list},
         {"pass", all_pass}};
  if (trajs.size() >= 30) j["holder_ratio"] = holder_probe(trajs, *problem);
  write_summary(dir, j);
  if (o.json) {
    std::cout << j.dump(2) << '\n';
  } else {
    if (energy.stderr_unavailable)
      std::cout << "note: single replica, standard errors unavailable\n";
    for (const auto& v : verdicts)
      std::cout << std::left << std::setw(26) << v.name << verdict(v.pass) << "  worst "
                << v.worst_value << "  tolerance " << v.tolerance << '\n';
    if (verdicts.empty()) std::cout << "no applicable verdicts; series written to " << dir << '\n';
  }
  return all_pass ? ok : band_failure;
}

int cmd_converge(const Options& o) {
  Config cfg = load_config(o.config);
  cfg.study.seed = effective_seed(o, cfg.study.seed);
  if (o.replicas) cfg.study.replicas = *o.replicas;
  auto problem = build_problem(cfg);
  const StepperConfig sc = build_stepper_config(cfg);
  const fs::path dir = prepare_out(o);

  StudyOptions so;
  so.tau_levels = cfg.study.tau_levels;
  so.ref_refinement = cfg.study.ref_refinement;
  so.replicas = cfg.study.replicas;
  so.seed = cfg.study.seed;
  so.workers = o.workers;
  so.slope_lo = cfg.study.slope_lo;
  so.slope_hi = cfg.study.slope_hi;
  so.stage_solver = sc.stage_solver;
  const ConvergenceReport rep = convergence_study(problem, sc.tableau, so);

  const std::string json_path = (dir / "summary.json").string();
  write_report(rep, (dir / "report.csv").string(), json_path);
  std::ifstream in(json_path);
  Json j = Json::parse(in);
  in.close();
  j["command"] = "converge";
  write_summary(dir, j);
  if (o.json) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "converge: tableau " << rep.tableau << ", " << rep.replicas << " replicas, seed "
              << rep.seed << ", reference step " << rep.tau_ref << '\n';
    std::cout << std::setw(12) << "tau" << std::setw(16) << "error" << std::setw(14) << "stderr"
              << '\n';
    for (const auto& l : rep.levels) {
      std::cout << std::setw(12) << l.tau;
      if (l.failed)
        std::cout << "  failed: " << l.failure << '\n';
      else
        std::cout << std::setw(16) << l.error << std::setw(14) << l.error_se << '\n';
    }
    if (rep.slope_available())
      std::cout << "slope " << rep.slope << " (band [" << rep.slope_lo << ", " << rep.slope_hi
                << "]) " << verdict(rep.pass()) << '\n';
    else
      std::cout << "slope unavailable (fewer than 3 usable levels) FAIL\n";
  }
  return rep.pass() ? ok : band_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-preserving stochastic Runge-Kutta toolkit for stochastic Maxwell equations"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "RNG seed override");
    sub->add_option("--replicas", o.replicas, "replica count override")->check(CLI::PositiveNumber);
    sub->add_option("--workers", o.workers, "worker threads (0 = available parallelism)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--json", o.json, "machine-readable output");
  };

  auto* tab = app.add_subcommand("tableau", "analyse a Butcher tableau (builtin name or JSON file)");
  tab->add_option("tableau", o.tableau, "builtin name or path")->required();
  tab->add_flag("--json", o.json, "machine-readable output");
  auto* run = app.add_subcommand("run", "Monte Carlo run of a configured problem");
  add_common(run);
  auto* diag = app.add_subcommand("diagnose", "structure diagnostics for a configured problem");
  add_common(diag);
  auto* conv = app.add_subcommand("converge", "mean-square convergence study");
  add_common(conv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (tab->parsed()) return cmd_tableau(o);
    if (run->parsed()) return cmd_run(o);
    if (diag->parsed()) return cmd_diagnose(o);
    if (conv->parsed()) return cmd_converge(o);
  } catch (const FixedPointDivergence& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical;
  } catch (const StageSolveFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  }
  return usage;
}
