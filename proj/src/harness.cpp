#include "srkmax/harness.hpp"

#include "srkmax/diagnostics.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <thread>

namespace srkmax {

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

void parallel_for(Index count, int workers, const std::function<void(Index)>& body) {
  if (count <= 0) return;
  const int w = int(std::min<Index>(resolve_workers(workers), count));
  std::atomic<Index> next{0};
  std::mutex mtx;
  Index failed_index = count;
  std::exception_ptr failure;
  auto run = [&] {
    for (;;) {
      const Index i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mtx);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  if (w == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(w));
    for (int k = 0; k < w; ++k) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

namespace {

template <class E>
[[noreturn]] void rethrow_replica(const E& e, Index r) {
  throw E("replica " + std::to_string(r) + ": " + e.what());
}

Index steps_for(double T, double tau) {
  const double q = T / tau;
  const Index N = Index(std::llround(q));
  if (std::abs(double(N) * tau - T) > 1e-12 * std::max(1.0, T))
    throw ConfigError("constraint N * tau = T violated: tau = " + std::to_string(tau) +
                      " does not divide T = " + std::to_string(T));
  return N;
}

}  // namespace

std::vector<Trajectory> mc_run(std::shared_ptr<const Problem> problem, const StepperConfig& cfg,
                               const McOptions& opts) {
  if (opts.replicas < 1) throw ConfigError("mc_run: replicas must be at least 1");
  const Index N = steps_for(problem->T, cfg.tau);
  std::vector<Trajectory> out(static_cast<std::size_t>(opts.replicas));
  parallel_for(opts.replicas, opts.workers, [&](Index r) {
    const NoisePath path = sample_path(opts.seed, N, cfg.tau, problem->covariance, std::uint64_t(r));
    try {
      out[std::size_t(r)] = integrate(cfg, problem, path, opts.thin);
    } catch (const FixedPointDivergence& e) {
      rethrow_replica(e, r);
    } catch (const StageSolveFailure& e) {
      rethrow_replica(e, r);
    } catch (const LayoutMismatch& e) {
      rethrow_replica(e, r);
    }
  });
  return out;
}

bool ConvergenceReport::slope_available() const {
  Index ok = 0;
  for (const auto& l : levels)
    if (!l.failed && l.error > 0.0) ++ok;
  return ok >= 3 && std::isfinite(slope);
}

bool ConvergenceReport::pass() const {
  return slope_available() && slope >= slope_lo && slope <= slope_hi;
}

namespace {

void fit_report(ConvergenceReport& rep) {
  std::vector<double> x, y, ym;
  for (const auto& l : rep.levels) {
    if (l.failed || !(l.error > 0.0)) continue;
    x.push_back(std::log2(l.tau));
    y.push_back(std::log2(l.error));
    ym.push_back(std::log2(l.error_mean_of_max));
  }
  if (x.size() < 3) {
    rep.slope = rep.intercept = rep.slope_mean_of_max = std::nan("");
    return;
  }
  const LineFit f = fit_line(x, y);
  rep.slope = f.slope;
  rep.intercept = f.intercept;
  rep.slope_mean_of_max = fit_line(x, ym).slope;
}

std::vector<double> sorted_levels(std::vector<double> taus) {
  if (taus.size() < 3) throw ConfigError("convergence study needs at least 3 tau levels");
  std::sort(taus.begin(), taus.end(), std::greater<>());
  for (std::size_t k = 0; k < taus.size(); ++k) {
    if (!(taus[k] > 0.0)) throw ConfigError("tau levels must be positive");
    if (k > 0 && !(taus[k] < taus[k - 1])) throw ConfigError("tau levels must be distinct");
  }
  return taus;
}

}  // namespace

ConvergenceReport convergence_study(std::shared_ptr<const Problem> problem, const Tableau& tableau,
                                    const StudyOptions& opts) {
  tableau.validate();
  if (!consistency_check(tableau))
    throw ConfigError("tableau '" + tableau.name + "' fails the consistency check");
  if (opts.replicas < 1) throw ConfigError("convergence study: replicas must be at least 1");
  if (opts.ref_refinement < 1) throw ConfigError("convergence study: ref_refinement must be >= 1");
  const std::vector<double> taus = sorted_levels(opts.tau_levels);
  const double tau_ref = taus.back() / double(opts.ref_refinement);
  const Index N_ref = steps_for(problem->T, tau_ref);

  std::vector<Index> ratio(taus.size());
  Index g = 0;
  for (std::size_t l = 0; l < taus.size(); ++l) {
    const Index r = Index(std::llround(taus[l] / tau_ref));
    if (std::abs(double(r) * tau_ref - taus[l]) > 1e-9 * taus[l] || N_ref % r != 0)
      throw ConfigError("tau level " + std::to_string(taus[l]) +
                        " is not a multiple of the reference step");
    ratio[l] = r;
    g = std::gcd(g, r);
  }

  ConvergenceReport rep;
  rep.tableau = tableau.name;
  rep.replicas = opts.replicas;
  rep.seed = opts.seed;
  rep.tau_ref = tau_ref;
  rep.slope_lo = opts.slope_lo;
  rep.slope_hi = opts.slope_hi;
  rep.levels.resize(taus.size());

  StepperConfig ref_cfg;
  ref_cfg.tableau = builtin("midpoint");
  ref_cfg.tau = tau_ref;
  ref_cfg.specialization = Specialization::midpoint_resolvent;

  std::vector<StepperConfig> cfgs(taus.size());
  for (std::size_t l = 0; l < taus.size(); ++l) {
    rep.levels[l].tau = taus[l];
    cfgs[l].tableau = tableau;
    cfgs[l].tau = taus[l];
    cfgs[l].stage_solver = opts.stage_solver;
    try {
      Stepper probe(cfgs[l], problem);
    } catch (const FixedPointDivergence& e) {
      rep.levels[l].failed = true;
      rep.levels[l].failure = e.what();
    }
  }

  const std::size_t R = std::size_t(opts.replicas);
  // sq[l][r][n-1] = ||u_ref(t_n) - u^n||_H^2
  std::vector<std::vector<std::vector<double>>> sq(
      taus.size(), std::vector<std::vector<double>>(R));
  std::vector<std::vector<std::string>> errors(taus.size(), std::vector<std::string>(R));

  parallel_for(opts.replicas, opts.workers, [&](Index r) {
    const NoisePath fine =
        sample_path(opts.seed, N_ref, tau_ref, problem->covariance, std::uint64_t(r));
    std::vector<Vector> ref;
    ref.reserve(std::size_t(N_ref / g + 1));
    {
      Stepper st(ref_cfg, problem);
      Vector u = problem->u0;
      ref.push_back(u);
      for (Index n = 0; n < N_ref; ++n) {
        u = st.step(u, double(n) * tau_ref, fine.increment(n));
        if ((n + 1) % g == 0) ref.push_back(u);
      }
    }
    for (std::size_t l = 0; l < taus.size(); ++l) {
      if (rep.levels[l].failed) continue;
      const NoisePath path = coarsen(fine, ratio[l]);
      const Index stride = ratio[l] / g;
      auto& out = sq[l][std::size_t(r)];
      out.resize(std::size_t(path.N));
      try {
        Stepper st(cfgs[l], problem);
        Vector u = problem->u0;
        for (Index n = 0; n < path.N; ++n) {
          u = st.step(u, double(n) * taus[l], path.increment(n));
          out[std::size_t(n)] = problem->op->norm_sq(ref[std::size_t((n + 1) * stride)] - u);
        }
      } catch (const FixedPointDivergence& e) {
        errors[l][std::size_t(r)] = e.what();
      } catch (const StageSolveFailure& e) {
        errors[l][std::size_t(r)] = e.what();
      }
    }
  });

  for (std::size_t l = 0; l < taus.size(); ++l) {
    LevelResult& lv = rep.levels[l];
    if (lv.failed) continue;
    for (std::size_t r = 0; r < R; ++r)
      if (!errors[l][r].empty()) {
        lv.failed = true;
        lv.failure = "replica " + std::to_string(r) + ": " + errors[l][r];
        break;
      }
    if (lv.failed) continue;
    const std::size_t N = sq[l][0].size();
    double best = -1.0, best_se = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      double mean = 0.0;
      for (std::size_t r = 0; r < R; ++r) mean += sq[l][r][n];
      mean /= double(R);
      if (mean > best) {
        double ss = 0.0;
        for (std::size_t r = 0; r < R; ++r) ss += (sq[l][r][n] - mean) * (sq[l][r][n] - mean);
        best = mean;
        best_se = R > 1 ? std::sqrt(ss / double(R - 1) / double(R)) : 0.0;
      }
    }
    lv.error = std::sqrt(best);
    lv.error_se = lv.error > 0.0 ? best_se / (2.0 * lv.error) : 0.0;

    std::vector<double> mx(R);
    for (std::size_t r = 0; r < R; ++r) mx[r] = *std::max_element(sq[l][r].begin(), sq[l][r].end());
    const double mean = std::accumulate(mx.begin(), mx.end(), 0.0) / double(R);
    double ss = 0.0;
    for (double v : mx) ss += (v - mean) * (v - mean);
    lv.error_mean_of_max = std::sqrt(mean);
    lv.mean_of_max_se = (R > 1 && mean > 0.0)
                            ? std::sqrt(ss / double(R - 1) / double(R)) / (2.0 * lv.error_mean_of_max)
                            : 0.0;
  }
  fit_report(rep);
  return rep;
}

ConvergenceReport deterministic_study(std::shared_ptr<const Problem> problem,
                                      const Tableau& tableau, std::vector<double> tau_levels,
                                      const std::function<Vector(double)>& u_exact,
                                      double slope_lo, double slope_hi) {
  tableau.validate();
  const std::vector<double> taus = sorted_levels(std::move(tau_levels));
  ConvergenceReport rep;
  rep.tableau = tableau.name;
  rep.replicas = 1;
  rep.slope_lo = slope_lo;
  rep.slope_hi = slope_hi;
  for (double tau : taus) {
    LevelResult lv;
    lv.tau = tau;
    StepperConfig cfg;
    cfg.tableau = tableau;
    cfg.tau = tau;
    try {
      const Index N = steps_for(problem->T, tau);
      Stepper st(cfg, problem);
      const Vector zero = Vector::Zero(problem->covariance.size());
      Vector u = problem->u0;
      double worst = 0.0;
      for (Index n = 0; n < N; ++n) {
        u = st.step(u, double(n) * tau, zero);
        worst = std::max(worst, problem->op->norm_sq(u_exact(double(n + 1) * tau) - u));
      }
      lv.error = lv.error_mean_of_max = std::sqrt(worst);
    } catch (const FixedPointDivergence& e) {
      lv.failed = true;
      lv.failure = e.what();
    }
    rep.levels.push_back(lv);
  }
  fit_report(rep);
  return rep;
}

void write_report(const ConvergenceReport& report, const std::string& csv_path,
                  const std::string& json_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw Error("cannot write '" + csv_path + "'");
  csv << std::setprecision(17);
  csv << "tau,error,stderr,error_mean_of_max,stderr_mean_of_max,failed\n";
  for (const auto& l : report.levels)
    csv << l.tau << ',' << l.error << ',' << l.error_se << ',' << l.error_mean_of_max << ','
        << l.mean_of_max_se << ',' << (l.failed ? 1 : 0) << '\n';
  if (!csv) throw Error("write failed for '" + csv_path + "'");

  nlohmann::json j;
  j["tableau"] = report.tableau;
  j["slope"] = report.slope_available() ? nlohmann::json(report.slope) : nlohmann::json(nullptr);
  j["intercept"] =
      report.slope_available() ? nlohmann::json(report.intercept) : nlohmann::json(nullptr);
  j["slope_mean_of_max"] = report.slope_available() ? nlohmann::json(report.slope_mean_of_max)
                                                    : nlohmann::json(nullptr);
  j["slope_band"] = {report.slope_lo, report.slope_hi};
  j["pass"] = report.pass();
  j["replicas"] = report.replicas;
  j["seed"] = report.seed;
  j["tau_ref"] = report.tau_ref;
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : report.levels) {
    nlohmann::json e{{"tau", l.tau},
                     {"error", l.error},
                     {"stderr", l.error_se},
                     {"error_mean_of_max", l.error_mean_of_max},
                     {"stderr_mean_of_max", l.mean_of_max_se},
                     {"failed", l.failed}};
    if (l.failed) e["failure"] = l.failure;
    levels.push_back(e);
  }
  j["levels"] = levels;
  std::ofstream js(json_path);
  if (!js) throw Error("cannot write '" + json_path + "'");
  js << j.dump(2) << '\n';
}

}  // namespace srkmax
