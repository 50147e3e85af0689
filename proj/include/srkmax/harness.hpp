#pragma once

#include "srkmax/integrator.hpp"
#include "srkmax/model.hpp"
#include "srkmax/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace srkmax {

/// Worker count for `requested` (0 means available parallelism).
int resolve_workers(int requested);

/// Runs body(i) for i in [0, count) on a pool of workers. The first failure (lowest
/// index) is rethrown after all workers finish.
void parallel_for(Index count, int workers, const std::function<void(Index)>& body);

struct McOptions {
  Index replicas = 1;
  std::uint64_t seed = 0;
  int workers = 0;
  Index thin = 1;
};

/// Replica r integrates the path sample_path(seed, N, tau, covariance, r).
/// Results are indexed by replica and do not depend on the worker count.
std::vector<Trajectory> mc_run(std::shared_ptr<const Problem> problem, const StepperConfig& cfg,
                               const McOptions& opts);

struct StudyOptions {
  std::vector<double> tau_levels;
  Index ref_refinement = 64;
  Index replicas = 200;
  std::uint64_t seed = 0;
  int workers = 0;
  double slope_lo = 0.85;
  double slope_hi = 1.15;
  StageSolverKind stage_solver = StageSolverKind::automatic;
};

struct LevelResult {
  double tau = 0.0;
  double error = 0.0;   // max_n sqrt(E ||u_ref(t_n) - u^n||^2)
  double error_se = 0.0;  // delta-method standard error at the maximising n
  double error_mean_of_max = 0.0;  // sqrt(E max_n ||u_ref(t_n) - u^n||^2)
  double mean_of_max_se = 0.0;
  bool failed = false;
  std::string failure;
};

struct ConvergenceReport {
  std::string tableau;
  std::vector<LevelResult> levels;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_mean_of_max = 0.0;
  Index replicas = 0;
  std::uint64_t seed = 0;
  double tau_ref = 0.0;
  double slope_lo = 0.85;
  double slope_hi = 1.15;

  bool slope_available() const;
  bool pass() const;
};

/// Mean-square convergence study against a midpoint reference at tau_min / ref_refinement
/// on the same noise path. Levels must be distinct; they are sorted decreasing.
ConvergenceReport convergence_study(std::shared_ptr<const Problem> problem, const Tableau& tableau,
                                    const StudyOptions& opts);

/// Deterministic (no noise) study against an exact reference solution u_exact(t).
ConvergenceReport deterministic_study(std::shared_ptr<const Problem> problem,
                                      const Tableau& tableau, std::vector<double> tau_levels,
                                      const std::function<Vector(double)>& u_exact,
                                      double slope_lo, double slope_hi);

/// CSV (tau, error, stderr, error_mean_of_max, stderr_mean_of_max, failed) and a JSON summary.
void write_report(const ConvergenceReport& report, const std::string& csv_path,
                  const std::string& json_path);

}  // namespace srkmax
