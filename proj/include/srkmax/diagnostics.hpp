#pragma once

#include "srkmax/integrator.hpp"
#include "srkmax/model.hpp"
#include "srkmax/spatial.hpp"
#include "srkmax/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace srkmax {

/// A time series with optional Monte Carlo standard errors (zero when not applicable).
struct DiagnosticSeries {
  std::string name;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> stderrs;

  std::size_t size() const { return times.size(); }
  void validate() const;
  double max_abs() const;
};

/// Verdict record emitted with every diagnostic.
struct DiagnosticSummary {
  std::string name;
  bool pass = false;
  double worst_value = 0.0;
  double tolerance = 0.0;
};

struct EnergyLawResult {
  DiagnosticSeries residual;     // mean energy minus the discrete energy law
  DiagnosticSeries mean_energy;  // mean and standard error of energy(u^n)
  double slope = 0.0;            // mean of per-replica least-squares slopes of energy vs time
  double slope_stderr = 0.0;
  bool stderr_unavailable = false;  // single replica: point estimate only
};

/// Residual of E[H(u^n)] against H(u0) + sum of tau (2<u^k, F(t_k, u^k)> + ||B(t_k)||_HS^2)
/// over k < n (left-endpoint rule). All trajectories must share one time grid.
EnergyLawResult energy_law_residual(const std::vector<Trajectory>& replicas,
                                    const Problem& problem);

/// Pathwise series max_k |div_h(mu H^n) - div_h(mu H^0)|_k on the 2D-TM backend.
DiagnosticSeries divergence_drift(const Trajectory& trajectory, const Problem& problem);

/// Field scale max_n ||mu H^n||_inf / min(dx, dy) used to normalise divergence drift.
double divergence_scale(const Trajectory& trajectory, const Problem& problem);

/// Mean and standard error of <phi, div_h(mu H^n) - div_h(mu H^0)> over replicas, with
/// phi the product sine bump on the interior nodes.
DiagnosticSeries divergence_functional(const std::vector<Trajectory>& replicas,
                                       const Problem& problem);

/// ||J^T Omega J - Omega||_F with Omega = omega_weight [[0, I], [-I, 0]] in mode coordinates.
/// Requires the spectral backend.
double symplectic_residual(const TangentFrame& frame, const SkewOperator& op,
                           double omega_weight = 1.0);

/// Integrates the path while propagating an identity tangent frame. Refuses drifts
/// without a Hamiltonian structure.
TangentFrame tangent_frame_run(const StepperConfig& cfg, std::shared_ptr<const Problem> problem,
                               const NoisePath& path);

struct ResolventProbe {
  std::vector<double> taus;
  std::vector<double> norm;   // ||(I - tau (A (x) M))^{-1}||
  std::vector<double> ratio;  // sup ||[I - R] v|| / (tau ||(A (x) M) v||)
  double max_norm() const;
  double norm_spread() const;   // max / min over tau
  double ratio_spread() const;  // max / min over tau
};

/// Power-iteration estimates in the H^s norm. The ratio probe iterates on range(A (x) M).
/// Throws ConfigError for tableaux without a coercivity certificate.
ResolventProbe resolvent_bound_probe(const SkewOperator& op, const Tableau& tableau,
                                     const std::vector<double>& taus, std::uint64_t seed = 1,
                                     int max_iter = 500);

/// Mean and standard error of ||u^n||_H^p. Requires at least 30 replicas.
DiagnosticSeries moment_probe(const std::vector<Trajectory>& replicas, const Problem& problem,
                              double p);

/// max_n E||u^{n+1} - u^n||_H^2 / tau. Requires at least 30 replicas.
double holder_probe(const std::vector<Trajectory>& replicas, const Problem& problem);

/// Least-squares line y = slope x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace srkmax
