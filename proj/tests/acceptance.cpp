// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "srkmax/config.hpp"
#include "srkmax/diagnostics.hpp"
#include "srkmax/harness.hpp"
#include "srkmax/integrator.hpp"
#include "srkmax/noise.hpp"
#include "srkmax/spatial.hpp"
#include "srkmax/tableau.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>

using namespace srkmax;

namespace {

int failures = 0;

void report(int id, const std::string& what, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s | %s\n", pass ? "PASS" : "FAIL", id, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Vector random_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Vector v(n);
  for (Index k = 0; k < n; ++k) v[k] = z(rng);
  return v;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ie = analyze(builtin("implicit_euler"));
  const auto mid = analyze(builtin("midpoint"));
  const auto ee = analyze(builtin("explicit_euler"));
  const auto g2 = analyze(builtin("gauss2"));
  bool ok = true;
  ok = ok && ie.stability_matrix.size() == 1 && ie.stability_matrix(0, 0) == 1.0 &&
       ie.algebraically_stable && ie.coercivity.coercive() && !ie.symplectic;
  ok = ok && mid.stability_matrix.size() == 1 && mid.stability_matrix(0, 0) == 0.0 &&
       mid.algebraically_stable && mid.coercivity.coercive() && mid.symplectic;
  ok = ok && !ee.algebraically_stable && ee.coercivity.kind == CoercivityKind::singular_A;
  ok = ok && g2.symplectic;
  const double dt = seconds_since(t0);
  std::ostringstream d;
  d << "IE M=" << ie.stability_matrix(0, 0) << " stable=" << ie.algebraically_stable
    << " coercive=" << ie.coercivity.coercive() << " symplectic=" << ie.symplectic
    << "; MID M=" << mid.stability_matrix(0, 0) << " symplectic=" << mid.symplectic
    << "; EE stable=" << ee.algebraically_stable << " " << to_string(ee.coercivity.kind)
    << "; GAUSS2 symplectic=" << g2.symplectic << "; runtime " << fmt("%.3fs", dt) << " (< 1s)";
  report(1, "tableau classification", ok && dt < 1.0, d.str());
}

void criterion_2() {
  const auto t0 = std::chrono::steady_clock::now();
  Config cfg = default_study_config();
  auto problem = build_problem(cfg);
  StudyOptions so;
  so.tau_levels = {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
  so.ref_refinement = 64;
  so.replicas = 200;
  so.seed = 20240611;
  so.workers = 0;
  bool ok = true;
  std::ostringstream d;
  for (const char* name : {"implicit_euler", "midpoint"}) {
    const ConvergenceReport rep = convergence_study(problem, builtin(name), so);
    ok = ok && rep.slope_available() && rep.slope >= 0.85 && rep.slope <= 1.15;
    d << name << " slope " << fmt("%.4f", rep.slope) << " (mean-of-max "
      << fmt("%.4f", rep.slope_mean_of_max) << ", errors";
    for (const auto& l : rep.levels) d << " " << fmt("%.3e", l.error);
    d << "); ";
  }
  const double dt = seconds_since(t0);
  d << "band [0.85, 1.15], 200 replicas, eps = mu = 1, runtime " << fmt("%.1fs", dt)
    << " (<= 300s)";
  report(2, "mean-square order 1 (1D, m=64)", ok && dt <= 300.0, d.str());

  // Same study at slower wave speeds, where tau * omega_J^2 is resolved by the tau window.
  for (double em : {4.0, 16.0, 64.0}) {
    Config c2 = cfg;
    c2.backend.eps = std::sqrt(em);
    c2.backend.mu = std::sqrt(em);
    auto p2 = build_problem(c2);
    std::printf("INFO criterion 2: eps*mu = %g:", em);
    for (const char* name : {"implicit_euler", "midpoint"})
      std::printf(" %s slope %.4f", name, convergence_study(p2, builtin(name), so).slope);
    std::printf("\n");
    std::fflush(stdout);
  }
}

void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  Config cfg;
  cfg.backend.kind = "spectral";
  cfg.backend.modes = 16;
  cfg.backend.L = 1.0;
  cfg.drift.kind = "zero";
  cfg.noise.je = 0.0;
  cfg.noise.jm = 0.0;
  cfg.initial.kind = "single_mode";
  cfg.initial.mode = 1;
  cfg.T = 1.0;
  auto problem = build_problem(cfg);
  const auto* sp = dynamic_cast<const SpectralMaxwell*>(problem->op.get());
  const Vector u0 = problem->u0;
  auto exact = [&](double t) { return sp->exp_apply(t, u0); };
  const std::vector<double> taus{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
  const auto mid = deterministic_study(problem, builtin("midpoint"), taus, exact, 1.9, 2.1);
  const auto ie = deterministic_study(problem, builtin("implicit_euler"), taus, exact, 0.9, 1.1);
  const double dt = seconds_since(t0);
  std::ostringstream d;
  d << "midpoint slope " << fmt("%.4f", mid.slope) << " (2.0 +- 0.1), implicit Euler slope "
    << fmt("%.4f", ie.slope) << " (1.0 +- 0.1), runtime " << fmt("%.2fs", dt) << " (< 30s)";
  report(3, "deterministic orders vs exact semigroup", mid.pass() && ie.pass() && dt < 30.0,
         d.str());
}

void criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  Config cfg;
  cfg.backend.kind = "maxwell1d";
  cfg.backend.m = 64;
  cfg.drift.kind = "zero";
  cfg.noise.modes = 16;
  cfg.noise.exponent = 2.0;
  cfg.noise.je = 1.0;
  cfg.initial.kind = "zero";
  cfg.T = 1.0;
  auto problem = build_problem(cfg);
  StepperConfig sc;
  sc.tableau = builtin("midpoint");
  sc.tau = 1.0 / 128;
  const auto trajs = mc_run(problem, sc, {500, 77, 0, 1});
  const EnergyLawResult law = energy_law_residual(trajs, *problem);
  const double hs = problem->diffusion->hs_norm_sq(0.0);
  const double dev = std::abs(law.slope - hs);
  const bool trace_ok = dev <= 3.0 * law.slope_stderr;

  // Pathwise conservation, B = 0, F = 0.
  Config c2 = cfg;
  c2.noise.je = 0.0;
  c2.initial.kind = "gaussian_bump";
  c2.initial.cx = 0.4;
  c2.initial.width = 0.08;
  c2.T = 1000.0 / 128.0;
  auto p2 = build_problem(c2);
  const NoisePath path = sample_path(5, 1000, sc.tau, p2->covariance);
  const Trajectory tr = integrate(sc, p2, path);
  const double e0 = p2->op->norm_sq(tr.states.front());
  double drift = 0.0;
  for (const auto& u : tr.states) drift = std::max(drift, std::abs(p2->op->norm_sq(u) - e0) / e0);
  const double dt = seconds_since(t0);
  std::ostringstream d;
  d << "slope " << fmt("%.5f", law.slope) << " vs hs_norm_sq " << fmt("%.5f", hs) << ", |diff| "
    << fmt("%.2e", dev) << " <= 3 se = " << fmt("%.2e", 3.0 * law.slope_stderr)
    << " (500 replicas); B=0 midpoint energy drift " << fmt("%.2e", drift)
    << " (<= 1e-10) over 1000 steps; runtime " << fmt("%.1fs", dt) << " (< 120s)";
  report(4, "energy trace law", trace_ok && drift <= 1e-10 && dt < 120.0, d.str());
}

void criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  Config cfg;
  cfg.backend.kind = "maxwell2d_tm";
  cfg.backend.nx = 16;
  cfg.backend.ny = 16;
  cfg.backend.dx = 1.0 / 16;
  cfg.backend.dy = 1.0 / 16;
  cfg.backend.eps = 1.0;
  cfg.backend.mu = 2.0;
  cfg.drift.kind = "linear_damping";
  cfg.drift.sigma_e = 0.5;
  cfg.drift.sigma_m = 0.0;
  cfg.noise.modes = 8;
  cfg.noise.je = 1.0;
  cfg.noise.jm = 0.0;
  cfg.initial.kind = "gaussian_bump";
  cfg.T = 5.0;
  auto base = build_problem(cfg);
  // Magnetic initial data with nonzero discrete divergence.
  std::mt19937_64 rng(11);
  Vector u0 = base->u0;
  const auto* tm = dynamic_cast<const Maxwell2DTM*>(base->op.get());
  u0.tail(tm->n_hx() + tm->n_hy()) = random_vector(tm->n_hx() + tm->n_hy(), rng);
  auto problem = make_problem(base->op, base->drift, base->covariance, base->profile, u0, base->T);

  const double tau = 0.01;
  const NoisePath path = sample_path(99, 500, tau, problem->covariance);
  bool ok = true;
  std::ostringstream d;
  for (const char* name : {"implicit_euler", "midpoint", "gauss2"}) {
    StepperConfig sc;
    sc.tableau = builtin(name);
    sc.tau = tau;
    const Trajectory tr = integrate(sc, problem, path);
    const double drift = divergence_drift(tr, *problem).max_abs();
    const double scale = divergence_scale(tr, *problem);
    ok = ok && drift <= 1e-12 * scale;
    d << name << " " << fmt("%.2e", drift / scale) << "; ";
  }
  const double dt = seconds_since(t0);
  d << "relative to field scale, tol 1e-12, 500 steps; runtime " << fmt("%.1fs", dt) << " (< 60s)";
  report(5, "divergence conservation (2D-TM, J_m = J_m^r = 0)", ok && dt < 60.0, d.str());
}

void criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  auto op = build_spectral_hamiltonian(16, 1.0, 1.0, 1.0);
  const PointSet& pts = op->sample_points();
  auto cov = sine_covariance(pts, 8, 2.0, 1.0);
  auto prof = constant_profile(pts, 0.5, 0.5);
  std::mt19937_64 rng(3);
  const Vector u0 = 0.3 * random_vector(op->dim(), rng);
  auto problem = make_problem(op, HamiltonianSineDrift{1.0}, cov, prof, u0, 1.0);
  const NoisePath path = sample_path(21, 100, 0.01, cov);
  StepperConfig mid;
  mid.tableau = builtin("midpoint");
  mid.tau = 0.01;
  StepperConfig ie = mid;
  ie.tableau = builtin("implicit_euler");
  const double r_mid = symplectic_residual(tangent_frame_run(mid, problem, path), *op);
  const double r_ie = symplectic_residual(tangent_frame_run(ie, problem, path), *op);
  const double dt = seconds_since(t0);
  std::ostringstream d;
  d << "midpoint residual " << fmt("%.2e", r_mid) << " (<= 1e-8), implicit Euler residual "
    << fmt("%.2e", r_ie) << " (>= 1e3 x midpoint); runtime " << fmt("%.2fs", dt) << " (< 30s)";
  report(6, "symplectic 2-form", r_mid <= 1e-8 && r_ie >= 1e3 * r_mid && dt < 30.0, d.str());
}

void criterion_7() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> taus{1e-3, 1e-2, 1e-1, 1.0};
  auto op = build_maxwell_1d(Grid1D::uniform(64, 2.0, 1.0, 1.0));
  const ResolventProbe probe = resolvent_bound_probe(*op, builtin("midpoint"), taus, 17);
  auto op_unit = build_maxwell_1d(Grid1D::uniform(64, 1.0, 1.0, 1.0));
  const ResolventProbe unit = resolvent_bound_probe(*op_unit, builtin("midpoint"), taus, 17);
  const double dt = seconds_since(t0);
  std::ostringstream d;
  d << "1D m=64 L=2: max norm " << fmt("%.15f", probe.max_norm()) << " (<= 1+1e-10), ratio";
  for (double r : probe.ratio) d << " " << fmt("%.4f", r);
  d << " spread " << fmt("%.4f", probe.ratio_spread()) << " (<= 1.5); [info: L=1 spread "
    << fmt("%.4f", unit.ratio_spread()) << "]; runtime " << fmt("%.2fs", dt) << " (< 30s)";
  report(7, "resolvent bounds (midpoint)",
         probe.max_norm() <= 1.0 + 1e-10 && probe.ratio_spread() <= 1.5 && dt < 30.0, d.str());
}

void criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(8);
  std::ostringstream d;
  bool ok = true;

  // Skew-adjointness on every backend.
  Grid2DTM g2;
  g2.nx = 7;
  g2.ny = 5;
  g2.dx = 0.1;
  g2.dy = 0.15;
  g2.eps = 2.0;
  g2.mu = 0.5;
  Grid1D g1 = Grid1D::uniform(16, 1.0, 1.0, 1.0);
  g1.eps = Vector::LinSpaced(16, 1.0, 3.0);
  g1.mu = Vector::LinSpaced(17, 0.5, 1.5);
  std::vector<std::shared_ptr<const SkewOperator>> ops{
      build_maxwell_1d(g1), build_maxwell_2d_tm(g2), build_spectral_hamiltonian(12, 1.3, 2.0, 0.7)};
  double skew = 0.0;
  for (const auto& op : ops)
    for (int k = 0; k < 20; ++k) {
      const Vector u = random_vector(op->dim(), rng), v = random_vector(op->dim(), rng);
      const double s = op->inner(op->apply(u), v) + op->inner(u, op->apply(v));
      const double scale = std::sqrt(op->norm_sq(u) * op->norm_sq(op->apply(v)) +
                                     op->norm_sq(v) * op->norm_sq(op->apply(u)));
      skew = std::max(skew, std::abs(s) / scale);
    }
  ok = ok && skew <= 1e-12;
  d << "skew " << fmt("%.1e", skew);

  // Mimetic identity.
  const auto& tm = dynamic_cast<const Maxwell2DTM&>(*ops[1]);
  double mim = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vector phi = random_vector(tm.n_ez(), rng);
    const Vector c = tm.curl(phi);
    const double scale = c.cwiseAbs().maxCoeff() / std::min(g2.dx, g2.dy);
    mim = std::max(mim, tm.div_h(c).cwiseAbs().maxCoeff() / scale);
  }
  ok = ok && mim <= 1e-14;
  d << "; mimetic " << fmt("%.1e", mim);

  // Sampler moments at 1e5 draws.
  const Vector lam = (Vector(4) << 1.0, 0.25, 1.0 / 9, 1.0 / 16).finished();
  const double tau = 0.01;
  const Index draws = 100000;
  const NoisePath p = sample_path(123, draws, tau, lam);
  bool moments = true;
  double worst_var = 0.0;
  for (Index i = 0; i < lam.size(); ++i) {
    const double var_true = lam[i] * tau;
    const double mean = p.xi.col(i).mean();
    const double var = (p.xi.col(i).array() - mean).square().sum() / double(draws - 1);
    moments = moments && std::abs(mean) <= 4.0 * std::sqrt(var_true / double(draws));
    moments = moments && std::abs(var / var_true - 1.0) <= 0.05;
    worst_var = std::max(worst_var, std::abs(var / var_true - 1.0));
    for (Index j = i + 1; j < lam.size(); ++j) {
      const double mj = p.xi.col(j).mean();
      const double cov = ((p.xi.col(i).array() - mean) * (p.xi.col(j).array() - mj)).sum() /
                         double(draws - 1);
      const double varj = (p.xi.col(j).array() - mj).square().sum() / double(draws - 1);
      moments = moments && std::abs(cov / std::sqrt(var * varj)) <= 4.0 / std::sqrt(double(draws));
    }
  }
  ok = ok && moments;
  d << "; sampler moments " << (moments ? "ok" : "bad") << " (var dev " << fmt("%.3f", worst_var)
    << ")";

  // Coarsening telescoping.
  const NoisePath fine = sample_path(9, 4096, 1.0 / 4096, lam);
  double tele = 0.0;
  for (Index r : {2, 4, 8, 64}) {
    const NoisePath coarse = coarsen(fine, r);
    for (Index i = 0; i < lam.size(); ++i) {
      const double a = coarse.xi.col(i).sum(), b = fine.xi.col(i).sum();
      tele = std::max(tele, std::abs(a - b) / std::max(fine.xi.col(i).cwiseAbs().sum(), 1e-300));
    }
  }
  ok = ok && tele <= 1e-14;
  d << "; telescoping " << fmt("%.1e", tele);

  // Generic vs specialized steppers.
  auto op1 = build_maxwell_1d(Grid1D::uniform(32, 1.0, 1.0, 1.0));
  const PointSet& pts = op1->sample_points();
  auto cov = sine_covariance(pts, 8, 2.0, 1.0);
  auto prof = constant_profile(pts, 1.0, 0.3);
  double agree = 0.0;
  for (const DriftSpec& drift : {DriftSpec(LinearDamping{0.4, 0.2}), DriftSpec(ZeroDrift{})}) {
    auto problem = make_problem(op1, drift, cov, prof, random_vector(op1->dim(), rng), 1.0);
    for (auto [name, spec] : {std::pair{"implicit_euler", Specialization::implicit_euler_resolvent},
                              std::pair{"midpoint", Specialization::midpoint_resolvent}}) {
      StepperConfig gen;
      gen.tableau = builtin(name);
      gen.tau = 0.01;
      StepperConfig sp = gen;
      sp.specialization = spec;
      Stepper a(gen, problem), b(sp, problem);
      const NoisePath path = sample_path(4, 100, 0.01, cov);
      Vector ua = problem->u0, ub = problem->u0;
      for (Index n = 0; n < 100; ++n) {
        ua = a.step(ua, double(n) * 0.01, path.increment(n));
        ub = b.step(ub, double(n) * 0.01, path.increment(n));
        agree = std::max(agree, std::sqrt(op1->norm_sq(ua - ub) / op1->norm_sq(ua)));
      }
    }
  }
  ok = ok && agree <= 1e-10;
  d << "; generic vs specialized " << fmt("%.1e", agree);

  // Bitwise reproducibility across worker counts.
  auto problem = make_problem(op1, LinearDamping{0.4, 0.0}, cov, prof, Vector::Zero(op1->dim()), 0.5);
  StepperConfig sc;
  sc.tableau = builtin("gauss2");
  sc.tau = 1.0 / 64;
  const auto r1 = mc_run(problem, sc, {12, 2024, 1, 1});
  const auto r3 = mc_run(problem, sc, {12, 2024, 3, 1});
  bool bitwise = true;
  for (std::size_t r = 0; r < r1.size(); ++r)
    for (std::size_t n = 0; n < r1[r].states.size(); ++n)
      bitwise = bitwise && (r1[r].states[n].array() == r3[r].states[n].array()).all();
  ok = ok && bitwise;
  d << "; bitwise across workers " << (bitwise ? "yes" : "no");

  const double dt = seconds_since(t0);
  d << "; runtime " << fmt("%.2fs", dt) << " (< 60s)";
  report(8, "property suites", ok && dt < 60.0, d.str());
}

}  // namespace

int main() {
  struct Entry {
    int id;
    void (*fn)();
  };
  for (const Entry& e : {Entry{1, criterion_1}, Entry{2, criterion_2}, Entry{3, criterion_3},
                         Entry{4, criterion_4}, Entry{5, criterion_5}, Entry{6, criterion_6},
                         Entry{7, criterion_7}, Entry{8, criterion_8}}) {
    try {
      e.fn();
    } catch (const std::exception& ex) {
      report(e.id, "raised an exception", false, ex.what());
    }
  }
  std::printf("%d criterion failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
