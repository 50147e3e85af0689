#include "srkmax/diagnostics.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace srkmax {

void DiagnosticSeries::validate() const {
  if (values.size() != times.size() || stderrs.size() != times.size())
    throw Error("diagnostic series '" + name + "': length mismatch");
  for (double s : stderrs)
    if (s < 0.0) throw Error("diagnostic series '" + name + "': negative standard error");
}

double DiagnosticSeries::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("fit_line: need two or more points");
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  if (sxx == 0.0) throw Error("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  const double n = double(v.size());
  for (double x : v) r.mean += x;
  r.mean /= n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return r;
}

void check_replicas(const std::vector<Trajectory>& replicas, const Problem& problem,
                    std::size_t min_count) {
  if (replicas.size() < min_count)
    throw ConfigError("need at least " + std::to_string(min_count) + " replicas, got " +
                      std::to_string(replicas.size()));
  const auto& t0 = replicas.front().times;
  for (const auto& tr : replicas) {
    if (tr.times.size() != t0.size() || tr.states.size() != t0.size())
      throw LayoutMismatch("replicas do not share one time grid");
    for (std::size_t n = 0; n < t0.size(); ++n)
      if (tr.times[n] != t0[n]) throw LayoutMismatch("replicas do not share one time grid");
    for (const auto& u : tr.states)
      if (u.size() != problem.dim()) throw LayoutMismatch("replica state has wrong dimension");
  }
}

const Maxwell2DTM& require_tm(const Problem& problem) {
  const auto* tm = dynamic_cast<const Maxwell2DTM*>(problem.op.get());
  if (!tm) throw ConfigError("divergence diagnostics require the 2D-TM backend");
  return *tm;
}

}  // namespace

EnergyLawResult energy_law_residual(const std::vector<Trajectory>& replicas,
                                    const Problem& problem) {
  check_replicas(replicas, problem, 1);
  const SkewOperator& op = *problem.op;
  const auto& times = replicas.front().times;
  const std::size_t N = times.size();
  const std::size_t R = replicas.size();

  EnergyLawResult out;
  out.residual.name = "energy_law_residual";
  out.mean_energy.name = "mean_energy";
  out.stderr_unavailable = R < 2;

  // energies[r][n] and the integrand 2<u, F> per replica
  std::vector<std::vector<double>> energy(R, std::vector<double>(N));
  std::vector<std::vector<double>> source(R, std::vector<double>(N));
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t n = 0; n < N; ++n) {
      const Vector& u = replicas[r].states[n];
      energy[r][n] = op.norm_sq(u);
      source[r][n] = 2.0 * op.inner(u, eval_F(problem, times[n], u));
    }

  std::vector<double> law(R, 0.0);
  std::vector<double> col(R);
  for (std::size_t n = 0; n < N; ++n) {
    if (n == 0) {
      for (std::size_t r = 0; r < R; ++r) law[r] = op.norm_sq(problem.u0);
    } else {
      const double dt = times[n] - times[n - 1];
      const double hs = problem.diffusion->hs_norm_sq(times[n - 1]);
      for (std::size_t r = 0; r < R; ++r) law[r] += dt * (source[r][n - 1] + hs);
    }
    for (std::size_t r = 0; r < R; ++r) col[r] = energy[r][n];
    const MeanSe e = mean_se(col);
    for (std::size_t r = 0; r < R; ++r) col[r] = energy[r][n] - law[r];
    const MeanSe res = mean_se(col);
    out.mean_energy.times.push_back(times[n]);
    out.mean_energy.values.push_back(e.mean);
    out.mean_energy.stderrs.push_back(e.se);
    out.residual.times.push_back(times[n]);
    out.residual.values.push_back(res.mean);
    out.residual.stderrs.push_back(res.se);
  }

  if (N >= 2) {
    std::vector<double> slopes(R);
    for (std::size_t r = 0; r < R; ++r) slopes[r] = fit_line(times, energy[r]).slope;
    const MeanSe s = mean_se(slopes);
    out.slope = s.mean;
    out.slope_stderr = s.se;
  }
  return out;
}

DiagnosticSeries divergence_drift(const Trajectory& trajectory, const Problem& problem) {
  const Maxwell2DTM& tm = require_tm(problem);
  if (trajectory.states.empty()) throw ConfigError("divergence_drift: empty trajectory");
  DiagnosticSeries s;
  s.name = "divergence_drift";
  const Vector d0 = tm.div_mu_h(trajectory.states.front());
  for (std::size_t n = 0; n < trajectory.states.size(); ++n) {
    const Vector d = tm.div_mu_h(trajectory.states[n]);
    s.times.push_back(trajectory.times[n]);
    s.values.push_back((d - d0).cwiseAbs().maxCoeff());
    s.stderrs.push_back(0.0);
  }
  return s;
}

double divergence_scale(const Trajectory& trajectory, const Problem& problem) {
  const Maxwell2DTM& tm = require_tm(problem);
  const Index ne = tm.n_ez();
  const Index nh = tm.n_hx() + tm.n_hy();
  double m = 0.0;
  for (const auto& u : trajectory.states) m = std::max(m, u.segment(ne, nh).cwiseAbs().maxCoeff());
  return tm.grid().mu * m / std::min(tm.grid().dx, tm.grid().dy);
}

DiagnosticSeries divergence_functional(const std::vector<Trajectory>& replicas,
                                       const Problem& problem) {
  const Maxwell2DTM& tm = require_tm(problem);
  check_replicas(replicas, problem, 2);
  const auto& g = tm.grid();
  Vector phi(tm.n_div_nodes());
  Index k = 0;
  const double pi = std::numbers::pi;
  for (Index j = 1; j < g.ny; ++j)
    for (Index i = 1; i < g.nx; ++i, ++k)
      phi[k] = std::sin(pi * double(i) / double(g.nx)) * std::sin(pi * double(j) / double(g.ny)) *
               g.dx * g.dy;

  DiagnosticSeries s;
  s.name = "divergence_functional";
  const auto& times = replicas.front().times;
  std::vector<Vector> d0(replicas.size());
  for (std::size_t r = 0; r < replicas.size(); ++r) d0[r] = tm.div_mu_h(replicas[r].states[0]);
  std::vector<double> col(replicas.size());
  for (std::size_t n = 0; n < times.size(); ++n) {
    for (std::size_t r = 0; r < replicas.size(); ++r)
      col[r] = phi.dot(tm.div_mu_h(replicas[r].states[n]) - d0[r]);
    const MeanSe m = mean_se(col);
    s.times.push_back(times[n]);
    s.values.push_back(m.mean);
    s.stderrs.push_back(m.se);
  }
  return s;
}

double symplectic_residual(const TangentFrame& frame, const SkewOperator& op,
                           double omega_weight) {
  const auto* sp = dynamic_cast<const SpectralMaxwell*>(&op);
  if (!sp) throw ConfigError("symplectic residual requires the spectral backend");
  const Index m = sp->modes();
  if (frame.columns.rows() != 2 * m) throw LayoutMismatch("symplectic residual: frame size");
  const Index c = frame.columns.cols();
  if (c % 2 != 0) throw LayoutMismatch("symplectic residual: frame must have an even column count");
  Matrix omega_rows = Matrix::Zero(2 * m, 2 * m);
  omega_rows.topRightCorner(m, m).setIdentity();
  omega_rows.bottomLeftCorner(m, m) = -Matrix::Identity(m, m);
  omega_rows *= omega_weight;
  Matrix omega_cols = Matrix::Zero(c, c);
  const Index h = c / 2;
  omega_cols.topRightCorner(h, h).setIdentity();
  omega_cols.bottomLeftCorner(h, h) = -Matrix::Identity(h, h);
  omega_cols *= omega_weight;
  const Matrix& J = frame.columns;
  return (J.transpose() * omega_rows * J - omega_cols).norm();
}

TangentFrame tangent_frame_run(const StepperConfig& cfg, std::shared_ptr<const Problem> problem,
                               const NoisePath& path) {
  if (!is_hamiltonian(problem->drift))
    throw ConfigError("symplectic diagnostic refuses non-Hamiltonian drift '" +
                      drift_name(problem->drift) + "'");
  if (!dynamic_cast<const SpectralMaxwell*>(problem->op.get()))
    throw ConfigError("symplectic diagnostic requires the spectral backend");
  check_path_horizon(cfg, *problem, path);
  Stepper stepper(cfg, problem);
  TangentFrame frame = TangentFrame::identity(problem->dim());
  Vector u = problem->u0;
  for (Index n = 0; n < path.N; ++n) {
    u = stepper.step(u, double(n) * cfg.tau, path.increment(n));
    stepper.propagate_tangent(frame);
  }
  return frame;
}

// --------------------------------------------------------------------------
// Resolvent probe

double ResolventProbe::max_norm() const { return *std::max_element(norm.begin(), norm.end()); }

double ResolventProbe::norm_spread() const {
  return *std::max_element(norm.begin(), norm.end()) / *std::min_element(norm.begin(), norm.end());
}

double ResolventProbe::ratio_spread() const {
  return *std::max_element(ratio.begin(), ratio.end()) /
         *std::min_element(ratio.begin(), ratio.end());
}

namespace {

class StackedSpace {
 public:
  StackedSpace(const SkewOperator& op, Index s) : op_(op), s_(s), n_(op.dim()) {}

  double inner(const Vector& a, const Vector& b) const {
    double acc = 0.0;
    for (Index i = 0; i < s_; ++i) acc += op_.inner(a.segment(i * n_, n_), b.segment(i * n_, n_));
    return acc;
  }
  double norm(const Vector& a) const { return std::sqrt(inner(a, a)); }

 private:
  const SkewOperator& op_;
  Index s_;
  Index n_;
};

// H-orthonormal basis of ker M.
std::vector<Vector> kernel_basis(const SkewOperator& op) {
  const Matrix M = Matrix(op.matrix());
  Eigen::FullPivLU<Matrix> lu(M);
  lu.setThreshold(1e-12);
  const Matrix K = lu.kernel();
  std::vector<Vector> basis;
  if (lu.rank() == M.cols()) return basis;
  for (Index c = 0; c < K.cols(); ++c) {
    Vector v = K.col(c);
    for (const auto& q : basis) v -= op.inner(q, v) * q;
    const double nv = std::sqrt(op.norm_sq(v));
    if (nv > 1e-12) basis.push_back(v / nv);
  }
  return basis;
}

// Largest singular value of a map T (given with its H-adjoint) by power iteration on T*T.
template <class Apply, class Adjoint, class Project>
double power_norm(const StackedSpace& space, Vector v, Apply T, Adjoint Tadj, Project P,
                  int max_iter) {
  P(v);
  v /= space.norm(v);
  double est = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vector Tv = T(v);
    const double next = space.norm(Tv);
    Vector w = Tadj(Tv);
    P(w);
    const double nw = space.norm(w);
    if (nw == 0.0) return next;
    v = w / nw;
    if (it > 10 && std::abs(next - est) <= 1e-15 * next) {
      est = next;
      break;
    }
    est = next;
  }
  return est;
}

}  // namespace

ResolventProbe resolvent_bound_probe(const SkewOperator& op, const Tableau& tableau,
                                     const std::vector<double>& taus, std::uint64_t seed,
                                     int max_iter) {
  tableau.validate();
  if (!check_coercivity(tableau).coercive())
    throw ConfigError("resolvent probe requires a coercive tableau ('" + tableau.name + "')");
  if (taus.empty()) throw ConfigError("resolvent probe: empty tau list");
  const Index s = tableau.stages();
  const Index n = op.dim();
  const StackedSpace space(op, s);
  const std::vector<Vector> ker = kernel_basis(op);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v0(s * n);
  for (Index k = 0; k < v0.size(); ++k) v0[k] = normal(rng);

  auto no_projection = [](Vector&) {};
  auto range_projection = [&](Vector& w) {
    for (Index i = 0; i < s; ++i)
      for (const auto& q : ker) w.segment(i * n, n) -= op.inner(q, w.segment(i * n, n)) * q;
  };

  ResolventProbe probe;
  const Matrix minus_At = -tableau.A.transpose();
  for (double tau : taus) {
    if (!(tau > 0.0)) throw ConfigError("resolvent probe: tau must be positive");
    const StageLinearSolver R(op, tableau.A, tau);
    const StageLinearSolver Radj(op, minus_At, tau);
    auto apply = [&](const Vector& x) { return R.solve(x); };
    auto adjoint = [&](const Vector& x) { return Radj.solve(x); };
    probe.taus.push_back(tau);
    probe.norm.push_back(power_norm(space, v0, apply, adjoint, no_projection, max_iter));
    // [I - R] v = -tau R (A (x) M) v, so the ratio is ||R w|| / ||w|| on w in range(A (x) M).
    probe.ratio.push_back(power_norm(space, v0, apply, adjoint, range_projection, max_iter));
  }
  return probe;
}

DiagnosticSeries moment_probe(const std::vector<Trajectory>& replicas, const Problem& problem,
                              double p) {
  check_replicas(replicas, problem, 30);
  if (!(p > 0.0)) throw ConfigError("moment_probe: p must be positive");
  DiagnosticSeries s;
  s.name = "moment_p" + std::to_string(p);
  const auto& times = replicas.front().times;
  std::vector<double> col(replicas.size());
  for (std::size_t n = 0; n < times.size(); ++n) {
    for (std::size_t r = 0; r < replicas.size(); ++r)
      col[r] = std::pow(problem.op->norm_sq(replicas[r].states[n]), 0.5 * p);
    const MeanSe m = mean_se(col);
    s.times.push_back(times[n]);
    s.values.push_back(m.mean);
    s.stderrs.push_back(m.se);
  }
  return s;
}

double holder_probe(const std::vector<Trajectory>& replicas, const Problem& problem) {
  check_replicas(replicas, problem, 30);
  const auto& times = replicas.front().times;
  double worst = 0.0;
  for (std::size_t n = 0; n + 1 < times.size(); ++n) {
    const double dt = times[n + 1] - times[n];
    double acc = 0.0;
    for (const auto& tr : replicas) acc += problem.op->norm_sq(tr.states[n + 1] - tr.states[n]);
    worst = std::max(worst, acc / double(replicas.size()) / dt);
  }
  return worst;
}

}  // namespace srkmax
