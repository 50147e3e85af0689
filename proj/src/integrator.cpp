#include "srkmax/integrator.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace srkmax {

std::string to_string(StageSolverKind k) {
  switch (k) {
    case StageSolverKind::automatic:
      return "auto";
    case StageSolverKind::direct_linear:
      return "direct_linear";
    case StageSolverKind::fixed_point:
      return "fixed_point";
  }
  return "auto";
}

std::string to_string(Specialization s) {
  switch (s) {
    case Specialization::generic:
      return "generic";
    case Specialization::implicit_euler_resolvent:
      return "implicit_euler_resolvent";
    case Specialization::midpoint_resolvent:
      return "midpoint_resolvent";
  }
  return "generic";
}

StageSolverKind parse_stage_solver(std::string_view name) {
  if (name == "auto") return StageSolverKind::automatic;
  if (name == "direct_linear") return StageSolverKind::direct_linear;
  if (name == "fixed_point") return StageSolverKind::fixed_point;
  throw ConfigError("unknown stage solver '" + std::string(name) + "'");
}

Specialization parse_specialization(std::string_view name) {
  if (name == "generic") return Specialization::generic;
  if (name == "implicit_euler_resolvent") return Specialization::implicit_euler_resolvent;
  if (name == "midpoint_resolvent") return Specialization::midpoint_resolvent;
  throw ConfigError("unknown specialization '" + std::string(name) + "'");
}

// --------------------------------------------------------------------------
// StageLinearSolver

StageLinearSolver::StageLinearSolver(const SkewOperator& op, const Matrix& A, double tau,
                                     const std::optional<Vector>& diagonal_drift,
                                     const SparseMatrix* drift)
    : s_(A.rows()), n_(op.dim()) {
  if (s_ == 1 && drift == nullptr && diagonal_drift) {
    shifted_ = op.shifted_solver(tau * A(0, 0), *diagonal_drift);
    return;
  }
  SparseMatrix L = op.matrix();
  if (drift) {
    L += *drift;
  } else if (diagonal_drift && diagonal_drift->size() == n_) {
    for (Index k = 0; k < n_; ++k) L.coeffRef(k, k) += (*diagonal_drift)[k];
  }
  L.makeCompressed();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(std::size_t(s_ * n_ + s_ * s_ * L.nonZeros()));
  for (Index k = 0; k < s_ * n_; ++k) trip.emplace_back(k, k, 1.0);
  for (Index i = 0; i < s_; ++i)
    for (Index j = 0; j < s_; ++j) {
      const double a = A(i, j);
      if (a == 0.0) continue;
      for (Index col = 0; col < L.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(L, col); it; ++it)
          trip.emplace_back(i * n_ + it.row(), j * n_ + it.col(), -tau * a * it.value());
    }
  system_.resize(s_ * n_, s_ * n_);
  system_.setFromTriplets(trip.begin(), trip.end());
  system_.makeCompressed();
  lu_ = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
  lu_->compute(system_);
  if (lu_->info() != Eigen::Success)
    throw StageSolveFailure("stage system: sparse factorization failed");
}

void StageLinearSolver::solve(const Vector& rhs, Vector& x) const {
  if (shifted_) {
    shifted_->solve(rhs, x);
    return;
  }
  x = lu_->solve(rhs);
  const double rnorm = (system_ * x - rhs).norm();
  const double bnorm = rhs.norm();
  if (bnorm > 0.0 && !(rnorm <= 1e-10 * bnorm))
    throw StageSolveFailure("stage system: residual " + std::to_string(rnorm / bnorm) +
                            " above tolerance");
}

Matrix StageLinearSolver::solve(const Matrix& rhs) const {
  Matrix out(rhs.rows(), rhs.cols());
  Vector x;
  for (Index c = 0; c < rhs.cols(); ++c) {
    solve(Vector(rhs.col(c)), x);
    out.col(c) = x;
  }
  return out;
}

std::optional<double> resolvent_bound(const Tableau& tab) {
  const Coercivity coer = check_coercivity(tab);
  if (!coer.coercive()) return std::nullopt;
  const Vector sk = coer.K.cwiseSqrt();
  const Matrix scaled = sk.asDiagonal() * tab.A.inverse() * sk.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Matrix> svd(scaled);
  return std::sqrt(coer.K.maxCoeff() / coer.K.minCoeff()) * svd.singularValues()[0] / coer.alpha;
}

// --------------------------------------------------------------------------
// Stepper

namespace {

bool near(const Matrix& a, double v) { return a.size() == 1 && std::abs(a(0, 0) - v) <= 1e-15; }

bool matches_one_stage(const Tableau& t, double a) {
  return t.stages() == 1 && near(t.A, a) && near(t.b, 1.0) && near(t.A_noise, a) &&
         near(t.b_noise, 1.0) && near(t.c, a);
}

double stacked_norm(const SkewOperator& op, const Vector& x, Index s) {
  const Index n = op.dim();
  double acc = 0.0;
  for (Index i = 0; i < s; ++i) acc += op.norm_sq(x.segment(i * n, n));
  return std::sqrt(acc);
}

bool is_diagonal(const SparseMatrix& J) {
  for (Index col = 0; col < J.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(J, col); it; ++it)
      if (it.row() != it.col() && it.value() != 0.0) return false;
  return true;
}

}  // namespace

Stepper::Stepper(StepperConfig cfg, std::shared_ptr<const Problem> problem)
    : cfg_(std::move(cfg)), problem_(std::move(problem)) {
  if (!problem_) throw ConfigError("stepper: missing problem");
  cfg_.tableau.validate();
  if (!(cfg_.tau > 0.0)) throw ConfigError("stepper: tau must be positive");
  s_ = cfg_.tableau.stages();
  n_ = problem_->dim();

  if (cfg_.specialization == Specialization::implicit_euler_resolvent &&
      !matches_one_stage(cfg_.tableau, 1.0))
    throw ConfigError("implicit Euler specialization requires the implicit Euler tableau");
  if (cfg_.specialization == Specialization::midpoint_resolvent &&
      !matches_one_stage(cfg_.tableau, 0.5))
    throw ConfigError("midpoint specialization requires the midpoint tableau");

  const bool affine = is_affine(problem_->drift);
  if (cfg_.stage_solver == StageSolverKind::direct_linear && !affine)
    throw ConfigError("direct_linear stage solver requires an affine drift");
  fixed_point_ = cfg_.stage_solver == StageSolverKind::fixed_point ||
                 (cfg_.stage_solver == StageSolverKind::automatic && !affine);

  Matrix A_eff = cfg_.tableau.A;
  if (cfg_.specialization == Specialization::implicit_euler_resolvent) A_eff = Matrix::Ones(1, 1);
  if (cfg_.specialization == Specialization::midpoint_resolvent)
    A_eff = Matrix::Constant(1, 1, 0.5);

  if (fixed_point_) {
    const double L = lipschitz_constant(*problem_);
    std::optional<double> C_A;
    if (A_eff.cwiseAbs().maxCoeff() == 0.0) {
      C_A = 0.0;
    } else if (const auto bound = resolvent_bound(cfg_.tableau)) {
      Eigen::JacobiSVD<Matrix> svd(A_eff);
      C_A = *bound * svd.singularValues()[0];
    }
    if (C_A) {
      contraction_ = cfg_.tau * L * *C_A;
      if (!(*contraction_ < 1.0))
        throw FixedPointDivergence("contraction precondition tau*L*C_A = " +
                                   std::to_string(*contraction_) + " >= 1; reduce tau");
    }
    stage_solver_ = std::make_unique<StageLinearSolver>(*problem_->op, A_eff, cfg_.tau);
  } else if (const auto diag = drift_diagonal(*problem_)) {
    stage_solver_ = std::make_unique<StageLinearSolver>(*problem_->op, A_eff, cfg_.tau, diag);
  } else {
    const SparseMatrix D = drift_linear_part(*problem_);
    stage_solver_ =
        std::make_unique<StageLinearSolver>(*problem_->op, A_eff, cfg_.tau, std::nullopt, &D);
  }
  stages_.assign(std::size_t(s_), Vector::Zero(n_));
  stage_times_ = Vector::Zero(s_);
}

Vector Stepper::noise_term(double t, const Vector& image) const {
  if (image.size() == 0) return Vector::Zero(n_);
  return problem_->diffusion->factor(t) * image;
}

void Stepper::check_convergence(double increment, double scale, int iter) {
  stats_.iterations = iter;
  stats_.increments.push_back(increment);
  if (!std::isfinite(increment))
    throw FixedPointDivergence("stage fixed-point iteration produced non-finite values");
  const double threshold = cfg_.fixed_point_tol * std::max(1.0, scale);
  const auto& inc = stats_.increments;
  if (inc.size() >= 3 && increment > 1e3 * threshold && increment > 2.0 * inc[inc.size() - 2])
    throw FixedPointDivergence("stage fixed-point iteration is expanding (increment " +
                               std::to_string(increment) + ")");
  if (increment > threshold && iter >= cfg_.fixed_point_max_iter)
    throw FixedPointDivergence("stage fixed-point iteration did not converge in " +
                               std::to_string(iter) + " iterations");
}

Vector Stepper::step(const Vector& u_n, double t_n, const Vector& dW) {
  if (u_n.size() != n_) throw LayoutMismatch("step: state has wrong dimension");
  stats_ = {};
  switch (cfg_.specialization) {
    case Specialization::implicit_euler_resolvent:
      return step_implicit_euler(u_n, t_n, dW);
    case Specialization::midpoint_resolvent:
      return step_midpoint(u_n, t_n, dW);
    case Specialization::generic:
      break;
  }
  return step_generic(u_n, t_n, dW);
}

Vector Stepper::step_generic(const Vector& u_n, double t_n, const Vector& dW) {
  const Problem& p = *problem_;
  const Tableau& tab = cfg_.tableau;
  const double tau = cfg_.tau;
  const Vector image = p.diffusion->is_zero() ? Vector() : Vector(p.diffusion->columns() * dW);

  std::vector<Vector> Bw(static_cast<std::size_t>(s_));
  for (Index j = 0; j < s_; ++j) {
    stage_times_[j] = t_n + tab.c[j] * tau;
    Bw[j] = noise_term(stage_times_[j], image);
  }
  Vector base(s_ * n_);
  for (Index i = 0; i < s_; ++i) {
    Vector seg = u_n;
    for (Index j = 0; j < s_; ++j)
      if (tab.A_noise(i, j) != 0.0) seg += tab.A_noise(i, j) * Bw[j];
    base.segment(i * n_, n_) = seg;
  }

  Vector X(s_ * n_);
  if (!fixed_point_) {
    Vector rhs = base;
    if (std::holds_alternative<AffineDrift>(p.drift)) {
      for (Index j = 0; j < s_; ++j) {
        const Vector off = drift_offset(p, stage_times_[j]);
        for (Index i = 0; i < s_; ++i) rhs.segment(i * n_, n_) += tau * tab.A(i, j) * off;
      }
    }
    stage_solver_->solve(rhs, X);
  } else {
    for (Index i = 0; i < s_; ++i) X.segment(i * n_, n_) = u_n;
    Vector rhs(s_ * n_), next;
    for (int iter = 1;; ++iter) {
      rhs = base;
      for (Index j = 0; j < s_; ++j) {
        const Vector F = eval_F(p, stage_times_[j], X.segment(j * n_, n_));
        for (Index i = 0; i < s_; ++i)
          if (tab.A(i, j) != 0.0) rhs.segment(i * n_, n_) += tau * tab.A(i, j) * F;
      }
      stage_solver_->solve(rhs, next);
      const double inc = stacked_norm(*p.op, next - X, s_);
      const double scale = stacked_norm(*p.op, next, s_);
      X.swap(next);
      check_convergence(inc, scale, iter);
      if (inc <= cfg_.fixed_point_tol * std::max(1.0, scale)) break;
    }
  }

  Vector u_next = u_n;
  Vector MU(n_);
  for (Index i = 0; i < s_; ++i) {
    stages_[i] = X.segment(i * n_, n_);
    p.op->apply(stages_[i], MU);
    const Vector F = eval_F(p, stage_times_[i], stages_[i]);
    u_next += (tau * tab.b[i]) * (MU + F);
    if (tab.b_noise[i] != 0.0) u_next += tab.b_noise[i] * Bw[i];
  }
  return u_next;
}

Vector Stepper::step_implicit_euler(const Vector& u_n, double t_n, const Vector& dW) {
  const Problem& p = *problem_;
  const double tau = cfg_.tau;
  const double t1 = t_n + tau;
  const Vector image = p.diffusion->is_zero() ? Vector() : Vector(p.diffusion->columns() * dW);
  const Vector base = u_n + noise_term(t1, image);
  Vector u;
  if (!fixed_point_) {
    stage_solver_->solve(base + tau * drift_offset(p, t1), u);
  } else {
    u = u_n;
    Vector next;
    for (int iter = 1;; ++iter) {
      stage_solver_->solve(base + tau * eval_F(p, t1, u), next);
      const double inc = std::sqrt(p.op->norm_sq(next - u));
      const double scale = std::sqrt(p.op->norm_sq(next));
      u.swap(next);
      check_convergence(inc, scale, iter);
      if (inc <= cfg_.fixed_point_tol * std::max(1.0, scale)) break;
    }
  }
  stages_[0] = u;
  stage_times_[0] = t1;
  return u;
}

Vector Stepper::step_midpoint(const Vector& u_n, double t_n, const Vector& dW) {
  const Problem& p = *problem_;
  const double tau = cfg_.tau;
  const double th = t_n + 0.5 * tau;
  const Vector image = p.diffusion->is_zero() ? Vector() : Vector(p.diffusion->columns() * dW);
  const Vector base = u_n + 0.5 * tau * p.op->apply(u_n) + noise_term(th, image);
  Vector u;
  if (!fixed_point_) {
    const Vector off = drift_offset(p, th);
    stage_solver_->solve(base + 0.5 * tau * (eval_F(p, th, u_n) + off), u);
  } else {
    u = u_n;
    Vector next;
    for (int iter = 1;; ++iter) {
      stage_solver_->solve(base + tau * eval_F(p, th, 0.5 * (u_n + u)), next);
      const double inc = std::sqrt(p.op->norm_sq(next - u));
      const double scale = std::sqrt(p.op->norm_sq(next));
      u.swap(next);
      check_convergence(inc, scale, iter);
      if (inc <= cfg_.fixed_point_tol * std::max(1.0, scale)) break;
    }
  }
  stages_[0] = 0.5 * (u_n + u);
  stage_times_[0] = th;
  return u;
}

void Stepper::propagate_tangent(TangentFrame& frame) {
  const Problem& p = *problem_;
  const Tableau& tab = cfg_.tableau;
  const double tau = cfg_.tau;
  if (frame.columns.rows() != n_) throw LayoutMismatch("tangent frame has wrong row count");

  std::vector<SparseMatrix> J(static_cast<std::size_t>(s_));
  for (Index j = 0; j < s_; ++j) J[j] = jacobian_matrix(p, stage_times_[j], stages_[j]);

  std::unique_ptr<StageLinearSolver> local;
  const StageLinearSolver* solver = tangent_solver_.get();
  if (!solver) {
    std::unique_ptr<StageLinearSolver> built;
    bool same_jacobian = true;
    for (Index j = 1; j < s_; ++j)
      same_jacobian = same_jacobian && (Matrix(J[j]) - Matrix(J[0])).cwiseAbs().maxCoeff() == 0.0;
    if (same_jacobian && s_ == 1 && is_diagonal(J[0])) {
      built = std::make_unique<StageLinearSolver>(*p.op, tab.A, tau, Vector(J[0].diagonal()));
    } else if (same_jacobian) {
      built = std::make_unique<StageLinearSolver>(*p.op, tab.A, tau, std::nullopt, &J[0]);
    } else {
      // Stage-dependent Jacobians: assemble block (i, j) = delta_ij I - tau a_ij (M + J_j).
      const SparseMatrix M = p.op->matrix();
      const Index N = s_ * n_;
      std::vector<Eigen::Triplet<double>> trip;
      for (Index k = 0; k < N; ++k) trip.emplace_back(k, k, 1.0);
      for (Index j = 0; j < s_; ++j) {
        const SparseMatrix L = M + J[j];
        for (Index i = 0; i < s_; ++i) {
          const double a = tab.A(i, j);
          if (a == 0.0) continue;
          for (Index col = 0; col < L.outerSize(); ++col)
            for (SparseMatrix::InnerIterator it(L, col); it; ++it)
              trip.emplace_back(i * n_ + it.row(), j * n_ + it.col(), -tau * a * it.value());
        }
      }
      SparseMatrix sys(N, N);
      sys.setFromTriplets(trip.begin(), trip.end());
      Eigen::SparseLU<SparseMatrix> lu(sys);
      if (lu.info() != Eigen::Success) throw StageSolveFailure("tangent system: factorization failed");
      Matrix rhs(N, frame.columns.cols());
      for (Index i = 0; i < s_; ++i) rhs.middleRows(i * n_, n_) = frame.columns;
      const Matrix dU = lu.solve(rhs);
      Matrix next = frame.columns;
      for (Index i = 0; i < s_; ++i) {
        const Matrix block = dU.middleRows(i * n_, n_);
        next += tau * tab.b[i] * (M * block + J[i] * block);
      }
      frame.columns = std::move(next);
      ++frame.step;
      return;
    }
    if (is_affine(p.drift)) {
      tangent_solver_ = std::move(built);
      solver = tangent_solver_.get();
    } else {
      local = std::move(built);
      solver = local.get();
    }
  }

  Matrix rhs(s_ * n_, frame.columns.cols());
  for (Index i = 0; i < s_; ++i) rhs.middleRows(i * n_, n_) = frame.columns;
  const Matrix dU = solver->solve(rhs);
  Matrix next = frame.columns;
  Vector col(n_), Mcol(n_);
  for (Index i = 0; i < s_; ++i) {
    for (Index c = 0; c < dU.cols(); ++c) {
      col = dU.col(c).segment(i * n_, n_);
      p.op->apply(col, Mcol);
      next.col(c) += tau * tab.b[i] * (Mcol + J[i] * col);
    }
  }
  frame.columns = std::move(next);
  ++frame.step;
}

// --------------------------------------------------------------------------

Vector rk_step(const StepperConfig& cfg, std::shared_ptr<const Problem> problem, const Vector& u_n,
               double t_n, const Vector& dW) {
  Stepper stepper(cfg, std::move(problem));
  return stepper.step(u_n, t_n, dW);
}

FieldState rk_step(const StepperConfig& cfg, std::shared_ptr<const Problem> problem,
                   const FieldState& u_n, double t_n, const Vector& dW) {
  if (u_n.layout != problem->op->layout()) throw LayoutMismatch("rk_step: layout mismatch");
  auto layout = u_n.layout;
  return {rk_step(cfg, std::move(problem), u_n.data, t_n, dW), layout};
}

TangentFrame propagate_tangent(const StepperConfig& cfg, std::shared_ptr<const Problem> problem,
                               const TangentFrame& frame, const Vector& u_n, double t_n,
                               const Vector& dW) {
  Stepper stepper(cfg, std::move(problem));
  stepper.step(u_n, t_n, dW);
  TangentFrame out = frame;
  stepper.propagate_tangent(out);
  return out;
}

void check_path_horizon(const StepperConfig& cfg, const Problem& problem, const NoisePath& path) {
  if (std::abs(path.tau - cfg.tau) > 1e-12 * std::max(1.0, cfg.tau))
    throw ConfigError("noise path step " + std::to_string(path.tau) +
                      " differs from stepper tau " + std::to_string(cfg.tau));
  if (std::abs(double(path.N) * path.tau - problem.T) > 1e-12 * std::max(1.0, problem.T))
    throw ConfigError("N * tau = " + std::to_string(double(path.N) * path.tau) +
                      " does not equal the horizon T = " + std::to_string(problem.T));
  if (path.N > 0 && path.modes() != problem.diffusion->modes())
    throw LayoutMismatch("noise path mode count does not match the covariance");
}

namespace {

template <class E>
[[noreturn]] void rethrow_at(const E& e, Index n) {
  throw E("step " + std::to_string(n) + ": " + e.what());
}

}  // namespace

Trajectory integrate(const StepperConfig& cfg, std::shared_ptr<const Problem> problem,
                     const NoisePath& path, Index thin) {
  if (thin < 1) throw ConfigError("integrate: thinning must be positive");
  Trajectory traj;
  traj.layout = problem->op->layout();
  traj.times.push_back(0.0);
  traj.states.push_back(problem->u0);
  if (path.N == 0) return traj;
  check_path_horizon(cfg, *problem, path);

  Stepper stepper(cfg, problem);
  Vector u = problem->u0;
  for (Index n = 0; n < path.N; ++n) {
    const double t_n = double(n) * cfg.tau;
    try {
      u = stepper.step(u, t_n, path.increment(n));
    } catch (const FixedPointDivergence& e) {
      rethrow_at(e, n);
    } catch (const StageSolveFailure& e) {
      rethrow_at(e, n);
    } catch (const LayoutMismatch& e) {
      rethrow_at(e, n);
    }
    if ((n + 1) % thin == 0) {
      traj.times.push_back(double(n + 1) * cfg.tau);
      traj.states.push_back(u);
    }
  }
  return traj;
}

}  // namespace srkmax
