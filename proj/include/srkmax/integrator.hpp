#pragma once

#include "srkmax/model.hpp"
#include "srkmax/noise.hpp"
#include "srkmax/tableau.hpp"
#include "srkmax/types.hpp"

#include <Eigen/SparseLU>

#include <memory>
#include <optional>
#include <vector>

namespace srkmax {

enum class StageSolverKind { automatic, direct_linear, fixed_point };
enum class Specialization { generic, implicit_euler_resolvent, midpoint_resolvent };

std::string to_string(StageSolverKind k);
std::string to_string(Specialization s);
StageSolverKind parse_stage_solver(std::string_view name);
Specialization parse_specialization(std::string_view name);

struct StepperConfig {
  Tableau tableau;
  double tau = 0.0;
  StageSolverKind stage_solver = StageSolverKind::automatic;
  double fixed_point_tol = 1e-12;
  int fixed_point_max_iter = 50;
  Specialization specialization = Specialization::generic;
};

/// Solves the coupled stage system (I - tau (A (x) (M + D))) X = R for stacked
/// stage vectors X, R of length s * dim. D is an optional drift matrix.
///
/// One stage with a diagonal D uses the backend's structured shifted solve;
/// everything else goes through a sparse LU of the assembled Kronecker system.
class StageLinearSolver {
 public:
  StageLinearSolver(const SkewOperator& op, const Matrix& A, double tau,
                    const std::optional<Vector>& diagonal_drift = Vector(),
                    const SparseMatrix* drift = nullptr);

  Index stages() const { return s_; }
  void solve(const Vector& rhs, Vector& x) const;
  Vector solve(const Vector& rhs) const {
    Vector x;
    solve(rhs, x);
    return x;
  }
  /// Column-wise solve for a block of right-hand sides.
  Matrix solve(const Matrix& rhs) const;

 private:
  Index s_;
  Index n_;
  std::unique_ptr<ShiftedSolver> shifted_;
  SparseMatrix system_;
  std::unique_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
};

/// Upper bound C_res on ||(I - tau (A (x) M))^{-1}|| in H^s from the coercivity
/// certificate; nullopt when no certificate is available.
std::optional<double> resolvent_bound(const Tableau& tab);

struct StepStats {
  int iterations = 0;
  std::vector<double> increments;  // successive-iterate distances of the stage solve
};

/// Columns are tangent vectors (one per initial direction).
struct TangentFrame {
  Matrix columns;
  Index step = 0;

  static TangentFrame identity(Index n) { return {Matrix::Identity(n, n), 0}; }
};

/// Stateful single-worker stepper: owns factorizations and scratch buffers for
/// one (config, problem) pair and caches the stage values of its last step.
class Stepper {
 public:
  Stepper(StepperConfig cfg, std::shared_ptr<const Problem> problem);

  const StepperConfig& config() const { return cfg_; }
  const Problem& problem() const { return *problem_; }

  /// u_{n+1} from u_n at time t_n with KL increment vector dW.
  Vector step(const Vector& u_n, double t_n, const Vector& dW);

  /// Linearized step applied to every frame column, around the stages of the last step().
  void propagate_tangent(TangentFrame& frame);

  const std::vector<Vector>& last_stages() const { return stages_; }
  const Vector& last_stage_times() const { return stage_times_; }
  const StepStats& last_stats() const { return stats_; }

  /// tau * L * C_A for the fixed-point iteration (nullopt when C_A is unknown).
  std::optional<double> contraction_bound() const { return contraction_; }
  bool uses_fixed_point() const { return fixed_point_; }

 private:
  Vector step_generic(const Vector& u_n, double t_n, const Vector& dW);
  Vector step_implicit_euler(const Vector& u_n, double t_n, const Vector& dW);
  Vector step_midpoint(const Vector& u_n, double t_n, const Vector& dW);
  Vector noise_term(double t, const Vector& dW_image) const;
  void check_convergence(double increment, double scale, int iter);

  StepperConfig cfg_;
  std::shared_ptr<const Problem> problem_;
  Index s_;
  Index n_;
  bool fixed_point_ = false;
  std::optional<double> contraction_;
  std::unique_ptr<StageLinearSolver> stage_solver_;  // includes D on the direct path
  std::unique_ptr<StageLinearSolver> tangent_solver_;  // cached for affine drifts
  std::vector<Vector> stages_;
  Vector stage_times_;
  StepStats stats_;
};

Vector rk_step(const StepperConfig& cfg, std::shared_ptr<const Problem> problem, const Vector& u_n,
               double t_n, const Vector& dW);
FieldState rk_step(const StepperConfig& cfg, std::shared_ptr<const Problem> problem,
                   const FieldState& u_n, double t_n, const Vector& dW);

/// Linearized step of the frame around the stages of the primal step from (u_n, t_n, dW).
TangentFrame propagate_tangent(const StepperConfig& cfg, std::shared_ptr<const Problem> problem,
                               const TangentFrame& frame, const Vector& u_n, double t_n,
                               const Vector& dW);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::shared_ptr<const FieldLayout> layout;
};

/// Runs path.N steps from problem.u0. Requires path.N * path.tau == T (1e-12) and
/// path.tau == cfg.tau. Errors are rethrown with the failing step index.
Trajectory integrate(const StepperConfig& cfg, std::shared_ptr<const Problem> problem,
                     const NoisePath& path, Index thin = 1);

/// Checks the horizon and step-size preconditions of integrate().
void check_path_horizon(const StepperConfig& cfg, const Problem& problem, const NoisePath& path);

}  // namespace srkmax
