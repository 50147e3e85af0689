#pragma once

#include "srkmax/noise.hpp"
#include "srkmax/spatial.hpp"
#include "srkmax/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <variant>

namespace srkmax {

struct ZeroDrift {};

/// J_e = sigma_e E, J_m = sigma_m H, so F = (-sigma_e E / eps, -sigma_m H / mu).
struct LinearDamping {
  double sigma_e = 0.0;
  double sigma_m = 0.0;
};

/// F(t, u) = matrix u + g(t) offset.
struct AffineDrift {
  SparseMatrix matrix;
  Vector offset;
  std::function<double(double)> time_profile;
};

/// User drift with a declared H-norm Lipschitz constant and optional Jacobian action.
struct CustomDrift {
  std::function<Vector(double, const Vector&)> f;
  std::function<Vector(double, const Vector&, const Vector&)> jacobian;
  double lipschitz = 0.0;
  bool hamiltonian = false;
};

/// Canonical Hamiltonian drift on paired coordinates (E_k, H_k):
/// F = (kappa sin(H), -kappa sin(E)), the vector field of V = kappa sum(2 - cos E - cos H).
/// Requires as many electric as magnetic unknowns (the spectral backend).
struct HamiltonianSineDrift {
  double kappa = 0.0;
};

using DriftSpec = std::variant<ZeroDrift, LinearDamping, AffineDrift, CustomDrift,
                               HamiltonianSineDrift>;

bool is_affine(const DriftSpec& drift);
bool is_hamiltonian(const DriftSpec& drift);
bool has_exact_jacobian(const DriftSpec& drift);
std::string drift_name(const DriftSpec& drift);

struct Problem {
  std::shared_ptr<const SkewOperator> op;
  DriftSpec drift;
  CovarianceSpec covariance;
  NoiseProfile profile;
  std::shared_ptr<const DiffusionMap> diffusion;
  Vector u0;
  double T = 1.0;

  Index dim() const { return op->dim(); }
  FieldState initial_state() const { return {u0, op->layout()}; }
};

/// Validates dimensions and builds the diffusion map.
std::shared_ptr<const Problem> make_problem(std::shared_ptr<const SkewOperator> op, DriftSpec drift,
                                            CovarianceSpec covariance, NoiseProfile profile,
                                            Vector u0, double T);

Vector eval_F(const Problem& problem, double t, const Vector& u);
FieldState eval_F(const Problem& problem, double t, const FieldState& u);

/// Directional derivative of F at u. Drifts without an exact Jacobian use central
/// differences with step 1e-6 (1 + ||u||_H) unless `allow_fd` is false.
Vector eval_F_jacobian(const Problem& problem, double t, const Vector& u, const Vector& direction,
                       bool allow_fd = true);
FieldState eval_F_jacobian(const Problem& problem, double t, const FieldState& u,
                           const FieldState& direction);

/// Full Jacobian matrix of F at (t, u); columns by Jacobian action on unit vectors
/// for drifts without a closed form.
SparseMatrix jacobian_matrix(const Problem& problem, double t, const Vector& u);

/// For affine drifts: F(t, u) = linear_part u + affine_offset(t).
SparseMatrix drift_linear_part(const Problem& problem);
/// Diagonal of the linear part when it is diagonal, otherwise nullopt.
std::optional<Vector> drift_diagonal(const Problem& problem);
Vector drift_offset(const Problem& problem, double t);

/// H-norm Lipschitz constant of F(t, .).
double lipschitz_constant(const Problem& problem);
/// C with ||F(t, u)||_H <= C (1 + ||u||_H) on [0, T].
double growth_constant(const Problem& problem);

// Initial condition presets.
Vector zero_state(const SkewOperator& op);
/// E equal to the j-th sine mode of the domain (times amplitude), H = 0.
Vector single_mode_state(const SkewOperator& op, Index mode, double amplitude);
/// E = amplitude exp(-|x - center|^2 / (2 width^2)), H = 0.
Vector gaussian_bump_state(const SkewOperator& op, double cx, double cy, double width,
                           double amplitude);

}  // namespace srkmax
