#pragma once

#include "srkmax/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace srkmax {

enum class Component { Ey, Ez, Hx, Hy, Hz, E_mode, H_mode };

std::string to_string(Component c);
bool is_electric(Component c);

struct Dof {
  Component component;
  double x = 0.0;
  double y = 0.0;
};

/// A set of field samples with their material coefficient (eps or mu) and
/// quadrature measure. The first `n_electric` entries are electric.
///
/// Used both as the degree-of-freedom layout of a state and as the set of
/// physical points at which pointwise data (noise modes, profiles) is sampled.
struct PointSet {
  std::string backend;
  std::vector<Dof> dofs;
  Vector material;
  Vector measure;
  Index n_electric = 0;

  Index size() const { return static_cast<Index>(dofs.size()); }
  Vector weights() const { return material.cwiseProduct(measure); }
};

using FieldLayout = PointSet;

/// A discrete (E, H) state. `data` follows `layout`, whose weights define <.,.>_H.
struct FieldState {
  Vector data;
  std::shared_ptr<const FieldLayout> layout;

  Index size() const { return data.size(); }
};

double inner_product(const FieldState& u, const FieldState& v);
double energy(const FieldState& u);

/// Solves (I - gamma (M + diag(d))) x = rhs. Factorization happens in the constructor.
class ShiftedSolver {
 public:
  virtual ~ShiftedSolver() = default;
  virtual void solve(const Vector& rhs, Vector& x) const = 0;
  Vector solve(const Vector& rhs) const {
    Vector x(rhs.size());
    solve(rhs, x);
    return x;
  }
};

enum class OperatorStructure { banded, block_sparse, diagonal_in_modes };

/// Discrete Maxwell operator, skew-adjoint with respect to the weighted inner
/// product of its layout: <Mu, v>_H = -<u, Mv>_H.
class SkewOperator {
 public:
  explicit SkewOperator(std::shared_ptr<const FieldLayout> layout);
  virtual ~SkewOperator() = default;

  const std::shared_ptr<const FieldLayout>& layout() const { return layout_; }
  Index dim() const { return layout_->size(); }
  const Vector& weights() const { return weights_; }

  virtual void apply(const Vector& u, Vector& out) const = 0;
  Vector apply(const Vector& u) const {
    Vector out(u.size());
    apply(u, out);
    return out;
  }

  virtual OperatorStructure structure() const = 0;

  /// Sparse matrix of M, assembled by probing unit vectors unless overridden.
  virtual SparseMatrix matrix() const;

  /// Factored solver for (I - gamma (M + diag(shift))). `shift` may be empty.
  virtual std::unique_ptr<ShiftedSolver> shifted_solver(double gamma,
                                                        const Vector& shift = Vector()) const;

  /// Physical points where pointwise fields are sampled. For physical-space
  /// backends these are the degrees of freedom themselves.
  virtual const PointSet& sample_points() const { return *layout_; }
  /// Maps point samples to a state (identity for physical-space backends).
  virtual Vector project(const Vector& point_values) const { return point_values; }
  /// Maps a state to its point samples (identity for physical-space backends).
  virtual Vector synthesize(const Vector& state) const { return state; }

  double inner(const Vector& u, const Vector& v) const;
  double norm_sq(const Vector& u) const { return inner(u, u); }

  /// ||u||^2 + ||M^k u||^2 with the discrete M (backend dependent).
  double graph_norm_sq(const Vector& u, int k) const;

 protected:
  std::shared_ptr<const FieldLayout> layout_;
  Vector weights_;
};

/// 1D PEC segment [0, L]: E at interior nodes x_i = i dx, H at half nodes.
struct Grid1D {
  Index m = 0;
  double L = 1.0;
  Vector eps;  // size m, or size 1 for a constant
  Vector mu;   // size m + 1, or size 1 for a constant

  static Grid1D uniform(Index m, double L, double eps, double mu);
  double dx() const { return L / double(m + 1); }
  void validate() const;
};

class Maxwell1D final : public SkewOperator {
 public:
  explicit Maxwell1D(Grid1D grid);

  using SkewOperator::apply;
  void apply(const Vector& u, Vector& out) const override;
  OperatorStructure structure() const override { return OperatorStructure::banded; }
  std::unique_ptr<ShiftedSolver> shifted_solver(double gamma,
                                                const Vector& shift = Vector()) const override;

  const Grid1D& grid() const { return grid_; }
  Index m() const { return grid_.m; }
  const Vector& eps_nodes() const { return eps_; }
  const Vector& mu_nodes() const { return mu_; }

 private:
  Grid1D grid_;
  Vector eps_;
  Vector mu_;
  double inv_dx_;
};

std::shared_ptr<const Maxwell1D> build_maxwell_1d(const Grid1D& grid);

/// 2D transverse-magnetic reduction on [0, nx dx] x [0, ny dy] with PEC walls.
/// E_z lives at cell centers, H_x on horizontal edges (i + 1/2, j) and H_y on
/// vertical edges (i, j + 1/2). Boundary edges carry half quadrature weight.
struct Grid2DTM {
  Index nx = 0;
  Index ny = 0;
  double dx = 0.0;
  double dy = 0.0;
  double eps = 1.0;
  double mu = 1.0;

  void validate() const;
};

class Maxwell2DTM final : public SkewOperator {
 public:
  explicit Maxwell2DTM(Grid2DTM grid);

  using SkewOperator::apply;
  void apply(const Vector& u, Vector& out) const override;
  OperatorStructure structure() const override { return OperatorStructure::block_sparse; }

  const Grid2DTM& grid() const { return grid_; }

  Index ez_index(Index i, Index j) const { return j * grid_.nx + i; }
  Index hx_index(Index i, Index j) const { return n_ez_ + j * grid_.nx + i; }
  Index hy_index(Index i, Index j) const { return n_ez_ + n_hx_ + j * (grid_.nx + 1) + i; }
  Index n_ez() const { return n_ez_; }
  Index n_hx() const { return n_hx_; }
  Index n_hy() const { return n_hy_; }

  /// Discrete curl of a cell-centered scalar: edge field (-d_y phi, d_x phi) as a
  /// full state vector with zero electric part.
  Vector curl(const Vector& phi_cells) const;

  /// Divergence of the H part of `state`, evaluated at interior nodes
  /// (i, j), 1 <= i < nx, 1 <= j < ny, scaled by mu.
  Vector div_mu_h(const Vector& state) const;

  /// Divergence of an edge field given as a full state vector (no mu factor).
  Vector div_h(const Vector& state) const;

  Index n_div_nodes() const { return (grid_.nx - 1) * (grid_.ny - 1); }

 private:
  Grid2DTM grid_;
  Index n_ez_;
  Index n_hx_;
  Index n_hy_;
};

std::shared_ptr<const Maxwell2DTM> build_maxwell_2d_tm(const Grid2DTM& grid);

/// Mixed-basis spectral surrogate on [0, L]: E in orthonormal sine modes, H in
/// orthonormal cosine modes, M = [[0, K/eps], [-K/mu, 0]] with K = diag(j pi / L).
class SpectralMaxwell final : public SkewOperator {
 public:
  SpectralMaxwell(Index modes, double L, double eps, double mu);

  using SkewOperator::apply;
  void apply(const Vector& u, Vector& out) const override;
  OperatorStructure structure() const override { return OperatorStructure::diagonal_in_modes; }
  std::unique_ptr<ShiftedSolver> shifted_solver(double gamma,
                                                const Vector& shift = Vector()) const override;

  const PointSet& sample_points() const override { return points_; }
  Vector project(const Vector& point_values) const override;
  Vector synthesize(const Vector& state) const override;

  Index modes() const { return m_; }
  double wavenumber(Index j) const;  // j is 1-based
  double eps() const { return eps_; }
  double mu() const { return mu_; }
  double length() const { return L_; }

  /// exp(t M) u, evaluated as one 2x2 rotation per mode.
  Vector exp_apply(double t, const Vector& u) const;

 private:
  Index m_;
  double L_;
  double eps_;
  double mu_;
  PointSet points_;
  Matrix sine_;    // quadrature points x modes
  Matrix cosine_;  // quadrature points x modes
  double quad_weight_;
};

std::shared_ptr<const SpectralMaxwell> build_spectral_hamiltonian(Index modes, double L,
                                                                  double eps, double mu);

/// One-off shifted solve; builds and discards a factorization.
FieldState solve_shifted(const SkewOperator& op, double gamma, const FieldState& rhs);

}  // namespace srkmax
