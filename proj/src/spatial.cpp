#include "srkmax/spatial.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <numbers>

namespace srkmax {

std::string to_string(Component c) {
  switch (c) {
    case Component::Ey:
      return "Ey";
    case Component::Ez:
      return "Ez";
    case Component::Hx:
      return "Hx";
    case Component::Hy:
      return "Hy";
    case Component::Hz:
      return "Hz";
    case Component::E_mode:
      return "E_mode";
    case Component::H_mode:
      return "H_mode";
  }
  return "?";
}

bool is_electric(Component c) {
  return c == Component::Ey || c == Component::Ez || c == Component::E_mode;
}

double inner_product(const FieldState& u, const FieldState& v) {
  if (!u.layout || u.layout != v.layout || u.data.size() != u.layout->size() ||
      v.data.size() != v.layout->size())
    throw LayoutMismatch("inner_product: states do not share a layout");
  const Vector w = u.layout->weights();
  return (w.array() * u.data.array() * v.data.array()).sum();
}

double energy(const FieldState& u) { return inner_product(u, u); }

// --------------------------------------------------------------------------
// SkewOperator

namespace {

class SparseShiftedSolver final : public ShiftedSolver {
 public:
  SparseShiftedSolver(const SparseMatrix& M, double gamma, const Vector& shift) {
    const Index n = M.rows();
    SparseMatrix I(n, n);
    I.setIdentity();
    system_ = I - gamma * M;
    if (shift.size() == n) {
      for (Index k = 0; k < n; ++k) system_.coeffRef(k, k) -= gamma * shift[k];
    }
    system_.makeCompressed();
    lu_.compute(system_);
    if (lu_.info() != Eigen::Success) throw StageSolveFailure("shifted solve: factorization failed");
  }

  void solve(const Vector& rhs, Vector& x) const override {
    x = lu_.solve(rhs);
    const double rnorm = (system_ * x - rhs).norm();
    if (!(rnorm <= 1e-10 * std::max(rhs.norm(), 1e-300)) && rhs.norm() > 0.0)
      throw StageSolveFailure("shifted solve: residual " + std::to_string(rnorm) +
                              " above tolerance");
  }

 private:
  SparseMatrix system_;
  Eigen::SparseLU<SparseMatrix> lu_;
};

}  // namespace

SkewOperator::SkewOperator(std::shared_ptr<const FieldLayout> layout)
    : layout_(std::move(layout)), weights_(layout_->weights()) {}

SparseMatrix SkewOperator::matrix() const {
  const Index n = dim();
  std::vector<Eigen::Triplet<double>> triplets;
  Vector e = Vector::Zero(n);
  Vector col(n);
  for (Index j = 0; j < n; ++j) {
    e[j] = 1.0;
    apply(e, col);
    e[j] = 0.0;
    for (Index i = 0; i < n; ++i)
      if (col[i] != 0.0) triplets.emplace_back(i, j, col[i]);
  }
  SparseMatrix M(n, n);
  M.setFromTriplets(triplets.begin(), triplets.end());
  return M;
}

std::unique_ptr<ShiftedSolver> SkewOperator::shifted_solver(double gamma,
                                                            const Vector& shift) const {
  return std::make_unique<SparseShiftedSolver>(matrix(), gamma, shift);
}

double SkewOperator::inner(const Vector& u, const Vector& v) const {
  return (weights_.array() * u.array() * v.array()).sum();
}

double SkewOperator::graph_norm_sq(const Vector& u, int k) const {
  Vector v = u;
  for (int p = 0; p < k; ++p) v = apply(v);
  return norm_sq(u) + norm_sq(v);
}

FieldState solve_shifted(const SkewOperator& op, double gamma, const FieldState& rhs) {
  if (gamma < 0.0) throw ConfigError("solve_shifted: gamma must be nonnegative");
  if (rhs.layout != op.layout()) throw LayoutMismatch("solve_shifted: layout mismatch");
  FieldState x{Vector(rhs.size()), rhs.layout};
  op.shifted_solver(gamma)->solve(rhs.data, x.data);
  return x;
}

// --------------------------------------------------------------------------
// 1D staggered operator

Grid1D Grid1D::uniform(Index m, double L, double eps, double mu) {
  return Grid1D{m, L, Vector::Constant(1, eps), Vector::Constant(1, mu)};
}

void Grid1D::validate() const {
  if (m < 2) throw ConfigError("Grid1D: m must be at least 2");
  if (!(L > 0.0)) throw ConfigError("Grid1D: L must be positive");
  if (!(eps.size() == 1 || eps.size() == m)) throw ConfigError("Grid1D: eps has wrong size");
  if (!(mu.size() == 1 || mu.size() == m + 1)) throw ConfigError("Grid1D: mu has wrong size");
  if (!(eps.minCoeff() > 0.0) || !(mu.minCoeff() > 0.0))
    throw ConfigError("Grid1D: eps and mu must be positive");
}

namespace {

std::shared_ptr<const FieldLayout> layout_1d(const Grid1D& g, const Vector& eps,
                                             const Vector& mu) {
  auto layout = std::make_shared<FieldLayout>();
  layout->backend = "maxwell1d";
  const Index m = g.m;
  const double dx = g.dx();
  layout->n_electric = m;
  layout->dofs.reserve(2 * m + 1);
  layout->material.resize(2 * m + 1);
  layout->measure = Vector::Constant(2 * m + 1, dx);
  for (Index i = 0; i < m; ++i) {
    layout->dofs.push_back({Component::Ey, double(i + 1) * dx, 0.0});
    layout->material[i] = eps[i];
  }
  for (Index j = 0; j <= m; ++j) {
    layout->dofs.push_back({Component::Hz, (double(j) + 0.5) * dx, 0.0});
    layout->material[m + j] = mu[j];
  }
  return layout;
}

Vector expand(const Vector& v, Index n) { return v.size() == 1 ? Vector::Constant(n, v[0]) : v; }

// Tridiagonal elimination in the interleaved ordering H_0, E_1, H_1, ..., E_m, H_m.
// Pivots exist without pivoting because the diagonally rescaled system has a
// positive definite symmetric part.
class TridiagonalShiftedSolver final : public ShiftedSolver {
 public:
  TridiagonalShiftedSolver(const Maxwell1D& op, double gamma, const Vector& shift) : m_(op.m()) {
    const Index n = 2 * m_ + 1;
    const double inv_dx = 1.0 / op.grid().dx();
    const Vector& eps = op.eps_nodes();
    const Vector& mu = op.mu_nodes();
    Vector lower = Vector::Zero(n), diag(n), upper = Vector::Zero(n);
    for (Index p = 0; p < n; ++p) {
      const Index natural = natural_index(p);
      const double d = shift.size() == n ? shift[natural] : 0.0;
      diag[p] = 1.0 - gamma * d;
      if (p % 2 == 1) {
        // E_i row: E_i + gamma/eps_i (H_i - H_{i-1}) / dx
        const Index i = (p + 1) / 2;
        const double a = gamma * inv_dx / eps[i - 1];
        lower[p] = -a;
        upper[p] = a;
      } else {
        // H_j row: H_j + gamma/mu_j (E_{j+1} - E_j) / dx
        const Index j = p / 2;
        const double a = gamma * inv_dx / mu[j];
        if (p > 0) lower[p] = -a;
        if (p < n - 1) upper[p] = a;
      }
    }
    lower_ = lower;
    upper_ = upper;
    inv_pivot_.resize(n);
    double prev_ratio = 0.0;
    upper_mod_.resize(n);
    for (Index p = 0; p < n; ++p) {
      const double pivot = diag[p] - (p > 0 ? lower[p] * prev_ratio : 0.0);
      if (pivot == 0.0 || !std::isfinite(pivot))
        throw StageSolveFailure("tridiagonal solve: zero pivot");
      inv_pivot_[p] = 1.0 / pivot;
      upper_mod_[p] = upper[p] * inv_pivot_[p];
      prev_ratio = upper_mod_[p];
    }
  }

  void solve(const Vector& rhs, Vector& x) const override {
    const Index n = 2 * m_ + 1;
    thread_local Vector work;
    work.resize(n);
    double prev = 0.0;
    for (Index p = 0; p < n; ++p) {
      const double r = rhs[natural_index(p)];
      prev = (r - (p > 0 ? lower_[p] * prev : 0.0)) * inv_pivot_[p];
      work[p] = prev;
    }
    x.resize(n);
    double next = work[n - 1];
    x[natural_index(n - 1)] = next;
    for (Index p = n - 2; p >= 0; --p) {
      next = work[p] - upper_mod_[p] * next;
      x[natural_index(p)] = next;
    }
  }

 private:
  Index natural_index(Index p) const { return (p % 2 == 1) ? (p - 1) / 2 : m_ + p / 2; }

  Index m_;
  Vector lower_;
  Vector upper_;
  Vector upper_mod_;
  Vector inv_pivot_;
};

}  // namespace

Maxwell1D::Maxwell1D(Grid1D grid)
    : SkewOperator((grid.validate(),
                    layout_1d(grid, expand(grid.eps, grid.m), expand(grid.mu, grid.m + 1)))),
      grid_(std::move(grid)),
      eps_(expand(grid_.eps, grid_.m)),
      mu_(expand(grid_.mu, grid_.m + 1)),
      inv_dx_(1.0 / grid_.dx()) {}

void Maxwell1D::apply(const Vector& u, Vector& out) const {
  const Index m = grid_.m;
  out.resize(2 * m + 1);
  const double* E = u.data();
  const double* H = u.data() + m;
  for (Index i = 0; i < m; ++i) out[i] = -(H[i + 1] - H[i]) * inv_dx_ / eps_[i];
  for (Index j = 0; j <= m; ++j) {
    const double right = j < m ? E[j] : 0.0;
    const double left = j > 0 ? E[j - 1] : 0.0;
    out[m + j] = -(right - left) * inv_dx_ / mu_[j];
  }
}

std::unique_ptr<ShiftedSolver> Maxwell1D::shifted_solver(double gamma, const Vector& shift) const {
  return std::make_unique<TridiagonalShiftedSolver>(*this, gamma, shift);
}

std::shared_ptr<const Maxwell1D> build_maxwell_1d(const Grid1D& grid) {
  return std::make_shared<Maxwell1D>(grid);
}

// --------------------------------------------------------------------------
// 2D TM mimetic operator

void Grid2DTM::validate() const {
  if (nx < 3 || ny < 3) throw ConfigError("Grid2DTM: nx and ny must be at least 3");
  if (!(dx > 0.0) || !(dy > 0.0)) throw ConfigError("Grid2DTM: spacings must be positive");
  if (!(eps > 0.0) || !(mu > 0.0)) throw ConfigError("Grid2DTM: eps and mu must be positive");
}

namespace {

std::shared_ptr<const FieldLayout> layout_2d(const Grid2DTM& g) {
  g.validate();
  auto layout = std::make_shared<FieldLayout>();
  layout->backend = "maxwell2d_tm";
  const Index nx = g.nx, ny = g.ny;
  const Index n = nx * ny + nx * (ny + 1) + (nx + 1) * ny;
  layout->n_electric = nx * ny;
  layout->dofs.reserve(n);
  layout->material.resize(n);
  layout->measure.resize(n);
  const double cell = g.dx * g.dy;
  Index k = 0;
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i < nx; ++i, ++k) {
      layout->dofs.push_back({Component::Ez, (double(i) + 0.5) * g.dx, (double(j) + 0.5) * g.dy});
      layout->material[k] = g.eps;
      layout->measure[k] = cell;
    }
  for (Index j = 0; j <= ny; ++j)
    for (Index i = 0; i < nx; ++i, ++k) {
      layout->dofs.push_back({Component::Hx, (double(i) + 0.5) * g.dx, double(j) * g.dy});
      layout->material[k] = g.mu;
      layout->measure[k] = (j == 0 || j == ny) ? 0.5 * cell : cell;
    }
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i <= nx; ++i, ++k) {
      layout->dofs.push_back({Component::Hy, double(i) * g.dx, (double(j) + 0.5) * g.dy});
      layout->material[k] = g.mu;
      layout->measure[k] = (i == 0 || i == nx) ? 0.5 * cell : cell;
    }
  return layout;
}

}  // namespace

Maxwell2DTM::Maxwell2DTM(Grid2DTM grid)
    : SkewOperator(layout_2d(grid)),
      grid_(grid),
      n_ez_(grid.nx * grid.ny),
      n_hx_(grid.nx * (grid.ny + 1)),
      n_hy_((grid.nx + 1) * grid.ny) {}

void Maxwell2DTM::apply(const Vector& u, Vector& out) const {
  const Index nx = grid_.nx, ny = grid_.ny;
  const double idx = 1.0 / grid_.dx, idy = 1.0 / grid_.dy;
  const double ie = 1.0 / grid_.eps, im = 1.0 / grid_.mu;
  out.resize(u.size());
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i < nx; ++i) {
      const double dHy = (u[hy_index(i + 1, j)] - u[hy_index(i, j)]) * idx;
      const double dHx = (u[hx_index(i, j + 1)] - u[hx_index(i, j)]) * idy;
      out[ez_index(i, j)] = ie * (dHy - dHx);
    }
  auto ez = [&](Index i, Index j) {
    return (i < 0 || j < 0 || i >= nx || j >= ny) ? 0.0 : u[ez_index(i, j)];
  };
  for (Index j = 0; j <= ny; ++j) {
    const double h = (j == 0 || j == ny) ? 0.5 : 1.0;
    for (Index i = 0; i < nx; ++i)
      out[hx_index(i, j)] = -im * (ez(i, j) - ez(i, j - 1)) * idy / h;
  }
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i <= nx; ++i) {
      const double h = (i == 0 || i == nx) ? 0.5 : 1.0;
      out[hy_index(i, j)] = im * (ez(i, j) - ez(i - 1, j)) * idx / h;
    }
}

Vector Maxwell2DTM::curl(const Vector& phi) const {
  const Index nx = grid_.nx, ny = grid_.ny;
  if (phi.size() != n_ez_) throw LayoutMismatch("curl: expected a cell-centered field");
  Vector out = Vector::Zero(dim());
  auto at = [&](Index i, Index j) {
    return (i < 0 || j < 0 || i >= nx || j >= ny) ? 0.0 : phi[ez_index(i, j)];
  };
  for (Index j = 0; j <= ny; ++j) {
    const double h = (j == 0 || j == ny) ? 0.5 : 1.0;
    for (Index i = 0; i < nx; ++i) out[hx_index(i, j)] = -(at(i, j) - at(i, j - 1)) / (h * grid_.dy);
  }
  for (Index j = 0; j < ny; ++j)
    for (Index i = 0; i <= nx; ++i) {
      const double h = (i == 0 || i == nx) ? 0.5 : 1.0;
      out[hy_index(i, j)] = (at(i, j) - at(i - 1, j)) / (h * grid_.dx);
    }
  return out;
}

Vector Maxwell2DTM::div_h(const Vector& state) const {
  const Index nx = grid_.nx, ny = grid_.ny;
  Vector out(n_div_nodes());
  Index k = 0;
  for (Index j = 1; j < ny; ++j)
    for (Index i = 1; i < nx; ++i, ++k) {
      const double ddx = (state[hx_index(i, j)] - state[hx_index(i - 1, j)]) / grid_.dx;
      const double ddy = (state[hy_index(i, j)] - state[hy_index(i, j - 1)]) / grid_.dy;
      out[k] = ddx + ddy;
    }
  return out;
}

Vector Maxwell2DTM::div_mu_h(const Vector& state) const { return grid_.mu * div_h(state); }

std::shared_ptr<const Maxwell2DTM> build_maxwell_2d_tm(const Grid2DTM& grid) {
  return std::make_shared<Maxwell2DTM>(grid);
}

// --------------------------------------------------------------------------
// Spectral mixed-basis operator

namespace {

std::shared_ptr<const FieldLayout> layout_spectral(Index m, double eps, double mu) {
  if (m < 1) throw ConfigError("spectral backend: need at least one mode");
  if (!(eps > 0.0) || !(mu > 0.0)) throw ConfigError("spectral backend: eps, mu must be positive");
  auto layout = std::make_shared<FieldLayout>();
  layout->backend = "spectral";
  layout->n_electric = m;
  layout->material.resize(2 * m);
  layout->measure = Vector::Ones(2 * m);
  for (Index j = 0; j < m; ++j) {
    layout->dofs.push_back({Component::E_mode, double(j + 1), 0.0});
    layout->material[j] = eps;
  }
  for (Index j = 0; j < m; ++j) {
    layout->dofs.push_back({Component::H_mode, double(j + 1), 0.0});
    layout->material[m + j] = mu;
  }
  return layout;
}

class SpectralShiftedSolver final : public ShiftedSolver {
 public:
  SpectralShiftedSolver(const SpectralMaxwell& op, double gamma, const Vector& shift)
      : m_(op.modes()), a11_(m_), a12_(m_), a21_(m_), a22_(m_), inv_det_(m_) {
    for (Index j = 0; j < m_; ++j) {
      const double k = op.wavenumber(j + 1);
      const double de = shift.size() == 2 * m_ ? shift[j] : 0.0;
      const double dh = shift.size() == 2 * m_ ? shift[m_ + j] : 0.0;
      a11_[j] = 1.0 - gamma * de;
      a12_[j] = -gamma * k / op.eps();
      a21_[j] = gamma * k / op.mu();
      a22_[j] = 1.0 - gamma * dh;
      const double det = a11_[j] * a22_[j] - a12_[j] * a21_[j];
      if (det == 0.0) throw StageSolveFailure("spectral shifted solve: singular mode block");
      inv_det_[j] = 1.0 / det;
    }
  }

  void solve(const Vector& rhs, Vector& x) const override {
    x.resize(2 * m_);
    for (Index j = 0; j < m_; ++j) {
      const double re = rhs[j], rh = rhs[m_ + j];
      x[j] = (a22_[j] * re - a12_[j] * rh) * inv_det_[j];
      x[m_ + j] = (a11_[j] * rh - a21_[j] * re) * inv_det_[j];
    }
  }

 private:
  Index m_;
  Vector a11_, a12_, a21_, a22_, inv_det_;
};

}  // namespace

SpectralMaxwell::SpectralMaxwell(Index modes, double L, double eps, double mu)
    : SkewOperator(layout_spectral(modes, eps, mu)), m_(modes), L_(L), eps_(eps), mu_(mu) {
  if (!(L > 0.0)) throw ConfigError("spectral backend: L must be positive");
  const Index Q = std::max<Index>(4 * modes, 64);
  quad_weight_ = L / double(Q);
  points_.backend = "spectral";
  points_.n_electric = Q;
  points_.material.resize(2 * Q);
  points_.measure = Vector::Constant(2 * Q, quad_weight_);
  sine_.resize(Q, modes);
  cosine_.resize(Q, modes);
  const double norm = std::sqrt(2.0 / L);
  for (Index q = 0; q < Q; ++q) {
    const double x = (double(q) + 0.5) * quad_weight_;
    for (Index j = 0; j < modes; ++j) {
      const double kx = wavenumber(j + 1) * x;
      sine_(q, j) = norm * std::sin(kx);
      cosine_(q, j) = norm * std::cos(kx);
    }
  }
  for (Index q = 0; q < Q; ++q) {
    points_.dofs.push_back({Component::Ey, (double(q) + 0.5) * quad_weight_, 0.0});
    points_.material[q] = eps;
  }
  for (Index q = 0; q < Q; ++q) {
    points_.dofs.push_back({Component::Hz, (double(q) + 0.5) * quad_weight_, 0.0});
    points_.material[Q + q] = mu;
  }
}

double SpectralMaxwell::wavenumber(Index j) const { return double(j) * std::numbers::pi / L_; }

void SpectralMaxwell::apply(const Vector& u, Vector& out) const {
  out.resize(2 * m_);
  for (Index j = 0; j < m_; ++j) {
    const double k = wavenumber(j + 1);
    out[j] = k * u[m_ + j] / eps_;
    out[m_ + j] = -k * u[j] / mu_;
  }
}

std::unique_ptr<ShiftedSolver> SpectralMaxwell::shifted_solver(double gamma,
                                                               const Vector& shift) const {
  return std::make_unique<SpectralShiftedSolver>(*this, gamma, shift);
}

Vector SpectralMaxwell::project(const Vector& values) const {
  const Index Q = sine_.rows();
  if (values.size() != 2 * Q) throw LayoutMismatch("spectral project: wrong sample count");
  Vector out(2 * m_);
  out.head(m_) = quad_weight_ * sine_.transpose() * values.head(Q);
  out.tail(m_) = quad_weight_ * cosine_.transpose() * values.tail(Q);
  return out;
}

Vector SpectralMaxwell::synthesize(const Vector& state) const {
  const Index Q = sine_.rows();
  Vector out(2 * Q);
  out.head(Q) = sine_ * state.head(m_);
  out.tail(Q) = cosine_ * state.tail(m_);
  return out;
}

Vector SpectralMaxwell::exp_apply(double t, const Vector& u) const {
  Vector out(2 * m_);
  const double ratio_e = std::sqrt(mu_ / eps_);
  const double ratio_h = std::sqrt(eps_ / mu_);
  for (Index j = 0; j < m_; ++j) {
    const double omega = wavenumber(j + 1) / std::sqrt(eps_ * mu_);
    const double c = std::cos(omega * t), s = std::sin(omega * t);
    const double e = u[j], h = u[m_ + j];
    out[j] = c * e + ratio_e * s * h;
    out[m_ + j] = c * h - ratio_h * s * e;
  }
  return out;
}

std::shared_ptr<const SpectralMaxwell> build_spectral_hamiltonian(Index modes, double L,
                                                                  double eps, double mu) {
  return std::make_shared<SpectralMaxwell>(modes, L, eps, mu);
}

}  // namespace srkmax
