#include "srkmax/model.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace srkmax {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

// Per-unknown damping rate sigma / material for LinearDamping.
Vector damping_rates(const Problem& p, const LinearDamping& d) {
  const FieldLayout& layout = *p.op->layout();
  Vector rate(layout.size());
  for (Index k = 0; k < layout.size(); ++k)
    rate[k] = -(k < layout.n_electric ? d.sigma_e : d.sigma_m) / layout.material[k];
  return rate;
}

void require_paired(const Problem& p) {
  const auto& layout = *p.op->layout();
  if (2 * layout.n_electric != layout.size())
    throw ConfigError("Hamiltonian sine drift needs paired E/H unknowns");
}

double sup_over_horizon(const std::function<double(double)>& g, double T) {
  if (!g) return 1.0;
  double sup = 0.0;
  for (int k = 0; k <= 1000; ++k) sup = std::max(sup, std::abs(g(T * k / 1000.0)));
  return sup;
}

}  // namespace

bool is_affine(const DriftSpec& drift) {
  return std::holds_alternative<ZeroDrift>(drift) || std::holds_alternative<LinearDamping>(drift) ||
         std::holds_alternative<AffineDrift>(drift);
}

bool is_hamiltonian(const DriftSpec& drift) {
  return std::visit(overloaded{[](const ZeroDrift&) { return true; },
                               [](const HamiltonianSineDrift&) { return true; },
                               [](const CustomDrift& c) { return c.hamiltonian; },
                               [](const auto&) { return false; }},
                    drift);
}

bool has_exact_jacobian(const DriftSpec& drift) {
  if (const auto* c = std::get_if<CustomDrift>(&drift)) return static_cast<bool>(c->jacobian);
  return true;
}

std::string drift_name(const DriftSpec& drift) {
  return std::visit(overloaded{[](const ZeroDrift&) { return std::string("zero"); },
                               [](const LinearDamping&) { return std::string("linear_damping"); },
                               [](const AffineDrift&) { return std::string("affine"); },
                               [](const CustomDrift&) { return std::string("custom"); },
                               [](const HamiltonianSineDrift&) {
                                 return std::string("hamiltonian_sine");
                               }},
                    drift);
}

std::shared_ptr<const Problem> make_problem(std::shared_ptr<const SkewOperator> op, DriftSpec drift,
                                            CovarianceSpec covariance, NoiseProfile profile,
                                            Vector u0, double T) {
  if (!op) throw ConfigError("problem: missing operator");
  if (!(T > 0.0)) throw ConfigError("problem: horizon T must be positive");
  if (u0.size() != op->dim()) throw LayoutMismatch("problem: initial state has wrong dimension");
  if (!u0.allFinite()) throw ConfigError("problem: non-finite initial state");
  if (profile.values.size() != op->sample_points().size())
    throw LayoutMismatch("problem: noise profile does not match sample points");
  if (!profile.values.allFinite()) throw ConfigError("problem: noise profile must be bounded");
  if (const auto* c = std::get_if<CustomDrift>(&drift)) {
    if (!c->f) throw ConfigError("problem: custom drift without a function");
    if (!(c->lipschitz > 0.0)) throw ConfigError("problem: custom drift must declare L > 0");
  }
  if (const auto* a = std::get_if<AffineDrift>(&drift)) {
    if (a->matrix.rows() != op->dim() || a->matrix.cols() != op->dim())
      throw LayoutMismatch("problem: affine drift matrix has wrong size");
    if (a->offset.size() != 0 && a->offset.size() != op->dim())
      throw LayoutMismatch("problem: affine drift offset has wrong size");
  }
  auto p = std::make_shared<Problem>();
  p->op = std::move(op);
  p->drift = std::move(drift);
  p->covariance = std::move(covariance);
  p->profile = std::move(profile);
  p->u0 = std::move(u0);
  p->T = T;
  if (std::holds_alternative<HamiltonianSineDrift>(p->drift)) require_paired(*p);
  p->diffusion = std::make_shared<DiffusionMap>(*p->op, p->covariance, p->profile);
  return p;
}

Vector eval_F(const Problem& p, double t, const Vector& u) {
  return std::visit(
      overloaded{
          [&](const ZeroDrift&) -> Vector { return Vector::Zero(u.size()); },
          [&](const LinearDamping& d) -> Vector { return damping_rates(p, d).cwiseProduct(u); },
          [&](const AffineDrift& a) -> Vector {
            Vector out = a.matrix * u;
            if (a.offset.size()) out += (a.time_profile ? a.time_profile(t) : 1.0) * a.offset;
            return out;
          },
          [&](const CustomDrift& c) -> Vector { return c.f(t, u); },
          [&](const HamiltonianSineDrift& h) -> Vector {
            const Index m = u.size() / 2;
            Vector out(u.size());
            out.head(m) = h.kappa * u.tail(m).array().sin();
            out.tail(m) = -h.kappa * u.head(m).array().sin();
            return out;
          }},
      p.drift);
}

FieldState eval_F(const Problem& p, double t, const FieldState& u) {
  if (u.layout != p.op->layout()) throw LayoutMismatch("eval_F: layout mismatch");
  return {eval_F(p, t, u.data), u.layout};
}

Vector eval_F_jacobian(const Problem& p, double t, const Vector& u, const Vector& dir,
                       bool allow_fd) {
  return std::visit(
      overloaded{
          [&](const ZeroDrift&) -> Vector { return Vector::Zero(u.size()); },
          [&](const LinearDamping& d) -> Vector { return damping_rates(p, d).cwiseProduct(dir); },
          [&](const AffineDrift& a) -> Vector { return a.matrix * dir; },
          [&](const HamiltonianSineDrift& h) -> Vector {
            const Index m = u.size() / 2;
            Vector out(u.size());
            out.head(m) = h.kappa * u.tail(m).array().cos() * dir.tail(m).array();
            out.tail(m) = -h.kappa * u.head(m).array().cos() * dir.head(m).array();
            return out;
          },
          [&](const CustomDrift& c) -> Vector {
            if (c.jacobian) return c.jacobian(t, u, dir);
            if (!allow_fd) throw ConfigError("custom drift has no Jacobian and FD is disabled");
            const double dnorm = std::sqrt(p.op->norm_sq(dir));
            if (dnorm == 0.0) return Vector::Zero(u.size());
            const double h = 1e-6 * (1.0 + std::sqrt(p.op->norm_sq(u)));
            const Vector step = (h / dnorm) * dir;
            return (c.f(t, u + step) - c.f(t, u - step)) * (dnorm / (2.0 * h));
          }},
      p.drift);
}

FieldState eval_F_jacobian(const Problem& p, double t, const FieldState& u,
                           const FieldState& direction) {
  if (u.layout != p.op->layout() || direction.layout != u.layout)
    throw LayoutMismatch("eval_F_jacobian: layout mismatch");
  return {eval_F_jacobian(p, t, u.data, direction.data), u.layout};
}

SparseMatrix jacobian_matrix(const Problem& p, double t, const Vector& u) {
  const Index n = u.size();
  std::vector<Eigen::Triplet<double>> trip;
  if (const auto* d = std::get_if<LinearDamping>(&p.drift)) {
    const Vector rate = damping_rates(p, *d);
    for (Index k = 0; k < n; ++k)
      if (rate[k] != 0.0) trip.emplace_back(k, k, rate[k]);
  } else if (const auto* a = std::get_if<AffineDrift>(&p.drift)) {
    return a->matrix;
  } else if (const auto* h = std::get_if<HamiltonianSineDrift>(&p.drift)) {
    const Index m = n / 2;
    for (Index k = 0; k < m; ++k) {
      trip.emplace_back(k, m + k, h->kappa * std::cos(u[m + k]));
      trip.emplace_back(m + k, k, -h->kappa * std::cos(u[k]));
    }
  } else if (std::holds_alternative<CustomDrift>(p.drift)) {
    Vector e = Vector::Zero(n);
    for (Index j = 0; j < n; ++j) {
      e[j] = 1.0;
      const Vector col = eval_F_jacobian(p, t, u, e);
      e[j] = 0.0;
      for (Index i = 0; i < n; ++i)
        if (col[i] != 0.0) trip.emplace_back(i, j, col[i]);
    }
  }
  SparseMatrix J(n, n);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

SparseMatrix drift_linear_part(const Problem& p) {
  if (!is_affine(p.drift)) throw ConfigError("drift is not affine");
  return jacobian_matrix(p, 0.0, Vector::Zero(p.dim()));
}

std::optional<Vector> drift_diagonal(const Problem& p) {
  if (std::holds_alternative<ZeroDrift>(p.drift)) return Vector::Zero(p.dim());
  if (const auto* d = std::get_if<LinearDamping>(&p.drift)) return damping_rates(p, *d);
  return std::nullopt;
}

Vector drift_offset(const Problem& p, double t) {
  if (const auto* a = std::get_if<AffineDrift>(&p.drift); a && a->offset.size())
    return (a->time_profile ? a->time_profile(t) : 1.0) * a->offset;
  return Vector::Zero(p.dim());
}

double lipschitz_constant(const Problem& p) {
  return std::visit(
      overloaded{
          [&](const ZeroDrift&) { return 0.0; },
          [&](const LinearDamping& d) { return damping_rates(p, d).cwiseAbs().maxCoeff(); },
          [&](const AffineDrift& a) {
            const Vector sw = p.op->weights().cwiseSqrt();
            const Matrix scaled = sw.asDiagonal() * Matrix(a.matrix) * sw.cwiseInverse().asDiagonal();
            Eigen::JacobiSVD<Matrix> svd(scaled);
            return svd.singularValues()[0];
          },
          [&](const CustomDrift& c) { return c.lipschitz; },
          [&](const HamiltonianSineDrift& h) {
            const Vector& w = p.op->weights();
            const Index m = w.size() / 2;
            const double ratio =
                std::max(w.head(m).cwiseQuotient(w.tail(m)).maxCoeff(),
                         w.tail(m).cwiseQuotient(w.head(m)).maxCoeff());
            return std::abs(h.kappa) * std::sqrt(ratio);
          }},
      p.drift);
}

double growth_constant(const Problem& p) {
  const double L = lipschitz_constant(p);
  if (const auto* a = std::get_if<AffineDrift>(&p.drift); a && a->offset.size())
    return L + sup_over_horizon(a->time_profile, p.T) * std::sqrt(p.op->norm_sq(a->offset));
  if (const auto* c = std::get_if<CustomDrift>(&p.drift)) {
    const Vector zero = Vector::Zero(p.dim());
    double sup = 0.0;
    for (int k = 0; k <= 100; ++k)
      sup = std::max(sup, std::sqrt(p.op->norm_sq(c->f(p.T * k / 100.0, zero))));
    return L + sup;
  }
  return L;
}

// --------------------------------------------------------------------------

Vector zero_state(const SkewOperator& op) { return Vector::Zero(op.dim()); }

Vector single_mode_state(const SkewOperator& op, Index mode, double amplitude) {
  if (mode < 1) throw ConfigError("single-mode initial state: mode index is 1-based");
  if (const auto* s = dynamic_cast<const SpectralMaxwell*>(&op)) {
    if (mode > s->modes()) throw ConfigError("single-mode initial state: mode out of range");
    Vector u = Vector::Zero(op.dim());
    u[mode - 1] = amplitude;
    return u;
  }
  const PointSet& pts = op.sample_points();
  Vector values = Vector::Zero(pts.size());
  const double pi = std::numbers::pi;
  if (const auto* g = dynamic_cast<const Maxwell1D*>(&op)) {
    const double L = g->grid().L;
    for (Index k = 0; k < pts.n_electric; ++k)
      values[k] = amplitude * std::sqrt(2.0 / L) * std::sin(double(mode) * pi * pts.dofs[k].x / L);
  } else if (const auto* g2 = dynamic_cast<const Maxwell2DTM*>(&op)) {
    const double Lx = g2->grid().dx * double(g2->grid().nx);
    const double Ly = g2->grid().dy * double(g2->grid().ny);
    for (Index k = 0; k < pts.n_electric; ++k)
      values[k] = amplitude * 2.0 / std::sqrt(Lx * Ly) *
                  std::sin(double(mode) * pi * pts.dofs[k].x / Lx) *
                  std::sin(pi * pts.dofs[k].y / Ly);
  } else {
    throw ConfigError("single-mode initial state: unsupported backend");
  }
  return op.project(values);
}

Vector gaussian_bump_state(const SkewOperator& op, double cx, double cy, double width,
                           double amplitude) {
  if (!(width > 0.0)) throw ConfigError("gaussian bump: width must be positive");
  const PointSet& pts = op.sample_points();
  Vector values = Vector::Zero(pts.size());
  for (Index k = 0; k < pts.n_electric; ++k) {
    const double dx = pts.dofs[k].x - cx, dy = pts.dofs[k].y - cy;
    values[k] = amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
  }
  return op.project(values);
}

}  // namespace srkmax
