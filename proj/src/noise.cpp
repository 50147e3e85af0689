#include "srkmax/noise.hpp"

#include "srkmax/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace srkmax {

void CovarianceSpec::validate() const {
  if (lambdas.size() < 1) throw ConfigError("covariance: need at least one mode");
  if (!(lambdas.minCoeff() > 0.0) || !lambdas.allFinite())
    throw ConfigError("covariance: eigenvalues must be positive and finite");
  if (modes.cols() != lambdas.size())
    throw ConfigError("covariance: mode matrix does not match eigenvalue count");
  if (!modes.allFinite()) throw ConfigError("covariance: non-finite mode values");
}

CovarianceSpec sine_covariance(const PointSet& points, Index J, double exponent, double Lx,
                               double Ly) {
  if (J < 1) throw ConfigError("covariance: J must be positive");
  CovarianceSpec spec;
  spec.lambdas.resize(J);
  spec.modes.resize(points.size(), J);
  const double pi = std::numbers::pi;
  if (Ly <= 0.0) {
    const double norm = std::sqrt(2.0 / Lx);
    for (Index i = 0; i < J; ++i) {
      spec.lambdas[i] = std::pow(double(i + 1), -exponent);
      for (Index k = 0; k < points.size(); ++k)
        spec.modes(k, i) = norm * std::sin(double(i + 1) * pi * points.dofs[k].x / Lx);
    }
  } else {
    std::vector<std::pair<Index, Index>> pq;
    const Index span = J + 1;
    for (Index p = 1; p <= span; ++p)
      for (Index q = 1; q <= span; ++q) pq.emplace_back(p, q);
    std::stable_sort(pq.begin(), pq.end(), [](const auto& a, const auto& b) {
      return a.first * a.first + a.second * a.second < b.first * b.first + b.second * b.second;
    });
    const double norm = 2.0 / std::sqrt(Lx * Ly);
    for (Index i = 0; i < J; ++i) {
      spec.lambdas[i] = std::pow(double(i + 1), -exponent);
      const auto [p, q] = pq[i];
      for (Index k = 0; k < points.size(); ++k)
        spec.modes(k, i) = norm * std::sin(double(p) * pi * points.dofs[k].x / Lx) *
                           std::sin(double(q) * pi * points.dofs[k].y / Ly);
    }
  }
  spec.validate();
  return spec;
}

double gram_defect(const CovarianceSpec& spec, const PointSet& points) {
  const Index ne = points.n_electric;
  const auto E = spec.modes.topRows(ne);
  const Matrix gram = E.transpose() * points.measure.head(ne).asDiagonal() * E;
  return (gram - Matrix::Identity(spec.size(), spec.size())).cwiseAbs().maxCoeff();
}

NoiseProfile constant_profile(const PointSet& points, double je, double jm) {
  NoiseProfile p;
  p.values.resize(points.size());
  for (Index k = 0; k < points.size(); ++k) p.values[k] = k < points.n_electric ? je : jm;
  return p;
}

NoisePath sample_path(std::uint64_t seed, Index N, double tau, const Vector& lambdas,
                      std::uint64_t replica) {
  if (N < 0) throw ConfigError("sample_path: N must be nonnegative");
  if (!(tau > 0.0)) throw ConfigError("sample_path: tau must be positive");
  const Index J = lambdas.size();
  NoisePath path;
  path.N = N;
  path.tau = tau;
  path.seed = seed;
  path.replica = replica;
  path.lambdas = lambdas;
  path.xi.resize(N, J);
  const Vector scale = (lambdas * tau).cwiseSqrt();
  const Philox4x32 gen(seed);
  for (Index n = 0; n < N; ++n) {
    for (Index i = 0; i < J; i += 2) {
      const auto z = normal_pair(gen, replica, static_cast<std::uint32_t>(n),
                                 static_cast<std::uint32_t>(i / 2));
      path.xi(n, i) = scale[i] * z[0];
      if (i + 1 < J) path.xi(n, i + 1) = scale[i + 1] * z[1];
    }
  }
  return path;
}

NoisePath sample_path(std::uint64_t seed, Index N, double tau, const CovarianceSpec& spec,
                      std::uint64_t replica) {
  return sample_path(seed, N, tau, spec.lambdas, replica);
}

NoisePath coarsen(const NoisePath& path, Index r) {
  if (r < 1 || path.N % r != 0)
    throw ConfigError("coarsen: factor " + std::to_string(r) + " does not divide N = " +
                      std::to_string(path.N));
  NoisePath out = path;
  out.N = path.N / r;
  out.tau = path.tau * double(r);
  out.xi.setZero(out.N, path.modes());
  for (Index n = 0; n < out.N; ++n)
    for (Index k = 0; k < r; ++k) out.xi.row(n) += path.xi.row(n * r + k);
  return out;
}

NoisePath zero_path(Index N, double tau, Index J) {
  NoisePath path;
  path.N = N;
  path.tau = tau;
  path.xi.setZero(N, J);
  path.lambdas = Vector::Ones(J);
  return path;
}

DiffusionMap::DiffusionMap(const SkewOperator& op, const CovarianceSpec& spec,
                           const NoiseProfile& profile)
    : lambdas_(spec.lambdas), time_factor_(profile.time_factor) {
  spec.validate();
  const PointSet& pts = op.sample_points();
  if (spec.modes.rows() != pts.size() || profile.values.size() != pts.size())
    throw LayoutMismatch("diffusion map: covariance/profile do not match the sample points");
  const Vector scale = -profile.values.cwiseQuotient(pts.material);
  columns_.resize(op.dim(), spec.size());
  for (Index i = 0; i < spec.size(); ++i)
    columns_.col(i) = op.project(scale.cwiseProduct(spec.modes.col(i)));
  column_norms_sq_.resize(spec.size());
  for (Index i = 0; i < spec.size(); ++i) column_norms_sq_[i] = op.norm_sq(columns_.col(i));
  zero_ = (profile.values.array() == 0.0).all();
}

Vector DiffusionMap::apply(double t, const Vector& coeffs) const {
  if (coeffs.size() != modes()) throw LayoutMismatch("apply_B: coefficient count mismatch");
  return factor(t) * (columns_ * coeffs);
}

double DiffusionMap::hs_norm_sq(double t) const {
  const double g = factor(t);
  return g * g * lambdas_.dot(column_norms_sq_);
}

FieldState apply_B(double t, const Vector& coeffs, const NoiseProfile& profile,
                   const CovarianceSpec& spec, const SkewOperator& op) {
  return {DiffusionMap(op, spec, profile).apply(t, coeffs), op.layout()};
}

double hs_norm_sq(double t, const NoiseProfile& profile, const CovarianceSpec& spec,
                  const SkewOperator& op) {
  return DiffusionMap(op, spec, profile).hs_norm_sq(t);
}

}  // namespace srkmax
