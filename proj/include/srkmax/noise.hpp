#pragma once

#include "srkmax/spatial.hpp"
#include "srkmax/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

namespace srkmax {

/// Truncated Karhunen-Loeve description of Q: eigenvalues and the orthonormal
/// modes e_i sampled at a point set (rows = points, cols = modes).
struct CovarianceSpec {
  Vector lambdas;
  Matrix modes;

  Index size() const { return lambdas.size(); }
  double trace() const { return lambdas.sum(); }
  void validate() const;
};

/// lambda_i = i^{-exponent}, e_i = sine modes of the domain sampled at `points`.
///
/// 1D: sqrt(2/L) sin(i pi x / L). 2D: tensor sine modes ordered by p^2 + q^2.
/// Lowering `exponent` makes the noise rougher.
CovarianceSpec sine_covariance(const PointSet& points, Index J, double exponent, double Lx,
                               double Ly = 0.0);

/// Max deviation of the quadrature Gram matrix of the electric samples from identity.
double gram_defect(const CovarianceSpec& spec, const PointSet& points);

/// Noise profiles J_e^r (electric points) and J_m^r (magnetic points), with an
/// optional time modulation g(t): J^r(t, x) = g(t) * values(x).
struct NoiseProfile {
  Vector values;
  std::function<double(double)> time_factor;

  bool time_dependent() const { return static_cast<bool>(time_factor); }
  double factor(double t) const { return time_factor ? time_factor(t) : 1.0; }
  double sup_norm() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
};

NoiseProfile constant_profile(const PointSet& points, double je, double jm);

/// Increments xi(n, i) ~ N(0, lambda_i tau) for n < N, i < J.
struct NoisePath {
  Index N = 0;
  double tau = 0.0;
  RowMatrix xi;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  Vector lambdas;

  Index modes() const { return xi.cols(); }
  auto increment(Index n) const { return xi.row(n).transpose(); }
};

NoisePath sample_path(std::uint64_t seed, Index N, double tau, const CovarianceSpec& spec,
                      std::uint64_t replica = 0);
NoisePath sample_path(std::uint64_t seed, Index N, double tau, const Vector& lambdas,
                      std::uint64_t replica = 0);

/// Aggregates r consecutive increments; throws ConfigError unless r divides N.
NoisePath coarsen(const NoisePath& path, Index r);

/// A zero path of N steps (deterministic runs).
NoisePath zero_path(Index N, double tau, Index J);

/// B(t) as a dense map from KL coefficients to states: B(t) = g(t) * columns,
/// column i = project(-J^r e_i / material).
class DiffusionMap {
 public:
  DiffusionMap(const SkewOperator& op, const CovarianceSpec& spec, const NoiseProfile& profile);

  Index modes() const { return columns_.cols(); }
  const Matrix& columns() const { return columns_; }
  double factor(double t) const { return time_factor_ ? time_factor_(t) : 1.0; }
  bool is_zero() const { return zero_; }

  /// B(t) coeffs.
  Vector apply(double t, const Vector& coeffs) const;
  /// sum_i lambda_i ||B(t) e_i||_H^2.
  double hs_norm_sq(double t) const;

 private:
  Matrix columns_;
  Vector lambdas_;
  Vector column_norms_sq_;
  std::function<double(double)> time_factor_;
  bool zero_ = false;
};

FieldState apply_B(double t, const Vector& coeffs, const NoiseProfile& profile,
                   const CovarianceSpec& spec, const SkewOperator& op);
double hs_norm_sq(double t, const NoiseProfile& profile, const CovarianceSpec& spec,
                  const SkewOperator& op);

}  // namespace srkmax
