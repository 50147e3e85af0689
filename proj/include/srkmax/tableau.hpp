#pragma once

#include "srkmax/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace srkmax {

/// Coefficients of an s-stage stochastic Runge-Kutta method.
///
/// `A`/`b` act on the drift, `A_noise`/`b_noise` on the diffusion increment, and
/// `c` fixes the evaluation times t_n + c_i tau of both.
template <typename Scalar>
struct ButcherTableau {
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::string name;
  MatrixType A;
  VectorType b;
  MatrixType A_noise;
  VectorType b_noise;
  VectorType c;

  Index stages() const { return b.size(); }

  /// Throws ConfigError unless every array has dimension s and all entries are finite.
  void validate() const {
    const Index s = b.size();
    if (s < 1) throw ConfigError("tableau: stage count must be positive");
    if (A.rows() != s || A.cols() != s || A_noise.rows() != s || A_noise.cols() != s ||
        b_noise.size() != s || c.size() != s)
      throw ConfigError("tableau '" + name + "': inconsistent stage dimensions");
    if (!A.allFinite() || !b.allFinite() || !A_noise.allFinite() || !b_noise.allFinite() ||
        !c.allFinite())
      throw ConfigError("tableau '" + name + "': non-finite coefficient");
  }
};

using Tableau = ButcherTableau<double>;

/// Builds a tableau with A_noise = A, b_noise = b and c = row sums of A.
template <typename Derived, typename VDerived>
ButcherTableau<typename Derived::Scalar> make_tableau(std::string name,
                                                      const Eigen::MatrixBase<Derived>& A,
                                                      const Eigen::MatrixBase<VDerived>& b) {
  ButcherTableau<typename Derived::Scalar> tab;
  tab.name = std::move(name);
  tab.A = A;
  tab.b = b;
  tab.A_noise = A;
  tab.b_noise = b;
  tab.c = A.rowwise().sum();
  tab.validate();
  return tab;
}

// m_ij = b_i a_ij + b_j a_ji - b_i b_j. The expression is symmetric in (i, j)
// term by term, so the result is exactly symmetric in floating point.
template <typename Scalar>
typename ButcherTableau<Scalar>::MatrixType stability_matrix(const ButcherTableau<Scalar>& tab) {
  const auto BA = (tab.b.asDiagonal() * tab.A).eval();
  return BA + BA.transpose() - tab.b * tab.b.transpose();
}

template <typename Scalar>
bool is_algebraically_stable(const ButcherTableau<Scalar>& tab, Scalar tol = Scalar(1e-12)) {
  if ((tab.b.array() < -tol).any()) return false;
  Eigen::SelfAdjointEigenSolver<typename ButcherTableau<Scalar>::MatrixType> eig(
      stability_matrix(tab), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tol;
}

template <typename Scalar>
bool is_symplectic(const ButcherTableau<Scalar>& tab, Scalar tol = Scalar(1e-12)) {
  return stability_matrix(tab).cwiseAbs().maxCoeff() <= tol;
}

template <typename Scalar>
bool consistency_check(const ButcherTableau<Scalar>& tab, Scalar tol = Scalar(1e-12)) {
  using std::abs;
  return abs(tab.b.sum() - Scalar(1)) <= tol && abs(tab.b_noise.sum() - Scalar(1)) <= tol;
}

enum class CoercivityKind { coercive, unknown, singular_A };

struct Coercivity {
  CoercivityKind kind = CoercivityKind::unknown;
  Vector K;  // diagonal of the weight matrix when coercive
  double alpha = 0.0;

  bool coercive() const { return kind == CoercivityKind::coercive; }
};

/// Searches K in {I, diag(b)} for u^T K A^{-1} u >= alpha u^T K u with alpha > 0.
///
/// A failed search yields `unknown`, never "not coercive": the condition
/// quantifies over every positive diagonal K.
Coercivity check_coercivity(const Tableau& tab);

struct TableauReport {
  Matrix stability_matrix;
  bool algebraically_stable = false;
  bool symplectic = false;
  Coercivity coercivity;
  bool consistent_weights = false;
};

TableauReport analyze(const Tableau& tab, double tol = 1e-12);

std::vector<std::string> builtin_names();

/// implicit_euler, midpoint, explicit_euler or gauss2. Throws ConfigError on other names.
Tableau builtin(std::string_view name);

/// Parses "0.25", "1/4", "-1/2" or an expression of the form "a/b" with decimal parts.
double parse_coefficient(std::string_view text);

std::string to_string(CoercivityKind kind);

}  // namespace srkmax
