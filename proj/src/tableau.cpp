#include "srkmax/tableau.hpp"

#include <charconv>
#include <cmath>

namespace srkmax {

namespace {

// Smallest generalized eigenvalue of sym(K A^{-1}) against K.
double coercivity_constant(const Matrix& A_inv, const Vector& K) {
  const Matrix KA = K.asDiagonal() * A_inv;
  const Matrix sym = 0.5 * (KA + KA.transpose());
  const Matrix Kmat = K.asDiagonal();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(sym, Kmat, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double to_double(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty())
    throw ConfigError("cannot parse coefficient '" + std::string(text) + "'");
  return value;
}

}  // namespace

Coercivity check_coercivity(const Tableau& tab) {
  tab.validate();
  const Index s = tab.stages();
  const double scale = std::max(1.0, std::pow(tab.A.cwiseAbs().maxCoeff(), double(s)));
  Coercivity out;
  if (std::abs(tab.A.determinant()) < 1e-14 * scale) {
    out.kind = CoercivityKind::singular_A;
    return out;
  }
  const Matrix A_inv = tab.A.inverse();

  std::vector<Vector> candidates{Vector::Ones(s)};
  if ((tab.b.array() > 0.0).all()) candidates.push_back(tab.b);

  for (const Vector& K : candidates) {
    const double alpha = coercivity_constant(A_inv, K);
    if (alpha > 0.0) {
      out.kind = CoercivityKind::coercive;
      out.K = K;
      out.alpha = alpha;
      return out;
    }
  }
  return out;
}

TableauReport analyze(const Tableau& tab, double tol) {
  tab.validate();
  TableauReport r;
  r.stability_matrix = stability_matrix(tab);
  r.algebraically_stable = is_algebraically_stable(tab, tol);
  r.symplectic = is_symplectic(tab, tol);
  r.coercivity = check_coercivity(tab);
  r.consistent_weights = consistency_check(tab, tol);
  return r;
}

std::vector<std::string> builtin_names() {
  return {"implicit_euler", "midpoint", "explicit_euler", "gauss2"};
}

Tableau builtin(std::string_view name) {
  if (name == "implicit_euler")
    return make_tableau("implicit_euler", Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 1.0));
  if (name == "midpoint")
    return make_tableau("midpoint", Matrix::Constant(1, 1, 0.5), Vector::Constant(1, 1.0));
  if (name == "explicit_euler")
    return make_tableau("explicit_euler", Matrix::Constant(1, 1, 0.0), Vector::Constant(1, 1.0));
  if (name == "gauss2") {
    const double r = std::sqrt(3.0) / 6.0;
    Matrix A(2, 2);
    A << 0.25, 0.25 - r, 0.25 + r, 0.25;
    return make_tableau("gauss2", A, Vector::Constant(2, 0.5));
  }
  throw ConfigError("unknown tableau '" + std::string(name) + "'");
}

double parse_coefficient(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return to_double(text);
  const double num = to_double(text.substr(0, slash));
  const double den = to_double(text.substr(slash + 1));
  if (den == 0.0) throw ConfigError("coefficient '" + std::string(text) + "' divides by zero");
  return num / den;
}

std::string to_string(CoercivityKind kind) {
  switch (kind) {
    case CoercivityKind::coercive:
      return "coercive";
    case CoercivityKind::unknown:
      return "unknown";
    case CoercivityKind::singular_A:
      return "singular_A";
  }
  return "unknown";
}

}  // namespace srkmax
