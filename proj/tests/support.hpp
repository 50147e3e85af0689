#pragma once

#include "srkmax/spatial.hpp"

#include <random>

namespace srkmax::test {

inline Vector random_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Vector v(n);
  for (Index k = 0; k < n; ++k) v[k] = z(rng);
  return v;
}

// Dense exp(A) by scaling and squaring with a Taylor core.
inline Matrix dense_expm(const Matrix& A) {
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
  const Matrix X = A / std::pow(2.0, squarings);
  Matrix term = Matrix::Identity(A.rows(), A.cols());
  Matrix sum = term;
  for (int k = 1; k < 30; ++k) {
    term = term * X / double(k);
    sum += term;
  }
  for (int k = 0; k < squarings; ++k) sum = sum * sum;
  return sum;
}

// The zero operator on a layout of n electric and n magnetic unknowns.
class ZeroOperator final : public SkewOperator {
 public:
  explicit ZeroOperator(Index n) : SkewOperator(make_layout(n)) {}
  void apply(const Vector& u, Vector& out) const override { out.setZero(u.size()); }
  OperatorStructure structure() const override { return OperatorStructure::block_sparse; }

 private:
  static std::shared_ptr<const FieldLayout> make_layout(Index n) {
    auto p = std::make_shared<PointSet>();
    p->backend = "zero";
    for (Index k = 0; k < 2 * n; ++k)
      p->dofs.push_back(Dof{k < n ? Component::Ez : Component::Hz, double(k % n) / double(n), 0.0});
    p->material = Vector::Ones(2 * n);
    p->measure = Vector::Constant(2 * n, 1.0 / double(n));
    p->n_electric = n;
    return p;
  }
};

}  // namespace srkmax::test
