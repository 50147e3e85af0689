#include "doctest.h"

#include "srkmax/model.hpp"
#include "support.hpp"

#include <cmath>

using namespace srkmax;
using test::random_vector;

namespace {

std::shared_ptr<const Maxwell1D> line(double eps = 1.0, double mu = 1.0) {
  return build_maxwell_1d(Grid1D::uniform(24, 1.0, eps, mu));
}

std::shared_ptr<const Problem> problem_with(std::shared_ptr<const SkewOperator> op, DriftSpec d) {
  const PointSet& pts = op->sample_points();
  return make_problem(op, std::move(d), sine_covariance(pts, 4, 2.0, 1.0),
                      constant_profile(pts, 1.0, 0.0), Vector::Zero(op->dim()), 1.0);
}

CustomDrift sine_custom(double a) {
  CustomDrift c;
  c.f = [a](double t, const Vector& u) -> Vector {
    return a * (u.array() + t).sin().matrix();
  };
  c.jacobian = [a](double t, const Vector& u, const Vector& d) -> Vector {
    return a * ((u.array() + t).cos() * d.array()).matrix();
  };
  c.lipschitz = std::abs(a);
  return c;
}

}  // namespace

TEST_CASE("drift closed forms") {
  std::mt19937_64 rng(1);
  auto op = line();
  const Vector u = random_vector(op->dim(), rng);

  auto zero = problem_with(op, ZeroDrift{});
  CHECK(eval_F(*zero, 0.0, u).cwiseAbs().maxCoeff() == 0.0);
  CHECK(eval_F_jacobian(*zero, 0.0, u, u).cwiseAbs().maxCoeff() == 0.0);

  auto damp = problem_with(op, LinearDamping{2.0, 0.0});
  const Vector F = eval_F(*damp, 0.0, u);
  CHECK((F.head(24) + 2.0 * u.head(24)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(F.tail(25).cwiseAbs().maxCoeff() == 0.0);

  auto op2 = line(2.0, 4.0);
  auto damp2 = problem_with(op2, LinearDamping{1.0, 3.0});
  const Vector d = random_vector(op2->dim(), rng);
  const Vector Jd = eval_F_jacobian(*damp2, 0.0, u, d);
  CHECK((Jd.head(24) + 0.5 * d.head(24)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((Jd.tail(25) + 0.75 * d.tail(25)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((eval_F_jacobian(*damp2, 0.0, 3.0 * u, d) - Jd).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(drift_diagonal(*damp2).has_value());
  CHECK(lipschitz_constant(*damp2) == doctest::Approx(0.75));
}

TEST_CASE("affine drift") {
  auto op = line();
  const Index n = op->dim();
  SparseMatrix A(n, n);
  A.insert(0, 1) = 2.0;
  A.insert(3, 3) = -1.0;
  AffineDrift a{A, Vector::Ones(n), [](double t) { return 1.0 + t; }};
  auto p = problem_with(op, a);
  std::mt19937_64 rng(2);
  const Vector u = random_vector(n, rng);
  CHECK((eval_F(*p, 0.5, u) - (A * u + 1.5 * Vector::Ones(n))).norm() <= 1e-14);
  CHECK((drift_offset(*p, 0.5) - 1.5 * Vector::Ones(n)).norm() <= 1e-15);
  CHECK_FALSE(drift_diagonal(*p).has_value());
  CHECK(lipschitz_constant(*p) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("custom drift Lipschitz probe and finite-difference Jacobian") {
  std::mt19937_64 rng(3);
  auto op = line(2.0, 0.5);
  const CustomDrift exact = sine_custom(0.8);
  auto p = problem_with(op, exact);
  for (int k = 0; k < 100; ++k) {
    const Vector u = random_vector(op->dim(), rng), v = random_vector(op->dim(), rng);
    const double ratio = std::sqrt(op->norm_sq(eval_F(*p, 0.1, u) - eval_F(*p, 0.1, v)) /
                                   op->norm_sq(u - v));
    CHECK(ratio <= lipschitz_constant(*p));
  }

  CustomDrift fd = exact;
  fd.jacobian = nullptr;
  auto q = problem_with(op, fd);
  for (int k = 0; k < 20; ++k) {
    const Vector u = random_vector(op->dim(), rng), d = random_vector(op->dim(), rng);
    const Vector a = eval_F_jacobian(*p, 0.3, u, d);
    const Vector b = eval_F_jacobian(*q, 0.3, u, d);
    CHECK(std::sqrt(op->norm_sq(a - b) / op->norm_sq(a)) <= 1e-6);
  }
  CHECK_THROWS_AS(eval_F_jacobian(*q, 0.0, Vector::Zero(op->dim()), Vector::Ones(op->dim()), false),
                  ConfigError);

  CustomDrift undeclared = exact;
  undeclared.lipschitz = 0.0;
  CHECK_THROWS_AS(problem_with(op, undeclared), ConfigError);
}

TEST_CASE("linear growth bound for every drift kind") {
  std::mt19937_64 rng(4);
  auto op = line(1.5, 0.7);
  const Index n = op->dim();
  SparseMatrix A(n, n);
  A.insert(2, 5) = -3.0;
  std::vector<DriftSpec> drifts{ZeroDrift{}, LinearDamping{0.3, 1.2},
                                AffineDrift{A, Vector::Constant(n, 0.2), nullptr}, sine_custom(1.1)};
  for (const auto& d : drifts) {
    auto p = problem_with(op, d);
    const double C = growth_constant(*p);
    for (int k = 0; k < 100; ++k) {
      const Vector u = double(k % 7) * random_vector(n, rng);
      CHECK(std::sqrt(op->norm_sq(eval_F(*p, 0.5, u))) <=
            C * (1.0 + std::sqrt(op->norm_sq(u))) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("Hamiltonian drift has a symmetric Hessian") {
  std::mt19937_64 rng(5);
  auto op = build_spectral_hamiltonian(6, 1.0, 1.0, 1.0);
  auto p = problem_with(op, HamiltonianSineDrift{0.7});
  CHECK(is_hamiltonian(p->drift));
  const Index n = op->dim(), m = n / 2;
  auto omega = [m](const Vector& v) {
    Vector out(v.size());
    out.head(m) = v.tail(m);
    out.tail(m) = -v.head(m);
    return out;
  };
  for (int k = 0; k < 20; ++k) {
    const Vector u = random_vector(n, rng), v = random_vector(n, rng), w = random_vector(n, rng);
    const double a = omega(eval_F_jacobian(*p, 0.0, u, v)).dot(w);
    const double b = v.dot(omega(eval_F_jacobian(*p, 0.0, u, w)));
    CHECK(std::abs(a - b) <= 1e-8 * (1.0 + std::abs(a)));
  }
  // Jacobian against central differences of F.
  const Vector u = random_vector(n, rng), d = random_vector(n, rng);
  const double h = 1e-6;
  const Vector fd = (eval_F(*p, 0.0, u + h * d) - eval_F(*p, 0.0, u - h * d)) / (2.0 * h);
  CHECK((fd - eval_F_jacobian(*p, 0.0, u, d)).norm() <= 1e-6 * fd.norm());
  CHECK((Matrix(jacobian_matrix(*p, 0.0, u)) * d - eval_F_jacobian(*p, 0.0, u, d)).norm() <= 1e-13);

  CHECK_THROWS_AS(problem_with(line(), HamiltonianSineDrift{1.0}), ConfigError);
  CHECK_FALSE(is_hamiltonian(DriftSpec(LinearDamping{1.0, 0.0})));
}

TEST_CASE("initial state presets") {
  auto sp = build_spectral_hamiltonian(5, 1.0, 1.0, 1.0);
  const Vector s = single_mode_state(*sp, 2, 0.5);
  CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.norm() == doctest::Approx(0.5).epsilon(1e-12));

  auto op = line();
  const Vector e = single_mode_state(*op, 3, 2.0);
  const double x = op->layout()->dofs[4].x;
  CHECK(e[4] == doctest::Approx(2.0 * std::sqrt(2.0) * std::sin(3.0 * std::numbers::pi * x)));
  CHECK(e.tail(25).cwiseAbs().maxCoeff() == 0.0);
  CHECK(op->norm_sq(e) == doctest::Approx(4.0).epsilon(1e-12));

  const Vector g = gaussian_bump_state(*op, 0.5, 0.0, 0.1, 1.0);
  CHECK(g.head(24).maxCoeff() <= 1.0);
  CHECK(g.head(24).maxCoeff() > 0.9);
  CHECK(zero_state(*op).norm() == 0.0);
  CHECK_THROWS_AS(single_mode_state(*op, 0, 1.0), ConfigError);
}

TEST_CASE("problem validation") {
  auto op = line();
  const PointSet& pts = op->sample_points();
  CHECK_THROWS_AS(make_problem(op, ZeroDrift{}, sine_covariance(pts, 4, 2.0, 1.0),
                               constant_profile(pts, 1.0, 0.0), Vector::Zero(3), 1.0),
                  LayoutMismatch);
  CHECK_THROWS_AS(make_problem(op, ZeroDrift{}, sine_covariance(pts, 4, 2.0, 1.0),
                               constant_profile(pts, 1.0, 0.0), Vector::Zero(op->dim()), 0.0),
                  ConfigError);
}
