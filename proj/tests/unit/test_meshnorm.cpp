#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mildreg/meshnorm.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace mildreg;
using doctest::Approx;

TEST_CASE("dirichlet grid holds interior nodes only") {
  const Grid1D g = Grid1D::dirichlet(9);
  CHECK(g.size() == 9);
  CHECK(g.h() == Approx(0.1));
  CHECK(g.node(0) == Approx(0.1));
  CHECK(g.node(8) == Approx(0.9));
  CHECK_FALSE(g.include_boundary());
  CHECK(g.weights().sum() == Approx(0.9));
}

TEST_CASE("neumann grid includes the boundary with half weights") {
  const Grid1D g = Grid1D::neumann(11);
  CHECK(g.h() == Approx(0.1));
  CHECK(g.node(0) == 0.0);
  CHECK(g.node(10) == Approx(1.0));
  CHECK(g.weights()[0] == Approx(0.05));
  CHECK(g.weights()[5] == Approx(0.1));
  CHECK(g.weights().sum() == Approx(1.0));
}

TEST_CASE("l2 norm of sin(pi x) approaches 1/sqrt(2)") {
  for (int n : {32, 128}) {
    const Grid1D g = Grid1D::dirichlet(n);
    const Vector u = (std::numbers::pi * g.nodes().array()).sin().matrix();
    CHECK(l2_norm(g, u) == Approx(std::sqrt(0.5)).epsilon(1e-12));
  }
}

TEST_CASE("trapezoid weights integrate linear functions exactly on uneven nodes") {
  const std::vector<double> t = {0.0, 0.1, 0.35, 0.4, 1.0};
  const auto w = trapezoid_weights(t);
  double integral = 0.0, total = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    integral += w[i] * (3.0 * t[i] + 1.0);
    total += w[i];
  }
  CHECK(total == Approx(1.0));
  CHECK(integral == Approx(2.5));
}

TEST_CASE("time mesh ends exactly at t_end and slices share nodes") {
  const TimeMesh m(0.0, 1.0, 3);
  CHECK(m.node(3) == 1.0);
  CHECK(m.dt() == Approx(1.0 / 3.0));
  const TimeMesh s = m.slice(1, 2);
  CHECK(s.t_start() == Approx(m.node(1)));
  CHECK(s.t_end() == 1.0);
  CHECK(s.steps() == 2);
  CHECK(s.dt() == Approx(m.dt()));
}

TEST_CASE("lp time norm of a constant trajectory") {
  const Grid1D g = Grid1D::neumann(21);
  const TimeMesh m = TimeMesh::uniform(2.0, 40);
  const Matrix s = Matrix::Constant(g.size(), m.size(), 3.0);
  // ||3||_X = 3, so the L^p(0,2) norm is 3 * 2^{1/p}.
  CHECK(lp_time_norm(g, m, s, 2.0) == Approx(3.0 * std::sqrt(2.0)));
  CHECK(lp_time_norm(g, m, s, 4.0) == Approx(3.0 * std::pow(2.0, 0.25)));
}

TEST_CASE("time derivative is exact on linear-in-time data") {
  const TimeMesh m = TimeMesh::uniform(1.0, 10);
  Matrix s(2, m.size());
  for (int i = 0; i < m.size(); ++i) s.col(i) << 2.0 * m.node(i), -5.0 * m.node(i) + 1.0;
  const Matrix d = time_derivative(m, s);
  CHECK((d.row(0).array() - 2.0).abs().maxCoeff() < 1e-12);
  CHECK((d.row(1).array() + 5.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("operator norm under the mass matches a hand computation") {
  const Grid1D g = Grid1D::neumann(5);
  const Matrix I = Matrix::Identity(5, 5);
  CHECK(operator_norm(g, I) == Approx(1.0));
  CHECK(operator_norm(g, 2.5 * I) == Approx(2.5));
  // Diagonal scaling: norm is the largest |d_j| regardless of the weights.
  Vector d(5);
  d << 1.0, -4.0, 2.0, 0.5, 3.0;
  CHECK(operator_norm(g, d.asDiagonal().toDenseMatrix()) == Approx(4.0));
}

TEST_CASE("property: l2 norm is homogeneous and satisfies the triangle inequality") {
  const Grid1D g = Grid1D::neumann(33);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    Vector a(g.size()), b(g.size());
    for (int j = 0; j < g.size(); ++j) {
      a[j] = normal(rng);
      b[j] = normal(rng);
    }
    const double c = normal(rng);
    CHECK(l2_norm(g, c * a) == Approx(std::abs(c) * l2_norm(g, a)));
    CHECK(l2_norm(g, a + b) <= l2_norm(g, a) + l2_norm(g, b) + 1e-12);
  }
}

TEST_CASE("invalid sizes are rejected") {
  CHECK_THROWS_AS(Grid1D::dirichlet(0), Error);
  CHECK_THROWS_AS(Grid1D::neumann(1), Error);
  CHECK_THROWS_AS(TimeMesh(0.0, 1.0, 0), Error);
}
