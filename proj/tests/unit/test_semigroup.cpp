#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mildreg/expm.hpp"
#include "mildreg/semigroup.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace mildreg;
using doctest::Approx;

namespace {

Matrix random_matrix(int n, unsigned seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix R(n, n);
  for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = scale * normal(rng);
  return R;
}

}  // namespace

TEST_CASE("expm of a rotation generator") {
  for (double theta : {0.3, 2.0, 25.0}) {
    Matrix Z(2, 2);
    Z << 0.0, -theta, theta, 0.0;
    const Matrix E = expm(Z);
    CHECK(E(0, 0) == Approx(std::cos(theta)).epsilon(1e-12));
    CHECK(E(1, 0) == Approx(std::sin(theta)).epsilon(1e-12));
  }
}

TEST_CASE("expm of a diagonal and of a nilpotent block") {
  Vector d(3);
  d << -50.0, 0.0, 1.5;
  const Matrix E = expm(d.asDiagonal().toDenseMatrix());
  CHECK(E(0, 0) == Approx(std::exp(-50.0)).epsilon(1e-12));
  CHECK(E(1, 1) == Approx(1.0));
  CHECK(E(2, 2) == Approx(std::exp(1.5)).epsilon(1e-14));
  Matrix N = Matrix::Zero(3, 3);
  N(0, 1) = 2.0;
  N(1, 2) = 3.0;
  const Matrix EN = expm(N);
  CHECK(EN(0, 2) == Approx(3.0));  // N^2 / 2
  CHECK(EN(0, 1) == Approx(2.0));
}

TEST_CASE("property: exp(Z) exp(-Z) = I") {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const Matrix Z = random_matrix(6, seed, 2.0);
    CHECK((expm(Z) * expm(-Z) - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("scalar phi functions") {
  CHECK(phi1(0.0) == Approx(1.0));
  CHECK(phi2(0.0) == Approx(0.5));
  for (double z : {-30.0, -1.0, -1e-6, 1e-9, 0.7}) {
    CHECK(phi1(z) == Approx(std::expm1(z) / z).epsilon(1e-10));
    if (std::abs(z) > 1e-3) CHECK(phi2(z) == Approx((std::expm1(z) - z) / (z * z)).epsilon(1e-10));
  }
}

TEST_CASE("matrix phi functions agree with scalar ones on a diagonal") {
  Vector d(3);
  d << -4.0, -0.01, 0.0;
  const PhiFunctions f = phi_functions(d.asDiagonal().toDenseMatrix());
  for (int i = 0; i < 3; ++i) {
    CHECK(f.phi1(i, i) == Approx(phi1(d[i])).epsilon(1e-12));
    CHECK(f.phi2(i, i) == Approx(phi2(d[i])).epsilon(1e-12));
  }
}

TEST_CASE("propagator integrates linear forcing exactly") {
  // u' + a u = g0 + g1 t on one step, exact solution by variation of constants.
  const double a = 3.0, dt = 0.2, g0 = 1.0, g1 = -2.0, x = 0.7;
  Matrix A(1, 1);
  A(0, 0) = a;
  const Propagator p = build_propagator(A, dt, PropagatorMethod::ScalingSquaring);
  const double u1 = p.E(0, 0) * x + p.w_prev(0, 0) * g0 + p.w_curr(0, 0) * (g0 + g1 * dt);
  const double e = std::exp(-a * dt);
  const double exact = e * x + g0 * (1.0 - e) / a + g1 * (dt / a - (1.0 - e) / (a * a));
  CHECK(u1 == Approx(exact).epsilon(1e-13));
}

TEST_CASE("spectral and Pade propagators agree") {
  const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(24));
  const Propagator a = build_propagator(lap.eig, 1e-3);
  const Propagator b = build_propagator(lap.matrix, 1e-3, PropagatorMethod::ScalingSquaring);
  CHECK((a.E - b.E).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.w_prev - b.w_prev).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((a.w_curr - b.w_curr).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("evolve matches one matrix exponential") {
  const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(16));
  const Propagator p = build_propagator(lap.matrix, 0.01);
  const Vector x = Vector::LinSpaced(16, -1.0, 2.0);
  const Vector direct = expm(-0.05 * lap.matrix) * x;
  CHECK((evolve(p, x, 5) - direct).cwiseAbs().maxCoeff() < 1e-12);
  const Matrix all = evolve_all(p, x, 5);
  CHECK((all.col(5) - direct).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((all.col(0) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("volterra reconstruction with zero perturbation is the free semigroup") {
  const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(16));
  const TimeMesh mesh = TimeMesh::uniform(0.5, 50);
  const Propagator p = build_propagator(lap.eig, mesh.dt());
  const Vector x = Vector::Ones(16);
  const Trajectory tr = volterra_reconstruct(lap.grid, p, Matrix::Zero(16, 16), x, mesh);
  CHECK((tr.state(50) - expm(-0.5 * lap.matrix) * x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("volterra reconstruction of a rank-one shift converges to the exponential") {
  // A = A0 - B with B = beta I: S(t) = exp(beta t) exp(-t A0).
  const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(12));
  const double beta = 2.0;
  const Matrix B = beta * Matrix::Identity(12, 12);
  const Vector x = Vector::Ones(12);
  const Vector exact = std::exp(beta) * (expm(-lap.matrix) * x);
  std::vector<double> errors;
  for (int m : {100, 200, 400}) {
    const TimeMesh mesh = TimeMesh::uniform(1.0, m);
    const Trajectory tr = volterra_reconstruct(lap.grid, build_propagator(lap.eig, mesh.dt()), B, x, mesh);
    errors.push_back((tr.state(m) - exact).norm() / exact.norm());
  }
  CHECK(errors[0] / errors[1] > 3.5);
  CHECK(errors[1] / errors[2] > 3.5);
  CHECK(errors[2] < 1e-4);
}

TEST_CASE("line and power-law fits recover exact data") {
  const std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
  const LineFit f = fit_line(x, {1.0, 3.0, 5.0, 7.0});
  CHECK(f.slope == Approx(2.0));
  CHECK(f.intercept == Approx(1.0));
  CHECK(f.max_residual < 1e-12);
  ProbeReport r;
  r.abscissa = geometric_grid(1e-3, 1.0, 10);
  for (double t : r.abscissa) r.values.push_back(0.3 * std::pow(t, -0.75));
  fit_power_law(r);
  CHECK(r.exponent == Approx(-0.75));
  CHECK(r.prefactor == Approx(0.3));
  CHECK(r.verdict == ProbeVerdict::Resolved);
}

TEST_CASE("geometric grid endpoints and ratio") {
  const auto g = geometric_grid(1e-4, 1e-2, 3);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == Approx(1e-4));
  CHECK(g[1] == Approx(1e-3));
  CHECK(g[2] == Approx(1e-2));
}

TEST_CASE("smoothing probe equals the spectral maximum") {
  const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(64));
  const std::vector<double> t = {1e-3, 1e-2};
  const ProbeReport r = smoothing_probe(lap.eig, 0.5, t);
  for (std::size_t i = 0; i < t.size(); ++i) {
    double best = 0.0;
    for (int k = 0; k < lap.eig.size(); ++k) {
      const double mu = lap.eig.values[k];
      best = std::max(best, std::sqrt(mu) * std::exp(-t[i] * mu));
    }
    CHECK(r.values[i] == Approx(best));
  }
}

TEST_CASE("resolvent of the Dirichlet laplacian decays like 1/r") {
  const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(32));
  const ResolventReport r = resolvent_probe(lap.grid, lap.matrix, 0.0, geometric_grid(1e2, 1e5, 8));
  CHECK(r.ray(std::numbers::pi / 2).exponent == Approx(-1.0).epsilon(0.02));
  CHECK(r.ray(0.0).exponent == Approx(-1.0).epsilon(0.05));
}

TEST_CASE("volterra deviation from the free semigroup is linear in the kernel amplitude") {
  const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(24));
  const TimeMesh mesh = TimeMesh::uniform(0.5, 100);
  const Propagator p = build_propagator(lap.eig, mesh.dt());
  const Vector x = Vector::Ones(24);
  const Trajectory free = volterra_reconstruct(lap.grid, p, Matrix::Zero(24, 24), x, mesh);
  auto deviation = [&](double a) {
    const Matrix B = lap.matrix * dirichlet_map(lap.grid) *
                     assemble_boundary_functional(lap.grid, KernelSpec::sin_poly(a));
    const Trajectory tr = volterra_reconstruct(lap.grid, p, B, x, mesh);
    return (tr.states - free.states).cwiseAbs().maxCoeff();
  };
  const double d1 = deviation(1e-3), d2 = deviation(2e-3);
  CHECK(d1 > 0.0);
  CHECK(d2 / d1 == Approx(2.0).epsilon(1e-2));
}
