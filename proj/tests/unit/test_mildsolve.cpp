#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mildreg/expm.hpp"
#include "mildreg/mildsolve.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace mildreg;
using doctest::Approx;

namespace {

Matrix random_states(int n, int cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix R(n, cols);
  for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = normal(rng);
  return R;
}

MildProblem dirichlet_problem(int n, double sigma, const NonlinearitySpec& F) {
  OperatorBundle b = make_dirichlet_bundle(n, KernelSpec::sin_poly(0.5), sigma, sigma, F);
  const Vector base = (std::numbers::pi * b.grid.nodes().array()).sin().matrix();
  Vector x0 = compatible_initial_state(b, base);
  return {std::move(b), std::move(x0), 1.0, 2.0};
}

PicardConfig fast_config(int m) {
  PicardConfig pc;
  pc.m_steps = m;
  pc.measure_lipschitz = false;
  return pc;
}

}  // namespace

TEST_CASE("convolution of a constant with A = 0 is t times the constant") {
  const Matrix A = Matrix::Zero(2, 2);
  const TimeMesh mesh = TimeMesh::uniform(1.0, 10);
  const Propagator p = build_propagator(A, mesh.dt(), PropagatorMethod::ScalingSquaring);
  Matrix v(2, mesh.size());
  v.row(0).setConstant(3.0);
  v.row(1).setConstant(-1.0);
  const Matrix w = convolve(p, v);
  for (int i = 0; i < mesh.size(); ++i) {
    CHECK(w(0, i) == Approx(3.0 * mesh.node(i)));
    CHECK(w(1, i) == Approx(-mesh.node(i)));
  }
}

TEST_CASE("convolution against a scalar decay matches the closed form") {
  // int_0^t exp(-a (t - s)) s ds = t/a - (1 - exp(-a t)) / a^2.
  const double a = 4.0;
  Matrix A(1, 1);
  A(0, 0) = a;
  const TimeMesh mesh = TimeMesh::uniform(1.0, 7);
  const Propagator p = build_propagator(A, mesh.dt());
  Matrix v(1, mesh.size());
  for (int i = 0; i < mesh.size(); ++i) v(0, i) = mesh.node(i);
  const Matrix w = convolve(p, v);
  for (int i = 0; i < mesh.size(); ++i) {
    const double t = mesh.node(i);
    CHECK(w(0, i) == Approx(t / a - (1.0 - std::exp(-a * t)) / (a * a)).epsilon(1e-12));
  }
}

TEST_CASE("property: convolve_transpose is the adjoint of convolve") {
  const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(10));
  const Propagator p = build_propagator(lap.matrix, 0.01);
  for (unsigned seed = 1; seed <= 5; ++seed) {
    const Matrix v = random_states(10, 13, seed);
    const Matrix y = random_states(10, 13, seed + 100);
    const double lhs = (convolve(p, v).array() * y.array()).sum();
    const double rhs = (v.array() * convolve_transpose(p, y).array()).sum();
    CHECK(lhs == Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("linear problem: Picard solution matches the matrix exponential") {
  MildProblem problem = dirichlet_problem(32, 0.2, NonlinearitySpec::zero());
  const Vector exact = expm(-(problem.bundle.A - problem.bundle.P)) * problem.x0;
  const Solution coarse = solve(problem, fast_config(100));
  const Solution fine = solve(problem, fast_config(200));
  CHECK(fine.report.oracle_method == "matrix-exponential");
  const double e100 = relative_l2_gap(problem.bundle.grid, coarse.u.state(100), exact);
  const double e200 = relative_l2_gap(problem.bundle.grid, fine.u.state(200), exact);
  CHECK(e200 < 1e-3);
  CHECK(e100 / e200 > 3.5);  // second order in dt
  CHECK(fine.report.representation_residual < 1e-9);
}

TEST_CASE("unperturbed linear problem is exact up to round-off") {
  MildProblem problem = dirichlet_problem(32, 0.0, NonlinearitySpec::zero());
  const Solution sol = solve(problem, fast_config(50));
  CHECK(sol.report.windows.size() == 1);
  CHECK(sol.report.oracle_gap < 1e-10);
}

TEST_CASE("semilinear Dirichlet problem converges on every window") {
  MildProblem problem = dirichlet_problem(32, 0.2, NonlinearitySpec::tanh());
  PicardConfig pc = fast_config(100);
  pc.measure_lipschitz = true;
  const Solution sol = solve(problem, pc);
  const SolveReport& r = sol.report;
  CHECK(r.window.bound_value <= 0.9);
  CHECK(r.windows.size() >= 2);
  for (const auto& w : r.windows) {
    CHECK(w.converged);
    CHECK(w.max_ratio <= 1.1 * r.window.bound_value);
    CHECK(w.fixed_point_residual <= 10.0 * pc.rel_tol);
  }
  CHECK(r.window.measured_lipschitz <= r.window.bound_value * 1.1);
  CHECK(r.oracle_gap < 1e-3);
  CHECK(r.representation_residual <= 10.0 * pc.rel_tol * std::max(1.0, r.solution_scale));
}

TEST_CASE("windows tile the horizon on the global mesh") {
  MildProblem problem = dirichlet_problem(24, 0.3, NonlinearitySpec::tanh());
  const Solution sol = solve(problem, fast_config(120));
  int steps = 0;
  double t = 0.0;
  for (const auto& w : sol.report.windows) {
    CHECK(w.t_start == Approx(t));
    steps += w.steps;
    t = w.t_end;
  }
  CHECK(steps == 120);
  CHECK(t == Approx(1.0));
}

TEST_CASE("neumann problem converges and agrees with the oracle") {
  OperatorBundle b =
      make_neumann_bundle(33, KernelSpec::sin_poly(0.5), KernelSpec::linear(1.0), 1.0, 1.0, NonlinearitySpec::tanh());
  const Vector base = (1.0 + (std::numbers::pi * b.grid.nodes().array()).cos()).matrix();
  Vector x0 = compatible_initial_state(b, base);
  MildProblem problem{std::move(b), std::move(x0), 1.0, 2.0};
  const Solution sol = solve(problem, fast_config(100));
  CHECK(sol.report.oracle_gap < 1e-3);
  for (const auto& w : sol.report.windows) CHECK(w.converged);
}

TEST_CASE("iteration cap is reported as MaxIter") {
  MildProblem problem = dirichlet_problem(24, 0.2, NonlinearitySpec::tanh());
  PicardConfig pc = fast_config(60);
  pc.max_iter = 2;
  try {
    solve(problem, pc);
    FAIL("expected MaxIter");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MaxIter);
  }
}

TEST_CASE("implicit Euler is first order and Crank-Nicolson second order") {
  MildProblem problem = dirichlet_problem(24, 0.2, NonlinearitySpec::zero());
  const Vector exact = expm(-(problem.bundle.A - problem.bundle.P)) * problem.x0;
  auto err = [&](OracleScheme s, int m) {
    return relative_l2_gap(problem.bundle.grid, oracle_solve(problem, s, m).state(m), exact);
  };
  CHECK(std::log2(err(OracleScheme::ImplicitEuler, 100) / err(OracleScheme::ImplicitEuler, 200)) ==
        Approx(1.0).epsilon(0.1));
  CHECK(std::log2(err(OracleScheme::CrankNicolson, 100) / err(OracleScheme::CrankNicolson, 200)) ==
        Approx(2.0).epsilon(0.1));
}

TEST_CASE("representation residual discriminates an inexact trajectory") {
  MildProblem problem = dirichlet_problem(24, 0.2, NonlinearitySpec::tanh());
  const Trajectory ie = oracle_solve(problem, OracleScheme::ImplicitEuler, 100);
  CHECK(representation_residual(problem, ie) > 1e-4);
}

TEST_CASE("invalid problems are rejected") {
  MildProblem problem = dirichlet_problem(16, 0.2, NonlinearitySpec::tanh());
  problem.tau = -1.0;
  CHECK_THROWS_AS(problem.validate(), Error);
  PicardConfig pc;
  pc.rel_tol = 0.0;
  CHECK_THROWS_AS(pc.validate(), Error);
}
