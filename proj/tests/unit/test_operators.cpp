#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mildreg/mildsolve.hpp"
#include "mildreg/operators.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace mildreg;
using doctest::Approx;

TEST_CASE("dirichlet laplacian is the 3-point stencil") {
  const Grid1D g = Grid1D::dirichlet(7);
  const Laplacian lap = assemble_dirichlet_laplacian(g);
  const double s = 1.0 / (g.h() * g.h());
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) {
      const double expected = i == j ? 2.0 * s : std::abs(i - j) == 1 ? -s : 0.0;
      CHECK(lap.matrix(i, j) == Approx(expected));
    }
  }
}

TEST_CASE("dirichlet eigenvalues follow the discrete sine formula") {
  const Grid1D g = Grid1D::dirichlet(31);
  const Laplacian lap = assemble_dirichlet_laplacian(g);
  for (int k = 1; k <= 31; ++k) {
    const double s = std::sin(k * std::numbers::pi * g.h() / 2.0);
    CHECK(lap.eig.values[k - 1] == Approx(4.0 * s * s / (g.h() * g.h())).epsilon(1e-12));
  }
  CHECK((lap.eig.reconstruct() - lap.matrix).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("neumann laplacian annihilates constants and is mass-symmetric") {
  const Grid1D g = Grid1D::neumann(17);
  const Laplacian lap = assemble_neumann_laplacian(g);
  CHECK((lap.matrix * Vector::Ones(17)).cwiseAbs().maxCoeff() == 0.0);
  const Matrix WA = g.weights().asDiagonal() * lap.matrix;
  CHECK((WA - WA.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(lap.eig.values[0] == Approx(0.0).epsilon(1e-9));
  CHECK(lap.eig.values[1] > 9.0);
}

TEST_CASE("fractional powers compose") {
  const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(20));
  const Matrix half = fractional_power(lap.eig, 0.5);
  CHECK(((half * half - lap.matrix).cwiseAbs().maxCoeff() / lap.matrix.cwiseAbs().maxCoeff()) < 1e-12);
  CHECK(((fractional_power(lap.eig, 1.0) - lap.matrix).cwiseAbs().maxCoeff() / lap.matrix.cwiseAbs().maxCoeff()) <
        1e-12);
  CHECK((fractional_power(lap.eig, 0.0) - Matrix::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dirichlet map is the linear extension of boundary data") {
  const Grid1D g = Grid1D::dirichlet(9);
  const Matrix D = dirichlet_map(g);
  for (int j = 0; j < 9; ++j) {
    CHECK(D(j, 0) == Approx(1.0 - g.node(j)));
    CHECK(D(j, 1) == Approx(g.node(j)));
  }
}

TEST_CASE("boundary functional integrates the kernel") {
  const Grid1D g = Grid1D::neumann(401);
  const Matrix M = assemble_boundary_functional(g, KernelSpec::sin_poly(0.5));
  const Vector ones = Vector::Ones(g.size());
  // int 0.5 sin(pi y) dy = 1/pi, int 0.5 y(1-y) dy = 1/12.
  CHECK((M * ones)[0] == Approx(1.0 / std::numbers::pi).epsilon(1e-5));
  CHECK((M * ones)[1] == Approx(1.0 / 12.0).epsilon(1e-5));
  CHECK(assemble_boundary_functional(g, KernelSpec::zero()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nonlocal dirichlet generator reduces to A0 at zero amplitude") {
  const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(16));
  const Generator g = assemble_nonlocal_dirichlet_generator(lap, KernelSpec::sin_poly(0.0));
  CHECK((g.A - lap.matrix).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nonlocal dirichlet generator equals the factored form") {
  for (const auto& k : {KernelSpec::sin_poly(0.5), KernelSpec::gaussian(0.8, 0.3, 0.1), KernelSpec::linear(0.4)}) {
    const Laplacian lap = assemble_dirichlet_laplacian(Grid1D::dirichlet(24));
    const Matrix f =
        dirichlet_generator_factored(lap, dirichlet_map(lap.grid), assemble_boundary_functional(lap.grid, k));
    const Matrix A = assemble_nonlocal_dirichlet_generator(lap, k).A;
    CHECK((A - f).cwiseAbs().maxCoeff() / lap.matrix.cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("nonlinearities report their Lipschitz constants") {
  CHECK(NonlinearitySpec::tanh(2.0).kappa == 2.0);
  CHECK(NonlinearitySpec::sine(-0.5).kappa == 0.5);
  CHECK(NonlinearitySpec::affine_clamp(3.0, 1.0).kappa == 3.0);
  CHECK(NonlinearitySpec::zero().is_zero);
  for (const auto& F : {NonlinearitySpec::tanh(1.5), NonlinearitySpec::sine(0.7), NonlinearitySpec::identity(2.0),
                        NonlinearitySpec::affine_clamp(2.0, 0.3)}) {
    CHECK(F.empirical_lipschitz(2000, 3) <= F.kappa + 1e-12);
  }
  CHECK(NonlinearitySpec::affine_clamp(2.0, 0.3).f(10.0) == Approx(0.3));
  CHECK(NonlinearitySpec::tanh(1.0).scaled(3.0).kappa == Approx(3.0));
}

TEST_CASE("nemytskii operator acts entrywise on states and trajectories") {
  Matrix u(2, 3);
  u << 0.0, 1.0, -2.0, 0.5, 3.0, -1.0;
  const Matrix r = apply_nemytskii(NonlinearitySpec::tanh(1.0), u);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(r(i, j) == Approx(std::tanh(u(i, j))));
  }
  CHECK(apply_nemytskii(NonlinearitySpec::zero(), u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compatible initial state satisfies the nonlocal boundary relation") {
  const OperatorBundle b = make_dirichlet_bundle(32, KernelSpec::sin_poly(0.5), 0.2, 0.2, NonlinearitySpec::tanh());
  const Vector base = (std::numbers::pi * b.grid.nodes().array()).sin().matrix();
  const Vector x = compatible_initial_state(b, base);
  // x = base + D c with c = M x, so x - D M x is the base.
  CHECK((x - b.boundary_lift * (b.M_op * x) - base).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dirichlet bundle with sigma_P = 0 has no P") {
  const auto F = NonlinearitySpec::tanh();
  CHECK_FALSE(make_dirichlet_bundle(16, KernelSpec::sin_poly(0.5), 0.0, 0.2, F).has_P());
  CHECK(make_dirichlet_bundle(16, KernelSpec::sin_poly(0.5), 0.3, 0.2, F).has_P());
}

TEST_CASE("neumann bundle: trace operator reproduces boundary values") {
  const OperatorBundle b =
      make_neumann_bundle(21, KernelSpec::sin_poly(0.5), KernelSpec::linear(1.0), 1.0, 1.0, NonlinearitySpec::tanh());
  CHECK_FALSE(b.has_P());
  // C u(x) = (1 - x) u(0) + x u(1) for the linear weight with unit traces.
  Vector u = Vector::Zero(21);
  u[0] = 2.0;
  u[20] = -1.0;
  const Vector Cu = b.C * u;
  for (int j = 0; j < 21; ++j) CHECK(Cu[j] == Approx(2.0 * (1.0 - b.grid.node(j)) - b.grid.node(j)));
}

TEST_CASE("property: min real eigenvalue of symmetric positive matrices is positive") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix R(6, 6);
    for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = normal(rng);
    const Matrix S = R * R.transpose() + 0.5 * Matrix::Identity(6, 6);
    CHECK(min_real_eigenvalue(S) >= 0.5 - 1e-10);
  }
}

TEST_CASE("neumann map samples the closed-form lift") {
  const Grid1D g = Grid1D::neumann(41);
  const Matrix N = neumann_map(g);
  for (int j = 0; j < g.size(); ++j) {
    const double x = g.node(j);
    CHECK(N(j, 0) == Approx(std::cosh(1.0 - x) / std::sinh(1.0)).epsilon(1e-12));
    // Reflection symmetry between the two boundary channels.
    CHECK(N(j, 1) == Approx(N(g.size() - 1 - j, 0)).epsilon(1e-12));
  }
}

TEST_CASE("nonlocal neumann stencil: constant kernel only touches boundary rows") {
  const Laplacian lap = assemble_neumann_laplacian(Grid1D::neumann(21));
  KernelSpec k = KernelSpec::zero();
  k.name = "constant";
  k.k0 = [](double) { return 1.0; };
  k.k1 = [](double) { return 1.0; };
  k.amplitude = 0.7;
  const Generator g = assemble_nonlocal_neumann_generator(lap, k);
  const Vector Au = g.A * Vector::Ones(21);
  for (int j = 1; j < 20; ++j) CHECK(Au[j] == Approx(0.0).scale(1.0));
  CHECK(std::abs(Au[0]) > 1.0);
  CHECK(std::abs(Au[20]) > 1.0);
  CHECK((assemble_nonlocal_neumann_generator(lap, KernelSpec::zero()).A - lap.matrix).cwiseAbs().maxCoeff() == 0.0);
}
