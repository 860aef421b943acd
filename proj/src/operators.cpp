#include "mildreg/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mildreg {

namespace {

constexpr double kPi = std::numbers::pi;

SpectralDecomposition decompose(const Matrix& A0, const Vector& weights) {
  SpectralDecomposition eig;
  eig.sqrt_w = weights.cwiseSqrt();
  Matrix S = eig.sqrt_w.asDiagonal() * A0 * eig.sqrt_w.cwiseInverse().asDiagonal();
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(S);
  require(solver.info() == Eigen::Success, "Laplacian eigendecomposition failed");
  eig.values = solver.eigenvalues();
  eig.Q = solver.eigenvectors();
  return eig;
}

Matrix second_difference(int n, double h) {
  Matrix L = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    L(j, j) = 2.0;
    if (j > 0) L(j, j - 1) = -1.0;
    if (j + 1 < n) L(j, j + 1) = -1.0;
  }
  return L / (h * h);
}

// Quadrature weights for integrals over [0,1] of functions sampled on the grid.
// Dirichlet grids lack the endpoints, whose values are linearly extrapolated.
Vector integration_weights(const Grid1D& grid) {
  if (grid.include_boundary()) return grid.weights();
  const int n = grid.size();
  const double h = grid.h();
  Vector w = Vector::Constant(n, h);
  w[0] -= h / 2;
  w[n - 1] -= h / 2;
  if (n == 1) {
    w[0] = 1.0;  // midpoint rule on the single interior node
    return w;
  }
  w[0] += 1.5 * h;
  w[1] -= 0.5 * h;
  w[n - 1] += 1.5 * h;
  w[n - 2] -= 0.5 * h;
  return w;
}

Generator finish_generator(Matrix A) {
  Generator g;
  g.min_real_part = min_real_eigenvalue(A);
  g.sectorial_warning = g.min_real_part < kSpectralWarningThreshold;
  g.A = std::move(A);
  return g;
}

}  // namespace

KernelSpec KernelSpec::zero() {
  return {"zero", [](double) { return 0.0; }, [](double) { return 0.0; }, 0.0};
}

KernelSpec KernelSpec::sin_poly(double amplitude) {
  return {"sin-poly", [](double y) { return std::sin(kPi * y); },
          [](double y) { return y * (1.0 - y); }, amplitude};
}

KernelSpec KernelSpec::linear(double amplitude) {
  return {"linear", [](double y) { return 1.0 - y; }, [](double y) { return y; }, amplitude};
}

KernelSpec KernelSpec::gaussian(double amplitude, double center, double width) {
  require(width > 0.0, "gaussian kernel width must be positive");
  auto bump = [width](double c) {
    return [c, width](double y) { return std::exp(-0.5 * (y - c) * (y - c) / (width * width)); };
  };
  return {"gaussian", bump(center), bump(1.0 - center), amplitude};
}

double KernelSpec::sup_norm(int samples) const {
  double s = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double y = static_cast<double>(i) / (samples - 1);
    s = std::max({s, std::abs(at0(y)), std::abs(at1(y))});
  }
  return s;
}

NonlinearitySpec NonlinearitySpec::zero() {
  return {"zero", [](double) { return 0.0; }, 0.0, true};
}

NonlinearitySpec NonlinearitySpec::identity(double scale) {
  return {"identity", [scale](double s) { return scale * s; }, std::abs(scale), scale == 0.0};
}

NonlinearitySpec NonlinearitySpec::tanh(double scale) {
  return {"tanh", [scale](double s) { return scale * std::tanh(s); }, std::abs(scale),
          scale == 0.0};
}

NonlinearitySpec NonlinearitySpec::sine(double scale) {
  return {"sin", [scale](double s) { return scale * std::sin(s); }, std::abs(scale),
          scale == 0.0};
}

NonlinearitySpec NonlinearitySpec::affine_clamp(double slope, double cap) {
  require(cap >= 0.0, "affine-clamp cap must be nonnegative");
  return {"affine-clamp", [slope, cap](double s) { return std::clamp(slope * s, -cap, cap); },
          std::abs(slope), slope == 0.0 || cap == 0.0};
}

NonlinearitySpec NonlinearitySpec::scaled(double s) const {
  auto base = f;
  return {name, [base, s](double x) { return s * base(x); }, std::abs(s) * kappa,
          is_zero || s == 0.0};
}

double NonlinearitySpec::empirical_lipschitz(int pairs, unsigned seed, double range) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const double a = dist(rng);
    const double b = dist(rng);
    if (a == b) continue;
    worst = std::max(worst, std::abs(f(a) - f(b)) / std::abs(a - b));
  }
  return worst;
}

Matrix SpectralDecomposition::modes() const {
  return sqrt_w.cwiseInverse().asDiagonal() * Q;
}

Matrix SpectralDecomposition::apply_function(const std::function<double(double)>& g) const {
  Vector gv(values.size());
  for (int k = 0; k < values.size(); ++k) gv[k] = g(values[k]);
  const Matrix left = sqrt_w.cwiseInverse().asDiagonal() * Q;
  const Matrix right = Q.transpose() * sqrt_w.asDiagonal();
  return left * gv.asDiagonal() * right;
}

Matrix SpectralDecomposition::reconstruct() const {
  return apply_function([](double mu) { return mu; });
}

Laplacian assemble_dirichlet_laplacian(const Grid1D& grid) {
  require(!grid.include_boundary(), "Dirichlet Laplacian needs a Dirichlet grid");
  require(grid.size() >= 2, "Dirichlet Laplacian needs at least two interior nodes");
  Matrix L = second_difference(grid.size(), grid.h());
  SpectralDecomposition eig = decompose(L, grid.weights());
  return {grid, std::move(L), std::move(eig)};
}

Laplacian assemble_neumann_laplacian(const Grid1D& grid) {
  require(grid.include_boundary(), "Neumann Laplacian needs a grid with boundary nodes");
  require(grid.size() >= 3, "Neumann Laplacian needs at least three nodes");
  const int n = grid.size();
  const double h = grid.h();
  Matrix L = second_difference(n, h);
  // Ghost points u_{-1} = u_1 and u_{n} = u_{n-2}.
  L(0, 1) = -2.0 / (h * h);
  L(n - 1, n - 2) = -2.0 / (h * h);
  SpectralDecomposition eig = decompose(L, grid.weights());
  return {grid, std::move(L), std::move(eig)};
}

Matrix assemble_boundary_functional(const Grid1D& grid, const KernelSpec& kernel) {
  const Vector w = integration_weights(grid);
  Matrix M(2, grid.size());
  for (int j = 0; j < grid.size(); ++j) {
    const double y = grid.node(j);
    M(0, j) = w[j] * kernel.at0(y);
    M(1, j) = w[j] * kernel.at1(y);
  }
  return M;
}

Matrix dirichlet_map(const Grid1D& grid) {
  Matrix D(grid.size(), 2);
  for (int j = 0; j < grid.size(); ++j) {
    const double x = grid.node(j);
    D(j, 0) = 1.0 - x;
    D(j, 1) = x;
  }
  return D;
}

Matrix neumann_map(const Grid1D& grid) {
  const double s = std::sinh(1.0);
  Matrix N(grid.size(), 2);
  for (int j = 0; j < grid.size(); ++j) {
    const double x = grid.node(j);
    N(j, 0) = std::cosh(1.0 - x) / s;
    N(j, 1) = std::cosh(x) / s;
  }
  return N;
}

Generator assemble_nonlocal_dirichlet_generator(const Laplacian& lap, const KernelSpec& kernel) {
  const Grid1D& grid = lap.grid;
  require(!grid.include_boundary(), "nonlocal Dirichlet generator needs a Dirichlet grid");
  const int n = grid.size();
  const double h2 = grid.h() * grid.h();
  const Matrix M = assemble_boundary_functional(grid, kernel);
  Matrix A = lap.matrix;
  // Ghost values u_0 = (M u)_0 and u_{n+1} = (M u)_1 enter the first and last rows.
  A.row(0) -= M.row(0) / h2;
  A.row(n - 1) -= M.row(1) / h2;
  return finish_generator(std::move(A));
}

Matrix dirichlet_generator_factored(const Laplacian& lap, const Matrix& D, const Matrix& M) {
  const int n = lap.grid.size();
  return lap.matrix * (Matrix::Identity(n, n) - D * M);
}

Generator assemble_nonlocal_neumann_generator(const Laplacian& lap, const KernelSpec& kernel) {
  const Grid1D& grid = lap.grid;
  require(grid.include_boundary(), "nonlocal Neumann generator needs a Neumann grid");
  const int n = grid.size();
  const double h = grid.h();
  const Matrix M = assemble_boundary_functional(grid, kernel);
  Matrix A = lap.matrix;
  // Central-difference ghosts: u_{-1} = u_1 + 2h (M u)_0, u_{n} = u_{n-2} + 2h (M u)_1.
  A.row(0) -= (2.0 / h) * M.row(0);
  A.row(n - 1) -= (2.0 / h) * M.row(1);
  return finish_generator(std::move(A));
}

Matrix neumann_lift_perturbation(const Laplacian& lap, const Matrix& N, const Matrix& M) {
  const int n = lap.grid.size();
  return (Matrix::Identity(n, n) + lap.matrix) * N * M;
}

Matrix fractional_power(const SpectralDecomposition& eig, double sigma) {
  require(sigma >= 0.0, "fractional power exponent must be nonnegative");
  const double scale = eig.values.cwiseAbs().maxCoeff();
  const double floor = 1e-10 * scale;
  return eig.apply_function([sigma, floor](double mu) {
    if (mu <= floor) return 0.0;
    return std::pow(mu, sigma);
  });
}

Matrix boundary_trace_operator(const Grid1D& grid, const KernelSpec& upsilon, double c0,
                               double c1) {
  require(grid.include_boundary(), "boundary trace operator needs boundary nodes");
  const int n = grid.size();
  Matrix C = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    const double x = grid.node(j);
    C(j, 0) += upsilon.at0(x) * c0;
    C(j, n - 1) += upsilon.at1(x) * c1;
  }
  return C;
}

double min_real_eigenvalue(const Matrix& A) {
  Eigen::EigenSolver<Matrix> solver(A, false);
  require(solver.info() == Eigen::Success, "eigenvalue computation failed");
  return solver.eigenvalues().real().minCoeff();
}

OperatorBundle make_dirichlet_bundle(int n_interior, const KernelSpec& kernel, double sigma_P,
                                     double sigma_C, const NonlinearitySpec& F) {
  require(sigma_P >= 0.0 && sigma_P <= 1.0, "sigma_P must lie in [0,1]");
  require(sigma_C >= 0.0 && sigma_C <= 1.0, "sigma_C must lie in [0,1]");
  const Grid1D grid = Grid1D::dirichlet(n_interior);
  Laplacian lap = assemble_dirichlet_laplacian(grid);
  Generator gen = assemble_nonlocal_dirichlet_generator(lap, kernel);
  const int n = grid.size();

  OperatorBundle b{grid, lap, gen.A, Matrix::Zero(n, n), fractional_power(lap.eig, sigma_C), F,
                   assemble_boundary_functional(grid, kernel), Matrix(), dirichlet_map(grid),
                   gen.min_real_part, {}};
  if (sigma_P > 0.0) b.P = fractional_power(lap.eig, sigma_P);
  b.perturbation = lap.matrix * b.boundary_lift * b.M_op;
  if (gen.sectorial_warning) {
    b.warnings.push_back("nonlocal Dirichlet generator has an eigenvalue with real part " +
                         std::to_string(gen.min_real_part));
  }
  return b;
}

OperatorBundle make_neumann_bundle(int n_nodes, const KernelSpec& kernel, const KernelSpec& upsilon,
                                   double c0, double c1, const NonlinearitySpec& F) {
  const Grid1D grid = Grid1D::neumann(n_nodes);
  Laplacian lap = assemble_neumann_laplacian(grid);
  Generator gen = assemble_nonlocal_neumann_generator(lap, kernel);
  const int n = grid.size();

  OperatorBundle b{grid, lap, gen.A, Matrix::Zero(n, n), boundary_trace_operator(grid, upsilon, c0, c1),
                   F, assemble_boundary_functional(grid, kernel), Matrix(), neumann_map(grid),
                   gen.min_real_part, {}};
  b.perturbation = neumann_lift_perturbation(lap, b.boundary_lift, b.M_op);
  if (gen.sectorial_warning) {
    b.warnings.push_back("nonlocal Neumann generator has an eigenvalue with real part " +
                         std::to_string(gen.min_real_part));
  }
  return b;
}

}  // namespace mildreg
