#pragma once

#include "mildreg/meshnorm.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mildreg {

// Boundary kernel K(b, y) for the two boundary points b in {0, 1}. The
// effective kernel is amplitude * k_b(y).
struct KernelSpec {
  std::string name;
  std::function<double(double)> k0;
  std::function<double(double)> k1;
  double amplitude = 1.0;

  static KernelSpec zero();
  // k0(y) = a sin(pi y), k1(y) = a y (1 - y)
  static KernelSpec sin_poly(double amplitude);
  // k0(y) = a (1 - y), k1(y) = a y
  static KernelSpec linear(double amplitude);
  // Gaussian bump at `center` for k0 and its mirror image at 1 - center for k1.
  static KernelSpec gaussian(double amplitude, double center, double width);

  double at0(double y) const { return amplitude * k0(y); }
  double at1(double y) const { return amplitude * k1(y); }
  // Largest |k_b(y)| over a uniform sample of [0,1].
  double sup_norm(int samples = 1001) const;
};

struct NonlinearitySpec {
  std::string name;
  std::function<double(double)> f;
  double kappa = 0.0;  // declared global Lipschitz constant
  bool is_zero = false;

  static NonlinearitySpec zero();
  static NonlinearitySpec identity(double scale = 1.0);
  static NonlinearitySpec tanh(double scale = 1.0);
  static NonlinearitySpec sine(double scale = 1.0);
  // clamp(slope * s, -cap, cap)
  static NonlinearitySpec affine_clamp(double slope, double cap);

  NonlinearitySpec scaled(double s) const;
  // Max of |f(a) - f(b)| / |a - b| over seeded random pairs in [-range, range].
  double empirical_lipschitz(int pairs, unsigned seed, double range = 10.0) const;
};

// Eigendecomposition of a Laplacian that is symmetric with respect to the grid
// mass W: S = W^{1/2} A0 W^{-1/2} = Q diag(mu) Q^T with Q orthogonal, mu ascending.
struct SpectralDecomposition {
  Vector values;
  Matrix Q;
  Vector sqrt_w;

  int size() const { return static_cast<int>(values.size()); }
  // Mass-orthonormal mode shapes V = W^{-1/2} Q (columns are grid functions).
  Matrix modes() const;
  // W^{-1/2} Q diag(g(mu)) Q^T W^{1/2}
  Matrix apply_function(const std::function<double(double)>& g) const;
  Matrix reconstruct() const;
};

struct Laplacian {
  Grid1D grid;
  Matrix matrix;
  SpectralDecomposition eig;
};

Laplacian assemble_dirichlet_laplacian(const Grid1D& grid);
Laplacian assemble_neumann_laplacian(const Grid1D& grid);

// 2 x n matrix of the nonlocal functional (M u)_b = int K(b, y) u(y) dy.
Matrix assemble_boundary_functional(const Grid1D& grid, const KernelSpec& kernel);

// n x 2 matrix: harmonic (linear) extension of boundary data (v0, v1).
Matrix dirichlet_map(const Grid1D& grid);
// n x 2 matrix: solution of (I - d^2/dx^2) phi = 0 with outward flux (psi0, psi1).
Matrix neumann_map(const Grid1D& grid);

struct Generator {
  Matrix A;
  double min_real_part = 0.0;  // smallest real part of the spectrum of A
  bool sectorial_warning = false;
};

inline constexpr double kSpectralWarningThreshold = -1e-8;

// Ghost-value stencil with u(boundary) = M u.
Generator assemble_nonlocal_dirichlet_generator(const Laplacian& lap, const KernelSpec& kernel);
// Second construction route: A0 (I - D M).
Matrix dirichlet_generator_factored(const Laplacian& lap, const Matrix& D, const Matrix& M);
// Ghost-value stencil with outward flux grad u . nu = M u.
Generator assemble_nonlocal_neumann_generator(const Laplacian& lap, const KernelSpec& kernel);
// (I + A0) N M, the lifted Neumann perturbation.
Matrix neumann_lift_perturbation(const Laplacian& lap, const Matrix& N, const Matrix& M);

// Spectral fractional power of the unperturbed Laplacian; mu = 0 maps to 0.
Matrix fractional_power(const SpectralDecomposition& eig, double sigma);

// (C u)(x_j) = Y(x_j, 0) c0 u(0) + Y(x_j, 1) c1 u(1) on a Neumann grid.
Matrix boundary_trace_operator(const Grid1D& grid, const KernelSpec& upsilon, double c0, double c1);

// Entrywise f on a state or on every column of a trajectory.
template <typename Derived>
typename Derived::PlainObject apply_nemytskii(const NonlinearitySpec& F,
                                              const Eigen::MatrixBase<Derived>& u) {
  using Plain = typename Derived::PlainObject;
  if (F.is_zero) return Plain::Zero(u.rows(), u.cols());
  const Plain values = u;
  return values.unaryExpr(F.f);
}

double min_real_eigenvalue(const Matrix& A);

// Assembled spatial operators for u' + A u = P u + F(C u).
struct OperatorBundle {
  Grid1D grid;
  Laplacian lap;          // A0 and its eigendecomposition
  Matrix A;               // nonlocal generator
  Matrix P;               // zero when absent
  Matrix C;
  NonlinearitySpec F;
  Matrix M_op;            // 2 x n boundary functional
  Matrix perturbation;    // Desch-Schappacher term B with -A = -A0 + B (Volterra form)
  Matrix boundary_lift;   // D (Dirichlet) or N (Neumann), n x 2
  double min_real_part = 0.0;
  std::vector<std::string> warnings;

  int size() const { return grid.size(); }
  const Matrix& A0() const { return lap.matrix; }
  bool has_P() const { return P.size() > 0 && P.cwiseAbs().maxCoeff() > 0.0; }
};

// u' = (Delta + (-Delta)^sP) u + f((-Delta)^sC u), u = M u on the boundary.
// sigma_P = 0 switches the P term off.
OperatorBundle make_dirichlet_bundle(int n_interior, const KernelSpec& kernel, double sigma_P,
                                     double sigma_C, const NonlinearitySpec& F);

// u' = Delta u + f(R Theta u), grad u . nu = M u on the boundary.
OperatorBundle make_neumann_bundle(int n_nodes, const KernelSpec& kernel, const KernelSpec& upsilon,
                                   double c0, double c1, const NonlinearitySpec& F);

}  // namespace mildreg
