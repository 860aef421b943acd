#pragma once

#include "mildreg/meshnorm.hpp"
#include "mildreg/operators.hpp"

#include <string>
#include <vector>

namespace mildreg {

enum class PropagatorMethod { Auto, Eigendecomposition, ScalingSquaring };

const char* to_string(PropagatorMethod method);

// One-step solution operator of u' + A u = g on a uniform mesh.
//   E         = exp(-dt A)
//   w_prev    = dt (phi1 - phi2)(-dt A)  weight of g(t_{i-1})
//   w_curr    = dt phi2(-dt A)           weight of g(t_i)
// so that u_i = E u_{i-1} + w_prev g_{i-1} + w_curr g_i integrates the
// piecewise-linear interpolant of g exactly.
struct Propagator {
  Matrix A;
  double dt = 0.0;
  Matrix E;
  Matrix w_prev;
  Matrix w_curr;
  PropagatorMethod method = PropagatorMethod::ScalingSquaring;
};

// Eigendecomposition requires a symmetric A; Auto picks it when A is symmetric.
Propagator build_propagator(const Matrix& A, double dt, PropagatorMethod method = PropagatorMethod::Auto);
// Spectral route for a mass-symmetric Laplacian.
Propagator build_propagator(const SpectralDecomposition& eig, double dt);

StateVector evolve(const Propagator& prop, const Eigen::Ref<const Vector>& x, int k_steps);
// All states E^i x for i = 0..m on the propagator's mesh.
Matrix evolve_all(const Propagator& prop, const Eigen::Ref<const Vector>& x, int m_steps);

// Solves S(t)x = S0(t)x + int_0^t S0(t-s) B S(s)x ds on the mesh, where S0 is the
// semigroup of `a0` and B the Desch-Schappacher perturbation.
Trajectory volterra_reconstruct(const Grid1D& grid, const Propagator& a0, const Matrix& B,
                                const Eigen::Ref<const Vector>& x, const TimeMesh& mesh);

enum class ProbeVerdict { Resolved, Unresolved };

const char* to_string(ProbeVerdict verdict);

inline constexpr double kProbeResidualLimit = 0.2;

// Power-law fit value ~ prefactor * abscissa^exponent in natural-log space.
struct ProbeReport {
  std::string quantity;
  std::string parameter_name;
  double parameter = 0.0;
  std::vector<double> abscissa;
  std::vector<double> values;
  double exponent = 0.0;
  double prefactor = 0.0;
  double residual = 0.0;  // max |log value - fitted line|
  ProbeVerdict verdict = ProbeVerdict::Resolved;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);
// Fits log(values) against log(abscissa) and fills exponent, prefactor, residual, verdict.
void fit_power_law(ProbeReport& report);

std::vector<double> geometric_grid(double first, double last, int count);

// ||A0^sigma exp(-t A0)|| = max_k mu_k^sigma exp(-t mu_k).
ProbeReport smoothing_probe(const SpectralDecomposition& eig, double sigma,
                            const std::vector<double>& t_grid);

// ||A0^{1+alpha} exp(-t A0) L|| for a boundary lift L (Dirichlet or Neumann map),
// measured from Euclidean R^2 into X.
ProbeReport boundary_smoothing_probe(const Laplacian& lap, const Matrix& lift, double alpha,
                                     const std::vector<double>& t_grid, const std::string& label);

struct ResolventReport {
  double omega = 0.0;              // shift used for the ray origin
  std::vector<double> angles;
  std::vector<ProbeReport> rays;   // one fit per angle
  std::vector<std::string> excluded;  // ill-conditioned samples
  double sup_prefactor = 0.0;
  double max_exponent = 0.0;

  const ProbeReport& ray(double angle) const;
};

// ||(lambda + A)^{-1}|| for lambda = omega + r e^{i theta}, theta in {+-pi/2, +-pi/3, 0}.
ResolventReport resolvent_probe(const Grid1D& grid, const Matrix& A, double omega_guess,
                                const std::vector<double>& radii);

}  // namespace mildreg
