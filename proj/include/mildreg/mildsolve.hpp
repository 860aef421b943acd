#pragma once

#include "mildreg/admissibility.hpp"
#include "mildreg/meshnorm.hpp"
#include "mildreg/operators.hpp"
#include "mildreg/semigroup.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mildreg {

// u' + A u = P u + F(C u), u(0) = x0 on [0, tau].
struct MildProblem {
  OperatorBundle bundle;
  StateVector x0;
  double tau = 1.0;
  double p = 2.0;

  void validate() const;
};

struct PicardConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int max_iter = 200;
  int m_steps = 200;  // time steps on [0, tau]; windows are whole multiples of dt
  double theta_target = 0.9;
  int stall_limit = 5;
  GammaOptions gamma;
  bool measure_lipschitz = true;
  int lipschitz_pairs = 20;
  bool compute_oracle = true;

  void validate() const;
};

struct WindowDiagnostics {
  int index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  int steps = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> increments;  // ||v^{k+1} - v^k||_{L^p}
  double observed_ratio = 0.0;     // exp(slope) of the log-increment line
  double max_ratio = 0.0;          // largest consecutive increment ratio
  double fit_residual = 0.0;       // max |log increment - line| after iteration 3
  double fixed_point_residual = 0.0;  // ||v - Phi(v)|| / ||v||
  double first_step_derivative = 0.0;  // ||(u_1 - u_0)/dt||
};

struct SolveReport {
  std::vector<WindowDiagnostics> windows;
  ContractionWindow window;
  std::vector<AdmissibilityCertificate> certificates;
  LipschitzReport lipschitz;
  double representation_residual = 0.0;
  double strong_residual = 0.0;
  double oracle_gap = -1.0;  // relative l2 endpoint gap; negative when not computed
  std::string oracle_method;
  double solution_scale = 0.0;  // max_t ||u(t)||
  double wall_time = 0.0;       // seconds
  int total_iterations = 0;
};

// w(t_i) = int_0^{t_i} exp(-(t_i - s)A) v(s) ds with v linear between nodes; w(t_0) = 0.
Trajectory convolve(const Propagator& prop, const Trajectory& v);
Matrix convolve(const Propagator& prop, const Eigen::Ref<const Matrix>& v);
// Transpose of the discrete convolution (Euclidean pairing, node by node).
Matrix convolve_transpose(const Propagator& prop, const Eigen::Ref<const Matrix>& y);

// z = convolve(v) + exp(-tA) x_start; returns P z + F(C z) node by node.
Trajectory phi_map(const MildProblem& problem, const Propagator& prop,
                   const Eigen::Ref<const Vector>& x_start, const Trajectory& v);

struct PicardResult {
  Trajectory u;
  Trajectory v;
  WindowDiagnostics diagnostics;
};

// Banach iteration v <- Phi(v) on one window, then u = convolve(v) + exp(-tA) x_start.
PicardResult picard_window(const MildProblem& problem, const Propagator& prop,
                           const TimeMesh& window, const Eigen::Ref<const Vector>& x_start,
                           const PicardConfig& config,
                           const std::optional<Matrix>& v_initial = std::nullopt);

struct Solution {
  Trajectory u;
  SolveReport report;
};

Solution solve(const MildProblem& problem, const PicardConfig& config);

// max_i || u(t_i) - [exp(-t_i A) u(0) + int_0^{t_i} exp(-(t_i-s)A)(P u + F(C u))(s) ds] ||
double representation_residual(const MildProblem& problem, const Trajectory& u);
double representation_residual(const MildProblem& problem, const Propagator& prop,
                               const Trajectory& u);

// || u' + A u - P u - F(C u) ||_{L^p(0,tau; X)} with u' by differences.
double strong_residual(const MildProblem& problem, const Trajectory& u);

enum class OracleScheme { ImplicitEuler, CrankNicolson };

const char* to_string(OracleScheme scheme);

Trajectory oracle_solve(const MildProblem& problem, OracleScheme scheme, int m_steps);
// (2^r u_{2m}(tau) - u_m(tau)) / (2^r - 1) with r the order of the scheme.
StateVector richardson_endpoint(const MildProblem& problem, OracleScheme scheme, int m_steps);
// exp(-tau (A - P)) x0; only meaningful when F vanishes.
StateVector linear_endpoint(const MildProblem& problem);

double relative_l2_gap(const Grid1D& grid, const Eigen::Ref<const Vector>& u,
                       const Eigen::Ref<const Vector>& reference);

// base + L c, with L the boundary lift and c solving (I - M L) c = M base, so the
// state satisfies the nonlocal boundary relation of the bundle.
StateVector compatible_initial_state(const OperatorBundle& bundle, const Eigen::Ref<const Vector>& base);

}  // namespace mildreg
