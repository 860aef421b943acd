#include "mildreg/mildsolve.hpp"

#include "mildreg/expm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace mildreg {

namespace {

Matrix forcing(const MildProblem& problem, const Eigen::Ref<const Matrix>& u) {
  const OperatorBundle& b = problem.bundle;
  Matrix g = Matrix::Zero(u.rows(), u.cols());
  if (b.has_P()) g.noalias() += b.P * u;
  if (!b.F.is_zero) g += apply_nemytskii(b.F, b.C * u);
  return g;
}

Matrix shifted_generator(const MildProblem& problem) {
  const OperatorBundle& b = problem.bundle;
  return b.has_P() ? Matrix(b.A - b.P) : b.A;
}

void fill_increment_fits(WindowDiagnostics& d) {
  std::vector<double> k_all, l_all, k_tail, l_tail;
  for (std::size_t k = 0; k < d.increments.size(); ++k) {
    if (!(d.increments[k] > 0.0)) continue;
    k_all.push_back(static_cast<double>(k));
    l_all.push_back(std::log(d.increments[k]));
    if (k >= 3) {
      k_tail.push_back(static_cast<double>(k));
      l_tail.push_back(std::log(d.increments[k]));
    }
  }
  if (k_all.size() >= 2) d.observed_ratio = std::exp(fit_line(k_all, l_all).slope);
  if (k_tail.size() >= 3) d.fit_residual = fit_line(k_tail, l_tail).max_residual;
  for (std::size_t k = 1; k < d.increments.size(); ++k) {
    if (d.increments[k - 1] > 0.0) {
      d.max_ratio = std::max(d.max_ratio, d.increments[k] / d.increments[k - 1]);
    }
  }
}

}  // namespace

void MildProblem::validate() const {
  const int n = bundle.size();
  require(x0.size() == n, "initial state does not match the grid");
  require(tau > 0.0, "horizon tau must be positive");
  require(p > 1.0, "exponent p must exceed 1");
  require(bundle.A.rows() == n && bundle.A.cols() == n, "generator dimension mismatch");
  require(bundle.C.rows() == n && bundle.C.cols() == n, "observation operator C dimension mismatch");
  require(bundle.P.size() == 0 || (bundle.P.rows() == n && bundle.P.cols() == n),
          "operator P dimension mismatch");
}

void PicardConfig::validate() const {
  require(rel_tol > 0.0, "rel_tol must be positive");
  require(max_iter >= 1, "max_iter must be at least 1");
  require(m_steps >= 2, "m_steps must be at least 2");
  require(theta_target > 0.0 && theta_target < 1.0, "theta_target must lie in (0,1)");
  require(stall_limit >= 1, "stall_limit must be at least 1");
}

Matrix convolve(const Propagator& prop, const Eigen::Ref<const Matrix>& v) {
  Matrix w(v.rows(), v.cols());
  w.col(0).setZero();
  for (Eigen::Index i = 1; i < v.cols(); ++i) {
    w.col(i).noalias() = prop.E * w.col(i - 1);
    w.col(i).noalias() += prop.w_prev * v.col(i - 1);
    w.col(i).noalias() += prop.w_curr * v.col(i);
  }
  return w;
}

Trajectory convolve(const Propagator& prop, const Trajectory& v) {
  require(std::abs(v.mesh.dt() - prop.dt) <= 1e-9 * prop.dt, "trajectory mesh does not match propagator");
  return {v.grid, v.mesh, convolve(prop, v.states)};
}

Matrix convolve_transpose(const Propagator& prop, const Eigen::Ref<const Matrix>& y) {
  const Eigen::Index m = y.cols() - 1;
  Matrix out = Matrix::Zero(y.rows(), y.cols());
  if (m < 1) return out;
  const Matrix Et = prop.E.transpose();
  const Matrix Wc = prop.w_curr.transpose();
  const Matrix Wp = prop.w_prev.transpose();
  Vector lambda = y.col(m);
  for (Eigen::Index j = m; j >= 1; --j) {
    if (j < m) lambda = y.col(j) + Et * lambda;
    out.col(j).noalias() += Wc * lambda;
    out.col(j - 1).noalias() += Wp * lambda;
  }
  return out;
}

Trajectory phi_map(const MildProblem& problem, const Propagator& prop,
                   const Eigen::Ref<const Vector>& x_start, const Trajectory& v) {
  const Matrix z = convolve(prop, v.states) + evolve_all(prop, x_start, v.mesh.steps());
  return {v.grid, v.mesh, forcing(problem, z)};
}

PicardResult picard_window(const MildProblem& problem, const Propagator& prop,
                           const TimeMesh& window, const Eigen::Ref<const Vector>& x_start,
                           const PicardConfig& config, const std::optional<Matrix>& v_initial) {
  const Grid1D& grid = problem.bundle.grid;
  const double p = problem.p;
  require(std::abs(window.dt() - prop.dt) <= 1e-9 * prop.dt, "window mesh does not match propagator");
  Trajectory v(grid, window);
  if (v_initial) {
    require(v_initial->rows() == grid.size() && v_initial->cols() == window.size(),
            "initial Picard guess has the wrong shape");
    v.states = *v_initial;
  }

  WindowDiagnostics d;
  d.t_start = window.t_start();
  d.t_end = window.t_end();
  d.steps = window.steps();
  int stalls = 0;
  for (int k = 0; k < config.max_iter; ++k) {
    Trajectory next = phi_map(problem, prop, x_start, v);
    const double inc = lp_time_norm(grid, window, next.states - v.states, p);
    const double vnorm = lp_time_norm(v, p);
    d.increments.push_back(inc);
    v = std::move(next);
    d.iterations = k + 1;
    if (inc <= config.rel_tol * vnorm || inc <= config.abs_tol) {
      d.converged = true;
      break;
    }
    if (k > 0 && inc >= d.increments[k - 1]) {
      if (++stalls >= config.stall_limit) {
        throw Error(ErrorCode::NonContractive,
                    "Picard increments failed to decrease for " + std::to_string(stalls) +
                        " consecutive iterations");
      }
    } else {
      stalls = 0;
    }
  }
  fill_increment_fits(d);
  if (!d.converged) {
    throw Error(ErrorCode::MaxIter, "Picard tolerance unmet after " + std::to_string(config.max_iter) +
                                        " iterations");
  }

  const Trajectory check = phi_map(problem, prop, x_start, v);
  const double vnorm = lp_time_norm(v, p);
  const double gap = lp_time_norm(grid, window, check.states - v.states, p);
  d.fixed_point_residual = vnorm > 0.0 ? gap / vnorm : gap;

  Trajectory u(grid, window, convolve(prop, v.states) + evolve_all(prop, x_start, window.steps()));
  d.first_step_derivative = l2_norm(grid, (u.state(1) - u.state(0)) / window.dt());
  return {std::move(u), std::move(v), std::move(d)};
}

Solution solve(const MildProblem& problem, const PicardConfig& config) {
  problem.validate();
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const OperatorBundle& b = problem.bundle;
  const Grid1D& grid = b.grid;
  const TimeMesh mesh = TimeMesh::uniform(problem.tau, config.m_steps);
  const Propagator prop = build_propagator(b.A, mesh.dt());

  SolveReport report;
  std::optional<GammaCurve> curve_P, curve_C;
  if (b.has_P()) curve_P.emplace(b, "P", problem.p, config.gamma);
  if (!b.F.is_zero) curve_C.emplace(b, "C", problem.p, config.gamma);
  report.window = choose_window(curve_P ? &*curve_P : nullptr, curve_C ? &*curve_C : nullptr,
                                b.F.kappa, problem.p, config.theta_target, problem.tau);
  const int k_steps = static_cast<int>(std::floor(report.window.alpha0 / mesh.dt() * (1.0 + 1e-12)));
  if (k_steps < 1) {
    throw Error(ErrorCode::NoWindow, "contraction window " + std::to_string(report.window.alpha0) +
                                         " is shorter than one time step " + std::to_string(mesh.dt()));
  }
  if (curve_P) report.certificates.push_back(curve_P->certificate(report.window.alpha0));
  if (curve_C) report.certificates.push_back(curve_C->certificate(report.window.alpha0));

  if (config.measure_lipschitz && (b.has_P() || !b.F.is_zero)) {
    const TimeMesh first(0.0, k_steps * mesh.dt(), k_steps);
    report.lipschitz = measure_phi_lipschitz(problem, prop, first, problem.x0, config.lipschitz_pairs,
                                             config.gamma.seed);
    report.window.measured_lipschitz = report.lipschitz.value;
  }

  Trajectory u(grid, mesh);
  u.state(0) = problem.x0;
  int first = 0;
  int index = 0;
  while (first < mesh.steps()) {
    const int steps = std::min(k_steps, mesh.steps() - first);
    const TimeMesh window = mesh.slice(first, steps);
    const Vector x_start = u.state(first);
    PicardResult r = [&] {
      try {
        return picard_window(problem, prop, window, x_start, config);
      } catch (const Error& e) {
        throw Error(e.code(), "window " + std::to_string(index) + ": " + e.what());
      }
    }();
    r.diagnostics.index = index;
    u.states.middleCols(first + 1, steps) = r.u.states.rightCols(steps);
    report.total_iterations += r.diagnostics.iterations;
    report.windows.push_back(std::move(r.diagnostics));
    first += steps;
    ++index;
  }

  report.representation_residual = representation_residual(problem, prop, u);
  report.strong_residual = strong_residual(problem, u);
  report.solution_scale = l2_norms(grid, u.states).maxCoeff();
  if (config.compute_oracle) {
    StateVector reference;
    if (b.F.is_zero) {
      reference = linear_endpoint(problem);
      report.oracle_method = "matrix-exponential";
    } else {
      reference = richardson_endpoint(problem, OracleScheme::CrankNicolson, config.m_steps);
      report.oracle_method = "crank-nicolson-richardson";
    }
    report.oracle_gap = relative_l2_gap(grid, u.state(mesh.steps()), reference);
  }
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(u), std::move(report)};
}

double representation_residual(const MildProblem& problem, const Propagator& prop, const Trajectory& u) {
  require(std::abs(u.mesh.dt() - prop.dt) <= 1e-9 * prop.dt, "trajectory mesh does not match propagator");
  const Matrix rhs = evolve_all(prop, u.state(0), u.mesh.steps()) + convolve(prop, forcing(problem, u.states));
  return l2_norms(u.grid, u.states - rhs).maxCoeff();
}

double representation_residual(const MildProblem& problem, const Trajectory& u) {
  return representation_residual(problem, build_propagator(problem.bundle.A, u.mesh.dt()), u);
}

double strong_residual(const MildProblem& problem, const Trajectory& u) {
  require(u.mesh.size() >= 3, "strong residual needs at least three time nodes");
  const Matrix r = time_derivative(u.mesh, u.states) + problem.bundle.A * u.states - forcing(problem, u.states);
  return lp_time_norm(u.grid, u.mesh, r, problem.p);
}

const char* to_string(OracleScheme scheme) {
  return scheme == OracleScheme::ImplicitEuler ? "implicit-euler" : "crank-nicolson";
}

Trajectory oracle_solve(const MildProblem& problem, OracleScheme scheme, int m_steps) {
  problem.validate();
  require(m_steps >= 2, "oracle needs at least two steps");
  const TimeMesh mesh = TimeMesh::uniform(problem.tau, m_steps);
  const double dt = mesh.dt();
  const int n = problem.bundle.size();
  const Matrix L = shifted_generator(problem);
  const Matrix I = Matrix::Identity(n, n);
  const double theta = scheme == OracleScheme::ImplicitEuler ? 1.0 : 0.5;
  const Eigen::PartialPivLU<Matrix> lu(I + theta * dt * L);
  if (!(lu.rcond() > 1e-12)) {
    throw Error(ErrorCode::Singular, "oracle system is singular at dt = " + std::to_string(dt));
  }
  const Matrix R = I - (1.0 - theta) * dt * L;
  const bool nonlinear = !problem.bundle.F.is_zero;
  auto Fc = [&](const Vector& u) {
    return nonlinear ? apply_nemytskii(problem.bundle.F, problem.bundle.C * u) : Vector::Zero(n).eval();
  };

  Trajectory out(problem.bundle.grid, mesh);
  out.state(0) = problem.x0;
  for (int i = 1; i <= m_steps; ++i) {
    const Vector u = out.state(i - 1);
    const Vector f0 = Fc(u);
    Vector next = lu.solve(R * u + dt * f0);
    if (scheme == OracleScheme::CrankNicolson && nonlinear) {
      next = lu.solve(R * u + 0.5 * dt * (f0 + Fc(next)));
    }
    out.state(i) = next;
  }
  return out;
}

StateVector richardson_endpoint(const MildProblem& problem, OracleScheme scheme, int m_steps) {
  const double factor = scheme == OracleScheme::ImplicitEuler ? 2.0 : 4.0;
  const Trajectory coarse = oracle_solve(problem, scheme, m_steps);
  const Trajectory fine = oracle_solve(problem, scheme, 2 * m_steps);
  return (factor * fine.state(2 * m_steps) - coarse.state(m_steps)) / (factor - 1.0);
}

StateVector linear_endpoint(const MildProblem& problem) {
  return expm(-problem.tau * shifted_generator(problem)) * problem.x0;
}

double relative_l2_gap(const Grid1D& grid, const Eigen::Ref<const Vector>& u,
                       const Eigen::Ref<const Vector>& reference) {
  const double ref = l2_norm(grid, reference);
  const double gap = l2_norm(grid, u - reference);
  return ref > 0.0 ? gap / ref : gap;
}

StateVector compatible_initial_state(const OperatorBundle& bundle, const Eigen::Ref<const Vector>& base) {
  require(base.size() == bundle.size(), "base state does not match the grid");
  const Matrix& L = bundle.boundary_lift;
  const Matrix& M = bundle.M_op;
  const Matrix K = Matrix::Identity(2, 2) - M * L;
  const Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::Singular, "boundary compatibility system I - M L is singular");
  }
  const Vector c = lu.solve(M * base);
  return base + L * c;
}

}  // namespace mildreg
