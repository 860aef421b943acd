#include "mildreg/semigroup.hpp"

#include "mildreg/expm.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace mildreg {

namespace {

bool is_symmetric(const Matrix& A) {
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  return (A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

Propagator spectral_propagator(const SpectralDecomposition& eig, const Matrix& A, double dt) {
  Propagator p;
  p.A = A;
  p.dt = dt;
  p.method = PropagatorMethod::Eigendecomposition;
  p.E = eig.apply_function([dt](double mu) { return std::exp(-dt * mu); });
  p.w_prev = eig.apply_function([dt](double mu) { return dt * (phi1(-dt * mu) - phi2(-dt * mu)); });
  p.w_curr = eig.apply_function([dt](double mu) { return dt * phi2(-dt * mu); });
  return p;
}

double spectral_floor(const SpectralDecomposition& eig) {
  return 1e-10 * eig.values.cwiseAbs().maxCoeff();
}

}  // namespace

const char* to_string(PropagatorMethod method) {
  switch (method) {
    case PropagatorMethod::Auto: return "auto";
    case PropagatorMethod::Eigendecomposition: return "eigendecomposition";
    case PropagatorMethod::ScalingSquaring: return "scaling-and-squaring";
  }
  return "unknown";
}

const char* to_string(ProbeVerdict verdict) {
  return verdict == ProbeVerdict::Resolved ? "RESOLVED" : "UNRESOLVED";
}

Propagator build_propagator(const Matrix& A, double dt, PropagatorMethod method) {
  require(dt > 0.0, "propagator time step must be positive");
  require(A.rows() == A.cols(), "propagator needs a square generator");
  const bool symmetric = is_symmetric(A);
  if (method == PropagatorMethod::Auto) {
    method = symmetric ? PropagatorMethod::Eigendecomposition : PropagatorMethod::ScalingSquaring;
  }
  if (method == PropagatorMethod::Eigendecomposition) {
    require(symmetric, "eigendecomposition propagator needs a symmetric generator");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (A + A.transpose()));
    require(solver.info() == Eigen::Success, "eigendecomposition failed");
    SpectralDecomposition eig{solver.eigenvalues(), solver.eigenvectors(),
                              Vector::Ones(A.rows())};
    return spectral_propagator(eig, A, dt);
  }

  const PhiFunctions phi = phi_functions(-dt * A);
  Propagator p;
  p.A = A;
  p.dt = dt;
  p.method = PropagatorMethod::ScalingSquaring;
  p.E = phi.exp;
  p.w_prev = dt * (phi.phi1 - phi.phi2);
  p.w_curr = dt * phi.phi2;
  if (!p.E.allFinite() || !p.w_curr.allFinite()) {
    throw Error(ErrorCode::Overflow, "semigroup exponential overflowed; generator is not sectorial");
  }
  return p;
}

Propagator build_propagator(const SpectralDecomposition& eig, double dt) {
  require(dt > 0.0, "propagator time step must be positive");
  return spectral_propagator(eig, eig.reconstruct(), dt);
}

StateVector evolve(const Propagator& prop, const Eigen::Ref<const Vector>& x, int k_steps) {
  require(k_steps >= 0, "evolve needs a nonnegative step count");
  Vector u = x;
  for (int k = 0; k < k_steps; ++k) u = prop.E * u;
  return u;
}

Matrix evolve_all(const Propagator& prop, const Eigen::Ref<const Vector>& x, int m_steps) {
  Matrix out(x.size(), m_steps + 1);
  out.col(0) = x;
  for (int i = 1; i <= m_steps; ++i) out.col(i).noalias() = prop.E * out.col(i - 1);
  return out;
}

Trajectory volterra_reconstruct(const Grid1D& grid, const Propagator& a0, const Matrix& B,
                                const Eigen::Ref<const Vector>& x, const TimeMesh& mesh) {
  require(std::abs(a0.dt - mesh.dt()) <= 1e-12 * mesh.dt(), "propagator step does not match mesh");
  require(B.rows() == grid.size() && B.cols() == grid.size(), "perturbation dimension mismatch");
  const int n = grid.size();
  // (I - w_curr B) S_i = (E + w_prev B) S_{i-1}
  const Matrix lhs = Matrix::Identity(n, n) - a0.w_curr * B;
  const Matrix rhs = a0.E + a0.w_prev * B;
  const Eigen::PartialPivLU<Matrix> lu(lhs);
  if (!(lu.rcond() > 1e-12)) {
    throw Error(ErrorCode::Singular, "Volterra diagonal correction is singular at dt = " +
                                         std::to_string(mesh.dt()));
  }
  Trajectory out(grid, mesh);
  out.state(0) = x;
  for (int i = 1; i < mesh.size(); ++i) out.state(i) = lu.solve(rhs * out.states.col(i - 1));
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "line fit needs at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit fit;
  const double denom = n * sxx - sx * sx;
  fit.slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
  fit.intercept = (sy - fit.slope * sx) / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    fit.max_residual = std::max(fit.max_residual, std::abs(y[i] - fit.slope * x[i] - fit.intercept));
  }
  return fit;
}

void fit_power_law(ProbeReport& report) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < report.values.size(); ++i) {
    if (report.values[i] > 0.0 && report.abscissa[i] > 0.0) {
      lx.push_back(std::log(report.abscissa[i]));
      ly.push_back(std::log(report.values[i]));
    }
  }
  if (lx.size() < 2) {
    report.verdict = ProbeVerdict::Unresolved;
    return;
  }
  const LineFit fit = fit_line(lx, ly);
  report.exponent = fit.slope;
  report.prefactor = std::exp(fit.intercept);
  report.residual = fit.max_residual;
  report.verdict = fit.max_residual > kProbeResidualLimit ? ProbeVerdict::Unresolved
                                                          : ProbeVerdict::Resolved;
}

std::vector<double> geometric_grid(double first, double last, int count) {
  require(first > 0.0 && last > first && count >= 2, "geometric grid needs 0 < first < last");
  std::vector<double> g(count);
  const double ratio = std::log(last / first) / (count - 1);
  for (int i = 0; i < count; ++i) g[i] = first * std::exp(ratio * i);
  g.back() = last;
  return g;
}

ProbeReport smoothing_probe(const SpectralDecomposition& eig, double sigma,
                            const std::vector<double>& t_grid) {
  require(sigma >= 0.0 && sigma <= 1.0, "smoothing probe needs sigma in [0,1]");
  const double floor = spectral_floor(eig);
  ProbeReport r;
  r.quantity = "smoothing";
  r.parameter_name = "sigma";
  r.parameter = sigma;
  r.abscissa = t_grid;
  for (double t : t_grid) {
    double best = 0.0;
    for (int k = 0; k < eig.size(); ++k) {
      const double mu = eig.values[k];
      if (mu <= floor) continue;
      best = std::max(best, std::pow(mu, sigma) * std::exp(-t * mu));
    }
    r.values.push_back(best);
  }
  fit_power_law(r);
  return r;
}

ProbeReport boundary_smoothing_probe(const Laplacian& lap, const Matrix& lift, double alpha,
                                     const std::vector<double>& t_grid, const std::string& label) {
  require(lift.rows() == lap.grid.size(), "boundary lift does not match the grid");
  const auto& eig = lap.eig;
  const double floor = spectral_floor(eig);
  const Matrix Y = eig.Q.transpose() * eig.sqrt_w.asDiagonal() * lift;
  ProbeReport r;
  r.quantity = "boundary_smoothing_" + label;
  r.parameter_name = "alpha";
  r.parameter = alpha;
  r.abscissa = t_grid;
  for (double t : t_grid) {
    Vector g(eig.size());
    for (int k = 0; k < eig.size(); ++k) {
      const double mu = eig.values[k];
      g[k] = mu <= floor ? 0.0 : std::pow(mu, 1.0 + alpha) * std::exp(-t * mu);
    }
    const Matrix gram = Y.transpose() * g.cwiseAbs2().asDiagonal() * Y;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
    r.values.push_back(std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff())));
  }
  fit_power_law(r);
  return r;
}

const ProbeReport& ResolventReport::ray(double angle) const {
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (std::abs(angles[i] - angle) < 1e-12) return rays[i];
  }
  throw Error(ErrorCode::InvalidArgument, "no resolvent ray at the requested angle");
}

ResolventReport resolvent_probe(const Grid1D& grid, const Matrix& A, double omega_guess,
                                const std::vector<double>& radii) {
  require(!radii.empty(), "resolvent probe needs radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] > 0.0 && (i == 0 || radii[i] > radii[i - 1]),
            "resolvent radii must be positive and ascending");
  }
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  constexpr double pi = std::numbers::pi;
  const std::vector<double> angles = {pi / 2, -pi / 2, pi / 3, -pi / 3, 0.0};
  const int n = grid.size();
  const Vector s = grid.weights().cwiseSqrt();
  const CMatrix T0 = (s.asDiagonal() * A * s.cwiseInverse().asDiagonal()).cast<Complex>();

  ResolventReport report;
  report.angles = angles;
  report.omega = std::max(omega_guess, 1.0 + std::max(0.0, -min_real_eigenvalue(A)));
  for (int attempt = 0; attempt < 30; ++attempt) {
    report.rays.clear();
    report.excluded.clear();
    for (double theta : angles) {
      ProbeReport r;
      r.quantity = "resolvent";
      r.parameter_name = "theta";
      r.parameter = theta;
      for (double radius : radii) {
        const Complex lambda = report.omega + radius * std::polar(1.0, theta);
        CMatrix T = T0;
        T.diagonal().array() += lambda;
        Eigen::BDCSVD<CMatrix> svd(T);
        const auto& sv = svd.singularValues();
        const double smin = sv(n - 1);
        if (!(smin > 0.0) || sv(0) / smin > 1e12) {
          report.excluded.push_back("theta=" + std::to_string(theta) + " r=" + std::to_string(radius));
          continue;
        }
        r.abscissa.push_back(radius);
        r.values.push_back(1.0 / smin);
      }
      fit_power_law(r);
      report.rays.push_back(std::move(r));
    }
    if (report.excluded.empty()) break;
    report.omega *= 2.0;
  }
  report.sup_prefactor = 0.0;
  report.max_exponent = -std::numeric_limits<double>::infinity();
  for (const auto& r : report.rays) {
    report.sup_prefactor = std::max(report.sup_prefactor, r.prefactor);
    report.max_exponent = std::max(report.max_exponent, r.exponent);
  }
  return report;
}

}  // namespace mildreg
