#include "mildreg/admissibility.hpp"

#include "mildreg/expm.hpp"
#include "mildreg/mildsolve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace mildreg {

namespace {

double inf_norm(const Matrix& A) {
  return A.size() == 0 ? 0.0 : A.cwiseAbs().rowwise().sum().maxCoeff();
}

bool is_zero_matrix(const Matrix& M) { return M.size() == 0 || M.cwiseAbs().maxCoeff() == 0.0; }

// Step propagators of a graded mesh; step j maps node j to node j + 1.
struct GradedMesh {
  std::vector<double> steps;
  std::vector<int> step_matrix;  // index into exps
  std::vector<Matrix> exps;
  std::vector<double> weights;   // trapezoid weights per node

  int nodes() const { return static_cast<int>(steps.size()) + 1; }
  const Matrix& E(int j) const { return exps[step_matrix[j]]; }
};

GradedMesh build_graded(const Matrix& A, double alpha, int density) {
  const double norm = inf_norm(A);
  const double delta0 = norm > 0.0 ? 0.1 / norm : alpha;
  GradedMesh g;
  g.steps = graded_steps(alpha, delta0, density);

  // Doubling steps reuse one Pade evaluation through squaring.
  std::vector<double> sizes;
  for (double s : g.steps) {
    if (sizes.empty() || s != sizes.back()) sizes.push_back(s);
  }
  std::vector<Matrix> by_size(sizes.size());
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (k > 0 && sizes[k] == 2.0 * sizes[k - 1]) {
      by_size[k] = by_size[k - 1] * by_size[k - 1];
    } else {
      by_size[k] = expm(-sizes[k] * A);
    }
  }
  g.exps = std::move(by_size);
  std::size_t k = 0;
  for (double s : g.steps) {
    while (sizes[k] != s) ++k;
    g.step_matrix.push_back(static_cast<int>(k));
  }
  std::vector<double> t(g.steps.size() + 1, 0.0);
  for (std::size_t j = 0; j < g.steps.size(); ++j) t[j + 1] = t[j] + g.steps[j];
  g.weights = trapezoid_weights(t);
  return g;
}

// Per-column ratios ||O exp(-tA) x||_{L^p} / ||x|| on a graded mesh.
Vector batch_ratios(const Grid1D& grid, const GradedMesh& mesh, const Matrix& O, double p,
                    const Matrix& X) {
  const Vector& w = grid.weights();
  Matrix Z = X;
  Vector acc = Vector::Zero(X.cols());
  for (int j = 0; j < mesh.nodes(); ++j) {
    if (j > 0) Z = mesh.E(j - 1) * Z;
    const Matrix Y = O * Z;
    const Vector norms = (Y.cwiseAbs2().transpose() * w).cwiseSqrt();
    acc += mesh.weights[j] * norms.array().pow(p).matrix();
  }
  const Vector xnorm = (X.cwiseAbs2().transpose() * w).cwiseSqrt();
  Vector r(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    r[c] = xnorm[c] > 0.0 ? std::pow(acc[c], 1.0 / p) / xnorm[c] : 0.0;
  }
  return r;
}

// G x with G = sum_j w_j S_j^T O^T W O S_j, followed by W^{-1}.
Vector gram_apply(const Grid1D& grid, const GradedMesh& mesh, const Matrix& O, const Vector& x) {
  const Vector& w = grid.weights();
  const int N = mesh.nodes();
  Matrix states(x.size(), N);
  states.col(0) = x;
  for (int j = 1; j < N; ++j) states.col(j) = mesh.E(j - 1) * states.col(j - 1);
  const Matrix OtW = O.transpose() * w.asDiagonal();
  Vector acc = mesh.weights[N - 1] * (OtW * (O * states.col(N - 1)));
  for (int j = N - 2; j >= 0; --j) {
    acc = mesh.weights[j] * (OtW * (O * states.col(j))) + mesh.E(j).transpose() * acc;
  }
  return acc.cwiseQuotient(w);
}

Matrix random_unit_vectors(const Grid1D& grid, int count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix X(grid.size(), count);
  for (int c = 0; c < count; ++c) {
    for (int j = 0; j < grid.size(); ++j) X(j, c) = normal(rng);
    X.col(c) /= l2_norm(grid, X.col(c));
  }
  return X;
}

double numeric_derivative(const std::function<double(double)>& f, double s) {
  const double h = 1e-6 * std::max(1.0, std::abs(s));
  return (f(s + h) - f(s - h)) / (2.0 * h);
}

}  // namespace

std::string AdmissibilityCertificate::witness_hash() const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (Eigen::Index j = 0; j < witness.size(); ++j) {
    const double value = witness[j];
    const auto* bytes = reinterpret_cast<const unsigned char*>(&value);
    for (std::size_t b = 0; b < sizeof(double); ++b) {
      hash ^= bytes[b];
      hash *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::vector<double> graded_steps(double alpha, double delta0, int density) {
  require(alpha > 0.0, "quadrature window must be positive");
  require(density >= 1, "mesh density must be positive");
  const double s_max = alpha / (8.0 * density);
  double step = std::min(delta0, s_max);
  std::vector<double> steps;
  double covered = 0.0;
  while (2.0 * step <= s_max && covered + density * step < alpha) {
    for (int k = 0; k < density; ++k) steps.push_back(step);
    covered += density * step;
    step *= 2.0;
  }
  const double rest = alpha - covered;
  const int whole = static_cast<int>(std::floor(rest / step * (1.0 + 1e-12)));
  for (int k = 0; k < whole; ++k) steps.push_back(step);
  covered += whole * step;
  const double tail = alpha - covered;
  if (tail > 1e-12 * alpha) steps.push_back(tail);
  return steps;
}

double admissibility_ratio(const Grid1D& grid, const Matrix& A, const Matrix& O, double p,
                           double alpha, const Eigen::Ref<const Vector>& x, int density) {
  require(p > 1.0, "admissibility needs p > 1");
  const GradedMesh mesh = build_graded(A, alpha, density);
  Matrix X = x;
  return batch_ratios(grid, mesh, O, p, X)[0];
}

AdmissibilityCertificate estimate_gamma(const Grid1D& grid, const Matrix& A, const Matrix& O,
                                        const Matrix& eigen_probes, const std::string& label,
                                        double p, double alpha, const GammaOptions& options) {
  require(p > 1.0, "admissibility needs p > 1");
  require(alpha > 0.0, "admissibility window must be positive");
  AdmissibilityCertificate cert;
  cert.operator_label = label;
  cert.p = p;
  cert.alpha = alpha;
  cert.seed = options.seed;
  cert.witness = Vector::Zero(grid.size());
  if (is_zero_matrix(O)) {
    cert.method = "zero-operator";
    return cert;
  }

  const GradedMesh mesh = build_graded(A, alpha, options.mesh_density);
  cert.time_steps = static_cast<int>(mesh.steps.size());

  auto consider = [&](const Matrix& X, const char* method) {
    const Vector r = batch_ratios(grid, mesh, O, p, X);
    Eigen::Index best;
    const double top = r.maxCoeff(&best);
    cert.n_samples += static_cast<int>(X.cols());
    if (top > cert.gamma) {
      cert.gamma = top;
      cert.method = method;
      cert.witness = X.col(best) / l2_norm(grid, X.col(best));
    }
  };

  if (eigen_probes.size() > 0) consider(eigen_probes, "eigenprobe");
  if (options.n_random > 0) consider(random_unit_vectors(grid, options.n_random, options.seed), "random-sample");

  if (options.power_iterations > 0 && cert.gamma > 0.0) {
    Vector x = cert.witness;
    for (int it = 0; it < options.power_iterations; ++it) {
      Vector y = gram_apply(grid, mesh, O, x);
      const double norm = l2_norm(grid, y);
      if (!(norm > 0.0)) break;
      x = y / norm;
    }
    Matrix X = x;
    consider(X, "power-iteration");
  }

  if (options.check_resolution) {
    const double fine = admissibility_ratio(grid, A, O, p, alpha, cert.witness, 2 * options.mesh_density);
    cert.resolution_change = std::abs(fine - cert.gamma) / cert.gamma;
    if (cert.resolution_change > options.resolution_tolerance) {
      throw Error(ErrorCode::Unresolved,
                  "admissibility quadrature for " + label + " changed by " +
                      std::to_string(100.0 * cert.resolution_change) + "% on mesh doubling");
    }
  }
  return cert;
}

AdmissibilityCertificate estimate_gamma(const OperatorBundle& bundle, const std::string& label,
                                        double p, double alpha, const GammaOptions& options) {
  require(label == "P" || label == "C", "operator label must be P or C");
  const Matrix& O = label == "P" ? bundle.P : bundle.C;
  return estimate_gamma(bundle.grid, bundle.A, O, bundle.lap.eig.modes(), label, p, alpha, options);
}

GammaCurve::GammaCurve(Grid1D grid, Matrix A, Matrix O, Matrix eigen_probes, std::string label,
                       double p, GammaOptions options)
    : grid_(std::move(grid)),
      A_(std::move(A)),
      O_(std::move(O)),
      probes_(std::move(eigen_probes)),
      label_(std::move(label)),
      p_(p),
      options_(options),
      zero_(is_zero_matrix(O_)) {}

GammaCurve::GammaCurve(const OperatorBundle& bundle, const std::string& label, double p,
                       GammaOptions options)
    : GammaCurve(bundle.grid, bundle.A, label == "P" ? bundle.P : bundle.C, bundle.lap.eig.modes(),
                 label, p, options) {
  require(label == "P" || label == "C", "operator label must be P or C");
}

const AdmissibilityCertificate& GammaCurve::certificate(double alpha) {
  auto it = cache_.find(alpha);
  if (it == cache_.end()) {
    it = cache_.emplace(alpha, estimate_gamma(grid_, A_, O_, probes_, label_, p_, alpha, options_)).first;
  }
  return it->second;
}

double GammaCurve::operator()(double alpha) {
  if (zero_) return 0.0;
  return certificate(alpha).gamma;
}

const char* to_string(RefinementVerdict verdict) {
  switch (verdict) {
    case RefinementVerdict::Admissible: return "ADMISSIBLE";
    case RefinementVerdict::Divergent: return "DIVERGENT";
    case RefinementVerdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "UNKNOWN";
}

RefinementVerdict classify_refinement(const std::vector<double>& gammas) {
  if (gammas.size() < 2) return RefinementVerdict::Inconclusive;
  bool all_growing = true;
  for (std::size_t i = 1; i < gammas.size(); ++i) {
    if (!(gammas[i] > kDivergentGrowth * gammas[i - 1])) all_growing = false;
  }
  if (all_growing) return RefinementVerdict::Divergent;
  const double last = gammas.back();
  const double prev = gammas[gammas.size() - 2];
  if (prev == 0.0 && last == 0.0) return RefinementVerdict::Admissible;
  if (prev > 0.0 && std::abs(last / prev - 1.0) < kStableChange) return RefinementVerdict::Admissible;
  return RefinementVerdict::Inconclusive;
}

RefinementStudy gamma_refinement_study(const std::function<OperatorBundle(int)>& make_bundle,
                                       double sigma, double p, double alpha,
                                       const std::vector<int>& grid_sizes,
                                       const GammaOptions& options) {
  require(sigma >= 0.0, "refinement study needs sigma >= 0");
  require(!grid_sizes.empty(), "refinement study needs grid sizes");
  for (std::size_t i = 1; i < grid_sizes.size(); ++i) {
    require(grid_sizes[i] > grid_sizes[i - 1], "grid sizes must be ascending");
  }
  RefinementStudy study;
  study.sigma = sigma;
  study.p = p;
  study.alpha = alpha;
  std::vector<double> gammas, lx, ly;
  for (int n : grid_sizes) {
    const OperatorBundle bundle = make_bundle(n);
    const Matrix O = fractional_power(bundle.lap.eig, sigma);
    const auto cert = estimate_gamma(bundle.grid, bundle.A, O, bundle.lap.eig.modes(),
                                     "A0^sigma", p, alpha, options);
    RefinementRow row;
    row.grid_size = n;
    row.gamma = cert.gamma;
    row.growth = gammas.empty() || gammas.back() == 0.0 ? 0.0 : cert.gamma / gammas.back();
    study.rows.push_back(row);
    gammas.push_back(cert.gamma);
    if (cert.gamma > 0.0) {
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(cert.gamma));
    }
  }
  if (lx.size() >= 2) study.growth_exponent = fit_line(lx, ly).slope;
  study.verdict = classify_refinement(gammas);
  return study;
}

namespace {

// Columns are integrand values ||f(T(t)x) - f(T(t)y)|| integrated in time.
Vector batch_miyadera_voigt(const OperatorBundle& bundle, const GradedMesh& mesh, const Matrix& X,
                            const Matrix& Y) {
  const Grid1D& grid = bundle.grid;
  const Vector& w = grid.weights();
  const bool has_P = bundle.has_P();
  const bool has_F = !bundle.F.is_zero;
  Matrix ZX = X, ZY = Y;
  Vector acc = Vector::Zero(X.cols());
  for (int j = 0; j < mesh.nodes(); ++j) {
    if (j > 0) {
      ZX = mesh.E(j - 1) * ZX;
      ZY = mesh.E(j - 1) * ZY;
    }
    Matrix diff = Matrix::Zero(X.rows(), X.cols());
    if (has_P) diff += bundle.P * (ZX - ZY);
    if (has_F) diff += apply_nemytskii(bundle.F, bundle.C * ZX) - apply_nemytskii(bundle.F, bundle.C * ZY);
    acc += mesh.weights[j] * (diff.cwiseAbs2().transpose() * w).cwiseSqrt();
  }
  const Vector dnorm = ((X - Y).cwiseAbs2().transpose() * w).cwiseSqrt();
  Vector r(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) r[c] = dnorm[c] > 0.0 ? acc[c] / dnorm[c] : 0.0;
  return r;
}

}  // namespace

double miyadera_voigt_ratio(const OperatorBundle& bundle, double alpha,
                            const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                            int density) {
  const GradedMesh mesh = build_graded(bundle.A, alpha, density);
  Matrix X = x, Y = y;
  return batch_miyadera_voigt(bundle, mesh, X, Y)[0];
}

double estimate_miyadera_voigt(const OperatorBundle& bundle, double alpha, int n_pairs,
                               unsigned seed, int density) {
  require(alpha > 0.0, "Miyadera-Voigt window must be positive");
  if (!bundle.has_P() && bundle.F.is_zero) return 0.0;
  const GradedMesh mesh = build_graded(bundle.A, alpha, density);
  const Matrix modes = bundle.lap.eig.modes();
  double best = batch_miyadera_voigt(bundle, mesh, modes, Matrix::Zero(modes.rows(), modes.cols())).maxCoeff();
  if (n_pairs > 0) {
    const Matrix R = random_unit_vectors(bundle.grid, 2 * n_pairs, seed);
    best = std::max(best, batch_miyadera_voigt(bundle, mesh, R.leftCols(n_pairs), R.rightCols(n_pairs)).maxCoeff());
  }
  return best;
}

double conjugate_exponent(double p) {
  require(p > 1.0, "conjugate exponent needs p > 1");
  return p / (p - 1.0);
}

ContractionWindow choose_window(GammaCurve* gamma_P, GammaCurve* gamma_C, double kappa, double p,
                                double theta_target, double tau) {
  require(theta_target > 0.0 && theta_target < 1.0, "theta_target must lie in (0,1)");
  require(tau > 0.0, "horizon must be positive");
  require(kappa >= 0.0, "Lipschitz constant must be nonnegative");
  if (gamma_P) require(gamma_P->p() == p, "gamma curve for P uses a different p");
  if (gamma_C) require(gamma_C->p() == p, "gamma curve for C uses a different p");

  ContractionWindow win;
  win.p = p;
  win.q = conjugate_exponent(p);
  win.kappa = kappa;
  win.theta_target = theta_target;

  auto gamma = [&](double a) {
    double g = 0.0;
    if (gamma_P) g += (*gamma_P)(a);
    if (gamma_C) g += (*gamma_C)(a);
    return g;
  };
  auto bound = [&](double a) { return (1.0 + kappa) * gamma(a) * std::pow(a, 1.0 / win.q); };
  auto accept = [&](double a) {
    win.alpha0 = a;
    win.gamma = gamma(a);
    win.bound_value = bound(a);
    return win;
  };

  if (bound(tau) <= theta_target) return accept(tau);
  const std::vector<double> grid = geometric_grid(tau * 1e-4, tau, 40);
  if (bound(grid.front()) > theta_target) {
    throw Error(ErrorCode::NoWindow, "contraction bound exceeds theta_target even at alpha = " +
                                         std::to_string(grid.front()));
  }
  std::size_t lo = 0, hi = grid.size() - 1;  // bound(lo) passes, bound(hi) fails
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (bound(grid[mid]) <= theta_target ? lo : hi) = mid;
  }
  double a_lo = grid[lo], a_hi = grid[hi];
  for (int it = 0; it < 10; ++it) {
    const double mid = std::sqrt(a_lo * a_hi);
    (bound(mid) <= theta_target ? a_lo : a_hi) = mid;
  }
  return accept(a_lo);
}

LipschitzReport measure_phi_lipschitz(const MildProblem& problem, const Propagator& prop,
                                      const TimeMesh& window, const Eigen::Ref<const Vector>& x_start,
                                      int n_pairs, unsigned seed, int power_iterations) {
  const OperatorBundle& b = problem.bundle;
  const Grid1D& grid = b.grid;
  const int n = grid.size();
  const int N = window.size();
  const double p = problem.p;
  LipschitzReport report;
  if (!b.has_P() && b.F.is_zero) return report;

  auto lp = [&](const Matrix& s) { return lp_time_norm(grid, window, s, p); };
  auto phi = [&](const Matrix& v) { return phi_map(problem, prop, x_start, Trajectory(grid, window, v)).states; };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_traj = [&] {
    Matrix v(n, N);
    for (Eigen::Index j = 0; j < v.size(); ++j) v.data()[j] = normal(rng);
    return v;
  };
  for (int k = 0; k < n_pairs; ++k) {
    const Matrix v1 = random_traj();
    Matrix v2 = random_traj();
    // Alternate white-noise pairs with pairs that differ by a smooth-in-time direction.
    if (k % 2 == 1) {
      const Vector dir = random_traj().col(0);
      v2 = v1;
      for (int i = 0; i < N; ++i) v2.col(i) += dir;
    }
    const double denom = lp(v1 - v2);
    if (!(denom > 0.0)) continue;
    report.random_pairs = std::max(report.random_pairs, lp(phi(v1) - phi(v2)) / denom);
    ++report.pairs;
  }

  // Power iteration on J^T J, J = (P + diag(f'(C z)) C) conv, in the L^2(0,alpha; X) pairing.
  const Matrix z = evolve_all(prop, x_start, window.steps());
  Matrix dF = Matrix::Zero(n, N);
  if (!b.F.is_zero) {
    const Matrix cz = b.C * z;
    for (Eigen::Index j = 0; j < cz.size(); ++j) dF.data()[j] = numeric_derivative(b.F.f, cz.data()[j]);
  }
  std::vector<double> tw(N, window.dt());
  tw.front() = tw.back() = 0.5 * window.dt();
  Matrix scale(n, N);
  for (int i = 0; i < N; ++i) scale.col(i) = tw[i] * grid.weights();

  auto J = [&](const Matrix& g) {
    const Matrix c = convolve(prop, g);
    Matrix out = Matrix::Zero(n, N);
    if (b.has_P()) out += b.P * c;
    if (!b.F.is_zero) out += dF.cwiseProduct(b.C * c);
    return out;
  };
  auto Jt = [&](const Matrix& y) {
    Matrix pre = Matrix::Zero(n, N);
    if (b.has_P()) pre += b.P.transpose() * y;
    if (!b.F.is_zero) pre += b.C.transpose() * dF.cwiseProduct(y);
    return convolve_transpose(prop, pre);
  };
  auto l2t = [&](const Matrix& s) { return std::sqrt(scale.cwiseProduct(s.cwiseAbs2()).sum()); };

  Matrix g = random_traj();
  g /= l2t(g);
  for (int it = 0; it < power_iterations; ++it) {
    const Matrix next = Jt(scale.cwiseProduct(J(g))).cwiseQuotient(scale);
    const double norm = l2t(next);
    if (!(norm > 0.0)) break;
    g = next / norm;
  }
  // Evaluate the sharpened direction as an actual pair around the free evolution.
  const double eps = 1e-4 / lp(g);
  const Matrix base = Matrix::Zero(n, N);
  const Matrix d = eps * g;
  report.power_iteration = lp(phi(base + d) - phi(base)) / lp(d);
  report.value = std::max(report.random_pairs, report.power_iteration);
  return report;
}

}  // namespace mildreg
