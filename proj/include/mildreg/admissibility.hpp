#pragma once

#include "mildreg/operators.hpp"
#include "mildreg/semigroup.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mildreg {

inline constexpr unsigned kDefaultSeed = 0x5EED;

struct GammaOptions {
  int mesh_density = 16;     // steps per level of the graded quadrature mesh
  int n_random = 200;
  int power_iterations = 20;
  unsigned seed = kDefaultSeed;
  bool check_resolution = true;
  double resolution_tolerance = 0.05;
};

// Lower bound on gamma in ||O exp(-tA) x||_{L^p(0,alpha; X)} <= gamma ||x||, taken
// as a max over eigenmode, random and power-iteration probes.
struct AdmissibilityCertificate {
  std::string operator_label;
  double p = 2.0;
  double alpha = 0.0;
  double gamma = 0.0;
  std::string method = "none";  // probe family that produced the max
  int n_samples = 0;
  unsigned seed = kDefaultSeed;
  int time_steps = 0;
  double resolution_change = 0.0;  // relative change of the witness ratio on mesh doubling
  StateVector witness;

  std::string semantics() const { return "lower bound (max over probes)"; }
  std::string witness_hash() const;
};

// Step sizes of the graded mesh on [0, alpha]: `density` steps per level, the
// step doubling from delta0 until it reaches alpha / (8 density), then uniform.
std::vector<double> graded_steps(double alpha, double delta0, int density);

// Ratio ||O exp(-tA) x||_{L^p} / ||x|| for one probe, using the same graded mesh.
double admissibility_ratio(const Grid1D& grid, const Matrix& A, const Matrix& O, double p,
                           double alpha, const Eigen::Ref<const Vector>& x, int density = 16);

AdmissibilityCertificate estimate_gamma(const Grid1D& grid, const Matrix& A, const Matrix& O,
                                        const Matrix& eigen_probes, const std::string& label,
                                        double p, double alpha, const GammaOptions& options = {});

// label "P" or "C" selects the bundle operator; eigenmodes of A0 are the eigen probes.
AdmissibilityCertificate estimate_gamma(const OperatorBundle& bundle, const std::string& label,
                                        double p, double alpha, const GammaOptions& options = {});

// alpha -> gamma_est(alpha) with memoization.
class GammaCurve {
 public:
  GammaCurve(Grid1D grid, Matrix A, Matrix O, Matrix eigen_probes, std::string label, double p,
             GammaOptions options);
  GammaCurve(const OperatorBundle& bundle, const std::string& label, double p,
             GammaOptions options = {});

  double operator()(double alpha);
  const AdmissibilityCertificate& certificate(double alpha);
  bool is_zero() const { return zero_; }
  const std::string& label() const { return label_; }
  double p() const { return p_; }

 private:
  Grid1D grid_;
  Matrix A_;
  Matrix O_;
  Matrix probes_;
  std::string label_;
  double p_;
  GammaOptions options_;
  bool zero_;
  std::map<double, AdmissibilityCertificate> cache_;
};

enum class RefinementVerdict { Admissible, Divergent, Inconclusive };

const char* to_string(RefinementVerdict verdict);

struct RefinementRow {
  int grid_size = 0;
  double gamma = 0.0;
  double growth = 0.0;  // gamma / previous gamma (0 on the first row)
};

struct RefinementStudy {
  double sigma = 0.0;
  double p = 2.0;
  double alpha = 0.0;
  std::vector<RefinementRow> rows;
  double growth_exponent = 0.0;  // slope of log gamma against log grid size
  RefinementVerdict verdict = RefinementVerdict::Inconclusive;
};

inline constexpr double kStableChange = 0.10;
inline constexpr double kDivergentGrowth = 1.5;

// gamma_est for O = A0^sigma under A = bundle.A on each grid size.
RefinementStudy gamma_refinement_study(const std::function<OperatorBundle(int)>& make_bundle,
                                       double sigma, double p, double alpha,
                                       const std::vector<int>& grid_sizes,
                                       const GammaOptions& options = {});

RefinementVerdict classify_refinement(const std::vector<double>& gammas);

// int_0^alpha ||f(T(t)x) - f(T(t)y)|| dt / ||x - y|| with f = P + F(C .).
double miyadera_voigt_ratio(const OperatorBundle& bundle, double alpha,
                            const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                            int density = 16);
// Max of the ratio over eigenmode differences and n_pairs seeded random pairs.
double estimate_miyadera_voigt(const OperatorBundle& bundle, double alpha, int n_pairs,
                               unsigned seed = kDefaultSeed, int density = 16);

struct ContractionWindow {
  double alpha0 = 0.0;
  double p = 2.0;
  double q = 2.0;
  double kappa = 0.0;
  double gamma = 0.0;  // gamma_P(alpha0) + gamma_C(alpha0)
  double bound_value = 0.0;
  double measured_lipschitz = -1.0;  // filled by measure_phi_lipschitz when requested
  double theta_target = 0.9;
};

double conjugate_exponent(double p);

// Largest alpha0 <= tau with (1 + kappa) gamma(alpha0) alpha0^{1/q} <= theta_target.
// Null curves count as gamma = 0.
ContractionWindow choose_window(GammaCurve* gamma_P, GammaCurve* gamma_C, double kappa, double p,
                                double theta_target, double tau);

struct MildProblem;

struct LipschitzReport {
  double value = 0.0;        // max of the two estimates below
  double random_pairs = 0.0;
  double power_iteration = 0.0;
  int pairs = 0;
};

// Empirical Lipschitz constant of Phi on a window mesh: random trajectory pairs,
// sharpened by power iteration on the linearisation of Phi at the free evolution.
LipschitzReport measure_phi_lipschitz(const MildProblem& problem, const Propagator& prop,
                                      const TimeMesh& window, const Eigen::Ref<const Vector>& x_start,
                                      int n_pairs, unsigned seed = kDefaultSeed,
                                      int power_iterations = 20);

}  // namespace mildreg
