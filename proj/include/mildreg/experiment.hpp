#pragma once

#include "mildreg/io.hpp"
#include "mildreg/mildsolve.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mildreg {

enum ExitCode : int {
  kExitSuccess = 0,
  kExitFailure = 1,  // runtime error or a summary verdict FAIL
  kExitNoWindow = 2,
  kExitNonContractive = 3,
  kExitConfig = 4,
  kExitUnresolved = 5,
};

int exit_code_for(ErrorCode code);

struct ExperimentConfig {
  std::string example = "dirichlet_nonlocal";  // dirichlet_nonlocal | neumann_nonlocal | custom
  std::string boundary = "dirichlet";          // used by custom
  int n_grid = 64;                             // unknowns: interior nodes or all nodes
  double p = 2.0;
  double tau = 1.0;
  int m_steps = 200;
  double sigma_P = 0.2;
  double sigma_C = 0.2;

  std::string kernel = "sin-poly";
  double amplitude = 0.5;
  double kernel_center = 0.3;
  double kernel_width = 0.1;

  std::string upsilon = "linear";
  double upsilon_amplitude = 1.0;
  double c0 = 1.0;
  double c1 = 1.0;

  std::string nonlinearity = "tanh";
  double nonlinearity_scale = 1.0;
  double kappa = -1.0;  // nonnegative: rescale f to this Lipschitz constant instead
  double clamp_cap = 1.0;

  std::string initial = "compatible";  // compatible | mode
  unsigned seed = kDefaultSeed;
  std::string output_dir = "mildreg_out";

  double rel_tol = 1e-10;
  int max_iter = 200;
  double theta_target = 0.9;
  int mesh_density = 16;
  int lipschitz_pairs = 20;
  bool oracle = true;

  double probe_t_min = 1e-4;
  double probe_t_max = 1e-2;
  int probe_points = 40;
  double resolvent_r_min = 1e2;
  double resolvent_r_max = 1e5;
  int resolvent_points = 20;
  int volterra_steps = 200;
  std::vector<int> refinement_grids = {32, 64, 128, 256};
  double refinement_sigma = -1.0;  // negative: use sigma_C
  double refinement_alpha = -1.0;  // negative: use tau
  int mv_pairs = 50;

  void validate() const;
  bool neumann() const;
  double effective_refinement_sigma() const { return refinement_sigma < 0 ? sigma_C : refinement_sigma; }
  double effective_refinement_alpha() const { return refinement_alpha < 0 ? tau : refinement_alpha; }
};

// Format is chosen by extension: .json is JSON, anything else TOML. Unknown keys
// and ill-typed values raise ErrorCode::Config.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& config);

KernelSpec make_kernel(const std::string& name, double amplitude, double center, double width);
NonlinearitySpec make_nonlinearity(const ExperimentConfig& config);
OperatorBundle build_bundle(const ExperimentConfig& config, int n_grid);
MildProblem build_problem(const ExperimentConfig& config);
PicardConfig build_picard_config(const ExperimentConfig& config);

struct Verdict {
  std::string check;
  double value = 0.0;
  std::string comparison;  // "<=", "<", ">=", "in", "=="
  double threshold = 0.0;
  std::string status;      // PASS | FAIL | UNRESOLVED
  std::string note;
};

Json to_json(const Verdict& v);

struct RunOutcome {
  int exit_code = kExitSuccess;
  std::string error;
  Json summary;
};

RunOutcome run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);
RunOutcome certify_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// Axis is one of sigma, amplitude, kappa, n_grid, m_steps; mode is run or certify.
// Rows run concurrently on up to `threads` workers, each in out_dir/row_<i>.
RunOutcome sweep_experiment(const ExperimentConfig& config, const std::string& axis,
                            const std::vector<double>& values, const std::filesystem::path& out_dir,
                            const std::string& mode = "run", int threads = 1);

// Worker count from MILDREG_THREADS, falling back to the hardware concurrency.
int thread_cap();

}  // namespace mildreg
