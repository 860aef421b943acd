#include "mildreg/experiment.hpp"

#include "mildreg/expm.hpp"

#include <toml.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#ifndef MILDREG_VERSION
#define MILDREG_VERSION "0.0.0"
#endif

namespace mildreg {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::Config, what); }

class RunLog {
 public:
  explicit RunLog(const fs::path& path) : out_(path), start_(std::chrono::steady_clock::now()) {}

  void line(const std::string& msg) {
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "[%9.3fs] ", t);
    out_ << stamp << msg << '\n';
    out_.flush();
  }

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::ofstream out_;
  std::chrono::steady_clock::time_point start_;
};

// Setters keyed by config name; each validates the JSON type.
using Setter = std::function<void(ExperimentConfig&, const Json&)>;

double as_double(const std::string& key, const Json& v) {
  if (!v.is_number()) config_error("'" + key + "' must be a number");
  return v.get<double>();
}

int as_int(const std::string& key, const Json& v) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::abs(d) < 1e9) return static_cast<int>(d);
  }
  config_error("'" + key + "' must be an integer");
}

std::string as_string(const std::string& key, const Json& v) {
  if (!v.is_string()) config_error("'" + key + "' must be a string");
  return v.get<std::string>();
}

bool as_bool(const std::string& key, const Json& v) {
  if (!v.is_boolean()) config_error("'" + key + "' must be a boolean");
  return v.get<bool>();
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
#define MILDREG_FIELD(name, conv) \
  t[#name] = [](ExperimentConfig& c, const Json& v) { c.name = conv(#name, v); }
    MILDREG_FIELD(example, as_string);
    MILDREG_FIELD(boundary, as_string);
    MILDREG_FIELD(n_grid, as_int);
    MILDREG_FIELD(p, as_double);
    MILDREG_FIELD(tau, as_double);
    MILDREG_FIELD(m_steps, as_int);
    MILDREG_FIELD(sigma_P, as_double);
    MILDREG_FIELD(sigma_C, as_double);
    MILDREG_FIELD(kernel, as_string);
    MILDREG_FIELD(amplitude, as_double);
    MILDREG_FIELD(kernel_center, as_double);
    MILDREG_FIELD(kernel_width, as_double);
    MILDREG_FIELD(upsilon, as_string);
    MILDREG_FIELD(upsilon_amplitude, as_double);
    MILDREG_FIELD(c0, as_double);
    MILDREG_FIELD(c1, as_double);
    MILDREG_FIELD(nonlinearity, as_string);
    MILDREG_FIELD(nonlinearity_scale, as_double);
    MILDREG_FIELD(kappa, as_double);
    MILDREG_FIELD(clamp_cap, as_double);
    MILDREG_FIELD(initial, as_string);
    MILDREG_FIELD(output_dir, as_string);
    MILDREG_FIELD(rel_tol, as_double);
    MILDREG_FIELD(max_iter, as_int);
    MILDREG_FIELD(theta_target, as_double);
    MILDREG_FIELD(mesh_density, as_int);
    MILDREG_FIELD(lipschitz_pairs, as_int);
    MILDREG_FIELD(oracle, as_bool);
    MILDREG_FIELD(probe_t_min, as_double);
    MILDREG_FIELD(probe_t_max, as_double);
    MILDREG_FIELD(probe_points, as_int);
    MILDREG_FIELD(resolvent_r_min, as_double);
    MILDREG_FIELD(resolvent_r_max, as_double);
    MILDREG_FIELD(resolvent_points, as_int);
    MILDREG_FIELD(volterra_steps, as_int);
    MILDREG_FIELD(refinement_sigma, as_double);
    MILDREG_FIELD(refinement_alpha, as_double);
    MILDREG_FIELD(mv_pairs, as_int);
#undef MILDREG_FIELD
    t["seed"] = [](ExperimentConfig& c, const Json& v) {
      if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() > 0xFFFFFFFFLL) {
        config_error("'seed' must be a nonnegative 32-bit integer");
      }
      c.seed = static_cast<unsigned>(v.get<long long>());
    };
    t["refinement_grids"] = [](ExperimentConfig& c, const Json& v) {
      if (!v.is_array()) config_error("'refinement_grids' must be an array of integers");
      c.refinement_grids.clear();
      for (const auto& e : v) c.refinement_grids.push_back(as_int("refinement_grids", e));
    };
    return t;
  }();
  return table;
}

Json toml_to_json(const toml::node& node) {
  if (const auto* tbl = node.as_table()) {
    Json j = Json::object();
    for (const auto& [k, v] : *tbl) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (const auto* arr = node.as_array()) {
    Json j = Json::array();
    for (const auto& v : *arr) j.push_back(toml_to_json(v));
    return j;
  }
  if (const auto* v = node.as_integer()) return Json(v->get());
  if (const auto* v = node.as_floating_point()) return Json(v->get());
  if (const auto* v = node.as_boolean()) return Json(v->get());
  if (const auto* v = node.as_string()) return Json(v->get());
  config_error("unsupported TOML value type");
}

StateVector default_base_state(const OperatorBundle& b) {
  const Vector& x = b.grid.nodes();
  if (b.grid.include_boundary()) return (1.0 + (std::numbers::pi * x.array()).cos()).matrix();
  return (std::numbers::pi * x.array()).sin().matrix();
}

Verdict make_verdict(std::string check, double value, std::string comparison, double threshold,
                     bool pass, std::string fail_status = "FAIL", std::string note = {}) {
  return {std::move(check), value, std::move(comparison), threshold, pass ? "PASS" : std::move(fail_status),
          std::move(note)};
}

Json verdict_table(const std::vector<Verdict>& verdicts) {
  Json arr = Json::array();
  for (const auto& v : verdicts) arr.push_back(to_json(v));
  return arr;
}

int exit_from_verdicts(const std::vector<Verdict>& verdicts) {
  bool unresolved = false, failed = false;
  for (const auto& v : verdicts) {
    unresolved |= v.status == "UNRESOLVED";
    failed |= v.status == "FAIL";
  }
  return unresolved ? kExitUnresolved : failed ? kExitFailure : kExitSuccess;
}

const char* status_word(int code) { return code == kExitSuccess ? "success" : "failed"; }

Json base_summary(const std::string& command, const ExperimentConfig& config) {
  return Json{{"command", command}, {"version", MILDREG_VERSION}, {"config", config_to_json(config)}};
}

void finish_summary(Json& summary, const fs::path& out_dir, int code, const std::string& error) {
  summary["exit_code"] = code;
  summary["status"] = status_word(code);
  if (!error.empty()) summary["error"] = error;
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
}

const char* kHeatmapScript =
    "# Solution surface u(t, x) from heatmap.csv\n"
    "set datafile separator ','\n"
    "set key autotitle columnhead\n"
    "set xlabel 'x'\n"
    "set ylabel 't'\n"
    "set view map\n"
    "set terminal pngcairo size 900,600\n"
    "set output 'heatmap.png'\n"
    "splot 'heatmap.csv' using 2:1:3 with pm3d notitle\n";

std::string probe_script(const std::vector<ProbeReport>& probes) {
  std::set<std::string> names;
  for (const auto& p : probes) names.insert(p.quantity);
  std::ostringstream s;
  s << "# Log-log view of the probe measurements in probes.csv\n"
    << "set datafile separator ','\n"
    << "set logscale xy\n"
    << "set xlabel 't or r'\n"
    << "set ylabel 'norm'\n"
    << "set terminal pngcairo size 900,600\n"
    << "set output 'probes.png'\n"
    << "plot";
  bool first = true;
  for (const auto& n : names) {
    s << (first ? " " : ", \\\n     ") << "'probes.csv' every ::1 using (strcol(1) eq '" << n
      << "' ? $3 : NaN):4 with linespoints title '" << n << "'";
    first = false;
  }
  s << "\n";
  return s.str();
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoWindow: return kExitNoWindow;
    case ErrorCode::NonContractive:
    case ErrorCode::MaxIter: return kExitNonContractive;
    case ErrorCode::Config: return kExitConfig;
    case ErrorCode::Unresolved: return kExitUnresolved;
    default: return kExitFailure;
  }
}

bool ExperimentConfig::neumann() const {
  return example == "neumann_nonlocal" || (example == "custom" && boundary == "neumann");
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> examples = {"dirichlet_nonlocal", "neumann_nonlocal", "custom"};
  static const std::set<std::string> kernels = {"zero", "sin-poly", "gaussian", "linear"};
  static const std::set<std::string> nonlinearities = {"zero", "identity", "tanh", "sin", "affine-clamp"};
  auto check = [](bool ok, const std::string& what) {
    if (!ok) config_error(what);
  };
  check(examples.count(example), "unknown example '" + example + "'");
  check(boundary == "dirichlet" || boundary == "neumann", "boundary must be dirichlet or neumann");
  check(n_grid >= 3 && n_grid <= 4096, "n_grid must lie in [3, 4096]");
  check(p > 1.0 && std::isfinite(p), "p must be a finite number above 1");
  check(tau > 0.0 && std::isfinite(tau), "tau must be positive");
  check(m_steps >= 2, "m_steps must be at least 2");
  check(sigma_P >= 0.0 && sigma_P <= 1.0, "sigma_P must lie in [0,1]");
  check(sigma_C >= 0.0 && sigma_C <= 1.0, "sigma_C must lie in [0,1]");
  check(kernels.count(kernel), "unknown kernel '" + kernel + "'");
  check(kernels.count(upsilon), "unknown upsilon kernel '" + upsilon + "'");
  check(std::isfinite(amplitude) && std::isfinite(upsilon_amplitude), "amplitudes must be finite");
  check(kernel_width > 0.0, "kernel_width must be positive");
  check(std::isfinite(c0) && std::isfinite(c1), "trace weights must be finite");
  check(nonlinearities.count(nonlinearity), "unknown nonlinearity '" + nonlinearity + "'");
  check(std::isfinite(nonlinearity_scale), "nonlinearity_scale must be finite");
  check(clamp_cap >= 0.0, "clamp_cap must be nonnegative");
  check(initial == "compatible" || initial == "mode", "initial must be compatible or mode");
  check(rel_tol > 0.0, "rel_tol must be positive");
  check(max_iter >= 1, "max_iter must be at least 1");
  check(theta_target > 0.0 && theta_target < 1.0, "theta_target must lie in (0,1)");
  check(mesh_density >= 1, "mesh_density must be positive");
  check(lipschitz_pairs >= 0, "lipschitz_pairs must be nonnegative");
  check(probe_t_min > 0.0 && probe_t_max > probe_t_min, "probe window needs 0 < probe_t_min < probe_t_max");
  check(probe_points >= 3, "probe_points must be at least 3");
  check(resolvent_r_min > 0.0 && resolvent_r_max > resolvent_r_min,
        "resolvent radii need 0 < resolvent_r_min < resolvent_r_max");
  check(resolvent_points >= 3, "resolvent_points must be at least 3");
  check(volterra_steps >= 2, "volterra_steps must be at least 2");
  check(refinement_grids.size() >= 2, "refinement_grids needs at least two sizes");
  for (std::size_t i = 0; i < refinement_grids.size(); ++i) {
    check(refinement_grids[i] >= 3 && (i == 0 || refinement_grids[i] > refinement_grids[i - 1]),
          "refinement_grids must be ascending and at least 3");
  }
  check(refinement_sigma <= 1.0, "refinement_sigma must not exceed 1");
  check(mv_pairs >= 0, "mv_pairs must be nonnegative");
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) config_error("configuration must be a table of key/value pairs");
  ExperimentConfig c;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) config_error("unknown configuration key '" + key + "'");
    it->second(c, value);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read configuration file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  if (path.extension() == ".json") {
    Json j;
    try {
      j = Json::parse(buffer.str());
    } catch (const std::exception& e) {
      config_error(path.string() + ": " + e.what());
    }
    return config_from_json(j);
  }
  try {
    const toml::table tbl = toml::parse(buffer.str(), path.string());
    return config_from_json(toml_to_json(tbl));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ":" << e.source().begin.line << ": " << e.description();
    config_error(msg.str());
  }
}

Json config_to_json(const ExperimentConfig& c) {
  Json j{{"example", c.example},
         {"boundary", c.neumann() ? "neumann" : "dirichlet"},
         {"n_grid", c.n_grid},
         {"p", c.p},
         {"tau", c.tau},
         {"m_steps", c.m_steps},
         {"sigma_P", c.sigma_P},
         {"sigma_C", c.sigma_C},
         {"kernel", c.kernel},
         {"amplitude", c.amplitude},
         {"kernel_center", c.kernel_center},
         {"kernel_width", c.kernel_width},
         {"upsilon", c.upsilon},
         {"upsilon_amplitude", c.upsilon_amplitude},
         {"c0", c.c0},
         {"c1", c.c1},
         {"nonlinearity", c.nonlinearity},
         {"nonlinearity_scale", c.nonlinearity_scale},
         {"kappa", c.kappa},
         {"clamp_cap", c.clamp_cap},
         {"initial", c.initial},
         {"seed", c.seed},
         {"output_dir", c.output_dir},
         {"rel_tol", c.rel_tol},
         {"max_iter", c.max_iter},
         {"theta_target", c.theta_target},
         {"mesh_density", c.mesh_density},
         {"lipschitz_pairs", c.lipschitz_pairs},
         {"oracle", c.oracle},
         {"probe_t_min", c.probe_t_min},
         {"probe_t_max", c.probe_t_max},
         {"probe_points", c.probe_points},
         {"resolvent_r_min", c.resolvent_r_min},
         {"resolvent_r_max", c.resolvent_r_max},
         {"resolvent_points", c.resolvent_points},
         {"volterra_steps", c.volterra_steps},
         {"refinement_grids", c.refinement_grids},
         {"refinement_sigma", c.refinement_sigma},
         {"refinement_alpha", c.refinement_alpha},
         {"mv_pairs", c.mv_pairs}};
  if (c.example != "custom") j["boundary"] = c.boundary;
  return j;
}

KernelSpec make_kernel(const std::string& name, double amplitude, double center, double width) {
  if (name == "zero") return KernelSpec::zero();
  if (name == "sin-poly") return KernelSpec::sin_poly(amplitude);
  if (name == "gaussian") return KernelSpec::gaussian(amplitude, center, width);
  if (name == "linear") return KernelSpec::linear(amplitude);
  config_error("unknown kernel '" + name + "'");
}

NonlinearitySpec make_nonlinearity(const ExperimentConfig& c) {
  // Every named family has Lipschitz constant |scale| at scale 1, so kappa maps to scale.
  const double scale = c.kappa >= 0.0 ? c.kappa : c.nonlinearity_scale;
  if (c.nonlinearity == "zero") return NonlinearitySpec::zero();
  if (c.nonlinearity == "identity") return NonlinearitySpec::identity(scale);
  if (c.nonlinearity == "tanh") return NonlinearitySpec::tanh(scale);
  if (c.nonlinearity == "sin") return NonlinearitySpec::sine(scale);
  if (c.nonlinearity == "affine-clamp") return NonlinearitySpec::affine_clamp(scale, c.clamp_cap);
  config_error("unknown nonlinearity '" + c.nonlinearity + "'");
}

OperatorBundle build_bundle(const ExperimentConfig& c, int n_grid) {
  const KernelSpec kernel = make_kernel(c.kernel, c.amplitude, c.kernel_center, c.kernel_width);
  const NonlinearitySpec F = make_nonlinearity(c);
  if (c.neumann()) {
    const KernelSpec upsilon = make_kernel(c.upsilon, c.upsilon_amplitude, c.kernel_center, c.kernel_width);
    return make_neumann_bundle(n_grid, kernel, upsilon, c.c0, c.c1, F);
  }
  return make_dirichlet_bundle(n_grid, kernel, c.sigma_P, c.sigma_C, F);
}

MildProblem build_problem(const ExperimentConfig& c) {
  OperatorBundle bundle = build_bundle(c, c.n_grid);
  const StateVector base = default_base_state(bundle);
  StateVector x0 = c.initial == "compatible" ? compatible_initial_state(bundle, base) : base;
  return {std::move(bundle), std::move(x0), c.tau, c.p};
}

PicardConfig build_picard_config(const ExperimentConfig& c) {
  PicardConfig pc;
  pc.rel_tol = c.rel_tol;
  pc.max_iter = c.max_iter;
  pc.m_steps = c.m_steps;
  pc.theta_target = c.theta_target;
  pc.gamma.mesh_density = c.mesh_density;
  pc.gamma.seed = c.seed;
  pc.lipschitz_pairs = c.lipschitz_pairs;
  pc.measure_lipschitz = c.lipschitz_pairs > 0;
  pc.compute_oracle = c.oracle;
  return pc;
}

Json to_json(const Verdict& v) {
  Json j{{"check", v.check},
         {"value", v.value},
         {"comparison", v.comparison},
         {"threshold", v.threshold},
         {"status", v.status}};
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

RunOutcome run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  RunLog log(out_dir / "run.log");
  RunOutcome outcome;
  outcome.summary = base_summary("run", config);
  Json files{{"log", "run.log"}, {"summary", "summary.json"}};
  log.line("mildreg " MILDREG_VERSION " run: example " + config.example);
  try {
    config.validate();
    const MildProblem problem = build_problem(config);
    const PicardConfig pc = build_picard_config(config);
    for (const auto& w : problem.bundle.warnings) log.line("warning: " + w);
    outcome.summary["warnings"] = problem.bundle.warnings;
    log.line("assembled n = " + std::to_string(problem.bundle.size()) + ", min Re spectrum(A) = " +
             format_double(problem.bundle.min_real_part));

    const Solution sol = solve(problem, pc);
    const SolveReport& r = sol.report;
    log.line("window alpha0 = " + format_double(r.window.alpha0) + ", bound = " +
             format_double(r.window.bound_value) + ", windows = " + std::to_string(r.windows.size()));

    write_trajectory_csv(out_dir / "trajectory.csv", sol.u);
    write_trajectory_binary(out_dir / "trajectory.mrtj", sol.u);
    write_heatmap_csv(out_dir / "heatmap.csv", sol.u);
    write_text(out_dir / "heatmap.gp", kHeatmapScript);
    write_text(out_dir / "solve_report.json", to_json(r).dump(2) + "\n");
    write_text(out_dir / "timing.json", Json{{"wall_time", r.wall_time}}.dump(2) + "\n");
    files["trajectory_csv"] = "trajectory.csv";
    files["trajectory_binary"] = "trajectory.mrtj";
    files["heatmap_csv"] = "heatmap.csv";
    files["heatmap_script"] = "heatmap.gp";
    files["solve_report"] = "solve_report.json";
    files["timing"] = "timing.json";
    Json certs = Json::array();
    for (const auto& c : r.certificates) {
      const std::string name = "certificates/certificate_" + c.operator_label + ".json";
      write_text(out_dir / name, to_json(c).dump(2) + "\n");
      certs.push_back(name);
    }
    files["certificates"] = certs;

    std::vector<Verdict> verdicts;
    double worst_fp = 0.0, worst_ratio = 0.0;
    for (const auto& w : r.windows) {
      worst_fp = std::max(worst_fp, w.fixed_point_residual);
      worst_ratio = std::max(worst_ratio, w.max_ratio);
    }
    verdicts.push_back(make_verdict("fixed_point_residual", worst_fp, "<=", 10.0 * pc.rel_tol,
                                    worst_fp <= 10.0 * pc.rel_tol));
    const double repr_limit = 10.0 * pc.rel_tol * std::max(1.0, r.solution_scale);
    verdicts.push_back(make_verdict("representation_residual", r.representation_residual, "<=", repr_limit,
                                    r.representation_residual <= repr_limit));
    const double ratio_limit = 1.1 * r.window.bound_value;
    if (!r.windows.empty() && r.window.bound_value > 0.0) {
      verdicts.push_back(make_verdict("picard_increment_ratio", worst_ratio, "<=", ratio_limit,
                                      worst_ratio <= ratio_limit));
    }
    if (r.window.measured_lipschitz >= 0.0) {
      verdicts.push_back(make_verdict("measured_lipschitz", r.window.measured_lipschitz, "<=", ratio_limit,
                                      r.window.measured_lipschitz <= ratio_limit));
    }
    if (r.oracle_gap >= 0.0) {
      const bool pure = !problem.bundle.has_P() && problem.bundle.F.is_zero;
      const double limit = pure ? 1e-10 : 1e-3;
      verdicts.push_back(make_verdict("oracle_gap", r.oracle_gap, "<=", limit, r.oracle_gap <= limit, "FAIL",
                                      r.oracle_method));
    }
    outcome.summary["verdicts"] = verdict_table(verdicts);
    outcome.summary["metrics"] = Json{{"gamma", r.window.gamma},
                                      {"alpha0", r.window.alpha0},
                                      {"bound_value", r.window.bound_value},
                                      {"windows", r.windows.size()},
                                      {"iterations", r.total_iterations},
                                      {"representation_residual", r.representation_residual},
                                      {"strong_residual", r.strong_residual},
                                      {"oracle_gap", r.oracle_gap},
                                      {"endpoint_l2", l2_norm(sol.u.grid, sol.u.state(sol.u.mesh.steps()))}};
    outcome.exit_code = exit_from_verdicts(verdicts);
    for (const auto& v : verdicts) {
      log.line(v.check + " = " + format_double(v.value) + " " + v.comparison + " " +
               format_double(v.threshold) + " : " + v.status);
    }
  } catch (const Error& e) {
    outcome.exit_code = exit_code_for(e.code());
    outcome.error = e.what();
    log.line(std::string("error: ") + e.what());
  } catch (const std::exception& e) {
    outcome.exit_code = kExitFailure;
    outcome.error = e.what();
    log.line(std::string("error: ") + e.what());
  }
  outcome.summary["files"] = files;
  log.line("finished with exit code " + std::to_string(outcome.exit_code) + " after " +
           format_double(log.elapsed()) + " s");
  finish_summary(outcome.summary, out_dir, outcome.exit_code, outcome.error);
  return outcome;
}

RunOutcome certify_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  RunLog log(out_dir / "run.log");
  RunOutcome outcome;
  outcome.summary = base_summary("certify", config);
  Json files{{"log", "run.log"}, {"summary", "summary.json"}};
  log.line("mildreg " MILDREG_VERSION " certify: example " + config.example);
  std::vector<Verdict> verdicts;
  try {
    config.validate();
    const MildProblem problem = build_problem(config);
    const OperatorBundle& b = problem.bundle;
    const PicardConfig pc = build_picard_config(config);
    outcome.summary["warnings"] = b.warnings;
    for (const auto& w : b.warnings) log.line("warning: " + w);

    std::vector<ProbeReport> probes;
    auto fit_verdict = [&](const ProbeReport& r, const std::string& name) {
      verdicts.push_back(make_verdict(name + "_fit_residual", r.residual, "<=", kProbeResidualLimit,
                                      r.verdict == ProbeVerdict::Resolved, "UNRESOLVED"));
    };

    // Smoothing of the unperturbed Laplacian.
    const std::vector<double> t_grid = geometric_grid(config.probe_t_min, config.probe_t_max, config.probe_points);
    std::set<double> sigmas = {0.0, 0.25, 0.5};
    if (!b.grid.include_boundary()) {
      sigmas.insert(config.sigma_P);
      sigmas.insert(config.sigma_C);
    }
    Json probe_json = Json::array();
    for (double s : sigmas) {
      ProbeReport r = smoothing_probe(b.lap.eig, s, t_grid);
      const std::string name = "smoothing_sigma_" + format_double(s);
      fit_verdict(r, name);
      verdicts.push_back(make_verdict(name + "_slope_error", std::abs(r.exponent + s), "<=", 0.05,
                                      std::abs(r.exponent + s) <= 0.05));
      probe_json.push_back(to_json(r));
      probes.push_back(std::move(r));
    }
    log.line("smoothing probes done");

    // Boundary lift smoothing.
    const std::string lift_label = b.grid.include_boundary() ? "neumann" : "dirichlet";
    {
      ProbeReport r = boundary_smoothing_probe(b.lap, b.boundary_lift, 0.0, t_grid, lift_label);
      fit_verdict(r, r.quantity);
      verdicts.push_back(make_verdict(r.quantity + "_exponent", r.exponent, ">", -1.0, r.exponent > -1.0));
      probe_json.push_back(to_json(r));
      probes.push_back(std::move(r));
    }

    // Resolvent decay of the nonlocal generator.
    const std::vector<double> radii = geometric_grid(config.resolvent_r_min, config.resolvent_r_max,
                                                     config.resolvent_points);
    const ResolventReport res = resolvent_probe(b.grid, b.A, 0.0, radii);
    Json resolvent_json{{"omega", res.omega}, {"excluded", res.excluded},
                        {"sup_prefactor", res.sup_prefactor}, {"max_exponent", res.max_exponent}};
    for (const auto& ray : res.rays) {
      ProbeReport r = ray;
      r.quantity = "resolvent_theta_" + format_double(ray.parameter);
      fit_verdict(r, r.quantity);
      probe_json.push_back(to_json(r));
      probes.push_back(std::move(r));
    }
    const double imag_exp = res.ray(std::numbers::pi / 2).exponent;
    verdicts.push_back(make_verdict("resolvent_imaginary_ray_exponent_error", std::abs(imag_exp + 1.0), "<=", 0.1,
                                    std::abs(imag_exp + 1.0) <= 0.1));
    log.line("resolvent probe done, omega = " + format_double(res.omega));

    write_probe_csv(out_dir / "probes.csv", probes);
    write_text(out_dir / "probes.json",
               Json{{"probes", probe_json}, {"resolvent", resolvent_json}}.dump(2) + "\n");
    write_text(out_dir / "probes.gp", probe_script(probes));
    files["probes_csv"] = "probes.csv";
    files["probes_json"] = "probes.json";
    files["probes_script"] = "probes.gp";

    // Perturbed semigroup through the Volterra identity vs the direct exponential.
    double volterra_err[2] = {0.0, 0.0};
    {
      std::ofstream csv;
      fs::create_directories(out_dir);
      csv.open(out_dir / "volterra.csv");
      csv << "m_steps,t,error\n";
      for (int level = 0; level < 2; ++level) {
        const int m = config.volterra_steps << level;
        const TimeMesh mesh = TimeMesh::uniform(config.tau, m);
        const Propagator a0 = build_propagator(b.lap.eig, mesh.dt());
        const Trajectory tr = volterra_reconstruct(b.grid, a0, b.perturbation, problem.x0, mesh);
        const Matrix E = expm(-mesh.dt() * b.A);
        Vector u = problem.x0;
        for (int i = 1; i <= m; ++i) {
          u = E * u;
          const double err = l2_norm(b.grid, tr.state(i) - u);
          volterra_err[level] = std::max(volterra_err[level], err);
          csv << m << ',' << format_double(mesh.node(i)) << ',' << format_double(err) << '\n';
        }
      }
    }
    files["volterra_csv"] = "volterra.csv";
    verdicts.push_back(make_verdict("volterra_max_error", volterra_err[0], "<=", 1e-4, volterra_err[0] <= 1e-4));
    verdicts.push_back(make_verdict("volterra_refined_error", volterra_err[1], "<=", 1.1 * volterra_err[0],
                                    volterra_err[1] <= 1.1 * volterra_err[0], "FAIL", "error at doubled steps"));
    log.line("Volterra cross-check: " + format_double(volterra_err[0]) + " -> " + format_double(volterra_err[1]));

    // Admissibility certificates on the contraction window.
    std::optional<GammaCurve> curve_P, curve_C;
    if (b.has_P()) curve_P.emplace(b, "P", problem.p, pc.gamma);
    if (!b.F.is_zero) curve_C.emplace(b, "C", problem.p, pc.gamma);
    double alpha0 = config.tau;
    try {
      const ContractionWindow win = choose_window(curve_P ? &*curve_P : nullptr, curve_C ? &*curve_C : nullptr,
                                                  b.F.kappa, problem.p, config.theta_target, config.tau);
      alpha0 = win.alpha0;
      outcome.summary["window"] = to_json(win);
      verdicts.push_back(make_verdict("contraction_bound", win.bound_value, "<=", win.theta_target,
                                      win.bound_value <= win.theta_target));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoWindow) throw;
      verdicts.push_back(make_verdict("contraction_bound", std::numeric_limits<double>::infinity(), "<=",
                                      config.theta_target, false, "FAIL", e.what()));
    }
    Json certs = Json::array();
    for (auto* curve : {curve_P ? &*curve_P : nullptr, curve_C ? &*curve_C : nullptr}) {
      if (!curve) continue;
      const auto& cert = curve->certificate(alpha0);
      const std::string name = "certificates/certificate_" + cert.operator_label + ".json";
      write_text(out_dir / name, to_json(cert).dump(2) + "\n");
      certs.push_back(name);
      verdicts.push_back(make_verdict("gamma_" + cert.operator_label + "_resolution_change", cert.resolution_change,
                                      "<=", 0.05, cert.resolution_change <= 0.05, "UNRESOLVED"));
    }
    files["certificates"] = certs;
    log.line("admissibility certificates done, alpha0 = " + format_double(alpha0));

    // Grid refinement of gamma for A0^sigma.
    const double rs = config.effective_refinement_sigma();
    const RefinementStudy study = gamma_refinement_study(
        [&](int n) { return build_bundle(config, n); }, rs, problem.p, config.effective_refinement_alpha(),
        config.refinement_grids, pc.gamma);
    write_refinement_csv(out_dir / "refinement.csv", study);
    write_text(out_dir / "refinement.json", to_json(study).dump(2) + "\n");
    files["refinement_csv"] = "refinement.csv";
    files["refinement_json"] = "refinement.json";
    const RefinementVerdict expected =
        rs * problem.p < 1.0 ? RefinementVerdict::Admissible : RefinementVerdict::Divergent;
    {
      Verdict v;
      v.check = "gamma_refinement_verdict";
      v.value = study.growth_exponent;
      v.comparison = "==";
      v.threshold = rs * problem.p;
      v.status = study.verdict == expected                          ? "PASS"
                 : study.verdict == RefinementVerdict::Inconclusive ? "UNRESOLVED"
                                                                    : "FAIL";
      v.note = std::string("verdict ") + to_string(study.verdict) + ", expected " + to_string(expected) +
               " (sigma*p = " + format_double(rs * problem.p) + "); value is the log-log growth exponent";
      verdicts.push_back(v);
    }
    log.line(std::string("refinement study: ") + to_string(study.verdict));

    // Miyadera-Voigt integral on the window.
    const double mv = estimate_miyadera_voigt(b, alpha0, config.mv_pairs, config.seed, config.mesh_density);
    verdicts.push_back(make_verdict("miyadera_voigt_constant", mv, "<", 1.0, mv < 1.0));
    log.line("Miyadera-Voigt constant " + format_double(mv));

    outcome.exit_code = exit_from_verdicts(verdicts);
  } catch (const Error& e) {
    outcome.exit_code = exit_code_for(e.code());
    outcome.error = e.what();
    log.line(std::string("error: ") + e.what());
  } catch (const std::exception& e) {
    outcome.exit_code = kExitFailure;
    outcome.error = e.what();
    log.line(std::string("error: ") + e.what());
  }
  outcome.summary["verdicts"] = verdict_table(verdicts);
  for (const auto& v : verdicts) {
    log.line(v.check + " = " + format_double(v.value) + " " + v.comparison + " " + format_double(v.threshold) +
             " : " + v.status);
  }
  outcome.summary["files"] = files;
  log.line("finished with exit code " + std::to_string(outcome.exit_code));
  finish_summary(outcome.summary, out_dir, outcome.exit_code, outcome.error);
  return outcome;
}

int thread_cap() {
  if (const char* env = std::getenv("MILDREG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

RunOutcome sweep_experiment(const ExperimentConfig& config, const std::string& axis,
                            const std::vector<double>& values, const fs::path& out_dir,
                            const std::string& mode, int threads) {
  RunOutcome outcome;
  outcome.summary = base_summary("sweep", config);
  outcome.summary["axis"] = axis;
  outcome.summary["values"] = values;
  outcome.summary["mode"] = mode;
  try {
    static const std::set<std::string> axes = {"sigma", "amplitude", "kappa", "n_grid", "m_steps"};
    if (!axes.count(axis)) config_error("unknown sweep axis '" + axis + "'");
    if (mode != "run" && mode != "certify") config_error("sweep mode must be run or certify");
    if (values.empty()) config_error("sweep needs at least one value");
    config.validate();
  } catch (const Error& e) {
    outcome.exit_code = exit_code_for(e.code());
    outcome.error = e.what();
    fs::create_directories(out_dir);
    finish_summary(outcome.summary, out_dir, outcome.exit_code, outcome.error);
    return outcome;
  }

  const std::size_t rows = values.size();
  std::vector<RunOutcome> results(rows);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows; i = next++) {
      const fs::path row_dir = out_dir / ("row_" + std::to_string(i));
      ExperimentConfig c = config;
      const double v = values[i];
      try {
        if (axis == "sigma") {
          c.sigma_P = v;
          c.sigma_C = v;
        } else if (axis == "amplitude") {
          c.amplitude = v;
        } else if (axis == "kappa") {
          c.kappa = v;
        } else if (axis == "n_grid" || axis == "m_steps") {
          if (std::floor(v) != v) config_error(axis + " values must be integers");
          (axis == "n_grid" ? c.n_grid : c.m_steps) = static_cast<int>(v);
        }
        c.output_dir = row_dir.string();
        c.validate();
        results[i] = mode == "run" ? run_experiment(c, row_dir) : certify_experiment(c, row_dir);
      } catch (const Error& e) {
        fs::create_directories(row_dir);
        results[i].exit_code = exit_code_for(e.code());
        results[i].error = e.what();
        results[i].summary = base_summary(mode, c);
        finish_summary(results[i].summary, row_dir, results[i].exit_code, results[i].error);
      }
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(rows)));
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "row,value,exit_code,gamma,alpha0,windows,iterations,representation_residual,strong_residual,oracle_gap\n";
  Json row_json = Json::array();
  int failures = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    const RunOutcome& r = results[i];
    if (r.exit_code != kExitSuccess) ++failures;
    const Json metrics = r.summary.contains("metrics") ? r.summary["metrics"] : Json::object();
    auto field = [&](const char* key) -> std::string {
      if (metrics.contains(key) && metrics[key].is_number()) return format_double(metrics[key].get<double>());
      return "";
    };
    double gamma_sum = 0.0, alpha0 = 0.0;
    bool have_window = false;
    if (mode == "certify" && r.summary.contains("window")) {
      gamma_sum = r.summary["window"]["gamma"].get<double>();
      alpha0 = r.summary["window"]["alpha0"].get<double>();
      have_window = true;
    }
    csv << i << ',' << format_double(values[i]) << ',' << r.exit_code << ','
        << (have_window ? format_double(gamma_sum) : field("gamma")) << ','
        << (have_window ? format_double(alpha0) : field("alpha0")) << ',' << field("windows") << ','
        << field("iterations") << ',' << field("representation_residual") << ',' << field("strong_residual")
        << ',' << field("oracle_gap") << '\n';
    Json entry{{"row", i}, {"value", values[i]}, {"exit_code", r.exit_code}, {"directory", "row_" + std::to_string(i)}};
    if (!r.error.empty()) entry["error"] = r.error;
    row_json.push_back(entry);
  }
  write_text(out_dir / "sweep.csv", csv.str());
  std::ostringstream gp;
  gp << "# Sweep metrics against the swept value (" << axis << ")\n"
     << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set logscale y\n"
     << "set xlabel '" << axis << "'\n"
     << "set terminal pngcairo size 900,600\n"
     << "set output 'sweep.png'\n"
     << "plot 'sweep.csv' using 2:9 with linespoints title 'strong residual', \\\n"
     << "     'sweep.csv' using 2:10 with linespoints title 'oracle gap'\n";
  write_text(out_dir / "sweep.gp", gp.str());
  outcome.summary["rows"] = row_json;
  outcome.summary["files"] = Json{{"sweep_csv", "sweep.csv"}, {"sweep_script", "sweep.gp"}, {"summary", "summary.json"}};
  outcome.exit_code = failures == static_cast<int>(rows) ? results.front().exit_code : kExitSuccess;
  if (outcome.exit_code == kExitSuccess && failures == static_cast<int>(rows)) outcome.exit_code = kExitFailure;
  finish_summary(outcome.summary, out_dir, outcome.exit_code, outcome.error);
  return outcome;
}

}  // namespace mildreg
