#include "mildreg/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace mildreg;

int finish(const RunOutcome& outcome, const std::filesystem::path& out_dir) {
  if (!outcome.error.empty()) std::cerr << "mildreg: " << outcome.error << '\n';
  if (outcome.summary.contains("verdicts")) {
    for (const auto& v : outcome.summary["verdicts"]) {
      std::cout << v["status"].get<std::string>() << "  " << v["check"].get<std::string>() << " = "
                << format_double(v["value"].get<double>()) << ' ' << v["comparison"].get<std::string>() << ' '
                << format_double(v["threshold"].get<double>()) << '\n';
    }
  }
  std::cout << "summary: " << (out_dir / "summary.json").string() << " (exit " << outcome.exit_code << ")\n";
  return outcome.exit_code;
}

std::optional<ExperimentConfig> load(const std::string& path, const std::string& out, std::filesystem::path& dir) {
  try {
    ExperimentConfig c = load_config(path);
    if (!out.empty()) c.output_dir = out;
    dir = c.output_dir;
    return c;
  } catch (const Error& e) {
    std::cerr << "mildreg: " << e.what() << '\n';
    return std::nullopt;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mild solutions of nonlocal parabolic problems by windowed Picard iteration"};
  app.require_subcommand(1);

  std::string config_path, out_dir, axis, mode = "run";
  std::vector<double> values;

  auto* run = app.add_subcommand("run", "Solve one configuration and write trajectories and reports");
  run->add_option("--config", config_path, "TOML or JSON configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  auto* certify = app.add_subcommand("certify", "Run the smoothing, resolvent, admissibility and refinement probes");
  certify->add_option("--config", config_path, "TOML or JSON configuration")->required()->check(CLI::ExistingFile);
  certify->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  auto* sweep = app.add_subcommand("sweep", "Repeat run or certify along one parameter axis");
  sweep->add_option("--config", config_path, "TOML or JSON configuration")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "sigma, amplitude, kappa, n_grid or m_steps")->required();
  sweep->add_option("--values", values, "Comma separated values")->required()->delimiter(',');
  sweep->add_option("--mode", mode, "run or certify")->check(CLI::IsMember({"run", "certify"}));
  sweep->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitSuccess : kExitConfig;
  }

  if (app.got_subcommand("version")) {
    std::cout << "mildreg " << MILDREG_VERSION << '\n';
    return kExitSuccess;
  }

  std::filesystem::path dir;
  const auto config = load(config_path, out_dir, dir);
  if (!config) return kExitConfig;
  try {
    if (app.got_subcommand("run")) return finish(run_experiment(*config, dir), dir);
    if (app.got_subcommand("certify")) return finish(certify_experiment(*config, dir), dir);
    return finish(sweep_experiment(*config, axis, values, dir, mode, thread_cap()), dir);
  } catch (const std::exception& e) {
    std::cerr << "mildreg: " << e.what() << '\n';
    return kExitFailure;
  }
}
