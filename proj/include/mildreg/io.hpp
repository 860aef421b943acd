#pragma once

#include "mildreg/admissibility.hpp"
#include "mildreg/mildsolve.hpp"
#include "mildreg/semigroup.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mildreg {

using Json = nlohmann::ordered_json;

// Shortest round-trip decimal form of a double.
std::string format_double(double value);

void write_text(const std::filesystem::path& path, const std::string& text);

// Header "t,u0,...,u{n-1}", one row per mesh node.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& u);
// Long format "t,x,u" for surface plots.
void write_heatmap_csv(const std::filesystem::path& path, const Trajectory& u);

// Binary layout, little-endian: magic "MRTJ1", u64 n_nodes, u64 m_steps, f64 t_end,
// then (m_steps + 1) * n_nodes f64 values, time-major. The mesh starts at t = 0.
void write_trajectory_binary(const std::filesystem::path& path, const Trajectory& u);
struct BinaryTrajectory {
  int n_nodes = 0;
  int m_steps = 0;
  double t_end = 0.0;
  Matrix states;  // n_nodes x (m_steps + 1)
};
BinaryTrajectory read_trajectory_binary(const std::filesystem::path& path);

Json to_json(const AdmissibilityCertificate& cert);
Json to_json(const ContractionWindow& window);
Json to_json(const WindowDiagnostics& diag);
Json to_json(const LipschitzReport& report);
// Numeric content only; timing is kept out so reruns compare bitwise.
Json to_json(const SolveReport& report);
Json to_json(const ProbeReport& probe);
Json to_json(const RefinementStudy& study);

// Rows "quantity,parameter,t_or_r,value".
void write_probe_csv(const std::filesystem::path& path, const std::vector<ProbeReport>& probes);
// Rows "grid_size,gamma,verdict".
void write_refinement_csv(const std::filesystem::path& path, const RefinementStudy& study);

}  // namespace mildreg
