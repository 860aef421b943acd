#include "mildreg/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mildreg {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  return out;
}

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw Error(ErrorCode::Io, "truncated MRTJ1 file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

Json vector_json(const std::vector<double>& v) { return Json(v); }

constexpr char kMagic[5] = {'M', 'R', 'T', 'J', '1'};

}  // namespace

std::string format_double(double value) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_trajectory_csv(const fs::path& path, const Trajectory& u) {
  auto out = open_out(path);
  out << "t";
  for (int j = 0; j < u.grid.size(); ++j) out << ",u" << j;
  out << "\n";
  for (int i = 0; i < u.mesh.size(); ++i) {
    out << format_double(u.mesh.node(i));
    for (int j = 0; j < u.grid.size(); ++j) out << ',' << format_double(u.states(j, i));
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_heatmap_csv(const fs::path& path, const Trajectory& u) {
  auto out = open_out(path);
  out << "t,x,u\n";
  for (int i = 0; i < u.mesh.size(); ++i) {
    for (int j = 0; j < u.grid.size(); ++j) {
      out << format_double(u.mesh.node(i)) << ',' << format_double(u.grid.node(j)) << ','
          << format_double(u.states(j, i)) << '\n';
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_trajectory_binary(const fs::path& path, const Trajectory& u) {
  require(u.mesh.t_start() == 0.0, "binary trajectories start at t = 0");
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(u.grid.size()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(u.mesh.steps()));
  put_le<double>(out, u.mesh.t_end());
  for (int i = 0; i < u.mesh.size(); ++i) {
    for (int j = 0; j < u.grid.size(); ++j) put_le<double>(out, u.states(j, i));
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

BinaryTrajectory read_trajectory_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorCode::Io, path.string() + " is not an MRTJ1 trajectory");
  }
  BinaryTrajectory t;
  t.n_nodes = static_cast<int>(get_le<std::uint64_t>(in));
  t.m_steps = static_cast<int>(get_le<std::uint64_t>(in));
  t.t_end = get_le<double>(in);
  t.states.resize(t.n_nodes, t.m_steps + 1);
  for (int i = 0; i <= t.m_steps; ++i) {
    for (int j = 0; j < t.n_nodes; ++j) t.states(j, i) = get_le<double>(in);
  }
  return t;
}

Json to_json(const AdmissibilityCertificate& cert) {
  return Json{{"operator", cert.operator_label},
              {"p", cert.p},
              {"alpha", cert.alpha},
              {"gamma", cert.gamma},
              {"method", cert.method},
              {"seed", cert.seed},
              {"witness_hash", cert.witness_hash()},
              {"n_samples", cert.n_samples},
              {"time_steps", cert.time_steps},
              {"resolution_change", cert.resolution_change},
              {"semantics", cert.semantics()}};
}

Json to_json(const ContractionWindow& w) {
  return Json{{"alpha0", w.alpha0},
              {"p", w.p},
              {"q", w.q},
              {"kappa", w.kappa},
              {"gamma", w.gamma},
              {"bound_value", w.bound_value},
              {"measured_lipschitz", w.measured_lipschitz},
              {"theta_target", w.theta_target}};
}

Json to_json(const WindowDiagnostics& d) {
  return Json{{"index", d.index},
              {"t_start", d.t_start},
              {"t_end", d.t_end},
              {"steps", d.steps},
              {"iterations", d.iterations},
              {"converged", d.converged},
              {"observed_ratio", d.observed_ratio},
              {"max_ratio", d.max_ratio},
              {"fit_residual", d.fit_residual},
              {"fixed_point_residual", d.fixed_point_residual},
              {"first_step_derivative", d.first_step_derivative},
              {"increments", vector_json(d.increments)}};
}

Json to_json(const LipschitzReport& r) {
  return Json{{"value", r.value},
              {"random_pairs", r.random_pairs},
              {"power_iteration", r.power_iteration},
              {"pairs", r.pairs}};
}

Json to_json(const SolveReport& r) {
  Json windows = Json::array();
  for (const auto& w : r.windows) windows.push_back(to_json(w));
  Json certs = Json::array();
  for (const auto& c : r.certificates) certs.push_back(to_json(c));
  return Json{{"window", to_json(r.window)},
              {"windows", windows},
              {"certificates", certs},
              {"lipschitz", to_json(r.lipschitz)},
              {"representation_residual", r.representation_residual},
              {"strong_residual", r.strong_residual},
              {"oracle_gap", r.oracle_gap},
              {"oracle_method", r.oracle_method},
              {"solution_scale", r.solution_scale},
              {"total_iterations", r.total_iterations}};
}

Json to_json(const ProbeReport& probe) {
  return Json{{"quantity", probe.quantity},
              {"parameter_name", probe.parameter_name},
              {"parameter", probe.parameter},
              {"exponent", probe.exponent},
              {"prefactor", probe.prefactor},
              {"residual", probe.residual},
              {"verdict", to_string(probe.verdict)},
              {"points", probe.values.size()}};
}

Json to_json(const RefinementStudy& s) {
  Json rows = Json::array();
  for (const auto& r : s.rows) {
    rows.push_back(Json{{"grid_size", r.grid_size}, {"gamma", r.gamma}, {"growth", r.growth}});
  }
  return Json{{"sigma", s.sigma},
              {"p", s.p},
              {"alpha", s.alpha},
              {"rows", rows},
              {"growth_exponent", s.growth_exponent},
              {"verdict", to_string(s.verdict)}};
}

void write_probe_csv(const fs::path& path, const std::vector<ProbeReport>& probes) {
  auto out = open_out(path);
  out << "quantity,parameter,t_or_r,value\n";
  for (const auto& p : probes) {
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      out << p.quantity << ',' << format_double(p.parameter) << ',' << format_double(p.abscissa[i])
          << ',' << format_double(p.values[i]) << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_refinement_csv(const fs::path& path, const RefinementStudy& study) {
  auto out = open_out(path);
  out << "grid_size,gamma,verdict\n";
  for (const auto& r : study.rows) {
    out << r.grid_size << ',' << format_double(r.gamma) << ',' << to_string(study.verdict) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace mildreg
