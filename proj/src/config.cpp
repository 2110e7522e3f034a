#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "stflow/cli.hpp"
#include "stflow/errors.hpp"

namespace stflow {

namespace pt = boost::property_tree;

const char* to_string(CaseKind kind) {
  switch (kind) {
    case CaseKind::Stationary: return "stationary";
    case CaseKind::Heave: return "heave";
    case CaseKind::Pitch: return "pitch";
    case CaseKind::Custom: return "custom";
  }
  return "?";
}

namespace {

const char* motion_name(MotionKind m) {
  switch (m) {
    case MotionKind::Stationary: return "none";
    case MotionKind::Heave: return "heave";
    case MotionKind::Pitch: return "pitch";
  }
  return "?";
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"case",
       {"name", "kind", "motion", "foil", "Re", "U", "chord", "rho", "alpha", "pitch_amplitude",
        "heave_amplitude", "pitch_axis", "k", "T"}},
      {"mesh", {"level", "steady", "n_el_t", "p_t", "temporal", "s"}},
      {"solver",
       {"dtheta", "max_steps", "newton_iterations", "tolerance", "early_exit", "freeze_tau", "sound_speed",
        "linear", "precond", "linear_tolerance", "linear_max_iterations", "linear_restart", "max_halvings",
        "growth_limit"}},
      {"output", {"directory", "force_samples", "vtk", "vtk_slices", "vtk_lattice",
                  "boundary_velocity_resolutions"}},
      {"sweep", {"parameter", "values"}},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  double x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(x))
    throw ConfigError("key '" + key + "': '" + text + "' is not a number");
  return x;
}

int to_int(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  int x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError("key '" + key + "': '" + text + "' is not an integer");
  return x;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string v = trim(text);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError("key '" + key + "': '" + text + "' is not a boolean");
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
  return out;
}

}  // namespace

Eigen::Vector2d CaseConfig::flow_direction() const {
  const double a = alpha_deg * std::numbers::pi / 180.0;
  return {std::cos(a), std::sin(a)};
}

MotionSpec CaseConfig::motion_spec() const {
  MotionSpec m;
  m.kind = motion;
  m.heave_amplitude = heave_amplitude;
  m.pitch_amplitude_deg = pitch_amplitude_deg;
  m.period = period;
  m.pitch_axis = pitch_axis;
  m.chord = chord;
  return m;
}

SpatialMeshSpec CaseConfig::mesh_spec() const {
  SpatialMeshSpec s;
  s.naca = foil;
  s.chord = chord;
  s.level = level;
  return s;
}

CaseConfig parse_config_text(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    const auto it = schema().find(section);
    if (it == schema().end()) {
      if (body.empty()) throw ConfigError("key '" + section + "' outside a section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (!value.empty()) throw ConfigError("nested keys are not supported: " + section + "." + key);
      if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    }
  }

  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return trim(*v);
    return std::nullopt;
  };

  CaseConfig c;
  const auto kind = get("case.kind");
  if (!kind) throw ConfigError("missing required key 'kind' in [case]");
  if (*kind == "stationary") c.kind = CaseKind::Stationary;
  else if (*kind == "heave") c.kind = CaseKind::Heave;
  else if (*kind == "pitch") c.kind = CaseKind::Pitch;
  else if (*kind == "custom") c.kind = CaseKind::Custom;
  else throw ConfigError("key 'kind': unknown case kind '" + *kind + "'");

  const auto Re = get("case.Re");
  if (!Re) throw ConfigError("missing required key 'Re' in [case]");
  c.Re = to_double("Re", *Re);

  switch (c.kind) {
    case CaseKind::Stationary: c.motion = MotionKind::Stationary; break;
    case CaseKind::Heave: c.motion = MotionKind::Heave; break;
    case CaseKind::Pitch: c.motion = MotionKind::Pitch; break;
    case CaseKind::Custom: {
      const auto m = get("case.motion");
      if (!m) throw ConfigError("missing required key 'motion' in [case] for a custom case");
      if (*m == "none") c.motion = MotionKind::Stationary;
      else if (*m == "heave") c.motion = MotionKind::Heave;
      else if (*m == "pitch") c.motion = MotionKind::Pitch;
      else throw ConfigError("key 'motion': expected none, heave or pitch");
      break;
    }
  }
  if (c.kind != CaseKind::Custom && get("case.motion"))
    throw ConfigError("key 'motion' is only valid for custom cases");
  if (c.motion == MotionKind::Heave && !get("case.heave_amplitude"))
    throw ConfigError("missing required key 'heave_amplitude' in [case]");
  if (c.motion == MotionKind::Pitch && !get("case.pitch_amplitude"))
    throw ConfigError("missing required key 'pitch_amplitude' in [case]");

  if (auto v = get("case.name")) c.name = *v;
  if (auto v = get("case.foil")) c.foil = *v;
  if (auto v = get("case.U")) c.U = to_double("U", *v);
  if (auto v = get("case.chord")) c.chord = to_double("chord", *v);
  if (auto v = get("case.rho")) c.rho = to_double("rho", *v);
  if (auto v = get("case.alpha")) c.alpha_deg = to_double("alpha", *v);
  if (auto v = get("case.pitch_amplitude")) c.pitch_amplitude_deg = to_double("pitch_amplitude", *v);
  if (auto v = get("case.heave_amplitude")) c.heave_amplitude = to_double("heave_amplitude", *v);
  if (auto v = get("case.pitch_axis")) c.pitch_axis = to_double("pitch_axis", *v);
  if (auto v = get("case.k")) c.k = to_double("k", *v);
  if (auto v = get("case.T")) c.T = to_double("T", *v);

  c.steady = c.motion == MotionKind::Stationary;
  if (auto v = get("mesh.level")) c.level = to_int("level", *v);
  if (auto v = get("mesh.steady")) c.steady = to_bool("steady", *v);
  if (auto v = get("mesh.n_el_t")) c.n_el_t = to_int("n_el_t", *v);
  if (auto v = get("mesh.p_t")) c.p_t = to_int("p_t", *v);
  if (auto v = get("mesh.temporal")) {
    if (*v == "open") c.temporal = TemporalKind::OpenC0;
    else if (*v == "periodic") c.temporal = TemporalKind::Periodic;
    else throw ConfigError("key 'temporal': expected open or periodic");
  }
  if (auto v = get("mesh.s")) c.s = to_double("s", *v);

  auto& sv = c.solver;
  if (auto v = get("solver.dtheta")) sv.dtheta = to_double("dtheta", *v);
  if (auto v = get("solver.max_steps")) sv.max_steps = to_int("max_steps", *v);
  if (auto v = get("solver.newton_iterations")) sv.newton_iterations = to_int("newton_iterations", *v);
  if (auto v = get("solver.tolerance")) sv.tolerance = to_double("tolerance", *v);
  if (auto v = get("solver.early_exit")) sv.early_exit = to_bool("early_exit", *v);
  if (auto v = get("solver.freeze_tau")) sv.freeze_tau = to_bool("freeze_tau", *v);
  if (auto v = get("solver.sound_speed")) c.sound_speed = to_double("sound_speed", *v);
  if (auto v = get("solver.linear")) {
    if (*v == "direct") sv.linear.method = LinearMethod::Direct;
    else if (*v == "gmres") sv.linear.method = LinearMethod::Gmres;
    else throw ConfigError("key 'linear': expected direct or gmres");
  }
  if (auto v = get("solver.precond")) {
    if (*v == "jacobi") sv.linear.precond = BlockPrecond::Jacobi;
    else if (*v == "gauss-seidel") sv.linear.precond = BlockPrecond::GaussSeidel;
    else throw ConfigError("key 'precond': expected jacobi or gauss-seidel");
  }
  if (auto v = get("solver.linear_tolerance")) sv.linear.tolerance = to_double("linear_tolerance", *v);
  if (auto v = get("solver.linear_max_iterations"))
    sv.linear.max_iterations = to_int("linear_max_iterations", *v);
  if (auto v = get("solver.linear_restart")) sv.linear.restart = to_int("linear_restart", *v);
  if (auto v = get("solver.max_halvings")) sv.max_halvings = to_int("max_halvings", *v);
  if (auto v = get("solver.growth_limit")) sv.growth_limit = to_double("growth_limit", *v);

  c.output_dir = c.name;
  if (auto v = get("output.directory")) c.output_dir = *v;
  if (auto v = get("output.force_samples")) c.force_samples = to_int("force_samples", *v);
  if (auto v = get("output.vtk")) c.vtk = to_bool("vtk", *v);
  if (auto v = get("output.vtk_slices")) c.vtk_slices = to_int("vtk_slices", *v);
  if (auto v = get("output.vtk_lattice")) c.vtk_lattice = to_int("vtk_lattice", *v);
  if (auto v = get("output.boundary_velocity_resolutions")) {
    c.boundary_velocity_resolutions.clear();
    for (double x : to_list("boundary_velocity_resolutions", *v)) {
      if (x != std::floor(x)) throw ConfigError("key 'boundary_velocity_resolutions': integers expected");
      c.boundary_velocity_resolutions.push_back(static_cast<int>(x));
    }
  }

  if (auto v = get("sweep.parameter")) c.sweep_parameter = *v;
  if (auto v = get("sweep.values")) c.sweep_values = to_list("values", *v);

  resolve(c);
  return c;
}

CaseConfig parse_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read configuration file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void resolve(CaseConfig& c) {
  if (!(c.Re > 0)) throw ConfigError("Re must be positive");
  if (!(c.U > 0)) throw ConfigError("U must be positive");
  if (!(c.chord > 0)) throw ConfigError("chord must be positive");
  if (!(c.rho > 0)) throw ConfigError("rho must be positive");
  if (!(c.s > 0)) throw ConfigError("s must be positive");
  if (!(c.sound_speed > 0)) throw ConfigError("sound_speed must be positive");
  if (c.name.empty()) throw ConfigError("name must not be empty");
  parse_naca(c.foil);
  c.nu = c.U * c.chord / c.Re;

  if (c.k && !(*c.k > 0)) throw ConfigError("k must be positive");
  if (c.T && !(*c.T > 0)) throw ConfigError("T must be positive");
  const bool unsteady = c.motion != MotionKind::Stationary;
  if (unsteady && !c.k && !c.T) throw ConfigError("unsteady case needs k or T");
  if (c.k && c.T) {
    const double Tk = std::numbers::pi * c.chord / (*c.k * c.U);
    if (std::abs(Tk - *c.T) > 1e-3 * Tk)
      throw ConfigError("contradictory k and T: k = " + std::to_string(*c.k) + " gives T = " + std::to_string(Tk) +
                        ", T = " + std::to_string(*c.T));
  }
  if (c.T) c.period = *c.T;
  else if (c.k) c.period = std::numbers::pi * c.chord / (*c.k * c.U);
  else c.period = 1.0;

  if (unsteady && c.steady) throw ConfigError("a steady mesh requires a stationary case");
  if (c.motion == MotionKind::Heave && !(c.heave_amplitude > 0)) throw ConfigError("heave_amplitude must be positive");
  if (c.motion == MotionKind::Pitch && !(c.pitch_amplitude_deg > 0))
    throw ConfigError("pitch_amplitude must be positive");
  if (c.n_el_t < 1) throw ConfigError("n_el_t must be >= 1");
  if (c.p_t < 1) throw ConfigError("p_t must be >= 1");
  if (c.temporal == TemporalKind::Periodic && c.n_el_t < c.p_t + 1)
    throw ConfigError("periodic temporal basis needs n_el_t >= p_t + 1");
  if (c.level < -1 || c.level > 4) throw ConfigError("level must lie in [-1, 4]");
  if (c.force_samples < 1) throw ConfigError("force_samples must be >= 1");
  if (c.vtk_slices < 1 || c.vtk_lattice < 1) throw ConfigError("vtk_slices and vtk_lattice must be >= 1");
  for (int n : c.boundary_velocity_resolutions)
    if (n < 1) throw ConfigError("boundary_velocity_resolutions must be >= 1");
  if (!c.sweep_parameter.empty() && c.sweep_parameter != "alpha" && c.sweep_parameter != "level")
    throw ConfigError("sweep parameter must be alpha or level");
  if (c.sweep_parameter == "level")
    for (double v : c.sweep_values)
      if (v != std::floor(v)) throw ConfigError("level sweep values must be integers");
  c.solver.validate();
}

nlohmann::json CaseConfig::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["kind"] = to_string(kind);
  j["motion"] = motion_name(motion);
  j["foil"] = foil;
  j["Re"] = Re;
  j["U"] = U;
  j["chord"] = chord;
  j["rho"] = rho;
  j["nu"] = nu;
  j["alpha"] = alpha_deg;
  j["pitch_amplitude"] = pitch_amplitude_deg;
  j["heave_amplitude"] = heave_amplitude;
  j["pitch_axis"] = pitch_axis;
  j["k"] = k ? nlohmann::json(*k) : nlohmann::json(std::numbers::pi * chord / (period * U));
  j["T"] = period;
  j["level"] = level;
  j["steady"] = steady;
  j["n_el_t"] = n_el_t;
  j["p_t"] = p_t;
  j["temporal"] = temporal == TemporalKind::Periodic ? "periodic" : "open";
  j["s"] = s;
  j["sound_speed"] = sound_speed;
  j["solver"] = {{"dtheta", solver.dtheta},
                 {"max_steps", solver.max_steps},
                 {"newton_iterations", solver.newton_iterations},
                 {"tolerance", solver.tolerance},
                 {"early_exit", solver.early_exit},
                 {"freeze_tau", solver.freeze_tau},
                 {"linear", solver.linear.method == LinearMethod::Gmres ? "gmres" : "direct"},
                 {"precond", solver.linear.precond == BlockPrecond::Jacobi ? "jacobi" : "gauss-seidel"},
                 {"linear_tolerance", solver.linear.tolerance},
                 {"linear_max_iterations", solver.linear.max_iterations},
                 {"linear_restart", solver.linear.restart},
                 {"max_halvings", solver.max_halvings},
                 {"growth_limit", solver.growth_limit}};
  j["output"] = {{"directory", output_dir.string()},
                 {"force_samples", force_samples},
                 {"vtk", vtk},
                 {"vtk_slices", vtk_slices},
                 {"vtk_lattice", vtk_lattice}};
  if (!sweep_parameter.empty()) j["sweep"] = {{"parameter", sweep_parameter}, {"values", sweep_values}};
  return j;
}

std::filesystem::path output_root() {
  if (const char* v = std::getenv("STFLOW_OUTPUT_ROOT"); v && *v) return v;
  return std::filesystem::current_path();
}

}  // namespace stflow
