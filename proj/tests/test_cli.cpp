#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "stflow/cli.hpp"
#include "stflow/errors.hpp"

using namespace stflow;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory used as the output root.
struct ScratchRoot {
  fs::path dir;
  ScratchRoot() {
    dir = fs::temp_directory_path() / ("stflow_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    ::setenv("STFLOW_OUTPUT_ROOT", dir.c_str(), 1);
  }
  ~ScratchRoot() {
    ::unsetenv("STFLOW_OUTPUT_ROOT");
    fs::remove_all(dir);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// Every regular file except the manifest is listed with its hash.
void check_manifest(const fs::path& dir) {
  const auto j = read_json(dir / "manifest.json");
  std::set<std::string> listed;
  for (const auto& f : j["files"]) {
    listed.insert(f["path"].get<std::string>());
    if (f["path"] != "manifest.json") CHECK(f["sha256"] == sha256_file(dir / f["path"].get<std::string>()));
  }
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) CHECK(listed.count(fs::relative(e.path(), dir).generic_string()) == 1);
}

const char* kStationary = R"(
[case]
name = st
kind = stationary
Re = 1000
alpha = 4
[mesh]
level = -1
[solver]
max_steps = 40
tolerance = 1e-5
)";

}  // namespace

TEST_CASE("config: derived period and viscosity") {
  const auto pitch = parse_config(fs::path(STFLOW_CONFIG_DIR) / "pitch.ini");
  CHECK(pitch.kind == CaseKind::Pitch);
  CHECK(pitch.foil == "0015");
  CHECK(pitch.period == doctest::Approx(8.333).epsilon(1e-4));
  CHECK(pitch.nu == doctest::Approx(1.0 / 1100));
  CHECK(pitch.pitch_amplitude_deg == 23);
  CHECK(pitch.temporal == TemporalKind::Periodic);
  CHECK(pitch.solver.growth_limit == 2);

  const auto heave = parse_config(fs::path(STFLOW_CONFIG_DIR) / "heave.ini");
  CHECK(heave.period == doctest::Approx(314.159).epsilon(1e-6));
  CHECK(heave.motion == MotionKind::Heave);
  CHECK_FALSE(heave.steady);

  const auto st = parse_config_text(kStationary);
  CHECK(st.steady);
  CHECK(st.nu == doctest::Approx(1e-3));
  CHECK(st.output_dir == "st");
  CHECK((st.flow_direction() - Eigen::Vector2d(std::cos(4 * std::numbers::pi / 180), std::sin(4 * std::numbers::pi / 180)))
            .norm() < 1e-15);

  for (const auto& f : fs::directory_iterator(STFLOW_CONFIG_DIR)) CHECK_NOTHROW(parse_config(f.path()));
}

TEST_CASE("config: k and T consistency") {
  const std::string base = "[case]\nkind = heave\nRe = 1000\nheave_amplitude = 0.1\n";
  CHECK(parse_config_text(base + "k = 0.01\nT = 314.159\n").period == doctest::Approx(314.159));
  CHECK_THROWS_AS(parse_config_text(base + "k = 0.01\nT = 300\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(base), ConfigError);
  CHECK(parse_config_text(base + "T = 8\n").period == 8.0);
}

TEST_CASE("config: rejected inputs") {
  const std::string ok = "[case]\nkind = stationary\nRe = 1000\n";
  CHECK_NOTHROW(parse_config_text(ok));
  CHECK_THROWS_AS(parse_config_text(ok + "reynolds = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(ok + "[meshes]\nlevel = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[case]\nRe = 1000\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[case]\nkind = stationary\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[case]\nkind = stationary\nRe = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[case]\nkind = stationary\nRe = 1000x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[case]\nkind = stationary\nRe = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[case]\nkind = glide\nRe = 1000\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(ok + "[mesh]\nlevel = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(ok + "[solver]\nlinear = cg\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(ok + "[solver]\nmax_steps = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[case]\nkind = heave\nRe = 1000\nk = 0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[case]\nkind = heave\nRe = 1000\nk = 0.1\nheave_amplitude = 0.1\n[mesh]\nsteady = true\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text(ok + "motion = heave\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[case]\nkind = custom\nRe = 1000\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(ok + "[sweep]\nparameter = Re\nvalues = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config(fs::path("/nonexistent/case.ini")), ConfigError);

  const auto custom = parse_config_text("[case]\nkind = custom\nmotion = pitch\nRe = 500\npitch_amplitude = 5\nT = 4\n");
  CHECK(custom.motion == MotionKind::Pitch);
  CHECK(custom.nu == doctest::Approx(2e-3));
}

TEST_CASE("output root and SHA-256") {
  ScratchRoot root;
  CHECK(output_root() == root.dir);
  std::ofstream(root.dir / "abc.txt") << "abc";
  CHECK(sha256_file(root.dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  std::ofstream(root.dir / "empty.txt");
  CHECK(sha256_file(root.dir / "empty.txt") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  ::unsetenv("STFLOW_OUTPUT_ROOT");
  CHECK(output_root() == fs::current_path());
}

TEST_CASE("run: dry run reports mesh statistics only") {
  ScratchRoot root;
  auto cfg = parse_config(fs::path(STFLOW_CONFIG_DIR) / "pitch.ini");
  const auto m = run_case(cfg, RunMode::Solve, true);
  CHECK(m.ok());
  CHECK(m.mesh["temporal_elements"] == 12);
  CHECK(m.mesh["elements"].get<int>() == m.mesh["spatial_elements"].get<int>() * 12);
  CHECK(m.mesh["dofs"].get<int>() > 0);
  CHECK_FALSE(fs::exists(root.dir / "pitch" / "forces.csv"));
  const auto j = read_json(root.dir / "pitch" / "manifest.json");
  CHECK(j["dry_run"] == true);
  CHECK(j["parameters"]["T"].get<double>() == doctest::Approx(8.333).epsilon(1e-4));
  check_manifest(root.dir / "pitch");
}

TEST_CASE("run: boundary-velocity tables converge with n_el_t") {
  ScratchRoot root;
  const auto cfg = parse_config(fs::path(STFLOW_CONFIG_DIR) / "boundary_velocity.ini");
  const auto m = run_case(cfg, RunMode::BoundaryVelocity);
  REQUIRE(m.ok());
  const auto& t = m.results["boundary_velocity"];
  REQUIRE(t.size() == 3);
  CHECK(t[2]["n_el_t"] == 24);
  CHECK(t[2]["displacement_error"].get<double>() <= 5e-3);
  CHECK(t[2]["velocity_error"].get<double>() <= 2e-2);
  CHECK(t[0]["displacement_error"].get<double>() >= 4 * t[2]["displacement_error"].get<double>());
  CHECK(t[0]["velocity_error"].get<double>() >= 4 * t[2]["velocity_error"].get<double>());
  const auto csv = slurp(root.dir / "boundary_velocity" / "boundary_velocity_nel24.csv");
  CHECK(csv.rfind("t,dx2,dx2_exact,g_x2,g_x2_exact\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 24 * 8 + 1);
  check_manifest(root.dir / "boundary_velocity");

  // Exact motion column: h_a sin(2 pi t / T) and its derivative.
  const auto mesh = build_spacetime_mesh(build_spatial_mesh(cfg.mesh_spec()), cfg.motion_spec(),
                                         {TemporalKind::OpenC0, 6, 2}, 1.0);
  const auto tab = boundary_velocity_table(mesh, 3);
  for (size_t i = 0; i < tab.t.size(); ++i) {
    const double w = 2 * std::numbers::pi / 8.0;
    CHECK(tab.dx2_exact[i] == doctest::Approx(0.5 * std::sin(w * tab.t[i])));
    CHECK(tab.g_x2_exact[i] == doctest::Approx(0.5 * w * std::cos(w * tab.t[i])));
  }
  CHECK(tab.t.back() == doctest::Approx(8.0));

  auto st = parse_config_text(kStationary);
  CHECK_FALSE(run_case(st, RunMode::BoundaryVelocity).ok());
}

TEST_CASE("run: stationary case converges with constant forces and reproducible output") {
  ScratchRoot root;
  auto cfg = parse_config_text(kStationary);
  cfg.vtk = true;
  const auto m = run_case(cfg);
  REQUIRE(m.failed_stage.empty());
  CHECK(m.converged);
  CHECK(m.ok());
  const fs::path dir = root.dir / "st";
  for (const char* f : {"residuals.csv", "forces.csv", "summary.json", "manifest.json", "slices/slice_000.vtk"})
    CHECK(fs::exists(dir / f));
  check_manifest(dir);

  std::istringstream forces(slurp(dir / "forces.csv"));
  std::string line;
  std::getline(forces, line);
  CHECK(line == "t_over_T,Cd,Cl");
  std::set<std::string> values;
  int rows = 0;
  while (std::getline(forces, line)) {
    values.insert(line.substr(line.find(',') + 1));
    ++rows;
  }
  CHECK(rows == cfg.force_samples);
  CHECK(values.size() == 1);
  CHECK(m.Cl_mean > 0.1);
  CHECK(m.Cd_mean > 0.05);

  const auto summary = read_json(dir / "summary.json");
  CHECK(summary["converged"] == true);
  CHECK(summary["results"]["mass"].contains("divergence_integral"));
  CHECK(summary["results"]["momentum"].contains("imbalance"));

  const std::string first = slurp(dir / "forces.csv");
  const auto again = run_case(cfg);
  CHECK(again.converged);
  CHECK(slurp(dir / "forces.csv") == first);
}

TEST_CASE("run: non-convergence and stage failures are reported") {
  ScratchRoot root;
  auto cfg = parse_config_text(kStationary);
  cfg.solver.max_steps = 1;
  const auto m = run_case(cfg);
  CHECK(m.failed_stage.empty());
  CHECK_FALSE(m.converged);
  CHECK_FALSE(m.ok());
  CHECK(fs::exists(root.dir / "st" / "forces.csv"));

  cfg.foil = "2412";
  const auto f = run_case(cfg);
  CHECK(f.failed_stage == "mesh");
  CHECK_FALSE(f.error.empty());
  const auto j = read_json(root.dir / "st" / "manifest.json");
  CHECK(j["failed_stage"] == "mesh");
  CHECK(j["status"] == "failed");
}

TEST_CASE("sweep: isolated runs, aggregate table and empty lists") {
  ScratchRoot root;
  auto cfg = parse_config_text(std::string(kStationary) + "[sweep]\nparameter = alpha\nvalues = 2, 4\n");
  cfg.name = "sw";
  cfg.output_dir = "sw";
  cfg.solver.tolerance = 1e-4;
  auto res = sweep(cfg);
  REQUIRE(res.runs.size() == 2);
  CHECK(res.runs[0].converged);
  CHECK(res.runs[1].converged);
  CHECK(res.runs[0].Cl_mean < res.runs[1].Cl_mean);
  const auto table = slurp(root.dir / "sw" / "sweep.csv");
  CHECK(table.rfind("alpha,converged,Cd,Cl,status\n", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
  check_manifest(root.dir / "sw");
  check_manifest(root.dir / "sw" / "alpha_2");

  cfg.sweep_parameter = "level";
  cfg.sweep_values = {-1, 9};
  res = sweep(cfg);
  REQUIRE(res.runs.size() == 2);
  CHECK(res.runs[0].converged);
  CHECK(res.runs[1].failed_stage == "config");
  CHECK_FALSE(res.richardson_error.empty());
  CHECK(fs::exists(root.dir / "sw" / "richardson.json"));

  cfg.sweep_values.clear();
  CHECK_THROWS_AS(sweep(cfg), ConfigError);
}

TEST_CASE("command line") {
  ScratchRoot root;
  const std::string bin = STFLOW_BINARY;
  auto sh = [&](const std::string& args) {
    const int rc = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  CHECK(sh("run " + std::string(STFLOW_CONFIG_DIR) + "/pitch.ini --dry-run") == 0);
  CHECK(fs::exists(root.dir / "pitch" / "manifest.json"));
  CHECK(sh("verify-boundary-velocity " + std::string(STFLOW_CONFIG_DIR) + "/boundary_velocity.ini") == 0);
  CHECK(sh("run " + std::string(STFLOW_CONFIG_DIR) + "/boundary_velocity.ini --mode=boundary-velocity") == 0);
  CHECK(sh("run " + std::string(STFLOW_CONFIG_DIR) + "/pitch.ini --mode=fly") != 0);
  CHECK(sh("run /nonexistent.ini") != 0);
  CHECK(sh("") != 0);

  std::ofstream(root.dir / "bad.ini") << "[case]\nkind = heave\nRe = 1000\nheave_amplitude = 0.1\nk = 0.01\nT = 10\n";
  CHECK(sh("run " + (root.dir / "bad.ini").string()) == 1);
  std::ofstream(root.dir / "short.ini") << "[case]\nkind = stationary\nRe = 1000\n[mesh]\nlevel = -1\n[solver]\nmax_steps = 1\n";
  CHECK(sh("-q run " + (root.dir / "short.ini").string()) == 2);
}
