#pragma once

// Case configuration, run orchestration and artifact emission for the
// stationary, heave and pitch experiments.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stflow/mesh.hpp"
#include "stflow/postprocess.hpp"
#include "stflow/solver.hpp"

namespace stflow {

enum class CaseKind { Stationary, Heave, Pitch, Custom };
const char* to_string(CaseKind kind);

enum class RunMode { Solve, BoundaryVelocity };

// Resolved case. Angles in degrees; nu and period are derived.
struct CaseConfig {
  std::string name = "case";
  CaseKind kind = CaseKind::Stationary;
  MotionKind motion = MotionKind::Stationary;  // explicit for custom cases
  std::string foil = "0012";
  double Re = 1000.0;
  double U = 1.0;
  double chord = 1.0;
  double rho = 1.0;
  double alpha_deg = 0.0;
  double pitch_amplitude_deg = 0.0;
  double heave_amplitude = 0.0;
  double pitch_axis = 1.0 / 3.0;
  std::optional<double> k;
  std::optional<double> T;

  int level = 0;
  bool steady = true;  // single constant temporal function (stationary cases only)
  int n_el_t = 24;
  int p_t = 2;
  TemporalKind temporal = TemporalKind::OpenC0;
  double s = 1.0;
  double sound_speed = 4.0;

  SolverConfig solver;

  std::filesystem::path output_dir = "case";
  int force_samples = 64;
  bool vtk = false;
  int vtk_slices = 8;
  int vtk_lattice = 4;
  std::vector<int> boundary_velocity_resolutions = {6, 12, 24};

  // Sweep section: parameter name ("alpha" or "level") and values.
  std::string sweep_parameter;
  std::vector<double> sweep_values;

  // Derived.
  double nu = 1e-3;
  double period = 1.0;

  Eigen::Vector2d flow_direction() const;
  MotionSpec motion_spec() const;
  SpatialMeshSpec mesh_spec() const;
  nlohmann::json to_json() const;
};

// Flat sectioned key-value text. Throws ConfigError for unknown or missing
// keys, non-numeric values and contradictory k / T.
CaseConfig parse_config_text(const std::string& text);
CaseConfig parse_config(const std::filesystem::path& file);
// Fills nu and period and checks the invariants.
void resolve(CaseConfig& cfg);

// Root directory for run outputs: $STFLOW_OUTPUT_ROOT or the current directory.
std::filesystem::path output_root();

std::string sha256_file(const std::filesystem::path& file);

struct RunManifest {
  std::string name;
  std::filesystem::path directory;
  std::string mode = "solve";
  nlohmann::json parameters;
  nlohmann::json mesh;  // element / dof counts
  double seconds = 0;
  bool converged = false;
  bool dry_run = false;
  std::string failed_stage;  // empty on success
  std::string error;
  ConvergenceReport convergence;
  double Cd_mean = 0, Cl_mean = 0;
  nlohmann::json results;
  std::vector<std::filesystem::path> files;  // relative to directory

  bool ok() const { return failed_stage.empty() && (converged || dry_run || mode != "solve"); }
  nlohmann::json to_json() const;
};

// Writes manifest.json listing every file in the directory with its SHA-256.
void write_manifest(RunManifest& m);

// Reconstructed x2 displacement and boundary velocity of a foil point against
// the prescribed motion.
struct BoundaryVelocityTable {
  int n_el_t = 0;
  std::vector<double> t, dx2, dx2_exact, g_x2, g_x2_exact;
  double displacement_error = 0;  // L-infinity
  double velocity_error = 0;      // L-infinity
};
BoundaryVelocityTable boundary_velocity_table(const SpaceTimeMesh& mesh, int samples_per_span = 8);
void write_boundary_velocity_csv(const BoundaryVelocityTable& table, std::ostream& os);

// Mesh and solved state of a case, for callers that postprocess further.
struct CaseSolution {
  SpaceTimeMesh mesh;
  DofMap dofs;
  FlowProperties props;
  Eigen::VectorXd U;
  ConvergenceReport report;
  Problem problem() const { return {&mesh, props, {}}; }
};
SpaceTimeMesh build_case_mesh(const CaseConfig& cfg);
Problem case_problem(const CaseConfig& cfg, const SpaceTimeMesh& mesh);
CaseSolution solve_case(const CaseConfig& cfg, const ProgressFn& progress = {});

// Mean drag and lift coefficients over the period.
ForceCoefficients mean_coefficients(const TractionSeries& series, const CaseConfig& cfg, int samples = 64);

RunManifest run_case(const CaseConfig& cfg, RunMode mode = RunMode::Solve, bool dry_run = false,
                     const ProgressFn& progress = {});

struct SweepResult {
  std::vector<RunManifest> runs;
  std::filesystem::path directory;
  std::optional<RichardsonResult> richardson_cd, richardson_cl;
  std::string richardson_error;
};
// One run per value of cfg.sweep_parameter; writes sweep.csv (value, Cd, Cl)
// and, for level sweeps, Richardson estimates.
SweepResult sweep(const CaseConfig& cfg, const ProgressFn& progress = {});

}  // namespace stflow
