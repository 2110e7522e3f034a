#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "stflow/cli.hpp"
#include "stflow/errors.hpp"

namespace stflow {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["mode"] = mode;
  j["parameters"] = parameters;
  j["mesh"] = mesh;
  j["seconds"] = seconds;
  j["dry_run"] = dry_run;
  j["converged"] = converged;
  j["status"] = failed_stage.empty() ? "ok" : "failed";
  if (!failed_stage.empty()) {
    j["failed_stage"] = failed_stage;
    j["error"] = error;
  }
  if (mode == "solve" && !dry_run) {
    j["convergence"] = {{"steps", convergence.steps},
                        {"newton_iterations", convergence.newton_iterations},
                        {"rejected_steps", convergence.rejected_steps},
                        {"final_residual", convergence.final_norms.total()},
                        {"message", convergence.message}};
  }
  j["results"] = results;
  return j;
}

void write_manifest(RunManifest& m) {
  m.files.clear();
  for (const auto& entry : fs::recursive_directory_iterator(m.directory))
    if (entry.is_regular_file()) {
      const fs::path rel = fs::relative(entry.path(), m.directory);
      if (rel != "manifest.json") m.files.push_back(rel);
    }
  std::sort(m.files.begin(), m.files.end());
  nlohmann::json j = m.to_json();
  j["files"] = nlohmann::json::array();
  for (const auto& f : m.files)
    j["files"].push_back({{"path", f.generic_string()}, {"sha256", sha256_file(m.directory / f)}});
  j["files"].push_back({{"path", "manifest.json"}, {"sha256", nullptr}});
  std::ofstream(m.directory / "manifest.json") << j.dump(2) << "\n";
  m.files.push_back("manifest.json");
}

// ------------------------------------------------------- boundary velocity

BoundaryVelocityTable boundary_velocity_table(const SpaceTimeMesh& mesh, int samples_per_span) {
  if (mesh.steady()) throw ConfigError("boundary velocity needs a space-time mesh");
  if (samples_per_span < 1) throw std::invalid_argument("samples_per_span must be >= 1");
  PointEval pe;
  FaceEval fe;
  double xi[3];
  // Foil point farthest from the pitch axis.
  const Eigen::Vector2d axis(mesh.motion.pitch_axis * mesh.motion.chord, 0.0);
  int edge = -1;
  double best = -1;
  for (size_t ie = 0; ie < mesh.edges.size(); ++ie) {
    if (mesh.edges[ie].tag != FaceTag::Interior) continue;
    mesh.face_to_local(static_cast<int>(ie), 0.5, 0.0, xi);
    mesh.eval_face(static_cast<int>(ie), 0, xi, pe, fe);
    const double d = (pe.xhat.head<2>() - axis).norm();
    if (d > best) best = d, edge = static_cast<int>(ie);
  }
  if (edge < 0) throw StructureError("mesh has no interior boundary");
  mesh.face_to_local(edge, 0.5, 0.0, xi);
  mesh.eval_face(edge, 0, xi, pe, fe);
  const Eigen::Vector2d x0 = pe.xhat.head<2>();

  BoundaryVelocityTable tab;
  tab.n_el_t = mesh.num_t_spans();
  auto sample = [&](int ts, double c) {
    mesh.face_to_local(edge, 0.5, c, xi);
    mesh.eval_face(edge, ts, xi, pe, fe);
    const double t = pe.xhat[2] / mesh.s;
    tab.t.push_back(t);
    tab.dx2.push_back(pe.xhat[1] - x0[1]);
    tab.dx2_exact.push_back(mesh.motion.apply(x0, t)[1] - x0[1]);
    tab.g_x2.push_back(fe.g[1]);
    tab.g_x2_exact.push_back(mesh.motion.velocity(x0, t)[1]);
    tab.displacement_error = std::max(tab.displacement_error, std::abs(tab.dx2.back() - tab.dx2_exact.back()));
    tab.velocity_error = std::max(tab.velocity_error, std::abs(tab.g_x2.back() - tab.g_x2_exact.back()));
  };
  for (int ts = 0; ts < tab.n_el_t; ++ts)
    for (int k = 0; k < samples_per_span; ++k) sample(ts, static_cast<double>(k) / samples_per_span);
  sample(tab.n_el_t - 1, 1.0);
  return tab;
}

void write_boundary_velocity_csv(const BoundaryVelocityTable& tab, std::ostream& os) {
  os << "t,dx2,dx2_exact,g_x2,g_x2_exact\n" << std::setprecision(12);
  for (size_t i = 0; i < tab.t.size(); ++i)
    os << tab.t[i] << "," << tab.dx2[i] << "," << tab.dx2_exact[i] << "," << tab.g_x2[i] << "," << tab.g_x2_exact[i]
       << "\n";
}

// ------------------------------------------------------------------ runs

SpaceTimeMesh build_case_mesh(const CaseConfig& cfg) {
  const SpatialMesh sp = build_spatial_mesh(cfg.mesh_spec());
  const Eigen::Vector2d fs = cfg.U * cfg.flow_direction();
  if (cfg.steady) return build_steady_mesh(sp, fs);
  return build_spacetime_mesh(sp, cfg.motion_spec(), {cfg.temporal, cfg.n_el_t, cfg.p_t}, cfg.s, fs);
}

Problem case_problem(const CaseConfig& cfg, const SpaceTimeMesh& mesh) {
  Problem pb;
  pb.mesh = &mesh;
  pb.props.nu = cfg.nu;
  pb.props.rho = cfg.rho;
  pb.props.U = cfg.U;
  pb.props.free_stream = cfg.U * cfg.flow_direction();
  pb.props.s = cfg.s;
  pb.props.a = cfg.sound_speed;
  return pb;
}

CaseSolution solve_case(const CaseConfig& cfg, const ProgressFn& progress) {
  CaseSolution sol;
  sol.mesh = build_case_mesh(cfg);
  const Problem pb = case_problem(cfg, sol.mesh);
  sol.props = pb.props;
  sol.dofs = build_dof_map(sol.mesh, pb.props.free_stream);
  sol.U = initial_state(sol.dofs, pb.props.free_stream);
  sol.report = pseudo_transient_march(sol.problem(), sol.dofs, sol.U, cfg.solver, progress);
  return sol;
}

ForceCoefficients mean_coefficients(const TractionSeries& series, const CaseConfig& cfg, int samples) {
  ForceCoefficients m;
  for (int k = 0; k < samples; ++k) {
    const auto c = force_coefficients(series.force(series.period * k / samples), cfg.rho, cfg.chord, cfg.U,
                                      cfg.flow_direction());
    m.Cd += c.Cd / samples;
    m.Cl += c.Cl / samples;
  }
  return m;
}

namespace {

nlohmann::json mesh_stats(const SpaceTimeMesh& mesh, const DofMap* dofs) {
  nlohmann::json j = {{"spatial_elements", mesh.sp_elems.size()},
                      {"temporal_elements", mesh.num_t_spans()},
                      {"elements", mesh.num_elements()},
                      {"control_points", mesh.num_cps()},
                      {"temporal_leaders", mesh.time.num_leaders()}};
  if (dofs) {
    j["dofs"] = dofs->num_dofs();
    j["free_dofs"] = dofs->num_free();
    j["strong_dofs"] = dofs->num_strong();
  }
  return j;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

}  // namespace

RunManifest run_case(const CaseConfig& cfg, RunMode mode, bool dry_run, const ProgressFn& progress) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest m;
  m.name = cfg.name;
  m.mode = mode == RunMode::Solve ? "solve" : "boundary-velocity";
  m.dry_run = dry_run;
  m.parameters = cfg.to_json();
  m.directory = cfg.output_dir.is_absolute() ? cfg.output_dir : output_root() / cfg.output_dir;
  std::string stage = "output";
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  try {
    fs::create_directories(m.directory);
    for (const char* f : {"residuals.csv", "forces.csv", "summary.json", "manifest.json"})
      fs::remove(m.directory / f);
    fs::remove_all(m.directory / "slices");

    if (mode == RunMode::BoundaryVelocity) {
      stage = "mesh";
      if (cfg.motion == MotionKind::Stationary) throw ConfigError("boundary-velocity mode needs a moving foil");
      const SpatialMesh sp = build_spatial_mesh(cfg.mesh_spec());
      nlohmann::json tables = nlohmann::json::array();
      double prev_d = 0, prev_g = 0;
      for (int n : cfg.boundary_velocity_resolutions) {
        const SpaceTimeMesh mesh = build_spacetime_mesh(sp, cfg.motion_spec(), {cfg.temporal, n, cfg.p_t}, cfg.s,
                                                        cfg.U * cfg.flow_direction());
        const auto tab = boundary_velocity_table(mesh);
        const std::string file = "boundary_velocity_nel" + std::to_string(n) + ".csv";
        std::ostringstream os;
        write_boundary_velocity_csv(tab, os);
        write_file(m.directory / file, os.str());
        nlohmann::json t = {{"n_el_t", n},
                            {"file", file},
                            {"displacement_error", tab.displacement_error},
                            {"velocity_error", tab.velocity_error}};
        if (prev_d > 0) {
          t["displacement_ratio"] = prev_d / tab.displacement_error;
          t["velocity_ratio"] = prev_g / tab.velocity_error;
        }
        prev_d = tab.displacement_error;
        prev_g = tab.velocity_error;
        tables.push_back(t);
      }
      m.results["boundary_velocity"] = tables;
      m.seconds = elapsed();
      stage = "output";
      write_manifest(m);
      return m;
    }

    stage = "mesh";
    const SpaceTimeMesh mesh = build_case_mesh(cfg);
    const Problem pb = case_problem(cfg, mesh);
    const DofMap dofs = build_dof_map(mesh, pb.props.free_stream);
    m.mesh = mesh_stats(mesh, &dofs);
    if (dry_run) {
      m.seconds = elapsed();
      stage = "output";
      write_manifest(m);
      return m;
    }

    stage = "solve";
    Eigen::VectorXd U = initial_state(dofs, pb.props.free_stream);
    m.convergence = pseudo_transient_march(pb, dofs, U, cfg.solver, progress);
    m.converged = m.convergence.converged;
    {
      std::ostringstream os;
      write_residual_csv(m.convergence, os);
      write_file(m.directory / "residuals.csv", os.str());
    }

    stage = "postprocess";
    const TractionSeries series = conservative_traction(pb, U);
    const CoefficientScale scale{cfg.rho, cfg.chord, cfg.U, cfg.flow_direction()};
    {
      std::ostringstream os;
      write_force_csv(series, cfg.force_samples, scale, os);
      write_file(m.directory / "forces.csv", os.str());
    }
    const auto mean = mean_coefficients(series, cfg, cfg.force_samples);
    m.Cd_mean = mean.Cd;
    m.Cl_mean = mean.Cl;
    const MassReport mass = global_mass_report(pb, dofs, U);
    const MomentumBalance mom = momentum_balance(pb, dofs, U);
    m.results = {{"Cd_mean", mean.Cd},
                 {"Cl_mean", mean.Cl},
                 {"mass", to_json(mass)},
                 {"momentum", to_json(mom)},
                 {"traction_solve_residual", series.solve_residual}};
    if (cfg.vtk) {
      std::vector<double> times;
      for (int k = 0; k <= cfg.vtk_slices; ++k) times.push_back(mesh.period * k / cfg.vtk_slices);
      if (mesh.steady()) times = {0.0};
      export_fields(mesh, U, times, m.directory / "slices", cfg.vtk_lattice);
    }

    stage = "output";
    nlohmann::json summary = {{"name", cfg.name},
                              {"parameters", m.parameters},
                              {"mesh", m.mesh},
                              {"converged", m.converged},
                              {"steps", m.convergence.steps},
                              {"final_residual", m.convergence.final_norms.total()},
                              {"results", m.results}};
    write_file(m.directory / "summary.json", summary.dump(2) + "\n");
    m.seconds = elapsed();
    write_manifest(m);
  } catch (const std::exception& e) {
    m.failed_stage = stage;
    m.error = e.what();
    m.seconds = elapsed();
    try {
      if (fs::exists(m.directory)) write_manifest(m);
    } catch (const std::exception&) {
    }
  }
  return m;
}

// ------------------------------------------------------------------ sweep

SweepResult sweep(const CaseConfig& base, const ProgressFn& progress) {
  if (base.sweep_parameter.empty()) throw ConfigError("no sweep parameter given");
  if (base.sweep_values.empty()) throw ConfigError("sweep parameter list is empty");
  SweepResult res;
  res.directory = base.output_dir.is_absolute() ? base.output_dir : output_root() / base.output_dir;
  fs::create_directories(res.directory);
  const bool level = base.sweep_parameter == "level";

  std::ostringstream table;
  table << base.sweep_parameter << ",converged,Cd,Cl,status\n" << std::setprecision(12);
  for (double v : base.sweep_values) {
    CaseConfig c = base;
    std::ostringstream tag;
    tag << base.sweep_parameter << "_" << v;
    c.name = base.name + "_" + tag.str();
    c.output_dir = res.directory / tag.str();
    c.sweep_parameter.clear();
    c.sweep_values.clear();
    RunManifest m;
    try {
      if (level) c.level = static_cast<int>(v);
      else c.alpha_deg = v;
      resolve(c);
      if (progress) progress("run " + c.name);
      m = run_case(c, RunMode::Solve, false, progress);
    } catch (const std::exception& e) {
      m.name = c.name;
      m.failed_stage = "config";
      m.error = e.what();
    }
    table << v << "," << (m.converged ? 1 : 0) << "," << m.Cd_mean << "," << m.Cl_mean << ","
          << (m.failed_stage.empty() ? "ok" : "failed:" + m.failed_stage) << "\n";
    res.runs.push_back(std::move(m));
  }
  write_file(res.directory / "sweep.csv", table.str());

  if (level) {
    std::vector<std::pair<double, const RunManifest*>> ok;
    for (size_t i = 0; i < res.runs.size(); ++i)
      if (res.runs[i].failed_stage.empty() && res.runs[i].converged) ok.push_back({base.sweep_values[i], &res.runs[i]});
    std::sort(ok.begin(), ok.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    nlohmann::json rj;
    if (ok.size() >= 3) {
      std::array<double, 3> h{}, cd{}, cl{};
      for (int i = 0; i < 3; ++i) {
        const auto& [lv, run] = ok[ok.size() - 3 + i];
        h[i] = std::ldexp(1.0, -static_cast<int>(lv));
        cd[i] = run->Cd_mean;
        cl[i] = run->Cl_mean;
      }
      try {
        res.richardson_cd = richardson_extrapolate(h, cd);
        rj["Cd"] = to_json(*res.richardson_cd);
      } catch (const std::exception& e) {
        rj["Cd"] = {{"error", e.what()}};
        res.richardson_error += std::string("Cd: ") + e.what() + "; ";
      }
      try {
        res.richardson_cl = richardson_extrapolate(h, cl);
        rj["Cl"] = to_json(*res.richardson_cl);
      } catch (const std::exception& e) {
        rj["Cl"] = {{"error", e.what()}};
        res.richardson_error += std::string("Cl: ") + e.what() + "; ";
      }
    } else {
      res.richardson_error = "fewer than three converged levels";
      rj["error"] = res.richardson_error;
    }
    write_file(res.directory / "richardson.json", rj.dump(2) + "\n");
  }

  RunManifest agg;
  agg.name = base.name;
  agg.mode = "sweep";
  agg.parameters = base.to_json();
  agg.directory = res.directory;
  agg.converged = std::all_of(res.runs.begin(), res.runs.end(), [](const RunManifest& r) { return r.converged; });
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : res.runs)
    runs.push_back({{"name", r.name}, {"converged", r.converged}, {"status", r.failed_stage.empty() ? "ok" : "failed"}});
  agg.results = {{"runs", runs}};
  write_manifest(agg);
  return res;
}

}  // namespace stflow
