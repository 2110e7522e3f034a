// stflow: run, sweep and boundary-velocity verification of configured cases.
//
// Exit status: 0 success, 1 configuration or stage failure, 2 not converged.

#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "stflow/cli.hpp"
#include "stflow/errors.hpp"

using namespace stflow;

namespace {

int report(const RunManifest& m) {
  std::cout << "run " << m.name << ": ";
  if (!m.failed_stage.empty()) {
    std::cout << "failed in stage " << m.failed_stage << ": " << m.error << "\n";
    return 1;
  }
  if (m.dry_run) {
    std::cout << "dry run, " << m.mesh.dump() << "\n";
  } else if (m.mode == "solve") {
    std::cout << (m.converged ? "converged" : "not converged") << " (" << m.convergence.message << "), Cd "
              << m.Cd_mean << ", Cl " << m.Cl_mean << "\n";
  } else {
    std::cout << m.results.dump() << "\n";
  }
  std::cout << "outputs in " << m.directory.string() << "\n";
  return m.ok() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time flow solver for oscillating hydrofoils"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress solver progress");

  std::string run_config, mode = "solve";
  bool dry_run = false;
  auto* run = app.add_subcommand("run", "Run one case");
  run->add_option("config", run_config, "Case configuration file")->required()->check(CLI::ExistingFile);
  run->add_flag("--dry-run", dry_run, "Build the mesh and report statistics only");
  run->add_option("--mode", mode, "solve or boundary-velocity")
      ->check(CLI::IsMember({"solve", "boundary-velocity"}));

  std::string sweep_config;
  auto* sw = app.add_subcommand("sweep", "Run the [sweep] values of a case");
  sw->add_option("config", sweep_config, "Case configuration file with a [sweep] section")
      ->required()
      ->check(CLI::ExistingFile);

  std::string bv_config;
  auto* bv = app.add_subcommand("verify-boundary-velocity", "Tabulate the reconstructed boundary velocity");
  bv->add_option("config", bv_config, "Case configuration file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  const ProgressFn progress = [&](const std::string& s) {
    if (!quiet) std::cerr << s << std::endl;
  };
  try {
    if (*run) {
      const CaseConfig cfg = parse_config(run_config);
      return report(run_case(cfg, mode == "solve" ? RunMode::Solve : RunMode::BoundaryVelocity, dry_run, progress));
    }
    if (*bv) return report(run_case(parse_config(bv_config), RunMode::BoundaryVelocity, false, progress));
    if (*sw) {
      const SweepResult res = sweep(parse_config(sweep_config), progress);
      int status = 0;
      for (const auto& m : res.runs) status = std::max(status, report(m));
      if (res.richardson_cd)
        std::cout << "Richardson Cd: order " << res.richardson_cd->order << ", extrapolated "
                  << res.richardson_cd->extrapolated << "\n";
      if (res.richardson_cl)
        std::cout << "Richardson Cl: order " << res.richardson_cl->order << ", extrapolated "
                  << res.richardson_cl->extrapolated << "\n";
      if (!res.richardson_error.empty()) std::cout << "Richardson: " << res.richardson_error << "\n";
      std::cout << "aggregate table in " << (res.directory / "sweep.csv").string() << "\n";
      return status;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
