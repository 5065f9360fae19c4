#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "coolheat/acceptance.hpp"
#include "coolheat/commands.hpp"

int main(int argc, char** argv) {
  using namespace coolheat;
  CLI::App app{"Rate-equation and quantum-jump simulator for shelving and thermal-light deshelving"};
  app.require_subcommand(1);

  PlanckArgs pa;
  auto* planck = app.add_subcommand("planck", "Single-mode blackbody PSD and photon occupation");
  planck->add_option("--wavelength-nm", pa.wavelength_nm, "Wavelength [nm]")->required();
  planck->add_option("--temperature-K", pa.temperature_k, "Source temperature [K]")->required();
  planck->add_option("--efficiency", pa.efficiency, "Delivery efficiency [0, 1]");
  planck->add_option("--modes", pa.modes, "Polarization modes (1 or 2)");

  SimulateArgs sa;
  std::uint64_t seed = 0;
  std::size_t trajectories = 0;
  auto* sim = app.add_subcommand("simulate", "Run one phase of a scenario");
  sim->add_option("scenario", sa.scenario, "Scenario JSON")->required();
  sim->add_option("--phase", sa.phase, "shelve | deshelve | dark-control");
  sim->add_option("--out", sa.out, "Output directory");
  sim->add_flag("--dump-generator", sa.dump_generator, "Write generator.csv");
  sim->add_option("--threads", sa.threads, "Worker threads (does not change results)");
  auto* seed_opt = sim->add_option("--seed", seed, "Override the scenario seed");
  auto* traj_opt = sim->add_option("--trajectories", trajectories, "Override the trajectory count");
  sim->add_option("--bootstrap", sa.bootstrap, "Bootstrap resamples (0 = off)");
  sim->add_option("--bins", sa.bins, "Bins for the survival-curve fit");

  FitArgs fa;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit", "Exponential lifetime fit of a dark-time CSV");
  fit->add_option("darks", fa.darks, "CSV with a dark_time_s column")->required();
  fit->add_option("--method", fa.method, "mle | binned | both");
  fit->add_option("--bootstrap", fa.bootstrap, "Bootstrap resamples (0 = off)");
  fit->add_option("--bins", fa.bins, "Bins for the binned fit");
  fit->add_option("--seed", fa.seed, "Bootstrap seed");
  auto* fit_out_opt = fit->add_option("--out", fit_out, "Also write the JSON here");

  CalibrateArgs ca;
  double tau_dark = 0.0;
  std::string cal_out;
  auto* cal = app.add_subcommand("calibrate", "Effective area from laser deshelve times");
  cal->add_option("points", ca.points, "CSV with power_W,tau_s")->required();
  cal->add_option("scenario", ca.scenario, "Scenario JSON with a calibration block")->required();
  auto* tau_opt = cal->add_option("--tau-dark", tau_dark, "Dark lifetime [s]");
  auto* cal_out_opt = cal->add_option("--out", cal_out, "Also write the JSON here");

  ReproduceArgs ra;
  std::string data_dir;
  auto* rep = app.add_subcommand("reproduce", "Run the acceptance suite against the bundled scenarios");
  rep->add_option("--out", ra.out, "Output directory");
  auto* data_opt = rep->add_option("--data-dir", data_dir, "Bundle directory (default: $COOLHEAT_DATA_DIR)");
  rep->add_option("--seed", ra.seed, "Offset for every Monte Carlo seed");
  rep->add_option("--threads", ra.threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (*planck) return cmd_planck(pa, std::cout, std::cerr);
  if (*sim) {
    if (*seed_opt) sa.seed = seed;
    if (*traj_opt) sa.trajectories = trajectories;
    return cmd_simulate(sa, std::cout, std::cerr);
  }
  if (*fit) {
    if (*fit_out_opt) fa.out = fit_out;
    return cmd_fit(fa, std::cout, std::cerr);
  }
  if (*cal) {
    if (*tau_opt) ca.tau_dark_s = tau_dark;
    if (*cal_out_opt) ca.out = cal_out;
    return cmd_calibrate(ca, std::cout, std::cerr);
  }
  if (*data_opt) ra.data_dir = data_dir;
  return cmd_reproduce(ra, std::cout, std::cerr);
}
