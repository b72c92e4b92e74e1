#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "qmfd/error.hpp"
#include "qmfd/experiments.hpp"
#include "qmfd/io.hpp"

namespace qmfd {

using nlohmann::json;

namespace {

// Flags that overlay one config field each, keyed by JSON pointer.
struct Overrides {
  std::map<std::string, double> reals;
  std::map<std::string, int> ints;
  std::map<std::string, std::string> strings;
  std::vector<double> N_list;
  bool mass_correction = true;
};

int invalid(const std::vector<ValidationIssue>& issues) {
  std::cout << validation_report(issues).dump(2) << std::endl;
  return 2;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Mean-field dynamics experiments"};
  std::string experiment, config_path, out;
  int jobs = 1;
  std::uint64_t seed = 1;
  bool print_config = false, list = false;
  auto* o_exp = app.add_option("--experiment", experiment, "experiment name");
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* o_out = app.add_option("--out", out, "output directory");
  auto* o_jobs = app.add_option("--jobs", jobs, "worker thread cap");
  auto* o_seed = app.add_option("--seed", seed, "random seed");
  app.add_flag("--print-config", print_config, "print the resolved config and exit");
  app.add_flag("--list", list, "list experiments and exit");

  Overrides ov;
  std::vector<std::pair<CLI::Option*, std::string>> real_opts, int_opts, string_opts;
  auto real = [&](const std::string& flag, const std::string& ptr, const std::string& help) {
    real_opts.emplace_back(app.add_option(flag, ov.reals[ptr], help), ptr);
  };
  auto integer = [&](const std::string& flag, const std::string& ptr, const std::string& help) {
    int_opts.emplace_back(app.add_option(flag, ov.ints[ptr], help), ptr);
  };
  auto text = [&](const std::string& flag, const std::string& ptr, const std::string& help) {
    string_opts.emplace_back(app.add_option(flag, ov.strings[ptr], help), ptr);
  };
  integer("--n-per-dim", "/grid/n_per_dim", "grid points per dimension");
  real("--amplitude", "/potential/amplitude", "pair profile amplitude A");
  real("--R", "/potential/R", "pair profile support radius");
  real("--beta", "/potential/beta", "scaling exponent");
  text("--form", "/potential/form", "pair_product_sum or triple_product");
  auto* o_mass = app.add_option("--mass-correction", ov.mass_correction, "rescale w_N to the continuum mass");
  auto* o_N = app.add_option("--N-list", ov.N_list, "N sweep, comma separated")->delimiter(',');
  real("--dt", "/time/dt", "time step");
  real("--t-final", "/time/t_final", "final time");
  integer("--M-modes", "/fock/M_modes", "number of excited modes");
  text("--modes", "/fock/modes", "axial or shell");
  integer("--P", "/fock/P", "Fock particle cutoff");
  integer("--m", "/fock/m", "sector bound or truncation level");
  text("--eta-policy", "/fock/eta_policy", "fixed or threshold");
  real("--eta", "/fock/eta", "kinetic weight eta");
  real("--C-cal", "/fock/C_cal", "calibration constant");
  real("--k2-cutoff", "/fock/k2_cutoff", "mode shell for the density-matrix experiment");
  integer("--sites-per-dim", "/lattice/sites_per_dim", "lattice sites per dimension");
  integer("--particles", "/lattice/particles", "particle number");
  integer("--random-states", "/lattice/random_states", "random states for the identities");
  real("--pairing-h", "/pairing/h", "single-mode energy");
  real("--pairing-k", "/pairing/k", "single-mode pairing amplitude");
  integer("--pairing-instances", "/pairing/instances", "random instances");
  integer("--pairing-modes", "/pairing/instance_modes", "modes per random instance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return invalid({{"flags", e.what()}});
  }
  if (list) {
    for (const auto& n : experiment_names()) std::cout << n << '\n';
    return 0;
  }

  ExperimentConfig cfg;
  try {
    json file = config_path.empty() ? json::object() : read_json(config_path);
    if (!file.is_object()) throw ValidationError("config: expected an object");
    if (!*o_exp) {
      if (!file.contains("experiment") || !file["experiment"].is_string())
        throw ValidationError("experiment: not given by flag or config file");
      experiment = file["experiment"].get<std::string>();
    }
    cfg = default_config(experiment);
    apply_json(cfg, file);
    json flags = json::object();
    flags["experiment"] = experiment;
    if (*o_out) flags["output"] = out;
    if (*o_jobs) flags["jobs"] = jobs;
    if (*o_seed) flags["seed"] = seed;
    if (*o_mass) flags["potential"]["mass_correction"] = ov.mass_correction;
    if (*o_N) flags["sweep"]["N_list"] = ov.N_list;
    for (auto& [opt, ptr] : real_opts)
      if (*opt) flags[json::json_pointer(ptr)] = ov.reals[ptr];
    for (auto& [opt, ptr] : int_opts)
      if (*opt) flags[json::json_pointer(ptr)] = ov.ints[ptr];
    for (auto& [opt, ptr] : string_opts)
      if (*opt) flags[json::json_pointer(ptr)] = ov.strings[ptr];
    apply_json(cfg, flags);
  } catch (const ValidationError& e) {
    return invalid({{"config", e.what()}});
  }

  if (print_config) {
    std::cout << to_json(cfg).dump(2) << std::endl;
    return 0;
  }
  auto issues = validate(cfg);
  if (!issues.empty()) return invalid(issues);

  ExperimentResult r = run_experiment(cfg);
  if (r.exit_code == 2) {
    std::cout << r.summary.dump(2) << std::endl;
    return 2;
  }
  for (const auto& c : r.criteria)
    std::printf("%s %s value=%s%s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), format_number(c.value).c_str(),
                c.note.empty() ? "" : (" (" + c.note + ")").c_str());
  for (const auto& f : r.failures) std::printf("failed: %s\n", f.c_str());
  std::printf("summary: %s/summary.json (%.1f s)\n", cfg.output.c_str(), r.wall_time);
  return r.exit_code;
}

}  // namespace qmfd
