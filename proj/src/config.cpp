#include "qmfd/config.hpp"

#include <algorithm>
#include <cmath>

#include "qmfd/error.hpp"
#include "qmfd/fewbody.hpp"
#include "qmfd/hartree.hpp"
#include "qmfd/potential.hpp"

namespace qmfd {

using nlohmann::json;

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"conserve", "gap",       "kernels",   "bogoliubov",
                                              "pairing",  "errorbounds", "truncated", "fewbody"};
  return names;
}

ExperimentConfig default_config(const std::string& experiment) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end())
    throw ValidationError("unknown experiment '" + experiment + "'");
  ExperimentConfig c;
  c.experiment = experiment;
  c.output = "out/" + experiment;
  if (experiment == "gap") {
    c.N_list = {16, 64, 256, 1024};
    c.t_final = 0.5;
  } else if (experiment == "kernels") {
    c.n_per_dim = 16;
    c.N_list = {8, 32, 128};
  } else if (experiment == "bogoliubov") {
    c.n_per_dim = 16;
  } else if (experiment == "pairing") {
    c.fock.P = 8;
  } else if (experiment == "errorbounds") {
    c.n_per_dim = 16;
    c.potential.amplitude = 10.0;
    c.potential.beta = 0.1;
    c.N_list = {64, 256, 1024};
  } else if (experiment == "truncated") {
    c.n_per_dim = 16;
    c.potential.amplitude = 5.0;
    c.potential.beta = 0.1;
    c.N_list = {100};
    c.dt = 0.01;
    c.t_final = 0.5;
    c.fock.M_modes = 6;
    c.fock.modes = "shell";
    c.fock.P = 8;
    c.fock.m = 6;
  } else if (experiment == "fewbody") {
    c.potential.amplitude = 10.0;
    c.potential.radius = 2.5;
    c.potential.beta = 0.1;
    c.N_list = {3};
    c.t_final = 0.2;
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  return json{
      {"experiment", c.experiment},
      {"grid", {{"n_per_dim", c.n_per_dim}}},
      {"potential",
       {{"amplitude", c.potential.amplitude},
        {"R", c.potential.radius},
        {"beta", c.potential.beta},
        {"form", c.potential.form},
        {"mass_correction", c.potential.mass_correction}}},
      {"sweep", {{"N_list", c.N_list}}},
      {"time", {{"dt", c.dt}, {"t_final", c.t_final}}},
      {"fock",
       {{"M_modes", c.fock.M_modes},
        {"modes", c.fock.modes},
        {"P", c.fock.P},
        {"m", c.fock.m},
        {"eta_policy", c.fock.eta_policy},
        {"eta", c.fock.eta},
        {"C_cal", c.fock.C_cal},
        {"k2_cutoff", c.fock.k2_cutoff}}},
      {"lattice",
       {{"sites_per_dim", c.lattice.sites_per_dim},
        {"particles", c.lattice.particles},
        {"random_states", c.lattice.random_states}}},
      {"pairing",
       {{"h", c.pairing.h},
        {"k", c.pairing.k},
        {"instances", c.pairing.instances},
        {"instance_modes", c.pairing.instance_modes}}},
      {"seed", c.seed},
      {"output", c.output},
      {"jobs", c.jobs},
  };
}

namespace {

bool same_kind(const json& tmpl, const json& v) {
  if (tmpl.is_number_integer()) return v.is_number_integer();
  if (tmpl.is_number()) return v.is_number();
  if (tmpl.is_string()) return v.is_string();
  if (tmpl.is_boolean()) return v.is_boolean();
  if (tmpl.is_array())
    return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); });
  return false;
}

// Overlays src onto dst, using dst as the schema.
void overlay(json& dst, const json& src, const std::string& prefix) {
  if (!src.is_object()) throw ValidationError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string field = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!dst.contains(it.key())) throw ValidationError(field + ": unknown field");
    json& slot = dst[it.key()];
    if (slot.is_object()) {
      overlay(slot, it.value(), field);
    } else {
      if (!same_kind(slot, it.value())) throw ValidationError(field + ": wrong type");
      if (slot.is_number_unsigned() && it.value().is_number_integer() && it.value().get<long long>() < 0)
        throw ValidationError(field + ": must be non-negative");
      slot = it.value();
    }
  }
}

}  // namespace

void apply_json(ExperimentConfig& c, const json& j) {
  json merged = to_json(c);
  overlay(merged, j, "");
  c.experiment = merged["experiment"].get<std::string>();
  c.n_per_dim = merged["grid"]["n_per_dim"].get<int>();
  const json& p = merged["potential"];
  c.potential.amplitude = p["amplitude"].get<double>();
  c.potential.radius = p["R"].get<double>();
  c.potential.beta = p["beta"].get<double>();
  c.potential.form = p["form"].get<std::string>();
  c.potential.mass_correction = p["mass_correction"].get<bool>();
  c.N_list = merged["sweep"]["N_list"].get<std::vector<double>>();
  c.dt = merged["time"]["dt"].get<double>();
  c.t_final = merged["time"]["t_final"].get<double>();
  const json& f = merged["fock"];
  c.fock.M_modes = f["M_modes"].get<int>();
  c.fock.modes = f["modes"].get<std::string>();
  c.fock.P = f["P"].get<int>();
  c.fock.m = f["m"].get<int>();
  c.fock.eta_policy = f["eta_policy"].get<std::string>();
  c.fock.eta = f["eta"].get<double>();
  c.fock.C_cal = f["C_cal"].get<double>();
  c.fock.k2_cutoff = f["k2_cutoff"].get<double>();
  const json& l = merged["lattice"];
  c.lattice.sites_per_dim = l["sites_per_dim"].get<int>();
  c.lattice.particles = l["particles"].get<int>();
  c.lattice.random_states = l["random_states"].get<int>();
  const json& pr = merged["pairing"];
  c.pairing.h = pr["h"].get<double>();
  c.pairing.k = pr["k"].get<double>();
  c.pairing.instances = pr["instances"].get<int>();
  c.pairing.instance_modes = pr["instance_modes"].get<int>();
  c.seed = merged["seed"].get<std::uint64_t>();
  c.output = merged["output"].get<std::string>();
  c.jobs = merged["jobs"].get<int>();
}

std::vector<ValidationIssue> validate(const ExperimentConfig& c) {
  std::vector<ValidationIssue> out;
  auto fail = [&](const std::string& field, const std::string& msg) { out.push_back({field, msg}); };
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
    fail("experiment", "unknown experiment '" + c.experiment + "'");
    return out;
  }
  const std::string& e = c.experiment;
  const bool uses_grid = e != "pairing" && e != "fewbody";
  const bool uses_potential = e != "pairing";
  const bool uses_time = e == "conserve" || e == "gap" || e == "bogoliubov" || e == "truncated" || e == "fewbody";
  const bool uses_fock = e == "errorbounds" || e == "truncated";

  if (c.output.empty()) fail("output", "output directory must not be empty");
  if (c.jobs < 1 || c.jobs > 256) fail("jobs", "jobs must lie in [1, 256]");

  if (uses_grid) {
    const int n = c.n_per_dim;
    if (n < 8 || n > 128 || (n & (n - 1)) != 0) fail("grid.n_per_dim", "must be a power of two in [8, 128]");
    if (e == "kernels" && n > TwoPointFunction::kDenseLimit)
      fail("grid.n_per_dim", "dense kernels are limited to 16 points per dimension");
  }

  if (uses_potential) {
    ThreeBodyPotential V;
    V.profile = {c.potential.amplitude, c.potential.radius};
    V.beta = c.potential.beta;
    V.mass_correction = c.potential.mass_correction;
    try {
      V.form = potential_form_from_string(c.potential.form);
    } catch (const ValidationError& err) {
      fail("potential.form", err.what());
    }
    try {
      V.validate();
    } catch (const ValidationError& err) {
      fail("potential", err.what());
    }
  }

  if (e != "pairing") {
    if (c.N_list.empty()) fail("sweep.N_list", "must not be empty");
    for (double N : c.N_list)
      if (!(N >= 1.0) || !std::isfinite(N)) fail("sweep.N_list", "every N must be a finite number >= 1");
    if (!std::is_sorted(c.N_list.begin(), c.N_list.end()) ||
        std::adjacent_find(c.N_list.begin(), c.N_list.end()) != c.N_list.end())
      fail("sweep.N_list", "N values must be strictly increasing");
    if ((e == "gap" || e == "kernels" || e == "errorbounds") && c.N_list.size() < 2)
      fail("sweep.N_list", "a scaling fit needs at least two N values");
    if (uses_grid && c.potential.beta > 0)
      for (double N : c.N_list)
        if (N >= 1.0 && !resolution_ok(N, c.potential.beta, c.n_per_dim))
          fail("sweep.N_list", "N = " + std::to_string(N) + " violates the resolution rule N^beta <= n/4");
  }

  if (uses_time) {
    if (!(c.dt > 0) || !std::isfinite(c.dt)) fail("time.dt", "must be positive");
    if (!(c.t_final > 0) || !std::isfinite(c.t_final)) fail("time.t_final", "must be positive");
    if (c.dt > 0 && c.t_final > 0 && c.dt > c.t_final) fail("time.dt", "must not exceed t_final");
    if (c.dt > 0 && c.t_final / c.dt > 1e7) fail("time.dt", "more than 1e7 steps requested");
  }

  if (uses_fock) {
    const auto& f = c.fock;
    if (f.modes != "axial" && f.modes != "shell") fail("fock.modes", "must be 'axial' or 'shell'");
    if (f.M_modes < 2 || f.M_modes > 8 || f.M_modes % 2 != 0)
      fail("fock.M_modes", "must be even and lie in [2, 8] (mode sets are closed under k -> -k)");
    if (f.P < 1 || f.P > 8) fail("fock.P", "must lie in [1, 8]");
    if (e == "errorbounds") {
      if (f.m < 0 || f.m > f.P - 3) fail("fock.m", "sector bound must satisfy 0 <= m <= P - 3");
      if (f.eta_policy != "fixed" && f.eta_policy != "threshold")
        fail("fock.eta_policy", "must be 'fixed' or 'threshold'");
      if (f.eta_policy == "fixed" && !(f.eta > 0)) fail("fock.eta", "must be positive");
      if (!(f.C_cal > 0)) fail("fock.C_cal", "must be positive");
    } else {
      if (f.m < 1 || f.m + 2 > f.P) fail("fock.m", "truncation level must satisfy 1 <= m <= P - 2");
      if (c.N_list.size() != 1) fail("sweep.N_list", "truncated dynamics runs at a single N");
    }
  }

  if (e == "bogoliubov" && !(c.fock.k2_cutoff >= 1.0 && c.fock.k2_cutoff <= 6.0))
    fail("fock.k2_cutoff", "mode shell must lie in [1, 6]");

  if (e == "pairing") {
    const auto& p = c.pairing;
    if (!(p.h > 0)) fail("pairing.h", "must be positive");
    if (!(std::abs(p.k) < p.h)) fail("pairing.k", "the precondition needs |k| < h");
    if (p.instances < 0 || p.instances > 1000) fail("pairing.instances", "must lie in [0, 1000]");
    if (p.instance_modes < 1 || p.instance_modes > 4) fail("pairing.instance_modes", "must lie in [1, 4]");
    if (c.fock.P < 1 || c.fock.P > 8) fail("fock.P", "must lie in [1, 8]");
  }

  if (e == "fewbody") {
    const auto& l = c.lattice;
    if (l.sites_per_dim < 4 || l.sites_per_dim > 6) fail("lattice.sites_per_dim", "must lie in [4, 6]");
    if (l.particles != 3) fail("lattice.particles", "the generator identity is checked for three particles");
    if (c.N_list.size() != 1 || c.N_list[0] != l.particles)
      fail("sweep.N_list", "the scaling N must equal the particle number");
    if (l.random_states < 1 || l.random_states > 1000) fail("lattice.random_states", "must lie in [1, 1000]");
    const double S = std::pow(l.sites_per_dim, 3);
    const double dim = S * (S + 1) * (S + 2) / 6.0;
    if (dim > static_cast<double>(kFewBodyDimLimit)) fail("lattice.sites_per_dim", "three-particle space too large");
  }
  return out;
}

json validation_report(const std::vector<ValidationIssue>& issues) {
  json errs = json::array();
  for (const auto& i : issues) errs.push_back({{"field", i.field}, {"message", i.message}});
  return json{{"schema_version", 1}, {"status", "invalid_config"}, {"errors", errs}};
}

}  // namespace qmfd
