#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace qmfd {

struct PotentialConfig {
  double amplitude = 40.0;
  double radius = 2.0;
  double beta = 0.15;
  std::string form = "pair_product_sum";
  bool mass_correction = true;
};

struct FockConfig {
  int M_modes = 4;              // excited modes taken from the chosen mode list
  std::string modes = "axial";  // "axial" or "shell"
  int P = 6;                    // Fock particle cutoff
  int m = 3;                    // certified sector bound, or truncation level for "truncated"
  std::string eta_policy = "fixed";  // "fixed" uses eta, "threshold" uses the N-dependent threshold
  double eta = 1.0;
  double C_cal = 1.0;
  double k2_cutoff = 2.0;       // |k|^2 shell of the plane-wave modes in the (gamma, alpha) experiment
};

struct LatticeConfig {
  int sites_per_dim = 4;
  int particles = 3;
  int random_states = 50;
};

struct PairingConfig {
  double h = 2.0;  // single-mode one-body energy
  double k = 1.0;  // single-mode pairing amplitude
  int instances = 20;
  int instance_modes = 3;
};

struct ExperimentConfig {
  std::string experiment;
  int n_per_dim = 32;
  PotentialConfig potential;
  std::vector<double> N_list{64};
  double dt = 1e-3;
  double t_final = 1.0;
  FockConfig fock;
  LatticeConfig lattice;
  PairingConfig pairing;
  std::uint64_t seed = 1;
  std::string output = "out";
  int jobs = 1;
};

const std::vector<std::string>& experiment_names();

// Defaults tuned for each registry entry. Unknown names throw ValidationError.
ExperimentConfig default_config(const std::string& experiment);

// Overlays the keys present in j; unknown keys and wrong types throw
// ValidationError naming the offending field.
void apply_json(ExperimentConfig& cfg, const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

struct ValidationIssue {
  std::string field;
  std::string message;
};

// Every check that can be made before computing anything.
std::vector<ValidationIssue> validate(const ExperimentConfig& cfg);
nlohmann::json validation_report(const std::vector<ValidationIssue>& issues);

}  // namespace qmfd
