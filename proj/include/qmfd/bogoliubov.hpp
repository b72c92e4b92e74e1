#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "qmfd/fock.hpp"
#include "qmfd/hartree.hpp"
#include "qmfd/potential.hpp"

namespace qmfd {

// Orthonormal excited one-body modes on a grid. For the constant condensate
// the modes are the normalized plane waves e_k, k != 0. For a general
// condensate they are Q-projected plane waves re-orthonormalized.
struct ModeBasis {
  GridPtr grid;
  std::vector<std::array<int, 3>> wavevectors;  // seed plane waves, one per mode
  CMat vectors;                                 // grid values, one column per mode
  bool constant_condensate = true;

  int size() const { return static_cast<int>(vectors.cols()); }
  // Matrix of -Delta in this basis.
  CMat laplacian() const;
  // Matrix of 1 - Delta in this basis.
  CMat one_minus_laplacian() const;

  // Nonzero wavevectors with |k|^2 <= cutoff, k and -k adjacent.
  static ModeBasis plane_waves(GridPtr grid, double cutoff);
  // Explicit list; must be nonzero and closed under negation.
  static ModeBasis from_wavevectors(GridPtr grid, const std::vector<std::array<int, 3>>& ks);
  // Q-projected plane waves with |k|^2 <= cutoff (k = 0 included) after Gram-Schmidt.
  static ModeBasis projected(const Field& u, double cutoff);
};

// Normalized plane wave (2 pi)^{-3/2} e^{i k x} on the grid.
CVec plane_wave_values(const TorusGrid& grid, const std::array<int, 3>& k);

struct PairKernels {
  CMat h, K1, K2;
};

PairKernels build_kernels(const Field& u, const ThreeBodyPotential& V, const ModeBasis& basis);

// Replaces h by h - mu; with K2 frozen at t = 0 this is the generator in the
// frame rotating with a constant condensate u(t) = e^{-i mu t} u.
PairKernels rotating_frame(PairKernels k, double mu);

struct KernelScalingRow {
  double N = 0;
  double hs_K2tilde = 0;       // ||K2~||^2_HS
  double hs_K2_weighted = 0;   // ||(1-Delta)^{-1/2} K2||^2_HS
  double hs_K2tilde_34 = 0;    // ||(1-Delta)^{-3/4-eps} K2~||^2_HS
  double hs_kz = 0;            // max over sampled z of ||(1-Delta_x)^{-1/2} k_z||^2_HS
  bool resolved = true;
};

struct KernelScalingReport {
  std::vector<KernelScalingRow> rows;
  std::array<double, 4> slopes{};
  std::array<bool, 4> slope_defined{};
  double epsilon = 0.05;
};

KernelScalingReport kernel_scaling_report(const Field& u, const ThreeBodyPotential& family,
                                          const std::vector<double>& N_list, int z_samples = 3, int jobs = 1);

struct BogoliubovState {
  CMat gamma, alpha;
  double time = 0.0;

  static BogoliubovState vacuum(int modes);
};

struct BogoliubovMonitor {
  double t = 0;
  double trace_gamma = 0;
  double kinetic = 0;        // tr[(1 - Delta) gamma]
  double purity_error = 0;   // ||alpha conj(alpha) - gamma(1 + gamma)||_F
  double hermiticity_error = 0;
  double symmetry_error = 0;
};

struct BogoliubovTrajectory {
  std::vector<BogoliubovState> states;
  std::vector<BogoliubovMonitor> monitors;
  double halving_error = 0;  // Frobenius distance between dt and dt/2 endpoints
};

using KernelSource = std::function<PairKernels(double t)>;

struct BogoliubovOptions {
  int record_stride = 1;
  bool check_halving = true;
  double halving_tolerance = 1e-6;
};

BogoliubovMonitor bogoliubov_monitor(const BogoliubovState& s, const CMat& one_minus_laplacian);

BogoliubovTrajectory evolve_density_matrices(const BogoliubovState& state, const KernelSource& kernels,
                                             const CMat& one_minus_laplacian, double dt, double t_final,
                                             const BogoliubovOptions& opt = {});

// Kernels rebuilt from the Hartree snapshots; between snapshots they are
// interpolated linearly in time.
BogoliubovTrajectory evolve_density_matrices(const BogoliubovState& state, const Trajectory& u_traj,
                                             const ThreeBodyPotential& V, const ModeBasis& basis, double dt,
                                             double t_final, const BogoliubovOptions& opt = {});

struct PairingCertificate {
  double min_eigenvalue = 0;      // of dGamma(H) +- pairing + bound_constant, minimized over signs
  double ground_energy = 0;       // unshifted minimum of dGamma(H) + pairing
  double bound_constant = 0;      // 1/2 ||H^{-1/2} K||_HS^2
  double precondition_margin = 0; // min eigenvalue of H - K H^{-1} K*
};

PairingCertificate certify_pairing_bound(const RVec& H_diag, const CMat& K, int P);

}  // namespace qmfd
