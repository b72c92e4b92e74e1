#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qmfd/potential.hpp"

namespace qmfd {

enum class EquationKind { QuinticNLS, QuinticHartree };

struct EvolutionProblem {
  EquationKind kind = EquationKind::QuinticHartree;
  double b0 = 0.0;        // NLS coupling
  ThreeBodyPotential V;   // Hartree potential
  Field initial;
  double t_final = 1.0;
  double dt = 1e-3;
  int monitor_stride = 10;   // monitors every k steps (and at the end)
  int snapshot_stride = 0;   // 0 keeps only the final snapshot

  int steps() const;
  void validate() const;
};

struct MonitorRecord {
  double t = 0, mass = 0, energy = 0, h1 = 0, h2 = 0, h4 = 0, linf = 0;
  double min_potential = 0;  // min_x of the nonlinear potential
};

struct Trajectory {
  std::vector<double> times;
  std::vector<MonitorRecord> monitors;
  std::vector<double> snapshot_times;
  std::vector<Field> snapshots;
  std::vector<std::string> warnings;
  const Field& final_state() const { return snapshots.back(); }
};

// Precomputed propagator pieces for one problem on one grid.
class StrangStepper {
 public:
  StrangStepper(const EvolutionProblem& p, double dt);
  // Nonlinear potential V(x): b0 |u|^4 for NLS, F_u for Hartree.
  RVec potential(const CVec& u) const;
  void kinetic(CVec& u, bool half) const;
  void nonlinear(CVec& u) const;
  void step(CVec& u) const;
  double energy(const CVec& u) const;
  double dt() const { return dt_; }

 private:
  const EvolutionProblem& p_;
  GridPtr grid_;
  double dt_;
  CVec half_phase_, full_phase_;
  std::unique_ptr<PairKernelOnGrid> w_;
};

Field step_strang(const Field& u, const EvolutionProblem& problem, double dt);
Trajectory evolve(const EvolutionProblem& problem);
double energy(const Field& u, const EvolutionProblem& problem);
MonitorRecord monitor(const Field& u, const EvolutionProblem& problem, double t);

// ||u_dt - u_{dt/2}|| / ||u_{dt/2} - u_{dt/4}|| at t_final.
struct OrderCheck {
  double ratio = 0;
  double energy_drift_ratio = 0;
  double diff_coarse = 0, diff_fine = 0;
};
OrderCheck strang_order_check(const EvolutionProblem& problem);

struct GapRow {
  double N = 0;
  double error = 0;
  bool resolved = true;
};
struct GapTable {
  std::vector<GapRow> rows;
  double slope = 0;
  bool slope_defined = false;
  bool trivially_zero = false;
};
// Per-N L2 distance between the Hartree solution with V_N and the NLS
// solution with b0 of the same family, at time t.
GapTable hartree_nls_gap(const Field& u0, const ThreeBodyPotential& family, const std::vector<double>& N_list,
                         double t, double dt, int jobs = 1);

bool resolution_ok(double N, double beta, int n_per_dim);

}  // namespace qmfd
