#include "qmfd/hartree.hpp"

#include <cmath>

#include "qmfd/error.hpp"
#include "qmfd/parallel.hpp"
#include "qmfd/stats.hpp"

namespace qmfd {

int EvolutionProblem::steps() const { return static_cast<int>(std::lround(t_final / dt)); }

void EvolutionProblem::validate() const {
  if (!initial.grid) throw ValidationError("initial field missing");
  if (!(dt > 0) || !(t_final > 0) || dt > t_final) throw ValidationError("need 0 < dt <= t_final");
  double m = l2_norm(initial);
  if (std::abs(m - 1.0) > 1e-10) throw ValidationError("initial field must have unit L2 norm");
  if (kind == EquationKind::QuinticHartree) {
    V.validate();
    if (V.form != PotentialForm::PairProductSum)
      throw UnsupportedError("Hartree evolution supports only the pair_product_sum form");
  } else if (!(b0 >= 0)) {
    throw ValidationError("NLS coupling b0 must be >= 0");
  }
}

StrangStepper::StrangStepper(const EvolutionProblem& p, double dt) : p_(p), grid_(p.initial.grid), dt_(dt) {
  const auto& k2 = grid_->k2_table();
  half_phase_.resize(k2.size());
  full_phase_.resize(k2.size());
  for (Eigen::Index i = 0; i < k2.size(); ++i) {
    half_phase_[i] = std::exp(cplx(0.0, -0.5 * dt * k2[i]));
    full_phase_[i] = std::exp(cplx(0.0, -dt * k2[i]));
  }
  if (p.kind == EquationKind::QuinticHartree) w_ = std::make_unique<PairKernelOnGrid>(p.V, grid_);
}

RVec StrangStepper::potential(const CVec& u) const {
  if (w_) return hartree_potential(*w_, u);
  RVec a2 = u.cwiseAbs2();
  return p_.b0 * a2.cwiseAbs2();
}

void StrangStepper::kinetic(CVec& u, bool half) const {
  CVec c(u.size());
  grid_->forward(u.data(), c.data());
  c = c.cwiseProduct(half ? half_phase_ : full_phase_);
  grid_->inverse(c.data(), u.data());
}

void StrangStepper::nonlinear(CVec& u) const {
  RVec v = potential(u);
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] *= std::exp(cplx(0.0, -dt_ * v[i]));
}

void StrangStepper::step(CVec& u) const {
  kinetic(u, true);
  nonlinear(u);
  kinetic(u, true);
}

double StrangStepper::energy(const CVec& u) const {
  Field f(grid_, u);
  double kin = gradient_energy(f);
  RVec v = potential(u);
  // For NLS v = b0 |u|^4 so int v |u|^2 / 3 = (b0/3) int |u|^6.
  double pot = grid_->cell_volume() * v.cwiseProduct(u.cwiseAbs2()).sum() / 3.0;
  return kin + pot;
}

Field step_strang(const Field& u, const EvolutionProblem& problem, double dt) {
  StrangStepper s(problem, dt);
  CVec v = u.values;
  s.step(v);
  return Field(u.grid, v);
}

double energy(const Field& u, const EvolutionProblem& problem) {
  StrangStepper s(problem, problem.dt);
  return s.energy(u.values);
}

MonitorRecord monitor(const Field& u, const EvolutionProblem& problem, double t) {
  StrangStepper s(problem, problem.dt);
  MonitorRecord r;
  r.t = t;
  r.mass = l2_norm(u);
  r.energy = s.energy(u.values);
  r.h1 = sobolev_norm(u, 1);
  r.h2 = sobolev_norm(u, 2);
  r.h4 = sobolev_norm(u, 4);
  r.linf = linf_norm(u);
  r.min_potential = s.potential(u.values).minCoeff();
  return r;
}

Trajectory evolve(const EvolutionProblem& problem) {
  problem.validate();
  const int n = problem.steps();
  const double dt = problem.t_final / n;
  StrangStepper stepper(problem, dt);
  Trajectory traj;
  CVec u = problem.initial.values;
  const GridPtr& grid = problem.initial.grid;

  auto record = [&](int step) {
    double t = step * dt;
    Field f(grid, u);
    MonitorRecord r;
    r.t = t;
    r.mass = l2_norm(f);
    r.energy = stepper.energy(u);
    r.h1 = sobolev_norm(f, 1);
    r.h2 = sobolev_norm(f, 2);
    r.h4 = sobolev_norm(f, 4);
    r.linf = linf_norm(f);
    r.min_potential = stepper.potential(u).minCoeff();
    traj.times.push_back(t);
    traj.monitors.push_back(r);
    if (!traj.monitors.empty() && r.h4 > 10.0 * traj.monitors.front().h4)
      traj.warnings.push_back("H4 norm exceeded 10x its initial value at t=" + std::to_string(t));
  };
  auto snapshot = [&](int step) {
    traj.snapshot_times.push_back(step * dt);
    traj.snapshots.emplace_back(grid, u);
  };

  const int mstride = std::max(problem.monitor_stride, 1);
  record(0);
  if (problem.snapshot_stride > 0) snapshot(0);
  int done = 0;
  while (done < n) {
    // Adjacent half kinetic steps are fused between monitor points.
    int seg = std::min(mstride - done % mstride, n - done);
    if (problem.snapshot_stride > 0) seg = std::min(seg, problem.snapshot_stride - done % problem.snapshot_stride);
    stepper.kinetic(u, true);
    for (int i = 0; i < seg; ++i) {
      stepper.nonlinear(u);
      stepper.kinetic(u, i + 1 == seg);
    }
    done += seg;
    if (!std::isfinite(u.squaredNorm())) throw BlowUpError("non-finite field during evolution", done * dt);
    if (done % mstride == 0 || done == n) record(done);
    if (problem.snapshot_stride > 0 && done % problem.snapshot_stride == 0 && done != n) snapshot(done);
  }
  if (traj.times.back() != n * dt) record(n);
  snapshot(n);
  return traj;
}

OrderCheck strang_order_check(const EvolutionProblem& problem) {
  OrderCheck out;
  std::vector<Field> ends;
  std::vector<double> drift;
  for (int level = 0; level < 3; ++level) {
    EvolutionProblem p = problem;
    p.dt = problem.dt / std::pow(2.0, level);
    p.monitor_stride = 1 << 30;
    Trajectory tr = evolve(p);
    ends.push_back(tr.final_state());
    drift.push_back(std::abs(tr.monitors.back().energy - tr.monitors.front().energy));
  }
  out.diff_coarse = l2_norm(Field(ends[0].grid, ends[0].values - ends[1].values));
  out.diff_fine = l2_norm(Field(ends[0].grid, ends[1].values - ends[2].values));
  out.ratio = out.diff_fine > 0 ? out.diff_coarse / out.diff_fine : 0.0;
  out.energy_drift_ratio = drift[1] > 0 ? drift[0] / drift[1] : 0.0;
  return out;
}

bool resolution_ok(double N, double beta, int n_per_dim) { return std::pow(N, beta) <= n_per_dim / 4.0 + 1e-12; }

GapTable hartree_nls_gap(const Field& u0, const ThreeBodyPotential& family, const std::vector<double>& N_list,
                         double t, double dt, int jobs) {
  GapTable table;
  EvolutionProblem nls;
  nls.kind = EquationKind::QuinticNLS;
  nls.b0 = coupling_b0(family);
  nls.initial = u0;
  nls.t_final = t;
  nls.dt = dt;
  nls.monitor_stride = 1 << 30;
  table.rows.resize(N_list.size());
  std::vector<Field> hartree_end(N_list.size());
  Field phi;
  // Slot 0 is the NLS reference; slots 1.. are the Hartree runs.
  parallel_for(N_list.size() + 1, jobs, [&](std::size_t i) {
    if (i == 0) {
      phi = evolve(nls).final_state();
      return;
    }
    const double N = N_list[i - 1];
    table.rows[i - 1].N = N;
    table.rows[i - 1].resolved = resolution_ok(N, family.beta, u0.grid->n());
    EvolutionProblem h = nls;
    h.kind = EquationKind::QuinticHartree;
    h.V = family.with_N(N);
    hartree_end[i - 1] = evolve(h).final_state();
  });
  std::vector<double> xs, ys;
  double max_err = 0.0;
  for (std::size_t i = 0; i < N_list.size(); ++i) {
    table.rows[i].error = l2_norm(Field(u0.grid, hartree_end[i].values - phi.values));
    max_err = std::max(max_err, table.rows[i].error);
    if (table.rows[i].resolved) {
      xs.push_back(table.rows[i].N);
      ys.push_back(table.rows[i].error);
    }
  }
  table.trivially_zero = max_err <= 1e-13;
  if (!table.trivially_zero) {
    LineFit fit = loglog_fit(xs, ys);
    table.slope = fit.slope;
    table.slope_defined = fit.defined;
  }
  return table;
}

}  // namespace qmfd
