#include "qmfd/bogoliubov.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "qmfd/error.hpp"
#include "qmfd/parallel.hpp"
#include "qmfd/stats.hpp"

namespace qmfd {

namespace {

double frob(const CMat& m) { return m.norm(); }

CVec minus_laplacian(const TorusGrid& grid, const CVec& v) {
  CVec c(v.size()), out(v.size());
  grid.forward(v.data(), c.data());
  c = c.cwiseProduct(grid.k2_table().cast<cplx>());
  grid.inverse(c.data(), out.data());
  return out;
}

void check_unit(const Field& u) {
  if (!u.grid) throw ValidationError("condensate field missing");
  if (std::abs(l2_norm(u) - 1.0) > 1e-10) throw ValidationError("condensate must have unit L2 norm");
}

// Gram matrix-style compression <e_i, X_j> with grid quadrature.
CMat compress(const ModeBasis& b, const CMat& X) { return b.grid->cell_volume() * (b.vectors.adjoint() * X); }

}  // namespace

// ---------------------------------------------------------------- ModeBasis

CVec plane_wave_values(const TorusGrid& grid, const std::array<int, 3>& k) {
  CVec v(static_cast<Eigen::Index>(grid.size()));
  const double a = std::pow(kTwoPi, -1.5);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto x = grid.position(i);
    v[static_cast<Eigen::Index>(i)] = a * std::exp(cplx(0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]));
  }
  return v;
}

CMat ModeBasis::laplacian() const {
  CMat X(vectors.rows(), vectors.cols());
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) X.col(j) = minus_laplacian(*grid, vectors.col(j));
  return compress(*this, X);
}

CMat ModeBasis::one_minus_laplacian() const {
  return CMat::Identity(vectors.cols(), vectors.cols()) + laplacian();
}

ModeBasis ModeBasis::from_wavevectors(GridPtr grid, const std::vector<std::array<int, 3>>& ks) {
  if (!grid) throw ValidationError("grid missing");
  const int half = grid->n() / 2;
  for (const auto& k : ks) {
    if (k == std::array<int, 3>{0, 0, 0}) throw ValidationError("zero mode is the condensate and cannot be excited");
    for (int c : k)
      if (std::abs(c) >= half) throw ValidationError("mode wavevector outside the resolved grid band");
    std::array<int, 3> mk{-k[0], -k[1], -k[2]};
    if (std::find(ks.begin(), ks.end(), mk) == ks.end()) throw ValidationError("mode set must be closed under k -> -k");
  }
  for (std::size_t i = 0; i < ks.size(); ++i)
    for (std::size_t j = i + 1; j < ks.size(); ++j)
      if (ks[i] == ks[j]) throw ValidationError("duplicate mode wavevector");
  ModeBasis b;
  b.grid = grid;
  b.wavevectors = ks;
  b.vectors.resize(static_cast<Eigen::Index>(grid->size()), static_cast<Eigen::Index>(ks.size()));
  for (std::size_t j = 0; j < ks.size(); ++j) b.vectors.col(static_cast<Eigen::Index>(j)) = plane_wave_values(*grid, ks[j]);
  b.constant_condensate = true;
  return b;
}

namespace {

std::vector<std::array<int, 3>> wavevectors_within(int n, double cutoff, bool include_zero) {
  std::vector<std::array<int, 3>> ks;
  const int half = n / 2;
  const int r = static_cast<int>(std::floor(std::sqrt(std::max(cutoff, 0.0))));
  for (int a = -r; a <= r; ++a)
    for (int b = -r; b <= r; ++b)
      for (int c = -r; c <= r; ++c) {
        if (std::abs(a) >= half || std::abs(b) >= half || std::abs(c) >= half) continue;
        const int k2 = a * a + b * b + c * c;
        if (k2 > cutoff + 1e-12) continue;
        if (k2 == 0 && !include_zero) continue;
        ks.push_back({a, b, c});
      }
  // Sort by |k|^2, then by the canonical representative so that k, -k are adjacent.
  auto canon = [](const std::array<int, 3>& k) {
    std::array<int, 3> m{-k[0], -k[1], -k[2]};
    return std::max(k, m);
  };
  std::sort(ks.begin(), ks.end(), [&](const auto& x, const auto& y) {
    const int nx = x[0] * x[0] + x[1] * x[1] + x[2] * x[2], ny = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    if (nx != ny) return nx < ny;
    auto cx = canon(x), cy = canon(y);
    if (cx != cy) return cx > cy;
    return x > y;
  });
  return ks;
}

}  // namespace

ModeBasis ModeBasis::plane_waves(GridPtr grid, double cutoff) {
  if (!grid) throw ValidationError("grid missing");
  auto ks = wavevectors_within(grid->n(), cutoff, false);
  if (ks.empty()) throw ValidationError("mode cutoff admits no nonzero wavevector");
  return from_wavevectors(grid, ks);
}

ModeBasis ModeBasis::projected(const Field& u, double cutoff) {
  check_unit(u);
  const auto& grid = u.grid;
  const double h3 = grid->cell_volume();
  ModeBasis b;
  b.grid = grid;
  b.constant_condensate = false;
  std::vector<CVec> cols;
  for (const auto& k : wavevectors_within(grid->n(), cutoff, true)) {
    CVec v = plane_wave_values(*grid, k);
    // Two passes of modified Gram-Schmidt against u and the accepted modes.
    for (int pass = 0; pass < 2; ++pass) {
      v -= (h3 * u.values.dot(v)) * u.values;
      for (const auto& c : cols) v -= (h3 * c.dot(v)) * c;
    }
    const double nv = std::sqrt(h3) * v.norm();
    if (nv < 1e-8) continue;
    cols.push_back(v / nv);
    b.wavevectors.push_back(k);
  }
  if (cols.empty()) throw ValidationError("projected mode basis is empty");
  b.vectors.resize(static_cast<Eigen::Index>(grid->size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) b.vectors.col(static_cast<Eigen::Index>(j)) = cols[j];
  return b;
}

// ---------------------------------------------------------------- kernels

PairKernels build_kernels(const Field& u, const ThreeBodyPotential& V, const ModeBasis& basis) {
  check_unit(u);
  if (!basis.grid || basis.grid->n() != u.grid->n()) throw ValidationError("mode basis lives on a different grid");
  if (basis.vectors.rows() != u.values.size()) throw ValidationError("mode basis size does not match the grid");
  const double h3 = u.grid->cell_volume();
  const CVec overlap = h3 * (basis.vectors.adjoint() * u.values);
  if (overlap.cwiseAbs().maxCoeff() > 1e-8) throw ValidationError("mode basis is not orthogonal to the condensate");
  V.validate();
  PairKernelOnGrid pk(V, u.grid);
  const RVec F = hartree_potential(pk, u.values);
  const RVec f = u.values.cwiseAbs2();
  TwoPointFunction M(pk, f);
  const auto S = u.values.size();
  const auto m = basis.vectors.cols();
  CMat H(S, m), X1(S, m), X2(S, m);
  const CVec uc = u.values.conjugate();
  for (Eigen::Index j = 0; j < m; ++j) {
    const CVec e = basis.vectors.col(j);
    H.col(j) = minus_laplacian(*u.grid, e) + F.cast<cplx>().cwiseProduct(e);
    X1.col(j) = u.values.cwiseProduct(M.apply(uc.cwiseProduct(e)));
    X2.col(j) = u.values.cwiseProduct(M.apply(u.values.cwiseProduct(e.conjugate())));
  }
  PairKernels k;
  k.h = compress(basis, H);
  k.K1 = compress(basis, X1);
  // K2_ij = int conj(e_i) u M(u conj(e_j)).
  k.K2 = h3 * (basis.vectors.adjoint() * X2);
  return k;
}

PairKernels rotating_frame(PairKernels k, double mu) {
  k.h -= mu * CMat::Identity(k.h.rows(), k.h.cols());
  return k;
}

// ---------------------------------------------------------------- scaling report

KernelScalingReport kernel_scaling_report(const Field& u, const ThreeBodyPotential& family,
                                          const std::vector<double>& N_list, int z_samples, int jobs) {
  check_unit(u);
  const auto& grid = u.grid;
  if (grid->n() > TwoPointFunction::kDenseLimit) throw ValidationError("kernel scaling report is limited to 16^3 grids");
  if (z_samples < 1) throw ValidationError("need at least one sampled z");
  family.validate();
  KernelScalingReport rep;
  const double eps = rep.epsilon;
  rep.rows.resize(N_list.size());
  const auto S = static_cast<Eigen::Index>(grid->size());
  const double h3 = grid->cell_volume();
  const int n = grid->n();
  std::vector<std::array<int, 3>> sites(static_cast<std::size_t>(S));
  for (Eigen::Index i = 0; i < S; ++i) sites[static_cast<std::size_t>(i)] = grid->site(static_cast<std::size_t>(i));

  parallel_for(N_list.size(), jobs, [&](std::size_t r) {
    const double N = N_list[r];
    ThreeBodyPotential V = family.with_N(N);
    PairKernelOnGrid pk(V, grid);
    TwoPointFunction M(pk, u.values.cwiseAbs2());
    KernelScalingRow row;
    row.N = N;
    row.resolved = resolution_ok(N, family.beta, n);
    CVec delta = CVec::Zero(S);
    CVec Au = CVec::Zero(S);
    double hsA = 0;
    for (Eigen::Index y = 0; y < S; ++y) {
      delta.setZero();
      delta[y] = 1.0 / h3;
      Field col(grid, M.apply(delta).cwiseProduct(u.values) * u.values[y]);
      row.hs_K2tilde += h3 * h3 * col.values.squaredNorm();
      const double s34 = sobolev_norm(col, -0.75 - eps);
      row.hs_K2tilde_34 += h3 * s34 * s34;
      // Q_x then (1 - Delta_x)^{-1/2}; the right Q is handled through ||A Q||^2 = ||A||^2 - ||A u||^2.
      Field q(grid, col.values - (h3 * u.values.dot(col.values)) * u.values);
      Field a = apply_multiplier(q, {-0.5});
      hsA += h3 * h3 * a.values.squaredNorm();
      Au += h3 * u.values[y] * a.values;
    }
    row.hs_K2_weighted = hsA - h3 * Au.squaredNorm();
    const RVec w = pk.wN().values.real();
    auto wd = [&](std::size_t a, std::size_t b) {
      const auto& sa = sites[a];
      const auto& sb = sites[b];
      return w[static_cast<Eigen::Index>(grid->index_of_site(sa[0] - sb[0], sa[1] - sb[1], sa[2] - sb[2]))];
    };
    for (int zi = 0; zi < z_samples; ++zi) {
      const int c = (zi * n) / z_samples;
      const std::size_t z = grid->index_of_site(c, (2 * c) % n, (3 * c) % n);
      double acc = 0;
      for (Eigen::Index y = 0; y < S; ++y) {
        Field col(grid);
        const double wyz = wd(static_cast<std::size_t>(y), z);
        for (Eigen::Index x = 0; x < S; ++x) {
          const double wxy = wd(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
          const double wxz = wd(static_cast<std::size_t>(x), z);
          col.values[x] = u.values[x] * u.values[y] * ((wxy * wxz + wxy * wyz + wxz * wyz) / 3.0);
        }
        const double s = sobolev_norm(col, -0.5);
        acc += h3 * s * s;
      }
      row.hs_kz = std::max(row.hs_kz, acc);
    }
    rep.rows[r] = row;
  });

  for (int c = 0; c < 4; ++c) {
    std::vector<double> xs, ys;
    for (const auto& row : rep.rows) {
      if (!row.resolved) continue;
      const double v[4] = {row.hs_K2tilde, row.hs_K2_weighted, row.hs_K2tilde_34, row.hs_kz};
      xs.push_back(row.N);
      ys.push_back(v[c]);
    }
    LineFit fit = loglog_fit(xs, ys);
    rep.slopes[static_cast<std::size_t>(c)] = fit.slope;
    rep.slope_defined[static_cast<std::size_t>(c)] = fit.defined;
  }
  return rep;
}

// ---------------------------------------------------------------- (gamma, alpha) dynamics

BogoliubovState BogoliubovState::vacuum(int modes) {
  BogoliubovState s;
  s.gamma = CMat::Zero(modes, modes);
  s.alpha = CMat::Zero(modes, modes);
  return s;
}

BogoliubovMonitor bogoliubov_monitor(const BogoliubovState& s, const CMat& one_minus_laplacian) {
  BogoliubovMonitor m;
  m.t = s.time;
  m.trace_gamma = s.gamma.trace().real();
  m.kinetic = (one_minus_laplacian * s.gamma).trace().real();
  const CMat I = CMat::Identity(s.gamma.rows(), s.gamma.cols());
  m.purity_error = frob(s.alpha * s.alpha.conjugate() - s.gamma * (I + s.gamma));
  m.hermiticity_error = frob(s.gamma - s.gamma.adjoint());
  m.symmetry_error = frob(s.alpha - s.alpha.transpose());
  return m;
}

namespace {

struct Deriv {
  CMat g, a;
};

Deriv rhs(const CMat& g, const CMat& a, const PairKernels& k) {
  const cplx mi(0, -1);
  const CMat A = k.h + k.K1;
  const CMat& K = k.K2;
  Deriv d;
  d.g = mi * (A * g - g * A + K * a.conjugate() - a * K.conjugate());
  d.a = mi * (A * a + a * A.transpose() + K + K * g.transpose() + g * K);
  return d;
}

BogoliubovTrajectory integrate(const BogoliubovState& s0, const KernelSource& src, const CMat& oml, double dt,
                               double t_final, int stride) {
  const int steps = static_cast<int>(std::lround(t_final / dt));
  const double h = t_final / steps;
  BogoliubovTrajectory tr;
  BogoliubovState s = s0;
  auto record = [&]() {
    tr.states.push_back(s);
    tr.monitors.push_back(bogoliubov_monitor(s, oml));
  };
  record();
  for (int i = 0; i < steps; ++i) {
    const double t = s0.time + i * h;
    const PairKernels k0 = src(t), kh = src(t + 0.5 * h), k1 = src(t + h);
    Deriv d1 = rhs(s.gamma, s.alpha, k0);
    Deriv d2 = rhs(s.gamma + 0.5 * h * d1.g, s.alpha + 0.5 * h * d1.a, kh);
    Deriv d3 = rhs(s.gamma + 0.5 * h * d2.g, s.alpha + 0.5 * h * d2.a, kh);
    Deriv d4 = rhs(s.gamma + h * d3.g, s.alpha + h * d3.a, k1);
    s.gamma += (h / 6.0) * (d1.g + 2.0 * d2.g + 2.0 * d3.g + d4.g);
    s.alpha += (h / 6.0) * (d1.a + 2.0 * d2.a + 2.0 * d3.a + d4.a);
    s.time = s0.time + (i + 1) * h;
    if (!std::isfinite(s.gamma.squaredNorm() + s.alpha.squaredNorm()))
      throw BlowUpError("non-finite density matrices", s.time);
    if ((i + 1) % stride == 0 || i + 1 == steps) record();
  }
  return tr;
}

}  // namespace

BogoliubovTrajectory evolve_density_matrices(const BogoliubovState& state, const KernelSource& kernels,
                                             const CMat& one_minus_laplacian, double dt, double t_final,
                                             const BogoliubovOptions& opt) {
  const auto m = state.gamma.rows();
  if (state.gamma.cols() != m || state.alpha.rows() != m || state.alpha.cols() != m)
    throw ValidationError("gamma and alpha must be square matrices of equal size");
  if (frob(state.gamma - state.gamma.adjoint()) > 1e-10) throw ValidationError("gamma must be self-adjoint");
  if (frob(state.alpha - state.alpha.transpose()) > 1e-10) throw ValidationError("alpha must be symmetric");
  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<CMat> es(state.gamma, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) throw ValidationError("gamma must be positive semidefinite");
  }
  if (!(dt > 0) || !(t_final > 0) || dt > t_final) throw ValidationError("need 0 < dt <= t_final");
  BogoliubovTrajectory tr =
      integrate(state, kernels, one_minus_laplacian, dt, t_final, std::max(opt.record_stride, 1));
  if (opt.check_halving) {
    BogoliubovTrajectory fine = integrate(state, kernels, one_minus_laplacian, dt / 2, t_final, 1 << 30);
    const auto& a = tr.states.back();
    const auto& b = fine.states.back();
    tr.halving_error = std::hypot(frob(a.gamma - b.gamma), frob(a.alpha - b.alpha));
    if (tr.halving_error > opt.halving_tolerance)
      throw InstabilityError("step-halving disagreement " + std::to_string(tr.halving_error) + " exceeds tolerance");
  }
  return tr;
}

BogoliubovTrajectory evolve_density_matrices(const BogoliubovState& state, const Trajectory& u_traj,
                                             const ThreeBodyPotential& V, const ModeBasis& basis, double dt,
                                             double t_final, const BogoliubovOptions& opt) {
  if (u_traj.snapshots.empty()) throw ValidationError("condensate trajectory has no snapshots");
  const auto& times = u_traj.snapshot_times;
  if (times.front() > state.time + 1e-12 || times.back() < state.time + t_final - 1e-12)
    throw ValidationError("condensate snapshots do not cover the requested interval");
  std::vector<PairKernels> ks;
  ks.reserve(u_traj.snapshots.size());
  for (const auto& u : u_traj.snapshots) ks.push_back(build_kernels(u, V, basis));
  KernelSource src = [&](double t) {
    if (ks.size() == 1) return ks.front();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t j = static_cast<std::size_t>(std::distance(times.begin(), it));
    j = std::clamp<std::size_t>(j, 1, times.size() - 1);
    const double t0 = times[j - 1], t1 = times[j];
    const double s = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    PairKernels k;
    k.h = (1 - s) * ks[j - 1].h + s * ks[j].h;
    k.K1 = (1 - s) * ks[j - 1].K1 + s * ks[j].K1;
    k.K2 = (1 - s) * ks[j - 1].K2 + s * ks[j].K2;
    return k;
  };
  return evolve_density_matrices(state, src, basis.one_minus_laplacian(), dt, t_final, opt);
}

// ---------------------------------------------------------------- pairing certificate

PairingCertificate certify_pairing_bound(const RVec& H_diag, const CMat& K, int P) {
  const auto d = H_diag.size();
  if (d < 1 || d > 6) throw ValidationError("pairing certification supports 1 to 6 modes");
  if (P < 1 || P > 8) throw ValidationError("pairing certification supports cutoffs 1 to 8");
  if (K.rows() != d || K.cols() != d) throw ValidationError("pairing kernel has wrong size");
  if (H_diag.minCoeff() <= 0) throw ValidationError("H must be positive");
  if (frob(K - K.transpose()) > 1e-12 * (1 + frob(K))) throw ValidationError("pairing kernel must be symmetric");

  PairingCertificate out;
  const CVec hinv = H_diag.cwiseInverse().cast<cplx>();
  const CMat C = CMat(H_diag.cast<cplx>().asDiagonal()) - K * hinv.asDiagonal() * K.adjoint();
  Eigen::SelfAdjointEigenSolver<CMat> pes(C, Eigen::EigenvaluesOnly);
  out.precondition_margin = pes.eigenvalues().minCoeff();
  if (out.precondition_margin < -1e-12)
    throw PreconditionError("pairing precondition K H^{-1} K* <= H fails (margin " +
                            std::to_string(out.precondition_margin) + ")");
  for (Eigen::Index i = 0; i < d; ++i) out.bound_constant += 0.5 * K.row(i).squaredNorm() / H_diag[i];

  auto basis = std::make_shared<const FockBasis>(static_cast<int>(d), P);
  FockOperator dG = dGamma(basis, CMat(H_diag.cast<cplx>().asDiagonal()));
  CMat flat(d * d, 1);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) flat(i * d + j, 0) = K(i, j);
  Term pair{"pairing", dense_kernel(2, 0, static_cast<int>(d), flat), nullptr, 0.5};
  FockOperator create = assemble_sparse(basis, {pair});
  FockOperator pairing = create + create.adjoint();
  out.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (double sign : {1.0, -1.0}) {
    CMat D = (dG + pairing.scaled(sign)).dense_block(P);
    Eigen::SelfAdjointEigenSolver<CMat> es(D, Eigen::EigenvaluesOnly);
    const double e = es.eigenvalues().minCoeff();
    if (sign > 0) out.ground_energy = e;
    out.min_eigenvalue = std::min(out.min_eigenvalue, e + out.bound_constant);
  }
  return out;
}

}  // namespace qmfd
