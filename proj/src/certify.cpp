#include <Eigen/Eigenvalues>
#include <cmath>

#include "qmfd/error.hpp"
#include "qmfd/generator.hpp"
#include "qmfd/krylov.hpp"
#include "qmfd/parallel.hpp"

namespace qmfd {

namespace {

double min_eigenvalue(const CMat& A) {
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (A + A.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

double eta_threshold(int m, double N, double beta, double C_cal) {
  const double a = std::sqrt(m * std::pow(N, 2 * beta - 1));
  const double b = std::sqrt(std::pow(m, 3) * std::pow(N, 5 * beta - 3));
  const double c = m * m * std::pow(N, 4 * beta - 2);
  return C_cal * std::max({a, b, c});
}

ErrorBoundReport certify_error_bounds(const GeneratorBundle& bundle, int m, double eta, double C_cal, int jobs) {
  if (m < 0 || m > bundle.basis->cutoff() - 3) throw ValidationError("sector cutoff m must satisfy m <= P - 3");
  if (!(eta > 0)) throw ValidationError("eta must be positive");
  ErrorBoundReport rep;
  rep.eta_threshold = eta_threshold(m, bundle.N, bundle.beta, C_cal);
  const double unit = m * std::pow(bundle.N, 4 * bundle.beta - 1);
  const CMat kin = bundle.kinetic_op.dense_block(m);
  std::array<CMat, 7> sym;
  for (int j = 0; j < 7; ++j) sym[static_cast<std::size_t>(j)] = bundle.R_plus_adjoint(j).dense_block(m);
  rep.rows.resize(14);
  parallel_for(14, jobs, [&](std::size_t i) {
    const int j = static_cast<int>(i / 2);
    const int sign = i % 2 == 0 ? 1 : -1;
    const double lam = min_eigenvalue(eta * kin - double(sign) * sym[static_cast<std::size_t>(j)]);
    ErrorBoundRow& r = rep.rows[i];
    r.j = j;
    r.sign = sign;
    r.eta = eta;
    r.m = m;
    r.N = bundle.N;
    r.beta = bundle.beta;
    r.min_eig = lam + C_cal * unit;
    r.minimal_c = unit > 0 ? std::max(0.0, -lam) / unit : 0.0;
    r.eta_ok = eta >= rep.eta_threshold;
  });
  rep.R6_min_eig = min_eigenvalue(bundle.R[6].dense_block(m));
  return rep;
}

TruncatedTrajectory evolve_truncated(const GeneratorBundle& bundle, const FockVector& Phi0, int M, double dt,
                                     double t_final, GeneratorChoice which, int record_stride) {
  const FockBasis& basis = *bundle.basis;
  if (M < 0 || M > basis.cutoff()) throw ValidationError("sector cutoff M must lie in [0, P]");
  if (!(dt > 0) || !(t_final >= 0)) throw ValidationError("dt must be positive and t_final nonnegative");
  if (Phi0.basis.get() != bundle.basis.get() && Phi0.basis->dim() != basis.dim())
    throw ValidationError("initial state lives on a different basis");
  const auto dimM = static_cast<Eigen::Index>(basis.sector_end(M));
  const auto dim = static_cast<Eigen::Index>(basis.dim());
  if (Phi0.coeffs.tail(dim - dimM).norm() > 1e-14) throw ValidationError("initial state has weight above the cutoff M");

  FockOperator G = which == GeneratorChoice::Number ? bundle.number_op
                                                    : bundle.rotating(which == GeneratorChoice::Quadratic);
  const double mu = which == GeneratorChoice::Number ? 0.0 : bundle.mu;
  const SpMat Gm = G.matrix.topLeftCorner(dimM, dimM);
  const SpMat out_leak = G.matrix.block(dimM, 0, dim - dimM, dimM);
  const SpMat Nm = bundle.number_op.matrix.topLeftCorner(dimM, dimM);
  const SpMat Km = bundle.kinetic_op.matrix.topLeftCorner(dimM, dimM);
  MatVec op = [&Gm](const CVec& x, CVec& y) { y = Gm * x; };

  TruncatedTrajectory traj;
  const double norm0 = Phi0.coeffs.norm();
  auto record = [&](const CVec& rot, double t) {
    TruncatedSample s;
    s.t = t;
    s.norm = rot.norm();
    s.number = (rot.dot(Nm * rot)).real();
    s.kinetic = (rot.dot(Km * rot)).real();
    s.histogram.assign(static_cast<std::size_t>(M) + 1, 0.0);
    for (int n = 0; n <= M; ++n) {
      const auto b0 = static_cast<Eigen::Index>(basis.sector_begin(n));
      const auto sz = static_cast<Eigen::Index>(basis.sector_size(n));
      s.histogram[static_cast<std::size_t>(n)] = rot.segment(b0, sz).squaredNorm();
    }
    traj.samples.push_back(std::move(s));
    // Back to the lab frame: e^{-i mu t N}.
    CVec lab = CVec::Zero(dim);
    for (Eigen::Index i = 0; i < dimM; ++i)
      lab[i] = std::polar(1.0, -mu * t * basis.sector(static_cast<std::size_t>(i))) * rot[i];
    traj.states.emplace_back(bundle.basis, std::move(lab));
  };

  CVec x = Phi0.coeffs.head(dimM);
  const int steps = static_cast<int>(std::llround(t_final / dt));
  record(x, 0.0);
  double leak_prev = (out_leak * x).norm();
  for (int s = 1; s <= steps; ++s) {
    x = krylov_expm(op, x, dt);
    const double t = s * dt;
    const double leak = (out_leak * x).norm();
    traj.leakage += 0.5 * dt * (leak + leak_prev);
    leak_prev = leak;
    if (std::abs(x.norm() - norm0) > 1e-8 * std::max(1.0, t) * std::max(norm0, 1e-300))
      throw InstabilityError("norm drift above 1e-8 per unit time in truncated evolution");
    if (s % std::max(record_stride, 1) == 0 || s == steps) record(x, t);
  }
  return traj;
}

}  // namespace qmfd
