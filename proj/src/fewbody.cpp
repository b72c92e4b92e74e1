#include "qmfd/fewbody.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "qmfd/error.hpp"
#include "qmfd/krylov.hpp"

namespace qmfd {

namespace {

double factorial(int k) {
  double r = 1;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

Term condensate_annihilator(const CVec& u) {
  const auto S = static_cast<int>(u.size());
  return Term{"a(u)", dense_kernel(0, 1, S, CMat(u.adjoint())), nullptr, 1.0};
}

Term condensate_creator(const CVec& u) {
  const auto S = static_cast<int>(u.size());
  return Term{"a*(u)", dense_kernel(1, 0, S, CMat(u)), nullptr, 1.0};
}

CVec apply_one(const FockBasis& basis, const Term& t, const CVec& v) {
  CVec out;
  apply_terms(basis, {t}, v, out);
  return out;
}

void check_condensate(const CVec& u, int S) {
  if (u.size() != S) throw ValidationError("condensate has the wrong number of sites");
  if (std::abs(u.norm() - 1.0) > 1e-12) throw ValidationError("condensate must have unit l2 norm");
}

CVec embed(const FewBodyState& s) {
  CVec full = CVec::Zero(static_cast<Eigen::Index>(s.basis->dim()));
  full.segment(static_cast<Eigen::Index>(s.basis->sector_begin(s.particles)), s.coeffs.size()) = s.coeffs;
  return full;
}

// F(x) = 1/2 sum_{y,z} V(x,y,z) rho(y) rho(z)
RVec lattice_F(const std::vector<double>& V, const RVec& rho) {
  const auto S = static_cast<std::size_t>(rho.size());
  RVec F = RVec::Zero(rho.size());
  for (std::size_t x = 0; x < S; ++x) {
    double acc = 0;
    for (std::size_t y = 0; y < S; ++y) {
      const double* row = &V[(x * S + y) * S];
      double inner = 0;
      for (std::size_t z = 0; z < S; ++z) inner += row[z] * rho[static_cast<Eigen::Index>(z)];
      acc += inner * rho[static_cast<Eigen::Index>(y)];
    }
    F[static_cast<Eigen::Index>(x)] = 0.5 * acc;
  }
  return F;
}

}  // namespace

// ---------------------------------------------------------------- lattice

int Lattice::index(int i, int j, int k) const {
  const int L = sites_per_dim;
  auto w = [L](int a) { return ((a % L) + L) % L; };
  return (w(i) * L + w(j)) * L + w(k);
}

std::array<int, 3> Lattice::site(int idx) const {
  const int L = sites_per_dim;
  return {idx / (L * L), (idx / L) % L, idx % L};
}

Vec3 Lattice::displacement(int a, int b) const {
  const int L = sites_per_dim;
  auto sa = site(a), sb = site(b);
  Vec3 d{};
  for (std::size_t i = 0; i < 3; ++i) {
    int v = ((sa[i] - sb[i]) % L + L) % L;
    if (v >= L / 2 + (L % 2)) v -= L;
    d[i] = v * spacing();
  }
  return d;
}

Lattice make_lattice(int L) {
  if (L < 4 || L > 6) throw ValidationError("sites_per_dim must lie in [4, 6]");
  Lattice lat;
  lat.sites_per_dim = L;
  const int S = lat.sites();
  const double inv_h2 = 1.0 / (lat.spacing() * lat.spacing());
  lat.minus_laplacian = CMat::Zero(S, S);
  for (int i = 0; i < S; ++i) {
    auto s = lat.site(i);
    lat.minus_laplacian(i, i) += 6 * inv_h2;
    for (int ax = 0; ax < 3; ++ax)
      for (int sgn : {-1, 1}) {
        auto t = s;
        t[static_cast<std::size_t>(ax)] += sgn;
        lat.minus_laplacian(lat.index(t[0], t[1], t[2]), i) -= inv_h2;
      }
  }
  return lat;
}

SiteTable lattice_three_body_table(const Lattice& lat, const ThreeBodyPotential& V, double N_scaling) {
  V.validate();
  const auto VN = V.with_N(N_scaling);
  const auto S = static_cast<std::size_t>(lat.sites());
  Eigen::MatrixXd w(S, S);
  for (std::size_t a = 0; a < S; ++a)
    for (std::size_t b = 0; b < S; ++b)
      w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          VN.w_scaled(lat.displacement(static_cast<int>(a), static_cast<int>(b)));
  const double triple_scale = std::pow(VN.scale(), -3.0);
  auto table = std::make_shared<std::vector<double>>(S * S * S);
  for (std::size_t x = 0; x < S; ++x)
    for (std::size_t y = 0; y < S; ++y) {
      const double wxy = w(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
      for (std::size_t z = 0; z < S; ++z) {
        const double wxz = w(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(z));
        const double wyz = w(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(z));
        (*table)[(x * S + y) * S + z] = VN.form == PotentialForm::PairProductSum
                                            ? (wxy * wxz + wxy * wyz + wxz * wyz) / 3.0
                                            : triple_scale * wxy * wxz * wyz;
      }
    }
  return table;
}

// ---------------------------------------------------------------- Hamiltonian

double FewBodyHamiltonian::energy(const FewBodyState& s) const { return s.coeffs.dot(H * s.coeffs).real(); }

FewBodyHamiltonian build_hamiltonian(const Lattice& lat, int particles, const ThreeBodyPotential& V, double N_scaling) {
  if (particles != 2 && particles != 3) throw ValidationError("few-body module supports 2 or 3 particles");
  if (!(N_scaling >= 1)) throw ValidationError("N_scaling must be at least 1");
  const int S = lat.sites();
  if (FockBasis::multiset_count(S, particles) > kFewBodyDimLimit) throw ValidationError("few-body dimension above the guard");
  FewBodyHamiltonian h;
  h.lattice = lat;
  h.particles = particles;
  h.N_scaling = N_scaling;
  h.table = lattice_three_body_table(lat, V, N_scaling);
  h.basis = std::make_shared<const FockBasis>(S, particles);
  const auto b0 = static_cast<Eigen::Index>(h.basis->sector_begin(particles));
  const auto n = static_cast<Eigen::Index>(h.basis->sector_size(particles));
  FockOperator kin = dGamma(h.basis, lat.minus_laplacian);
  h.H = kin.matrix.block(b0, b0, n, n);
  if (particles == 3) {
    const double c = 1.0 / (N_scaling * N_scaling);
    const auto& T = *h.table;
    const auto Su = static_cast<std::size_t>(S);
    SpMat D(n, n);
    std::vector<Eigen::Triplet<cplx>> trip;
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::uint16_t* t = h.basis->tuple(static_cast<std::size_t>(b0 + i));
      const double v = T[(t[0] * Su + t[1]) * Su + t[2]];
      if (v != 0.0) trip.emplace_back(i, i, c * v);
    }
    D.setFromTriplets(trip.begin(), trip.end());
    h.H = SpMat(h.H + D);
  }
  h.H.makeCompressed();
  return h;
}

FewBodyState few_body_state(const FewBodyHamiltonian& H, CVec coeffs) {
  if (static_cast<std::size_t>(coeffs.size()) != H.dim()) throw ValidationError("state has the wrong dimension");
  return FewBodyState{H.basis, H.particles, std::move(coeffs)};
}

FewBodyState product_state(const FewBodyHamiltonian& H, const CVec& orbital) {
  CVec phi = orbital / orbital.norm();
  FockVector v = FockVector::vacuum(H.basis);
  const Term cre = condensate_creator(phi);
  for (int k = 0; k < H.particles; ++k) v.coeffs = apply_one(*H.basis, cre, v.coeffs);
  v.coeffs /= std::sqrt(factorial(H.particles));
  return few_body_state(H, v.coeffs.segment(static_cast<Eigen::Index>(H.basis->sector_begin(H.particles)),
                                            static_cast<Eigen::Index>(H.dim())));
}

// ---------------------------------------------------------------- propagation

CVec propagate_vector(const FewBodyHamiltonian& H, const CVec& v, double t) {
  MatVec op = [&H](const CVec& x, CVec& y) { y = H.H * x; };
  for (int split = 1; split <= 64; split *= 2) {
    try {
      CVec x = v;
      for (int s = 0; s < split; ++s) x = krylov_expm(op, x, t / split);
      return x;
    } catch (const NumericalError&) {
    }
  }
  throw NumericalError("Krylov propagation failed even after step refinement");
}

FewBodyTrajectory propagate(const FewBodyHamiltonian& H, const FewBodyState& psi0, double dt, double t_final,
                            int record_stride) {
  if (!(dt > 0) || !(t_final >= 0)) throw ValidationError("dt must be positive and t_final nonnegative");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ValidationError("initial state must be normalized");
  FewBodyTrajectory tr;
  const double E0 = H.energy(psi0);
  CVec x = psi0.coeffs;
  tr.times.push_back(0);
  tr.states.push_back(psi0);
  const int steps = static_cast<int>(std::llround(t_final / dt));
  for (int s = 1; s <= steps; ++s) {
    x = propagate_vector(H, x, dt);
    FewBodyState st{psi0.basis, psi0.particles, x};
    tr.norm_drift = std::max(tr.norm_drift, std::abs(x.norm() - 1.0));
    tr.energy_drift = std::max(tr.energy_drift, std::abs(H.energy(st) - E0));
    if (s % std::max(record_stride, 1) == 0 || s == steps) {
      tr.times.push_back(s * dt);
      tr.states.push_back(std::move(st));
    }
  }
  return tr;
}

// ---------------------------------------------------------------- densities

CMat one_body_density(const FockBasis& basis, const CVec& v) {
  const int S = basis.modes();
  CMat gamma = CMat::Zero(S, S);
  std::vector<std::uint16_t> t;
  for (int n = 1; n <= basis.cutoff(); ++n) {
    const auto lower = basis.sector_begin(n - 1);
    CMat Y = CMat::Zero(static_cast<Eigen::Index>(basis.sector_size(n - 1)), S);
    bool any = false;
    for (std::size_t i = basis.sector_begin(n); i < basis.sector_end(n); ++i) {
      const cplx c = v[static_cast<Eigen::Index>(i)];
      if (c == cplx(0)) continue;
      any = true;
      const std::uint16_t* src = basis.tuple(i);
      for (int j = 0; j < n; ++j) {
        if (j > 0 && src[j] == src[j - 1]) continue;
        int occ = 0;
        for (int k = 0; k < n; ++k) occ += src[k] == src[j];
        t.assign(src, src + n);
        t.erase(t.begin() + j);
        const auto r = static_cast<Eigen::Index>(basis.index_of_sorted(t.data(), n - 1) - lower);
        Y(r, src[j]) += std::sqrt(static_cast<double>(occ)) * c;
      }
    }
    if (any) gamma += Y.transpose() * Y.conjugate();
  }
  return gamma;
}

CMat reduced_density(const FewBodyState& psi) { return one_body_density(*psi.basis, embed(psi)); }

double condensate_fraction(const FewBodyState& psi) {
  Eigen::SelfAdjointEigenSolver<CMat> es(reduced_density(psi), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1) / psi.particles;
}

// ---------------------------------------------------------------- U_N

CVec project_excitations(const FockBasis& basis, const CVec& v, const CVec& u) {
  // Gamma(Q) = sum_j (-1)^j / j! a*(u)^j a(u)^j on symmetric states.
  const Term ann = condensate_annihilator(u), cre = condensate_creator(u);
  CVec out = v;
  CVec down = v;
  for (int j = 1; j <= basis.cutoff(); ++j) {
    down = apply_one(basis, ann, down);
    if (down.norm() == 0.0) break;
    CVec up = down;
    for (int k = 0; k < j; ++k) up = apply_one(basis, cre, up);
    out += (j % 2 ? -1.0 : 1.0) / factorial(j) * up;
  }
  return out;
}

FockVector un_forward(const FewBodyState& psi, const CVec& u) {
  const FockBasis& basis = *psi.basis;
  check_condensate(u, basis.modes());
  const Term ann = condensate_annihilator(u);
  CVec v = embed(psi), acc = v;
  for (int k = 1; k <= psi.particles; ++k) {
    v = apply_one(basis, ann, v);
    acc += v / std::sqrt(factorial(k));
  }
  return FockVector(psi.basis, project_excitations(basis, acc, u));
}

FewBodyState un_inverse(const FockVector& phi, const CVec& u, int particles) {
  const FockBasis& basis = *phi.basis;
  check_condensate(u, basis.modes());
  if (basis.cutoff() != particles) throw ValidationError("excitation basis cutoff must equal the particle number");
  const Term cre = condensate_creator(u);
  CVec total = CVec::Zero(phi.coeffs.size());
  for (int n = 0; n <= particles; ++n) {
    CVec part = CVec::Zero(phi.coeffs.size());
    const auto b = static_cast<Eigen::Index>(basis.sector_begin(n));
    const auto sz = static_cast<Eigen::Index>(basis.sector_size(n));
    part.segment(b, sz) = phi.coeffs.segment(b, sz);
    for (int k = 0; k < particles - n; ++k) part = apply_one(basis, cre, part);
    total += part / std::sqrt(factorial(particles - n));
  }
  const auto top = static_cast<Eigen::Index>(basis.sector_begin(particles));
  return FewBodyState{phi.basis, particles, total.segment(top, static_cast<Eigen::Index>(basis.sector_size(particles)))};
}

// ---------------------------------------------------------------- lattice Hartree

std::size_t LatticeHartreePath::index_of(double t) const {
  const long k = std::lround((t - t0) / step);
  if (k < 0 || static_cast<std::size_t>(k) >= u.size() || std::abs(t0 + k * step - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw ValidationError("time not on the Hartree path grid");
  return static_cast<std::size_t>(k);
}

LatticeHartreePath lattice_hartree(const Lattice& lat, const SiteTable& table, double N, const CVec& u0,
                                   double t_begin, double t_end, double step) {
  check_condensate(u0, lat.sites());
  if (!(step > 0) || t_begin > 0 || t_end < 0) throw ValidationError("Hartree path must contain t = 0");
  const CMat& L = lat.minus_laplacian;
  const auto& V = *table;
  const double cchi = (2 * N + 3) / 6.0;
  // State (u, theta) with theta' = chi(u).
  auto rhs = [&](const CVec& u, CVec& du) -> double {
    const RVec rho = u.cwiseAbs2();
    const RVec F = lattice_F(V, rho);
    du = cplx(0, -1) * (L * u + F.cast<cplx>().cwiseProduct(u));
    return cchi * 2.0 * F.dot(rho);
  };
  auto run = [&](double h, int steps) {
    std::vector<CVec> us{u0};
    std::vector<double> th{0.0};
    CVec u = u0, k1, k2, k3, k4;
    double theta = 0;
    for (int s = 0; s < steps; ++s) {
      const double c1 = rhs(u, k1);
      const double c2 = rhs(u + 0.5 * h * k1, k2);
      const double c3 = rhs(u + 0.5 * h * k2, k3);
      const double c4 = rhs(u + h * k3, k4);
      u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      theta += h / 6.0 * (c1 + 2 * c2 + 2 * c3 + c4);
      if (!u.allFinite()) throw BlowUpError("lattice Hartree flow produced non-finite values", s * h);
      us.push_back(u);
      th.push_back(theta);
    }
    return std::make_pair(us, th);
  };
  const int back = static_cast<int>(std::llround(-t_begin / step));
  const int fwd = static_cast<int>(std::llround(t_end / step));
  auto [ub, thb] = run(-step, back);
  auto [uf, thf] = run(step, fwd);
  LatticeHartreePath p;
  p.step = step;
  p.t0 = -back * step;
  for (int i = back; i >= 1; --i) {
    p.u.push_back(ub[static_cast<std::size_t>(i)]);
    p.chi_integral.push_back(thb[static_cast<std::size_t>(i)]);
  }
  p.u.insert(p.u.end(), uf.begin(), uf.end());
  p.chi_integral.insert(p.chi_integral.end(), thf.begin(), thf.end());
  return p;
}

// ---------------------------------------------------------------- generator equivalence

GeneratorEquivalenceReport generator_equivalence_check(const Lattice& lat, const ThreeBodyPotential& V,
                                                       const CVec& u0, double t_final,
                                                       const GeneratorEquivalenceOptions& opt) {
  const int particles = 3;
  const double N = opt.N_scaling;
  if (N != particles) throw ValidationError("generator equivalence requires N_scaling equal to the particle number");
  check_condensate(u0, lat.sites());
  if (!(t_final >= 0) || !(opt.sample_spacing > 0) || !(opt.stencil_step > 0)) throw ValidationError("bad time parameters");
  const FewBodyHamiltonian H = build_hamiltonian(lat, particles, V, N);
  const FockBasis& basis = *H.basis;

  // Random excitation vector and the matching many-body state.
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> nd;
  CVec phi0(static_cast<Eigen::Index>(basis.dim()));
  for (Eigen::Index i = 0; i < phi0.size(); ++i) phi0[i] = cplx(nd(rng), nd(rng));
  phi0 = project_excitations(basis, phi0, u0);
  phi0.normalize();
  const FewBodyState psi0 = un_inverse(FockVector(H.basis, phi0), u0, particles);

  const int samples = static_cast<int>(std::floor(t_final / opt.sample_spacing + 1e-9));
  GeneratorEquivalenceReport rep;
  double delta = opt.stencil_step;
  for (int attempt = 0; attempt < 3; ++attempt, delta *= 0.5) {
    rep = GeneratorEquivalenceReport{};
    rep.stencil_step = delta;
    rep.refinements = attempt;
    const int per = static_cast<int>(std::llround(opt.sample_spacing / delta));
    if (std::abs(per * delta - opt.sample_spacing) > 1e-12) throw ValidationError("sample spacing must be a multiple of the stencil step");
    const double tau = 0.5 * delta;
    auto path = lattice_hartree(lat, H.table, N, u0, -2 * delta, samples * opt.sample_spacing + 2 * delta, tau);
    CVec psi_t = psi0.coeffs;
    double t_prev = 0;
    for (int k = 0; k <= samples; ++k) {
      const double t = k * opt.sample_spacing;
      psi_t = propagate_vector(H, psi_t, t - t_prev);
      t_prev = t;
      const std::size_t it = path.index_of(t);
      const CVec& ut = path.u[it];
      std::array<CVec, 5> vals, probe;
      const int offs[5] = {-2, -1, 0, 1, 2};
      for (int s = 0; s < 5; ++s) {
        const double ts = t + offs[s] * delta;
        const std::size_t is = path.index_of(ts);
        CVec u_s = path.u[is] / path.u[is].norm();
        FewBodyState ps{H.basis, particles, offs[s] == 0 ? psi_t : propagate_vector(H, psi_t, offs[s] * delta)};
        const CVec raw = un_forward(ps, u_s).coeffs;
        const double th = path.chi_integral[is];
        vals[static_cast<std::size_t>(s)] = std::polar(1.0, -th) * raw;
        probe[static_cast<std::size_t>(s)] = std::polar(1.0, -(1 + opt.chi_probe) * th) * raw;
      }
      auto deriv = [&](const std::array<CVec, 5>& f) {
        return CVec((f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * delta));
      };
      const CVec utn = ut / ut.norm();
      SiteModeModel model(lat.minus_laplacian, H.table, utn);
      const TermList gen = generator_terms(model, N).full();
      auto residual = [&](const std::array<CVec, 5>& f, double* normal) {
        const CVec d = cplx(0, 1) * deriv(f);
        const CVec dt = project_excitations(basis, d, utn);
        if (normal) *normal = (d - dt).norm() / f[2].norm();
        CVec Hphi;
        apply_terms(basis, gen, f[2], Hphi);
        return (dt - Hphi).norm() / f[2].norm();
      };
      double normal = 0;
      rep.times.push_back(t);
      rep.residual.push_back(residual(vals, &normal));
      rep.normal_part.push_back(normal);
      rep.probe_residual.push_back(residual(probe, nullptr));
      const double chi_t = (2 * N + 3) / 6.0 * model.condensate_energy();
      rep.max_chi = std::max(rep.max_chi, chi_t);
    }
    rep.max_residual = *std::max_element(rep.residual.begin(), rep.residual.end());
    rep.max_probe_residual = *std::max_element(rep.probe_residual.begin(), rep.probe_residual.end());
    if (rep.max_residual <= opt.tolerance) break;
  }
  return rep;
}

// ---------------------------------------------------------------- ground state

GroundState ground_state(const FewBodyHamiltonian& H, double tol, int max_iter) {
  // Shifted power iteration on (c - H) with a Gershgorin bound c.
  double c = 0;
  for (Eigen::Index r = 0; r < H.H.outerSize(); ++r) {
    double s = 0;
    for (SpMat::InnerIterator it(H.H, r); it; ++it) s += std::abs(it.value());
    c = std::max(c, s);
  }
  CVec v = CVec::Ones(static_cast<Eigen::Index>(H.dim()));
  v.normalize();
  GroundState g;
  for (int i = 0; i < max_iter; ++i) {
    const CVec Hv = H.H * v;
    g.energy = v.dot(Hv).real();
    g.residual = (Hv - g.energy * v).norm();
    if (g.residual < tol) break;
    v = c * v - Hv;
    v.normalize();
  }
  g.state = few_body_state(H, v);
  return g;
}

}  // namespace qmfd
