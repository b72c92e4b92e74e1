#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <random>

#include "qmfd/error.hpp"
#include "qmfd/generator.hpp"

using namespace qmfd;

namespace {

const double kRho = std::pow(kTwoPi, -3);

ThreeBodyPotential make_V(double A, double N, double beta = 0.1) {
  ThreeBodyPotential V;
  V.profile = {A, 2.0};
  V.beta = beta;
  V.N = N;
  return V;
}

Field constant_field(const GridPtr& g) {
  return Field(g, CVec::Constant(static_cast<Eigen::Index>(g->size()), std::sqrt(kRho)));
}

ModeBasis axial_modes(const GridPtr& g) { return ModeBasis::from_wavevectors(g, {{1, 0, 0}, {-1, 0, 0}, {2, 0, 0}, {-2, 0, 0}}); }

// Direct sum h^9 sum_{x,y,z} V(x,y,z) prod_v s_v(x_v) on the grid, where each
// s_v already contains the slot values of variable v.
cplx direct_pattern(const GridPtr& g, const RVec& w, const std::array<CVec, 3>& s) {
  const int n = g->n();
  const auto S = g->size();
  auto diff = [&](std::size_t a, std::size_t b) {
    auto sa = g->site(a), sb = g->site(b);
    return g->index_of_site((sa[0] - sb[0] + n) % n, (sa[1] - sb[1] + n) % n, (sa[2] - sb[2] + n) % n);
  };
  std::vector<std::size_t> D(S * S);
  for (std::size_t a = 0; a < S; ++a)
    for (std::size_t b = 0; b < S; ++b) D[a * S + b] = diff(a, b);
  cplx total = 0;
  for (std::size_t x = 0; x < S; ++x)
    for (std::size_t y = 0; y < S; ++y) {
      const double wxy = w[static_cast<Eigen::Index>(D[x * S + y])];
      const cplx sxy = s[0][static_cast<Eigen::Index>(x)] * s[1][static_cast<Eigen::Index>(y)];
      cplx inner = 0;
      for (std::size_t z = 0; z < S; ++z) {
        const double wxz = w[static_cast<Eigen::Index>(D[x * S + z])], wyz = w[static_cast<Eigen::Index>(D[y * S + z])];
        inner += (wxy * wxz + wxy * wyz + wxz * wyz) * s[2][static_cast<Eigen::Index>(z)];
      }
      total += sxy * inner;
    }
  const double h3 = g->cell_volume();
  return total * h3 * h3 * h3 / 3.0;
}

CMat kron(const CMat& a, const CMat& b) {
  CMat r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

CMat kron_power(const CMat& a, int e) {
  CMat r = CMat::Identity(1, 1);
  for (int i = 0; i < e; ++i) r = kron(r, a);
  return r;
}

}  // namespace

TEST_CASE("slot patterns") {
  auto p = SlotPattern::parse("OF,FO,FF");
  CHECK(p.creates() == 1);
  CHECK(p.annihilates() == 1);
  CHECK(p.str() == "OF,FO,FF");
  CHECK(p.swapped().str() == "FO,OF,FF");
  CHECK(p.multiplicity() == 6);
  CHECK(SlotPattern::parse("OO,OO,OO").multiplicity() == 1);
  CHECK(SlotPattern::parse("OF,OF,FF").multiplicity() == 3);
  CHECK(SlotPattern::parse("OF,OF,OF").creates() == 3);
  CHECK_THROWS_AS(SlotPattern::parse("OX,FF,FF"), ValidationError);
  CHECK_THROWS_AS(SlotPattern::parse("OF,FF"), ValidationError);
}

TEST_CASE("momentum coefficients against direct quadrature") {
  auto g = make_grid(8);
  auto V = make_V(3.0, 1.0);
  auto modes = ModeBasis::from_wavevectors(g, {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {1, 1, 0}, {-1, -1, 0}});
  auto model = momentum_mode_model(modes, V);
  PairKernelOnGrid pk(V, g);
  const CVec u = constant_field(g).values;
  auto e = [&](int j) { return CVec(plane_wave_values(*g, modes.wavevectors[static_cast<std::size_t>(j)])); };
  struct Case {
    std::string pat;
    std::vector<int> out, in;
  };
  const std::vector<Case> cases = {{"OF,OF,FF", {0, 1}, {}},        {"OF,OF,OF", {0, 2, 5}, {}},
                                   {"OO,OF,FO", {4, 1}, {2, 0}},    {"OO,OO,OF", {0, 2, 5}, {4, 1}},
                                   {"FF,FF,FF", {}, {}},            {"OF,FO,FF", {2}, {2}}};
  const int d = model->dim();
  for (const auto& c : cases) {
    CAPTURE(c.pat);
    auto p = SlotPattern::parse(c.pat);
    std::array<CVec, 3> s;
    std::size_t oi = 0, ii = 0;
    Eigen::Index row = 0, col = 0;
    for (std::size_t v = 0; v < 3; ++v) {
      s[v] = CVec::Ones(u.size());
      if (p.out_open[v]) {
        s[v] = s[v].cwiseProduct(e(c.out[oi]).conjugate());
        row = row * d + c.out[oi++];
      } else {
        s[v] = s[v].cwiseProduct(u.conjugate());
      }
      if (p.in_open[v]) {
        s[v] = s[v].cwiseProduct(e(c.in[ii]));
        col = col * d + c.in[ii++];
      } else {
        s[v] = s[v].cwiseProduct(u);
      }
    }
    const cplx ref = direct_pattern(g, pk.wN().values.real(), s);
    const cplx got = model->pattern(p)->dense()(row, col);
    CHECK(std::abs(got - ref) < 1e-10 * (1 + std::abs(ref)));
  }
  // The momentum selection rule must produce at least one nonzero among the cases above.
  CHECK(std::abs(model->pattern(SlotPattern::parse("OF,OF,FF"))->dense()(0 * d + 1, 0)) > 1e-6);
}

TEST_CASE("vacuum expectation of R0, chi and amplitude zero") {
  auto g = make_grid(8);
  const double N = 64;
  auto V = make_V(3.0, N);
  Field u = constant_field(g);
  auto b = assemble_generator(u, V, axial_modes(g), 6, N);
  // Triple integral of V_N against |u|^6 by quadrature.
  PairKernelOnGrid pk(V.with_N(N), g);
  std::array<CVec, 3> s;
  for (auto& x : s) x = CVec::Constant(static_cast<Eigen::Index>(g->size()), kRho);
  const double E = direct_pattern(g, pk.wN().values.real(), s).real();
  CHECK(b.terms.condensate_energy == doctest::Approx(E).epsilon(1e-10));
  auto vac = FockVector::vacuum(b.basis);
  const cplx r0 = vac.coeffs.dot(b.R[0].apply(vac.coeffs));
  CHECK(std::abs(r0 - E / (3 * N)) < 1e-12 * E);
  // chi against the coupling constant.
  const double w_int = V.profile.integral();
  const double b0 = 0.5 * w_int * w_int;
  CHECK(b.chi == doctest::Approx((2 * N + 3) / 6 * 2 * b0 * kRho * kRho).epsilon(1e-8));
  CHECK(b.chi == doctest::Approx((2 * N + 3) / 6 * 2 * coupling_b0(V) * kRho * kRho).epsilon(1e-6));
  CHECK(b.mu == doctest::Approx(b0 * kRho * kRho).epsilon(1e-8));

  auto z = assemble_generator(u, make_V(0.0, N), axial_modes(g), 6, N);
  CHECK(z.chi == 0.0);
  for (int j = 0; j < 7; ++j) CHECK(z.R[static_cast<std::size_t>(j)].matrix.norm() == 0.0);
  auto lap = axial_modes(g).laplacian();
  CHECK((z.bogoliubov.dense_block(6) - dGamma(z.basis, lap).dense_block(6)).norm() < 1e-12);
}

TEST_CASE("quadratic part matches the Bogoliubov kernels") {
  auto g = make_grid(8);
  const double N = 16;
  auto V = make_V(20.0, N, 0.15);
  Field u = constant_field(g);
  auto modes = ModeBasis::plane_waves(g, 1.0);
  auto b = assemble_generator(u, V, modes, 4, N);
  auto k = build_kernels(u, V.with_N(N), modes);
  const int d = modes.size();
  CMat K2v(d * d, 1);
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) K2v(p * d + q, 0) = k.K2(p, q);
  Term pair{"pair", dense_kernel(2, 0, d, K2v), nullptr, 0.5};
  auto ref = assemble_sparse(b.basis, {Term{"hK1", dense_kernel(1, 1, d, k.h + k.K1), nullptr, 1.0}, pair, pair.adjoint()});
  CHECK((b.bogoliubov.dense_block(4) - ref.dense_block(4)).norm() < 1e-10 * (1 + ref.dense_block(4).norm()));
}

TEST_CASE("self-adjointness, sector structure and positivity") {
  auto g = make_grid(8);
  const double N = 5;
  auto V = make_V(40.0, N);
  auto b = assemble_generator(constant_field(g), V, axial_modes(g), 8, N);
  CMat full = b.full().dense_block(8);
  CHECK((full - full.adjoint()).norm() < 1e-12 * full.norm());
  CMat B = b.bogoliubov.dense_block(8);
  CHECK((B - B.adjoint()).norm() < 1e-12 * B.norm());
  for (int j = 0; j < 7; ++j) {
    CMat r = b.R_plus_adjoint(j).dense_block(8);
    CHECK((r - r.adjoint()).norm() < 1e-12 * (1 + r.norm()));
  }
  // Odd terms are genuinely present with these modes.
  CHECK(b.R[3].matrix.norm() > 1e-8);
  CHECK(b.R[5].matrix.norm() > 1e-8);
  // No transitions out of the sectors <= N.
  double out = 0;
  for (Eigen::Index i = 0; i < full.rows(); ++i)
    for (Eigen::Index j = 0; j < full.cols(); ++j)
      if (b.basis->sector(static_cast<std::size_t>(j)) <= 5 && b.basis->sector(static_cast<std::size_t>(i)) > 5)
        out = std::max(out, std::abs(full(i, j)));
  CHECK(out < 1e-14);
  // The pairing term alone does create such transitions.
  double pair_out = 0;
  for (Eigen::Index i = 0; i < B.rows(); ++i)
    for (Eigen::Index j = 0; j < B.cols(); ++j)
      if (b.basis->sector(static_cast<std::size_t>(j)) <= 5 && b.basis->sector(static_cast<std::size_t>(i)) > 5)
        pair_out = std::max(pair_out, std::abs(B(i, j)));
  CHECK(pair_out > 1e-8);
  Eigen::SelfAdjointEigenSolver<CMat> es(b.R[6].dense_block(8));
  CHECK(es.eigenvalues()(0) >= -1e-10);
}

TEST_CASE("unsupported inputs") {
  auto g = make_grid(8);
  Field u = constant_field(g);
  u.values[3] *= 1.1;
  CHECK_THROWS_AS(assemble_generator(u, make_V(1.0, 8), axial_modes(g), 4, 8), UnsupportedError);
  CHECK_THROWS_AS(assemble_generator(constant_field(g), make_V(1.0, 8), axial_modes(g), 9, 8), ValidationError);
  CHECK_THROWS_AS(assemble_generator(constant_field(g), make_V(1.0, 8), ModeBasis::plane_waves(g, 2.0), 4, 8),
                  ValidationError);
}

TEST_CASE("error-bound certification") {
  auto g = make_grid(8);
  auto zero = assemble_generator(constant_field(g), make_V(0.0, 64), axial_modes(g), 6, 64);
  auto rep = certify_error_bounds(zero, 3, 1.0);
  const double shift = 3 * std::pow(64.0, 4 * 0.1 - 1);
  for (const auto& r : rep.rows) {
    CHECK(r.minimal_c == 0.0);
    CHECK(r.min_eig == doctest::Approx(shift).epsilon(1e-12));
  }
  auto b = assemble_generator(constant_field(g), make_V(40.0, 64), axial_modes(g), 6, 64);
  auto rep2 = certify_error_bounds(b, 3, 1.0);
  CHECK(rep2.rows.size() == 14);
  CHECK(rep2.R6_min_eig >= -1e-10);
  for (const auto& r : rep2.rows) {
    CHECK(std::isfinite(r.minimal_c));
    CHECK(r.minimal_c >= 0.0);
  }
  CHECK_THROWS_AS(certify_error_bounds(b, 4, 1.0), ValidationError);
}

TEST_CASE("truncated evolution") {
  auto g = make_grid(8);
  auto b = assemble_generator(constant_field(g), make_V(40.0, 64), axial_modes(g), 6, 64);
  // Number operator: each sector rotates by e^{-int}.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  const auto dimM = static_cast<Eigen::Index>(b.basis->sector_end(4));
  CVec c = CVec::Zero(static_cast<Eigen::Index>(b.basis->dim()));
  for (Eigen::Index i = 0; i < dimM; ++i) c[i] = cplx(nd(rng), nd(rng));
  c.normalize();
  FockVector phi(b.basis, c);
  auto tr = evolve_truncated(b, phi, 4, 0.05, 0.5, GeneratorChoice::Number);
  const CVec& end = tr.states.back().coeffs;
  double err = 0;
  for (Eigen::Index i = 0; i < dimM; ++i)
    err = std::max(err, std::abs(end[i] - std::polar(1.0, -0.5 * b.basis->sector(static_cast<std::size_t>(i))) * c[i]));
  CHECK(err < 1e-11);
  CHECK(tr.leakage == 0.0);
  for (std::size_t n = 0; n < 5; ++n)
    CHECK(tr.samples.back().histogram[n] == doctest::Approx(tr.samples.front().histogram[n]).epsilon(1e-12));
  // Full generator conserves the norm; a state above the cutoff is rejected.
  auto full = evolve_truncated(b, FockVector::vacuum(b.basis), 3, 0.01, 0.2);
  CHECK(std::abs(full.samples.back().norm - 1.0) < 1e-10);
  CHECK(full.samples.back().number > 0.0);
  CHECK(full.leakage > 0.0);
  CHECK_THROWS_AS(evolve_truncated(b, phi, 2, 0.01, 0.1), ValidationError);
}

TEST_CASE("site model against brute-force tensors") {
  // Tiny site space, random symmetric V table and a complex condensate.
  const int S = 6;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  auto V = std::make_shared<std::vector<double>>(S * S * S);
  for (int x = 0; x < S; ++x)
    for (int y = x; y < S; ++y)
      for (int z = y; z < S; ++z) {
        const double v = ud(rng);
        int p[3] = {x, y, z};
        std::sort(p, p + 3);
        do {
          (*V)[static_cast<std::size_t>((p[0] * S + p[1]) * S + p[2])] = v;
        } while (std::next_permutation(p, p + 3));
      }
  CVec u(S);
  for (int i = 0; i < S; ++i) u[i] = cplx(ud(rng) + 0.5, ud(rng) - 0.5);
  u.normalize();
  CMat lap = CMat::Identity(S, S) * 2.0;
  for (int i = 0; i < S; ++i) {
    lap(i, (i + 1) % S) -= 1.0;
    lap((i + 1) % S, i) -= 1.0;
  }
  SiteModeModel model(lap, V, u);
  const CMat Q = CMat::Identity(S, S) - u * u.adjoint();
  CHECK((model.laplacian() - Q * lap * Q).norm() < 1e-12);
  for (const char* pat : {"OF,FO,FF", "OF,OF,FF", "OO,OF,FO", "OO,OF,OF", "OO,OO,OF", "OF,FO,OO", "OO,OO,OO"}) {
    CAPTURE(pat);
    auto p = SlotPattern::parse(pat);
    const int c = p.creates(), a = p.annihilates();
    const auto rows = static_cast<Eigen::Index>(std::pow(S, c)), cols = static_cast<Eigen::Index>(std::pow(S, a));
    CMat raw = CMat::Zero(rows, cols);
    for (int x = 0; x < S; ++x)
      for (int y = 0; y < S; ++y)
        for (int z = 0; z < S; ++z) {
          int var[3] = {x, y, z};
          cplx s = (*V)[static_cast<std::size_t>((x * S + y) * S + z)];
          Eigen::Index r = 0, col = 0;
          for (std::size_t v = 0; v < 3; ++v) {
            if (p.out_open[v]) r = r * S + var[v];
            else s *= std::conj(u[var[v]]);
            if (p.in_open[v]) col = col * S + var[v];
            else s *= u[var[v]];
          }
          raw(r, col) += s;
        }
    CMat ref = kron_power(Q, c) * raw * kron_power(Q, a);
    auto K = model.pattern(p);
    CHECK((K->dense() - ref).norm() < 1e-12 * (1 + ref.norm()));
    CHECK((K->adjoint()->dense() - ref.adjoint()).norm() < 1e-12 * (1 + ref.norm()));
  }
  CHECK(model.condensate_energy() > 0);
}

TEST_CASE("site model reproduces momentum coefficients") {
  auto g = make_grid(8);
  auto V = make_V(3.0, 1.0);
  auto modes = axial_modes(g);
  auto mom = momentum_mode_model(modes, V);
  PairKernelOnGrid pk(V, g);
  const auto S = g->size();
  const int n = g->n();
  auto table = std::make_shared<std::vector<double>>(S * S * S);
  auto diff = [&](std::size_t a, std::size_t b) {
    auto sa = g->site(a), sb = g->site(b);
    return static_cast<Eigen::Index>(
        g->index_of_site((sa[0] - sb[0] + n) % n, (sa[1] - sb[1] + n) % n, (sa[2] - sb[2] + n) % n));
  };
  const RVec w = pk.wN().values.real();
  for (std::size_t x = 0; x < S; ++x)
    for (std::size_t y = 0; y < S; ++y) {
      const double wxy = w[diff(x, y)];
      for (std::size_t z = 0; z < S; ++z) {
        const double wxz = w[diff(x, z)], wyz = w[diff(y, z)];
        (*table)[(x * S + y) * S + z] = (wxy * wxz + wxy * wyz + wxz * wyz) / 3.0;
      }
    }
  // Unit l^2 vectors carry the h^{3/2} weights so the site sums need none.
  const double h32 = std::pow(g->cell_volume(), 0.5);
  const CVec u = constant_field(g).values * h32;
  SiteModeModel site(CMat::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S)), table, u);
  CMat E(static_cast<Eigen::Index>(S), modes.size());
  for (int j = 0; j < modes.size(); ++j) E.col(j) = plane_wave_values(*g, modes.wavevectors[static_cast<std::size_t>(j)]) * h32;
  CHECK(site.condensate_energy() == doctest::Approx(mom->condensate_energy()).epsilon(1e-10));
  for (const char* pat : {"OF,FO,FF", "OO,FF,FF"}) {
    CMat ks = site.pattern(SlotPattern::parse(pat))->dense();
    CMat km = mom->pattern(SlotPattern::parse(pat))->dense();
    CHECK((E.adjoint() * ks * E - km).norm() < 1e-10 * (1 + km.norm()));
  }
  CMat k2s = site.pattern(SlotPattern::parse("OF,OF,FF"))->dense();
  CMat k2m = mom->pattern(SlotPattern::parse("OF,OF,FF"))->dense();
  CMat proj = kron(E, E).adjoint() * k2s;
  CHECK((proj - k2m).norm() < 1e-10 * (1 + k2m.norm()));
}
