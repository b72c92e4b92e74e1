#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "qmfd/error.hpp"
#include "qmfd/potential.hpp"

using namespace qmfd;

namespace {

ThreeBodyPotential make_V(double A, double R, double beta, double N,
                          PotentialForm form = PotentialForm::PairProductSum) {
  ThreeBodyPotential V;
  V.form = form;
  V.profile = {A, R};
  V.beta = beta;
  V.N = N;
  return V;
}

Field random_density_field(const GridPtr& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Field u(g);
  for (Eigen::Index i = 0; i < u.values.size(); ++i) u.values[i] = cplx(nd(rng), nd(rng));
  u.values /= l2_norm(u);
  return u;
}

// Sampled w_N as an index-addressable table on the grid.
struct WTable {
  GridPtr g;
  RVec w;
  double operator()(std::array<int, 3> a, std::array<int, 3> b) const {
    return w[static_cast<Eigen::Index>(g->index_of_site(a[0] - b[0], a[1] - b[1], a[2] - b[2]))];
  }
};

}  // namespace

TEST_CASE("profile closed form and b0 examples") {
  const double R = 1.5;
  const double A = 105.0 / (32.0 * kPi * R * R * R);
  auto V = make_V(A, R, 0.1, 1);
  CHECK(V.profile.integral() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(coupling_b0(V) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(coupling_b0(make_V(0.0, R, 0.1, 1)) == 0.0);
  CHECK_THROWS_AS(make_V(1, 3.5, 0.1, 1).validate(), ValidationError);
  CHECK_THROWS_AS(make_V(1, 1, 0.2, 1).validate(), ValidationError);
}

TEST_CASE("triple product b0 against Monte Carlo") {
  auto V = make_V(1.3, 1.2, 0.1, 1, PotentialForm::TripleProduct);
  const double b0 = coupling_b0(V);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  const double R = V.profile.radius;
  auto sample_ball = [&]() {
    for (;;) {
      Vec3 x{ud(rng), ud(rng), ud(rng)};
      if (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] <= 1.0) return Vec3{R * x[0], R * x[1], R * x[2]};
    }
  };
  const long samples = 30'000'000;
  double acc = 0.0;
  for (long s = 0; s < samples; ++s) acc += V.unscaled(sample_ball(), sample_ball());
  const double ball = 4.0 / 3.0 * kPi * R * R * R;
  const double mc = 0.5 * ball * ball * acc / samples;
  CHECK(std::abs(mc - b0) / b0 < 1e-3);
}

TEST_CASE("int int V_N is N independent") {
  for (auto form : {PotentialForm::PairProductSum, PotentialForm::TripleProduct}) {
    auto V = make_V(0.8, 1.7, 0.15, 1, form);
    const double b1 = coupling_b0(V);
    for (double N : {10.0, 1000.0}) {
      // Change of variables: V_N is the same family with rescaled profile.
      const double s = std::pow(N, 0.15);
      auto W = V;
      W.profile.radius = V.profile.radius / s;
      W.profile.amplitude = V.profile.amplitude * std::pow(s, form == PotentialForm::PairProductSum ? 3 : 2);
      CHECK(std::abs(coupling_b0(W) - b1) / b1 < 1e-10);
    }
  }
}

TEST_CASE("exchange and three-body symmetry") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ud(-1.2, 1.2);
  for (auto form : {PotentialForm::PairProductSum, PotentialForm::TripleProduct}) {
    auto V = make_V(1.0, 1.9, 0.1, 1, form);
    for (int i = 0; i < 1000; ++i) {
      Vec3 x{ud(rng), ud(rng), ud(rng)}, y{ud(rng), ud(rng), ud(rng)}, z{ud(rng), ud(rng), ud(rng)};
      CHECK(std::abs(V.unscaled(x, y) - V.unscaled(y, x)) <= 1e-14);
      auto d = [](Vec3 a, Vec3 b) { return Vec3{a[0] - b[0], a[1] - b[1], a[2] - b[2]}; };
      double v1 = V.unscaled(d(x, y), d(x, z));
      double v2 = V.unscaled(d(y, x), d(y, z));
      double v3 = V.unscaled(d(z, y), d(z, x));
      CHECK(std::abs(v1 - v2) <= 1e-13 * (1 + std::abs(v1)));
      CHECK(std::abs(v1 - v3) <= 1e-13 * (1 + std::abs(v1)));
    }
  }
}

TEST_CASE("Hartree nonlinearity on constant data") {
  auto g = make_grid(16);
  auto V = make_V(3.0, 2.0, 0.15, 64);
  Field u(g, CVec::Constant(static_cast<Eigen::Index>(g->size()), std::pow(kTwoPi, -1.5)));
  Field F = hartree_nonlinearity(u, V);
  const double expect = coupling_b0(V) * std::pow(kTwoPi, -6);
  CHECK((F.values.real().array() - expect).abs().maxCoeff() / expect < 1e-10);
  Field F0 = hartree_nonlinearity(u, make_V(0.0, 2.0, 0.15, 64));
  CHECK(F0.values.norm() == 0.0);
  CHECK_THROWS_AS(hartree_nonlinearity(u, make_V(1, 1, 0.1, 1, PotentialForm::TripleProduct)), UnsupportedError);
}

TEST_CASE("Hartree nonlinearity against direct double sum on 8^3") {
  auto g = make_grid(8);
  auto V = make_V(2.0, 2.5, 0.1, 4);
  Field u = random_density_field(g, 21);
  Field F = hartree_nonlinearity(u, V);
  CHECK(F.values.real().minCoeff() >= -1e-12);
  WTable w{g, sample_wN_periodic(V, 8)};
  const double h3 = g->cell_volume();
  RVec f = u.values.cwiseAbs2();
  RVec direct(f.size());
  for (std::size_t x = 0; x < g->size(); ++x) {
    auto sx = g->site(x);
    double acc = 0;
    for (std::size_t y = 0; y < g->size(); ++y) {
      auto sy = g->site(y);
      double wxy = w(sx, sy), fy = f[static_cast<Eigen::Index>(y)];
      for (std::size_t z = 0; z < g->size(); ++z) {
        auto sz = g->site(z);
        double wxz = w(sx, sz), wzy = w(sz, sy);
        acc += fy * f[static_cast<Eigen::Index>(z)] * (wxy * wxz + wxy * wzy + wxz * wzy) / 3.0;
      }
    }
    direct[static_cast<Eigen::Index>(x)] = 0.5 * h3 * h3 * acc;
  }
  CHECK((F.values.real() - direct).norm() / direct.norm() < 1e-8);
}

TEST_CASE("two-point function") {
  auto g = make_grid(8);
  auto V = make_V(2.0, 2.5, 0.1, 4);
  PairKernelOnGrid pk(V, g);
  WTable w{g, pk.wN().values.real()};
  const double h3 = g->cell_volume();

  SUBCASE("random density against direct summation") {
    Field u = random_density_field(g, 33);
    Field f(g, u.values.cwiseAbs2().cast<cplx>());
    auto m = partial_integral_W2(pk, f);
    Eigen::MatrixXd dense = m.dense();
    double err = 0, ref = 0;
    for (std::size_t x = 0; x < g->size(); x += 7)
      for (std::size_t y = 0; y < g->size(); y += 5) {
        auto sx = g->site(x), sy = g->site(y);
        double acc = 0;
        for (std::size_t z = 0; z < g->size(); ++z) {
          auto sz = g->site(z);
          acc += (w(sx, sy) * w(sx, sz) + w(sx, sy) * w(sz, sy) + w(sx, sz) * w(sz, sy)) / 3.0 *
                 f.values[static_cast<Eigen::Index>(z)].real();
        }
        acc *= h3;
        err = std::max(err, std::abs(dense(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) - acc));
        err = std::max(err, std::abs(m(x, y) - acc));
        ref = std::max(ref, std::abs(acc));
      }
    CHECK(err / ref < 1e-8);
    // operator application agrees with the dense kernel
    Field phi = random_density_field(g, 34);
    CVec viaDense = h3 * (dense.cast<cplx>() * phi.values);
    CHECK((m.apply(phi.values) - viaDense).norm() / viaDense.norm() < 1e-10);
  }

  SUBCASE("constant density reduction") {
    const double rho = std::pow(kTwoPi, -3);
    Field f(g, CVec::Constant(static_cast<Eigen::Index>(g->size()), rho));
    auto m = partial_integral_W2(pk, f);
    Field ww = pk.convolve(pk.wN());
    double err = 0, ref = 0;
    for (std::size_t x = 0; x < g->size(); x += 3)
      for (std::size_t y = 0; y < g->size(); y += 11) {
        auto sx = g->site(x), sy = g->site(y);
        auto d = static_cast<Eigen::Index>(g->index_of_site(sx[0] - sy[0], sx[1] - sy[1], sx[2] - sy[2]));
        double expect = rho * (2.0 / 3.0 * w(sx, sy) * pk.mass() + ww.values[d].real() / 3.0);
        err = std::max(err, std::abs(m(x, y) - expect));
        ref = std::max(ref, std::abs(expect));
      }
    CHECK(err / ref < 1e-12);
    CHECK(pk.mass() == doctest::Approx(V.profile.integral()).epsilon(1e-12));
  }

  SUBCASE("zero density and dense limit") {
    Field f(g);
    auto m = partial_integral_W2(pk, f);
    CHECK(m.dense().norm() == 0.0);
    auto big = make_grid(18);
    PairKernelOnGrid pk18(V, big);
    auto m18 = partial_integral_W2(pk18, Field(big));
    CHECK_THROWS_AS(m18.dense(), ValidationError);
  }
}

TEST_CASE("Sobolev ratio diagnostic") {
  auto zero = sobolev_ratio_diagnostic(make_V(0.0, 2.0, 0.1, 1), make_grid(8));
  CHECK(zero.ratio == 0.0);
  auto V = make_V(1.0, 2.0, 0.15, 8);
  auto r16 = sobolev_ratio_diagnostic(V, make_grid(16));
  auto r32 = sobolev_ratio_diagnostic(V, make_grid(32));
  CHECK(r16.ratio > 0);
  CHECK(std::abs(r16.ratio - r32.ratio) / r32.ratio < 0.2);
  CHECK(r32.ratio < 1.0);
}
