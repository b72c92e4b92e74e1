#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "qmfd/error.hpp"
#include "qmfd/grid.hpp"

using namespace qmfd;

namespace {

Field random_field(const GridPtr& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Field f(g);
  for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values[i] = cplx(nd(rng), nd(rng));
  return f;
}

Field plane_wave(const GridPtr& g, std::array<int, 3> k, cplx amp = 1.0) {
  Field f(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    auto x = g->position(i);
    f.values[static_cast<Eigen::Index>(i)] = amp * std::exp(cplx(0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]));
  }
  return f;
}

double rel(const CVec& a, const CVec& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST_CASE("grid construction rules") {
  CHECK_THROWS_AS(TorusGrid(6), ValidationError);
  CHECK_THROWS_AS(TorusGrid(9), ValidationError);
  auto g = make_grid(8);
  CHECK(g->size() == 512);
  CHECK(g->cell_volume() * g->size() == doctest::Approx(TorusGrid::volume()));
  // wavevector set closed under negation modulo the Nyquist alias
  for (std::size_t i = 0; i < g->size(); ++i) {
    auto k = g->wavevector(i);
    auto j = g->index_of_wavevector({-k[0], -k[1], -k[2]});
    CHECK(g->k2(j) == g->k2(i));
  }
}

TEST_CASE("forward transform of constant and single mode") {
  auto g = make_grid(8);
  Field one(g, CVec::Ones(static_cast<Eigen::Index>(g->size())));
  CVec c = transform_forward(one);
  CHECK(std::abs(c[0] - 1.0) < 1e-14);
  CHECK(c.tail(c.size() - 1).norm() < 1e-13);

  CVec d = transform_forward(plane_wave(g, {1, 0, 0}));
  auto idx = static_cast<Eigen::Index>(g->index_of_wavevector({1, 0, 0}));
  CHECK(std::abs(d[idx] - 1.0) < 1e-14);
  d[idx] = 0;
  CHECK(d.norm() < 1e-13);
}

TEST_CASE("roundtrip and Parseval") {
  auto g = make_grid(10);
  Field f = random_field(g, 3);
  Field back = transform_inverse(g, transform_forward(f));
  CHECK(rel(back.values, f.values) < 1e-12);
  double quad = std::sqrt(g->cell_volume() * f.values.squaredNorm());
  CHECK(std::abs(sobolev_norm(f, 0) - quad) / quad < 1e-12);
  CHECK(std::abs(l2_norm(f) - quad) / quad < 1e-12);
}

TEST_CASE("sobolev norm examples") {
  auto g = make_grid(8);
  const double c = std::pow(kTwoPi, -1.5);
  Field u(g, CVec::Constant(static_cast<Eigen::Index>(g->size()), c));
  for (double s : {0.0, 1.0, 2.5, 4.0}) CHECK(sobolev_norm(u, s) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sobolev_norm(plane_wave(g, {1, 0, 0}, c), 1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("multiplier examples and inverse pair") {
  auto g = make_grid(8);
  Field f = random_field(g, 5);
  CHECK(rel(apply_multiplier(f, {0.0}).values, f.values) < 1e-15);
  Field e = plane_wave(g, {1, 2, 0});
  Field m = apply_multiplier(e, {-0.5});
  CHECK(rel(m.values, e.values / std::sqrt(6.0)) < 1e-12);
  Field one(g, CVec::Ones(static_cast<Eigen::Index>(g->size())));
  CHECK(rel(apply_multiplier(one, {2.0}).values, one.values) < 1e-12);
  Field rt = apply_multiplier(apply_multiplier(f, {1.3}), {-1.3});
  CHECK(rel(rt.values, f.values) < 1e-12);
}

TEST_CASE("convolution against direct double sum on 8^3") {
  auto g = make_grid(8);
  Field f = random_field(g, 11), h = random_field(g, 12);
  Field c = convolve(f, h);
  // Independent oracle: (f*h)(x) = sum_y h^3 f(x - y) h(y)
  CVec direct(c.values.size());
  for (std::size_t x = 0; x < g->size(); ++x) {
    auto sx = g->site(x);
    cplx acc = 0;
    for (std::size_t y = 0; y < g->size(); ++y) {
      auto sy = g->site(y);
      acc += f.values[static_cast<Eigen::Index>(g->index_of_site(sx[0] - sy[0], sx[1] - sy[1], sx[2] - sy[2]))] *
             h.values[static_cast<Eigen::Index>(y)];
    }
    direct[static_cast<Eigen::Index>(x)] = g->cell_volume() * acc;
  }
  CHECK(rel(c.values, direct) < 1e-10);

  Field one(g, CVec::Ones(static_cast<Eigen::Index>(g->size())));
  Field cc = convolve(one, one);
  CHECK((cc.values.array() - TorusGrid::volume()).abs().maxCoeff() < 1e-10);

  // single mode: e_k * h = (2pi)^3 c_k(h) e_k
  Field e = plane_wave(g, {1, -2, 3});
  CVec ch = transform_forward(h);
  cplx hk = ch[static_cast<Eigen::Index>(g->index_of_wavevector({1, -2, 3}))];
  CHECK(rel(convolve(e, h).values, TorusGrid::volume() * hk * e.values) < 1e-12);
}

TEST_CASE("convolution with delta approximant") {
  auto g = make_grid(16);
  Field f(g), delta(g);
  for (std::size_t i = 0; i < g->size(); ++i) {
    auto x = g->position(i);
    f.values[static_cast<Eigen::Index>(i)] = std::cos(x[0]) + 0.5 * std::sin(x[1] + x[2]);
  }
  delta.values[0] = 1.0 / g->cell_volume();
  CHECK(rel(convolve(f, delta).values, f.values) < 1e-12);
}

TEST_CASE("size mismatch is rejected") {
  auto g = make_grid(8);
  CHECK_THROWS_AS(Field(g, CVec::Zero(10)), ValidationError);
  Field bad;
  bad.grid = g;
  bad.values = CVec::Zero(3);
  CHECK_THROWS_AS(transform_forward(bad), ValidationError);
  CHECK_THROWS_AS(convolve(Field(make_grid(8)), Field(make_grid(10))), ValidationError);
}
