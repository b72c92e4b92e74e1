#include "qmfd/potential.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>

#include "qmfd/error.hpp"
#include "qmfd/krylov.hpp"

namespace qmfd {

namespace {

double norm2(const Vec3& x) { return x[0] * x[0] + x[1] * x[1] + x[2] * x[2]; }
Vec3 diff(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

// Composite Gauss-Legendre on [a, b] with the given number of panels.
template <class Fn>
double composite_gauss(Fn&& f, double a, double b, int panels) {
  using Q = boost::math::quadrature::gauss<double, 10>;
  double acc = 0.0, h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) acc += Q::integrate(f, a + p * h, a + (p + 1) * h);
  return acc;
}

// Radial integral of the profile, 4 pi int r^2 w(r) dr.
double radial_mass(const PairProfile& w, int panels) {
  return 4.0 * kPi * composite_gauss([&](double r) { return r * r * w(r * r); }, 0.0, w.radius, panels);
}

// b0 for V(x, y) = w(x) w(y) w(x - y). For radial w,
// (w*w)(r) = (2 pi / r) int s w(s) [Phi(min(r+s,R)) - Phi(|r-s|)] ds with
// Phi(t) = int_0^t tau w(tau) dtau in closed form; kinks at s = r and
// s = R - r are used as panel breakpoints.
double triple_product_b0(const PairProfile& w, int panels) {
  const double R = w.radius, A = w.amplitude;
  auto Phi = [&](double t) {
    t = std::min(t, R);
    double q = 1.0 - t * t / (R * R);
    return A * R * R / 6.0 * (1.0 - q * q * q);
  };
  auto inner = [&](double r) {
    auto integrand = [&](double s) { return s * w(s * s) * (Phi(r + s) - Phi(std::abs(r - s))); };
    double cuts[4] = {0.0, std::min(r, R - r), std::max(r, R - r), R};
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
      if (cuts[i + 1] > cuts[i]) acc += composite_gauss(integrand, cuts[i], cuts[i + 1], panels);
    return acc;
  };
  // int_{R^3} w(x) (w*w)(x) dx = 4 pi int r^2 w(r) (2 pi / r) inner(r) dr
  double outer = 0.0;
  double mid = 0.5 * R;
  auto f = [&](double r) { return r * w(r * r) * inner(r); };
  outer = composite_gauss(f, 0.0, mid, panels) + composite_gauss(f, mid, R, panels);
  return 0.5 * 8.0 * kPi * kPi * outer;
}

}  // namespace

double PairProfile::operator()(double r2) const {
  double q = 1.0 - r2 / (radius * radius);
  return r2 <= radius * radius ? amplitude * q * q : 0.0;
}

double PairProfile::at(const Vec3& x) const { return (*this)(norm2(x)); }

double PairProfile::integral() const { return 32.0 * kPi * amplitude * radius * radius * radius / 105.0; }

void PairProfile::validate() const {
  if (!(amplitude >= 0.0)) throw ValidationError("potential amplitude must be >= 0");
  if (!(radius > 0.0)) throw ValidationError("potential support radius must be > 0");
  if (!(radius < kPi)) throw ValidationError("potential support radius must be < pi");
}

std::string to_string(PotentialForm f) {
  return f == PotentialForm::PairProductSum ? "pair_product_sum" : "triple_product";
}

PotentialForm potential_form_from_string(const std::string& s) {
  if (s == "pair_product_sum") return PotentialForm::PairProductSum;
  if (s == "triple_product") return PotentialForm::TripleProduct;
  throw ValidationError("unknown potential form '" + s + "'");
}

double ThreeBodyPotential::scale() const { return std::pow(N, beta); }

double ThreeBodyPotential::unscaled(const Vec3& x, const Vec3& y) const {
  const double wx = profile.at(x), wy = profile.at(y), wxy = profile.at(diff(x, y));
  if (form == PotentialForm::PairProductSum) return (wx * wy + wx * wxy + wy * wxy) / 3.0;
  return wx * wy * wxy;
}

double ThreeBodyPotential::scaled(const Vec3& x, const Vec3& y) const {
  const double s = scale();
  return std::pow(s, 6) * unscaled({s * x[0], s * x[1], s * x[2]}, {s * y[0], s * y[1], s * y[2]});
}

double ThreeBodyPotential::w_scaled(const Vec3& x) const {
  const double s = scale();
  return s * s * s * profile.at({s * x[0], s * x[1], s * x[2]});
}

ThreeBodyPotential ThreeBodyPotential::with_N(double n) const {
  ThreeBodyPotential v = *this;
  v.N = n;
  return v;
}

void ThreeBodyPotential::validate() const {
  profile.validate();
  if (!(beta > 0.0 && beta < 1.0 / 6.0)) throw ValidationError("beta must lie in (0, 1/6)");
  if (!(N >= 1.0)) throw ValidationError("N must be >= 1");
}

double coupling_b0(const ThreeBodyPotential& V) {
  V.validate();
  if (V.profile.amplitude == 0.0) return 0.0;
  double coarse, fine;
  if (V.form == PotentialForm::PairProductSum) {
    coarse = 0.5 * std::pow(radial_mass(V.profile, 4), 2);
    fine = 0.5 * std::pow(radial_mass(V.profile, 8), 2);
  } else {
    coarse = triple_product_b0(V.profile, 4);
    fine = triple_product_b0(V.profile, 8);
  }
  if (std::abs(coarse - fine) > 1e-6 * std::abs(fine))
    throw NumericalError("coupling_b0 quadrature resolutions disagree");
  return fine;
}

RVec sample_wN_periodic(const ThreeBodyPotential& V, int n) {
  const double h = kTwoPi / n;
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  RVec out(static_cast<Eigen::Index>(total));
  auto mi = [n, h](int j) { return h * (j <= n / 2 ? j : j - n); };
  std::size_t idx = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) out[static_cast<Eigen::Index>(idx++)] = V.w_scaled({mi(a), mi(b), mi(c)});
  if (V.mass_correction && V.profile.amplitude > 0.0) {
    double mass = h * h * h * out.sum();
    out *= V.profile.integral() / mass;
  }
  return out;
}

PairKernelOnGrid::PairKernelOnGrid(const ThreeBodyPotential& V, GridPtr grid) : grid_(std::move(grid)) {
  V.validate();
  if (V.form != PotentialForm::PairProductSum)
    throw UnsupportedError("grid convolution structure requires the pair_product_sum form");
  wN_ = Field(grid_, sample_wN_periodic(V, grid_->n()).cast<cplx>());
  hat_ = TorusGrid::volume() * transform_forward(wN_);
  mass_ = integrate(wN_).real();
}

CVec PairKernelOnGrid::convolve_values(const CVec& f) const {
  CVec c(f.size()), out(f.size());
  grid_->forward(f.data(), c.data());
  c = c.cwiseProduct(hat_);
  grid_->inverse(c.data(), out.data());
  return out;
}

Field PairKernelOnGrid::convolve(const Field& f) const { return Field(grid_, convolve_values(f.values)); }

RVec hartree_potential(const PairKernelOnGrid& w, const CVec& u) {
  CVec f = u.cwiseAbs2().cast<cplx>();
  CVec g = w.convolve_values(f);
  CVec fg = f.cwiseProduct(g);
  CVec t = w.convolve_values(fg);
  return (g.real().cwiseAbs2() + 2.0 * t.real()) / 6.0;
}

Field hartree_nonlinearity(const Field& u, const ThreeBodyPotential& V) {
  if (V.form != PotentialForm::PairProductSum)
    throw UnsupportedError("hartree_nonlinearity supports only the pair_product_sum form");
  PairKernelOnGrid w(V, u.grid);
  return Field(u.grid, hartree_potential(w, u.values).cast<cplx>());
}

TwoPointFunction::TwoPointFunction(const PairKernelOnGrid& w, const RVec& f) : w_(w), f_(f) {
  g_ = w_.convolve_values(f_.cast<cplx>()).real();
}

double TwoPointFunction::w_at(std::size_t x, std::size_t y) const {
  const auto& grid = *w_.grid();
  auto sx = grid.site(x), sy = grid.site(y);
  return w_.wN().values[static_cast<Eigen::Index>(grid.index_of_site(sx[0] - sy[0], sx[1] - sy[1], sx[2] - sy[2]))]
      .real();
}

double TwoPointFunction::r(std::size_t x, std::size_t y) const {
  const auto& grid = *w_.grid();
  double acc = 0.0;
  for (std::size_t z = 0; z < grid.size(); ++z) acc += w_at(x, z) * w_at(y, z) * f_[static_cast<Eigen::Index>(z)];
  return grid.cell_volume() * acc;
}

double TwoPointFunction::operator()(std::size_t x, std::size_t y) const {
  double wxy = w_at(x, y);
  return (wxy * g_[static_cast<Eigen::Index>(x)] + wxy * g_[static_cast<Eigen::Index>(y)] + r(x, y)) / 3.0;
}

CVec TwoPointFunction::apply(const CVec& phi) const {
  CVec wphi = w_.convolve_values(phi);
  CVec gc = g_.cast<cplx>();
  CVec fc = f_.cast<cplx>();
  CVec t1 = gc.cwiseProduct(wphi);
  CVec t2 = w_.convolve_values(gc.cwiseProduct(phi));
  CVec t3 = w_.convolve_values(fc.cwiseProduct(wphi));
  return (t1 + t2 + t3) / 3.0;
}

Eigen::MatrixXd TwoPointFunction::dense_r() const {
  const auto& grid = *w_.grid();
  if (grid.n() > kDenseLimit) throw ValidationError("dense two-point materialization limited to 16^3 grids");
  const auto S = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd out(S, S);
  CVec a(S);
  for (Eigen::Index x = 0; x < S; ++x) {
    for (Eigen::Index z = 0; z < S; ++z)
      a[z] = f_[z] * w_at(static_cast<std::size_t>(x), static_cast<std::size_t>(z));
    out.row(x) = w_.convolve_values(a).real().transpose();
  }
  return out;
}

Eigen::MatrixXd TwoPointFunction::dense() const {
  Eigen::MatrixXd m = dense_r();
  const auto S = m.rows();
  for (Eigen::Index x = 0; x < S; ++x)
    for (Eigen::Index y = 0; y < S; ++y) {
      double wxy = w_at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      m(x, y) = (m(x, y) + wxy * (g_[x] + g_[y])) / 3.0;
    }
  return m;
}

TwoPointFunction partial_integral_W2(const PairKernelOnGrid& w, const Field& f) {
  if (f.values.imag().cwiseAbs().maxCoeff() > 1e-12 || f.values.real().minCoeff() < -1e-12)
    throw ValidationError("partial_integral_W2 expects a real nonnegative density");
  return TwoPointFunction(w, f.values.real());
}

Field pair_potential_W(const ThreeBodyPotential& V, const GridPtr& grid) {
  ThreeBodyPotential pp = V;
  pp.form = PotentialForm::PairProductSum;
  PairKernelOnGrid w(pp, grid);
  Field ww = w.convolve(w.wN());
  if (V.form == PotentialForm::PairProductSum)
    return Field(grid, (2.0 * w.mass() * w.wN().values + ww.values) / 3.0);
  return Field(grid, w.wN().values.cwiseProduct(ww.values));
}

SobolevRatio sobolev_ratio_diagnostic(const ThreeBodyPotential& V, const GridPtr& grid) {
  Field W = pair_potential_W(V, grid);
  SobolevRatio out;
  const double h3 = grid->cell_volume();
  out.w_norm_32 = std::pow(h3 * W.values.real().cwiseAbs().array().pow(1.5).sum(), 2.0 / 3.0);
  if (out.w_norm_32 == 0.0) return out;
  const auto& k2 = grid->k2_table();
  RVec inv_k(k2.size());
  for (Eigen::Index i = 0; i < k2.size(); ++i) inv_k[i] = k2[i] > 0 ? 1.0 / std::sqrt(k2[i]) : 0.0;
  const RVec Wr = W.values.real();
  MatVec op = [&](const CVec& v, CVec& out_v) {
    CVec c = v.cwiseProduct(inv_k.cast<cplx>()), x(v.size()), y(v.size());
    grid->inverse(c.data(), x.data());
    x = x.cwiseProduct(Wr.cast<cplx>());
    grid->forward(x.data(), y.data());
    out_v = y.cwiseProduct(inv_k.cast<cplx>());
  };
  out.lambda = lanczos_extreme(op, static_cast<Eigen::Index>(grid->size()), true, 300, 1e-10);
  out.ratio = out.lambda / out.w_norm_32;
  return out;
}

}  // namespace qmfd
