#pragma once

#include <array>
#include <string>

#include "qmfd/grid.hpp"

namespace qmfd {

using Vec3 = std::array<double, 3>;

// Quartic bump w(x) = A (1 - |x|^2/R^2)^2 on |x| <= R.
struct PairProfile {
  double amplitude = 1.0;
  double radius = 1.0;

  double operator()(double r2) const;
  double at(const Vec3& x) const;
  // Closed form of the integral over R^3: 32 pi A R^3 / 105.
  double integral() const;
  void validate() const;
};

enum class PotentialForm { PairProductSum, TripleProduct };

std::string to_string(PotentialForm f);
PotentialForm potential_form_from_string(const std::string& s);

struct ThreeBodyPotential {
  PotentialForm form = PotentialForm::PairProductSum;
  PairProfile profile;
  double beta = 0.1;
  double N = 1.0;
  // When true the sampled w_N is rescaled so its grid integral equals the
  // continuum integral of w. Keeps grid-level couplings exactly b0.
  bool mass_correction = true;

  double scale() const;  // N^beta
  // Unscaled V(x, y) on R^6.
  double unscaled(const Vec3& x, const Vec3& y) const;
  // V_N(x, y) = N^{6 beta} V(N^beta x, N^beta y) on R^6 (no periodization).
  double scaled(const Vec3& x, const Vec3& y) const;
  // w_N(x) = N^{3 beta} w(N^beta x).
  double w_scaled(const Vec3& x) const;
  ThreeBodyPotential with_N(double n) const;
  void validate() const;
};

// b0 = 1/2 int int V; quadrature at two resolutions, must agree to 1e-6.
double coupling_b0(const ThreeBodyPotential& V);

// w_N sampled at minimal-image displacements on a periodic grid of n^3
// points with spacing 2pi/n. Returned in lexicographic order.
RVec sample_wN_periodic(const ThreeBodyPotential& V, int n_per_dim);

// Precomputed spectral data for repeated convolutions with w_N on one grid.
class PairKernelOnGrid {
 public:
  PairKernelOnGrid(const ThreeBodyPotential& V, GridPtr grid);
  const Field& wN() const { return wN_; }
  const GridPtr& grid() const { return grid_; }
  double mass() const { return mass_; }
  // (w_N * f)(x) through one forward and one inverse FFT.
  Field convolve(const Field& f) const;
  CVec convolve_values(const CVec& f) const;
  // (2 pi)^3 c_k(w_N), the torus Fourier transform of w_N.
  const CVec& hat() const { return hat_; }

 private:
  GridPtr grid_;
  Field wN_;
  CVec hat_;
  double mass_;
};

// F(x) = 1/2 int int |u(y)|^2 V_N(x-y, x-z) |u(z)|^2 dy dz.
Field hartree_nonlinearity(const Field& u, const ThreeBodyPotential& V);
RVec hartree_potential(const PairKernelOnGrid& w, const CVec& u);

// m(x, y) = int V_N(x-y, x-z) f(z) dz in the decomposed form
// m = (1/3)[w_N(x-y) g(x) + w_N(x-y) g(y) + r(x, y)].
class TwoPointFunction {
 public:
  TwoPointFunction(const PairKernelOnGrid& w, const RVec& f);

  const RVec& g() const { return g_; }
  const RVec& density() const { return f_; }
  double w_at(std::size_t x, std::size_t y) const;  // w_N(x - y)
  double r(std::size_t x, std::size_t y) const;     // lazy O(n^3)
  double operator()(std::size_t x, std::size_t y) const;
  // Integral operator with kernel m applied to phi, via three convolutions.
  CVec apply(const CVec& phi) const;
  // Full matrices, only for grids up to 16^3.
  Eigen::MatrixXd dense_r() const;
  Eigen::MatrixXd dense() const;

  static constexpr int kDenseLimit = 16;

 private:
  const PairKernelOnGrid& w_;
  RVec f_, g_;
};

TwoPointFunction partial_integral_W2(const PairKernelOnGrid& w, const Field& f);

// W(x) = int V_N(x, z) dz on the grid.
Field pair_potential_W(const ThreeBodyPotential& V, const GridPtr& grid);

struct SobolevRatio {
  double lambda = 0.0;
  double w_norm_32 = 0.0;
  double ratio = 0.0;
};
// Top generalized eigenvalue of W v = lambda (-Delta) v over mean-zero v,
// divided by ||W||_{3/2}.
SobolevRatio sobolev_ratio_diagnostic(const ThreeBodyPotential& V, const GridPtr& grid);

}  // namespace qmfd
