#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <memory>

namespace qmfd {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct FftPlans;

// Uniform grid on T^3 = (R / 2piZ)^3 with n points per dimension.
// Sites are ordered lexicographically, index = (i0 * n + i1) * n + i2.
// Spectral arrays use the same ordering with index j mapped to the integer
// wavevector component j for j < n/2 and j - n otherwise.
class TorusGrid {
 public:
  explicit TorusGrid(int n_per_dim);
  ~TorusGrid();
  TorusGrid(const TorusGrid&) = delete;
  TorusGrid& operator=(const TorusGrid&) = delete;

  int n() const { return n_; }
  std::size_t size() const { return size_; }
  double spacing() const { return kTwoPi / n_; }
  double cell_volume() const;
  static double volume() { return kTwoPi * kTwoPi * kTwoPi; }

  std::array<int, 3> wavevector(std::size_t idx) const;
  double k2(std::size_t idx) const { return k2_[idx]; }
  const RVec& k2_table() const { return k2_; }
  std::size_t index_of_wavevector(const std::array<int, 3>& k) const;
  std::array<double, 3> position(std::size_t idx) const;
  std::array<int, 3> site(std::size_t idx) const;
  std::size_t index_of_site(int i0, int i1, int i2) const;

  // Raw transforms. forward yields c_k with f(x) = sum_k c_k e^{ik.x};
  // inverse is its exact inverse. Input and output must not alias.
  void forward(const cplx* in, cplx* out) const;
  void inverse(const cplx* in, cplx* out) const;

 private:
  int n_;
  std::size_t size_;
  RVec k2_;
  std::unique_ptr<FftPlans> plans_;
};

using GridPtr = std::shared_ptr<const TorusGrid>;

GridPtr make_grid(int n_per_dim);

struct Field {
  GridPtr grid;
  CVec values;

  Field() = default;
  explicit Field(GridPtr g) : grid(std::move(g)), values(CVec::Zero(grid->size())) {}
  Field(GridPtr g, CVec v);
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

struct SobolevWeight {
  double s = 0.0;
  double operator()(double k2) const;
};

CVec transform_forward(const Field& f);
Field transform_inverse(const GridPtr& grid, const CVec& coeffs);

Field apply_multiplier(const Field& f, const SobolevWeight& w);
// Generic real or complex multiplier as a function of |k|^2.
template <class Fn>
Field apply_k2_multiplier(const Field& f, Fn&& m) {
  CVec c = transform_forward(f);
  const auto& k2 = f.grid->k2_table();
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] *= m(k2[i]);
  return transform_inverse(f.grid, c);
}

double sobolev_norm(const Field& f, double s);
double l2_norm(const Field& f);
double linf_norm(const Field& f);
cplx inner(const Field& f, const Field& g);  // antilinear in f
cplx integrate(const Field& f);
Field convolve(const Field& f, const Field& g);
// Kinetic energy int |grad f|^2 evaluated spectrally.
double gradient_energy(const Field& f);

void check_same_grid(const Field& f, const Field& g);

}  // namespace qmfd
