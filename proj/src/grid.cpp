#include "qmfd/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "qmfd/error.hpp"

namespace qmfd {

namespace {
// Plan creation in FFTW is not reentrant; execution with new-array calls is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int wave_component(int j, int n) { return j < n / 2 ? j : j - n; }
}  // namespace

struct FftPlans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

TorusGrid::TorusGrid(int n_per_dim) : n_(n_per_dim) {
  if (n_per_dim < 8 || n_per_dim % 2 != 0)
    throw ValidationError("n_per_dim must be even and >= 8, got " + std::to_string(n_per_dim));
  size_ = static_cast<std::size_t>(n_) * n_ * n_;
  k2_.resize(static_cast<Eigen::Index>(size_));
  for (std::size_t i = 0; i < size_; ++i) {
    auto k = wavevector(i);
    k2_[static_cast<Eigen::Index>(i)] = double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
  }
  plans_ = std::make_unique<FftPlans>();
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto* a = fftw_alloc_complex(size_);
  auto* b = fftw_alloc_complex(size_);
  plans_->fwd = fftw_plan_dft_3d(n_, n_, n_, a, b, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans_->bwd = fftw_plan_dft_3d(n_, n_, n_, a, b, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(a);
  fftw_free(b);
}

TorusGrid::~TorusGrid() {
  if (!plans_) return;
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plans_->fwd);
  fftw_destroy_plan(plans_->bwd);
}

double TorusGrid::cell_volume() const {
  double h = spacing();
  return h * h * h;
}

std::array<int, 3> TorusGrid::site(std::size_t idx) const {
  int i2 = static_cast<int>(idx % n_);
  int i1 = static_cast<int>((idx / n_) % n_);
  int i0 = static_cast<int>(idx / (static_cast<std::size_t>(n_) * n_));
  return {i0, i1, i2};
}

std::size_t TorusGrid::index_of_site(int i0, int i1, int i2) const {
  auto wrap = [this](int i) { return ((i % n_) + n_) % n_; };
  return (static_cast<std::size_t>(wrap(i0)) * n_ + wrap(i1)) * n_ + wrap(i2);
}

std::array<int, 3> TorusGrid::wavevector(std::size_t idx) const {
  auto s = site(idx);
  return {wave_component(s[0], n_), wave_component(s[1], n_), wave_component(s[2], n_)};
}

std::size_t TorusGrid::index_of_wavevector(const std::array<int, 3>& k) const {
  return index_of_site(k[0], k[1], k[2]);
}

std::array<double, 3> TorusGrid::position(std::size_t idx) const {
  auto s = site(idx);
  double h = spacing();
  return {h * s[0], h * s[1], h * s[2]};
}

void TorusGrid::forward(const cplx* in, cplx* out) const {
  fftw_execute_dft(plans_->fwd, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
  const double scale = 1.0 / static_cast<double>(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] *= scale;
}

void TorusGrid::inverse(const cplx* in, cplx* out) const {
  fftw_execute_dft(plans_->bwd, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

GridPtr make_grid(int n_per_dim) { return std::make_shared<const TorusGrid>(n_per_dim); }

Field::Field(GridPtr g, CVec v) : grid(std::move(g)), values(std::move(v)) {
  if (static_cast<std::size_t>(values.size()) != grid->size())
    throw ValidationError("field size does not match grid");
}

double SobolevWeight::operator()(double k2) const { return std::pow(1.0 + k2, s); }

void check_same_grid(const Field& f, const Field& g) {
  if (!f.grid || !g.grid) throw ValidationError("field without grid");
  if (f.grid != g.grid && f.grid->n() != g.grid->n()) throw ValidationError("grid mismatch");
  if (f.size() != f.grid->size() || g.size() != g.grid->size())
    throw ValidationError("field size does not match grid");
}

CVec transform_forward(const Field& f) {
  if (!f.grid || f.size() != f.grid->size()) throw ValidationError("field size does not match grid");
  CVec out(f.values.size());
  f.grid->forward(f.values.data(), out.data());
  return out;
}

Field transform_inverse(const GridPtr& grid, const CVec& coeffs) {
  if (static_cast<std::size_t>(coeffs.size()) != grid->size())
    throw ValidationError("coefficient array does not match grid");
  Field out(grid);
  grid->inverse(coeffs.data(), out.values.data());
  return out;
}

Field apply_multiplier(const Field& f, const SobolevWeight& w) {
  if (w.s == 0.0) return f;
  return apply_k2_multiplier(f, [&](double k2) { return w(k2); });
}

double sobolev_norm(const Field& f, double s) {
  CVec c = transform_forward(f);
  const auto& k2 = f.grid->k2_table();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) acc += std::pow(1.0 + k2[i], s) * std::norm(c[i]);
  return std::sqrt(TorusGrid::volume() * acc);
}

double l2_norm(const Field& f) { return std::sqrt(f.grid->cell_volume() * f.values.squaredNorm()); }

double linf_norm(const Field& f) { return f.values.cwiseAbs().maxCoeff(); }

cplx inner(const Field& f, const Field& g) {
  check_same_grid(f, g);
  return f.grid->cell_volume() * f.values.dot(g.values);
}

cplx integrate(const Field& f) { return f.grid->cell_volume() * f.values.sum(); }

Field convolve(const Field& f, const Field& g) {
  check_same_grid(f, g);
  CVec cf = transform_forward(f);
  CVec cg = transform_forward(g);
  CVec prod = TorusGrid::volume() * cf.cwiseProduct(cg);
  return transform_inverse(f.grid, prod);
}

double gradient_energy(const Field& f) {
  CVec c = transform_forward(f);
  const auto& k2 = f.grid->k2_table();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) acc += k2[i] * std::norm(c[i]);
  return TorusGrid::volume() * acc;
}

}  // namespace qmfd
