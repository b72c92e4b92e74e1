#include "qmfd/modes.hpp"

#include <mutex>

#include "qmfd/error.hpp"

namespace qmfd {

namespace {

std::size_t upow(std::size_t d, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= d;
  return r;
}

// Apply Q = 1 - |u><u| to each of the first naxes row axes of M.
void project_rows(CMat& M, int naxes, const CVec& u) {
  const auto d = static_cast<std::size_t>(u.size());
  const CVec uc = u.conjugate();
  for (int j = 0; j < naxes; ++j) {
    const std::size_t pre = upow(d, j), post = upow(d, naxes - 1 - j);
    for (std::size_t p = 0; p < pre; ++p)
      for (std::size_t q = 0; q < post; ++q) {
        auto row = [&](std::size_t i) { return static_cast<Eigen::Index>((p * d + i) * post + q); };
        for (Eigen::Index b = 0; b < M.cols(); ++b) {
          cplx t = 0;
          for (std::size_t k = 0; k < d; ++k) t += uc[static_cast<Eigen::Index>(k)] * M(row(k), b);
          if (t == cplx(0)) continue;
          for (std::size_t i = 0; i < d; ++i) M(row(i), b) -= u[static_cast<Eigen::Index>(i)] * t;
        }
      }
  }
}

// ---------------------------------------------------------------- momentum model

class MomentumModeModel : public ModeModel {
 public:
  MomentumModeModel(const ModeBasis& basis, const ThreeBodyPotential& V)
      : grid_(basis.grid), ks_(basis.wavevectors), hat_(PairKernelOnGrid(V, basis.grid).hat()) {}

  int dim() const override { return static_cast<int>(ks_.size()); }

  CMat laplacian() const override {
    CMat L = CMat::Zero(dim(), dim());
    for (int j = 0; j < dim(); ++j) {
      const auto& k = ks_[static_cast<std::size_t>(j)];
      L(j, j) = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    }
    return L;
  }

  KernelPtr pattern(const SlotPattern& p) const override {
    const int c = p.creates(), a = p.annihilates();
    const auto d = static_cast<std::size_t>(dim());
    const std::size_t rows = upow(d, c), cols = upow(d, a);
    CMat K = CMat::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const int n = grid_->n();
    const double pref = std::pow(kTwoPi, -6) / 3.0;
    auto what = [&](const std::array<int, 3>& q) { return hat_[static_cast<Eigen::Index>(grid_->index_of_wavevector(q))]; };
    std::vector<int> oi(3), ii(3);
    for (std::size_t r = 0; r < rows; ++r) {
      // Decode the open out indices in variable order.
      std::size_t rr = r;
      for (int v = 2; v >= 0; --v)
        if (p.out_open[static_cast<std::size_t>(v)]) {
          oi[static_cast<std::size_t>(v)] = static_cast<int>(rr % d);
          rr /= d;
        }
      for (std::size_t col = 0; col < cols; ++col) {
        std::size_t cc = col;
        for (int v = 2; v >= 0; --v)
          if (p.in_open[static_cast<std::size_t>(v)]) {
            ii[static_cast<std::size_t>(v)] = static_cast<int>(cc % d);
            cc /= d;
          }
        std::array<std::array<int, 3>, 3> mom{};
        std::array<int, 3> total{0, 0, 0};
        for (std::size_t v = 0; v < 3; ++v) {
          for (int comp = 0; comp < 3; ++comp) {
            const int kout = p.out_open[v] ? ks_[static_cast<std::size_t>(oi[v])][static_cast<std::size_t>(comp)] : 0;
            const int kin = p.in_open[v] ? ks_[static_cast<std::size_t>(ii[v])][static_cast<std::size_t>(comp)] : 0;
            mom[v][static_cast<std::size_t>(comp)] = kin - kout;
            total[static_cast<std::size_t>(comp)] += kin - kout;
          }
        }
        bool conserved = true;
        for (int comp = 0; comp < 3; ++comp) conserved = conserved && (total[static_cast<std::size_t>(comp)] % n == 0);
        if (!conserved) continue;
        const cplx w1 = what(mom[0]), w2 = what(mom[1]), w3 = what(mom[2]);
        K(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) = pref * (w2 * w3 + w1 * w3 + w1 * w2);
      }
    }
    return dense_kernel(c, a, dim(), std::move(K));
  }

 private:
  GridPtr grid_;
  std::vector<std::array<int, 3>> ks_;
  CVec hat_;
};

// ---------------------------------------------------------------- site model

class SitePatternKernel : public Kernel {
 public:
  SitePatternKernel(SlotPattern p, std::shared_ptr<const std::vector<double>> V, CVec u)
      : p_(p), V_(std::move(V)), u_(std::move(u)) {}

  int creates() const override { return p_.creates(); }
  int annihilates() const override { return p_.annihilates(); }
  int dim() const override { return static_cast<int>(u_.size()); }

  void apply(const CMat& X, CMat& Y) const override {
    if (small()) {
      Y = dense_cached() * X;
      return;
    }
    CMat Xq = X;
    project_rows(Xq, annihilates(), u_);
    Y = CMat::Zero(static_cast<Eigen::Index>(upow(static_cast<std::size_t>(dim()), creates())), X.cols());
    raw(&Xq, Y);
    project_rows(Y, creates(), u_);
  }

  CMat dense() const override {
    if (small()) return dense_cached();
    return Kernel::dense();
  }

  KernelPtr adjoint() const override { return std::make_shared<SitePatternKernel>(p_.swapped(), V_, u_); }

 private:
  bool small() const { return creates() + annihilates() <= 3; }

  const CMat& dense_cached() const {
    std::call_once(once_, [this] {
      const auto S = static_cast<std::size_t>(dim());
      CMat D = CMat::Zero(static_cast<Eigen::Index>(upow(S, creates())), static_cast<Eigen::Index>(upow(S, annihilates())));
      raw(nullptr, D);
      project_rows(D, creates(), u_);
      CMat Dt = D.adjoint();
      project_rows(Dt, annihilates(), u_);
      dense_ = Dt.adjoint();
    });
    return dense_;
  }

  // Unprojected pattern sum. With X == nullptr the kernel matrix itself is
  // accumulated into Y; otherwise Y += K X.
  void raw(const CMat* X, CMat& Y) const {
    const auto S = static_cast<std::size_t>(dim());
    const CVec uc = u_.conjugate();
    const auto& V = *V_;
    std::size_t var[3];
    for (var[0] = 0; var[0] < S; ++var[0])
      for (var[1] = 0; var[1] < S; ++var[1])
        for (var[2] = 0; var[2] < S; ++var[2]) {
          const double v = V[(var[0] * S + var[1]) * S + var[2]];
          if (v == 0.0) continue;
          cplx s = v;
          std::size_t orow = 0, irow = 0;
          for (std::size_t k = 0; k < 3; ++k) {
            const auto idx = static_cast<Eigen::Index>(var[k]);
            if (p_.out_open[k]) orow = orow * S + var[k];
            else s *= uc[idx];
            if (p_.in_open[k]) irow = irow * S + var[k];
            else s *= u_[idx];
          }
          if (s == cplx(0)) continue;
          if (X) Y.row(static_cast<Eigen::Index>(orow)) += s * X->row(static_cast<Eigen::Index>(irow));
          else Y(static_cast<Eigen::Index>(orow), static_cast<Eigen::Index>(irow)) += s;
        }
  }

  SlotPattern p_;
  std::shared_ptr<const std::vector<double>> V_;
  CVec u_;
  mutable std::once_flag once_;
  mutable CMat dense_;
};

}  // namespace

// ---------------------------------------------------------------- SlotPattern

int SlotPattern::creates() const { return out_open[0] + out_open[1] + out_open[2]; }
int SlotPattern::annihilates() const { return in_open[0] + in_open[1] + in_open[2]; }

SlotPattern SlotPattern::swapped() const { return SlotPattern{in_open, out_open}; }

SlotPattern SlotPattern::parse(const std::string& s) {
  if (s.size() != 8 || s[2] != ',' || s[5] != ',') throw ValidationError("slot pattern must look like OF,FO,FF");
  SlotPattern p;
  for (std::size_t v = 0; v < 3; ++v) {
    const char o = s[3 * v], i = s[3 * v + 1];
    if ((o != 'O' && o != 'F') || (i != 'O' && i != 'F')) throw ValidationError("slot letters must be O or F");
    p.out_open[v] = o == 'O';
    p.in_open[v] = i == 'O';
  }
  return p;
}

std::string SlotPattern::str() const {
  std::string s;
  for (std::size_t v = 0; v < 3; ++v) {
    if (v) s += ',';
    s += out_open[v] ? 'O' : 'F';
    s += in_open[v] ? 'O' : 'F';
  }
  return s;
}

int SlotPattern::multiplicity() const {
  int count[4] = {0, 0, 0, 0};
  for (std::size_t v = 0; v < 3; ++v) ++count[2 * out_open[v] + in_open[v]];
  int denom = 1;
  for (int c : count)
    for (int k = 2; k <= c; ++k) denom *= k;
  return 6 / denom;
}

// ---------------------------------------------------------------- models

CMat ModeModel::one_minus_laplacian() const { return CMat::Identity(dim(), dim()) + laplacian(); }

double ModeModel::condensate_energy() const { return pattern(SlotPattern::parse("FF,FF,FF"))->dense()(0, 0).real(); }

std::shared_ptr<const ModeModel> momentum_mode_model(const ModeBasis& basis, const ThreeBodyPotential& V) {
  if (!basis.constant_condensate) throw UnsupportedError("momentum mode model requires the constant condensate");
  V.validate();
  return std::make_shared<MomentumModeModel>(basis, V);
}

SiteModeModel::SiteModeModel(CMat minus_laplacian, std::shared_ptr<const std::vector<double>> V, CVec u)
    : lap_(std::move(minus_laplacian)), V_(std::move(V)), u_(std::move(u)) {
  const auto S = static_cast<std::size_t>(u_.size());
  if (lap_.rows() != u_.size() || lap_.cols() != u_.size()) throw ValidationError("laplacian size mismatch");
  if (!V_ || V_->size() != S * S * S) throw ValidationError("three-body table must have S^3 entries");
  if (std::abs(u_.norm() - 1.0) > 1e-10) throw ValidationError("condensate must have unit l2 norm");
}

CMat SiteModeModel::laplacian() const {
  CMat L = lap_;
  project_rows(L, 1, u_);
  CMat Lt = L.adjoint();
  project_rows(Lt, 1, u_);
  return Lt.adjoint();
}

KernelPtr SiteModeModel::pattern(const SlotPattern& p) const { return std::make_shared<SitePatternKernel>(p, V_, u_); }

}  // namespace qmfd
