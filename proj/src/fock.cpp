#include "qmfd/fock.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "qmfd/error.hpp"

namespace qmfd {

namespace {

using Triplet = Eigen::Triplet<cplx>;

double ipow(int d, int e) {
  double r = 1;
  for (int i = 0; i < e; ++i) r *= d;
  return r;
}

std::size_t upow(int d, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= static_cast<std::size_t>(d);
  return r;
}

// Falling-factorial style ratio sqrt(a! / b!) for a >= b >= 0.
double sqrt_fact_ratio(int a, int b) {
  double r = 1;
  for (int k = b + 1; k <= a; ++k) r *= k;
  return std::sqrt(r);
}

// Advance a nondecreasing tuple in lexicographic order; false when exhausted.
bool next_multiset(std::vector<std::uint16_t>& t, int d) {
  for (int j = static_cast<int>(t.size()) - 1; j >= 0; --j) {
    if (t[static_cast<std::size_t>(j)] + 1 < d) {
      std::uint16_t v = static_cast<std::uint16_t>(t[static_cast<std::size_t>(j)] + 1);
      for (std::size_t k = static_cast<std::size_t>(j); k < t.size(); ++k) t[k] = v;
      return true;
    }
  }
  return false;
}

std::vector<std::vector<std::uint16_t>> all_multisets(int d, int s) {
  std::vector<std::vector<std::uint16_t>> out;
  std::vector<std::uint16_t> t(static_cast<std::size_t>(s), 0);
  do {
    out.push_back(t);
  } while (s > 0 && next_multiset(t, d));
  return out;
}

std::size_t flat_index(const std::vector<std::uint16_t>& t, int d) {
  std::size_t r = 0;
  for (auto v : t) r = r * static_cast<std::size_t>(d) + v;
  return r;
}

// Kernel values summed over all distinct orderings of the two multisets.
CMat symmetrize_kernel(const CMat& K, int d, const std::vector<std::vector<std::uint16_t>>& outs,
                       const std::vector<std::vector<std::uint16_t>>& ins) {
  std::vector<std::vector<std::size_t>> in_perm(ins.size()), out_perm(outs.size());
  auto perms = [&](std::vector<std::uint16_t> t) {
    std::vector<std::size_t> r;
    do r.push_back(flat_index(t, d));
    while (std::next_permutation(t.begin(), t.end()));
    return r;
  };
  for (std::size_t i = 0; i < ins.size(); ++i) in_perm[i] = perms(ins[i]);
  for (std::size_t i = 0; i < outs.size(); ++i) out_perm[i] = perms(outs[i]);
  CMat S(static_cast<Eigen::Index>(outs.size()), static_cast<Eigen::Index>(ins.size()));
  for (std::size_t I = 0; I < outs.size(); ++I)
    for (std::size_t J = 0; J < ins.size(); ++J) {
      cplx acc = 0;
      for (auto r : out_perm[I])
        for (auto c : in_perm[J]) acc += K(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      S(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J)) = acc;
    }
  return S;
}

struct SectorMap {
  std::vector<std::uint32_t> state;  // local index inside the sector
  std::vector<double> weight;        // 1 / sqrt(number of distinct orderings)
};

}  // namespace

// ---------------------------------------------------------------- FockBasis

std::size_t FockBasis::multiset_count(int r, int s) {
  if (s == 0) return 1;
  if (r <= 0) return 0;
  // C(r + s - 1, s) computed incrementally; exact for the sizes used here.
  long double c = 1;
  for (int i = 1; i <= s; ++i) c = c * (r - 1 + i) / i;
  return static_cast<std::size_t>(std::llround(static_cast<double>(c)));
}

FockBasis::FockBasis(int modes, int cutoff) : d_(modes), P_(cutoff) {
  if (modes < 1 || modes > 65535) throw ValidationError("mode count must be in [1, 65535]");
  if (cutoff < 0) throw ValidationError("particle cutoff must be >= 0");
  offset_.assign(static_cast<std::size_t>(P_) + 2, 0);
  for (int n = 0; n <= P_; ++n)
    offset_[static_cast<std::size_t>(n) + 1] = offset_[static_cast<std::size_t>(n)] + multiset_count(d_, n);
  dim_ = offset_.back();
  if (dim_ > 20'000'000) throw ValidationError("Fock basis dimension too large");
  sector_.resize(dim_);
  tuples_.assign(dim_ * static_cast<std::size_t>(std::max(P_, 1)), 0);
  if (P_ == 0) tuples_.resize(1);
  std::size_t idx = 0;
  for (int n = 0; n <= P_; ++n) {
    std::vector<std::uint16_t> t(static_cast<std::size_t>(n), 0);
    do {
      sector_[idx] = n;
      std::copy(t.begin(), t.end(), tuples_.begin() + static_cast<std::ptrdiff_t>(idx * static_cast<std::size_t>(P_)));
      ++idx;
    } while (n > 0 && next_multiset(t, d_));
  }
  prefix_.assign(static_cast<std::size_t>(P_) + 1, std::vector<std::size_t>(static_cast<std::size_t>(d_) + 1, 0));
  for (int s = 0; s <= P_; ++s)
    for (int i = 0; i < d_; ++i)
      prefix_[static_cast<std::size_t>(s)][static_cast<std::size_t>(i) + 1] =
          prefix_[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] + multiset_count(d_ - i, s);
}

std::size_t FockBasis::index_of_sorted(const std::uint16_t* t, int n) const {
  std::size_t rank = 0;
  std::uint16_t prev = 0;
  for (int j = 0; j < n; ++j) {
    const auto& pre = prefix_[static_cast<std::size_t>(n - 1 - j)];
    rank += pre[t[j]] - pre[prev];
    prev = t[j];
  }
  return offset_[static_cast<std::size_t>(n)] + rank;
}

std::size_t FockBasis::index_of_occupations(const std::vector<int>& occ) const {
  if (static_cast<int>(occ.size()) != d_) throw ValidationError("occupation vector has wrong length");
  std::vector<std::uint16_t> t;
  for (int m = 0; m < d_; ++m) {
    if (occ[static_cast<std::size_t>(m)] < 0) throw ValidationError("negative occupation");
    for (int k = 0; k < occ[static_cast<std::size_t>(m)]; ++k) t.push_back(static_cast<std::uint16_t>(m));
  }
  if (static_cast<int>(t.size()) > P_) throw ValidationError("occupation exceeds particle cutoff");
  return index_of_sorted(t.data(), static_cast<int>(t.size()));
}

int FockBasis::occupation(std::size_t idx, int mode) const {
  const std::uint16_t* t = tuple(idx);
  int c = 0;
  for (int j = 0; j < sector_[idx]; ++j) c += (t[j] == mode);
  return c;
}

std::vector<int> FockBasis::occupations(std::size_t idx) const {
  std::vector<int> occ(static_cast<std::size_t>(d_), 0);
  const std::uint16_t* t = tuple(idx);
  for (int j = 0; j < sector_[idx]; ++j) ++occ[t[j]];
  return occ;
}

// ---------------------------------------------------------------- vectors

FockVector::FockVector(FockBasisPtr b, CVec c) : basis(std::move(b)), coeffs(std::move(c)) {
  if (static_cast<std::size_t>(coeffs.size()) != basis->dim()) throw ValidationError("Fock vector length mismatch");
}

FockVector FockVector::vacuum(FockBasisPtr b) {
  FockVector v(std::move(b));
  v.coeffs[0] = 1.0;
  return v;
}

std::vector<double> FockVector::sector_weights() const {
  std::vector<double> w(static_cast<std::size_t>(basis->cutoff()) + 1, 0.0);
  for (int n = 0; n <= basis->cutoff(); ++n)
    w[static_cast<std::size_t>(n)] =
        coeffs.segment(static_cast<Eigen::Index>(basis->sector_begin(n)), static_cast<Eigen::Index>(basis->sector_size(n)))
            .squaredNorm();
  return w;
}

// ---------------------------------------------------------------- operators

FockOperator FockOperator::adjoint() const {
  FockOperator r{basis, SpMat(matrix.adjoint()), leakage};
  return r;
}

FockOperator FockOperator::operator+(const FockOperator& o) const {
  if (basis->dim() != o.basis->dim()) throw ValidationError("operator basis mismatch");
  return FockOperator{basis, SpMat(matrix + o.matrix), std::hypot(leakage, o.leakage)};
}

FockOperator FockOperator::scaled(cplx s) const { return FockOperator{basis, SpMat(s * matrix), std::abs(s) * leakage}; }

CMat FockOperator::dense_block(int m) const {
  const auto k = static_cast<Eigen::Index>(basis->sector_end(std::min(m, basis->cutoff())));
  CMat D = CMat::Zero(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (SpMat::InnerIterator it(matrix, r); it; ++it)
      if (it.col() < k) D(r, it.col()) += it.value();
  return D;
}

FockOperator zero_operator(const FockBasisPtr& basis) {
  const auto n = static_cast<Eigen::Index>(basis->dim());
  return FockOperator{basis, SpMat(n, n), 0.0};
}

FockOperator ladder(const FockBasisPtr& basis, int mode, bool create) {
  if (mode < 0 || mode >= basis->modes()) throw ValidationError("mode index out of range");
  std::vector<Triplet> trip;
  double leak2 = 0;
  std::vector<std::uint16_t> t;
  for (std::size_t idx = 0; idx < basis->dim(); ++idx) {
    const int n = basis->sector(idx);
    const std::uint16_t* src = basis->tuple(idx);
    const int occ = basis->occupation(idx, mode);
    t.assign(src, src + n);
    if (create) {
      if (n == basis->cutoff()) {
        leak2 += occ + 1;
        continue;
      }
      t.insert(std::upper_bound(t.begin(), t.end(), static_cast<std::uint16_t>(mode)), static_cast<std::uint16_t>(mode));
      trip.emplace_back(static_cast<int>(basis->index_of_sorted(t.data(), n + 1)), static_cast<int>(idx),
                        std::sqrt(static_cast<double>(occ + 1)));
    } else if (occ > 0) {
      t.erase(std::lower_bound(t.begin(), t.end(), static_cast<std::uint16_t>(mode)));
      trip.emplace_back(static_cast<int>(basis->index_of_sorted(t.data(), n - 1)), static_cast<int>(idx),
                        std::sqrt(static_cast<double>(occ)));
    }
  }
  const auto dim = static_cast<Eigen::Index>(basis->dim());
  FockOperator op{basis, SpMat(dim, dim), std::sqrt(leak2)};
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  return op;
}

FockOperator dGamma(const FockBasisPtr& basis, const CMat& A) {
  const int d = basis->modes();
  if (A.rows() != d || A.cols() != d) throw ValidationError("dGamma matrix has wrong size");
  std::vector<Triplet> trip;
  std::vector<std::uint16_t> t, s;
  for (std::size_t idx = 0; idx < basis->dim(); ++idx) {
    const int n = basis->sector(idx);
    const std::uint16_t* src = basis->tuple(idx);
    for (int j = 0; j < n; ++j) {
      if (j > 0 && src[j] == src[j - 1]) continue;
      const int q = src[j];
      const int nq = basis->occupation(idx, q);
      t.assign(src, src + n);
      t.erase(t.begin() + j);
      for (int p = 0; p < d; ++p) {
        const cplx a = A(p, q);
        if (a == cplx(0)) continue;
        int np = 0;
        for (auto v : t) np += (v == p);
        s = t;
        s.insert(std::upper_bound(s.begin(), s.end(), static_cast<std::uint16_t>(p)), static_cast<std::uint16_t>(p));
        trip.emplace_back(static_cast<int>(basis->index_of_sorted(s.data(), n)), static_cast<int>(idx),
                          a * std::sqrt(static_cast<double>(nq) * (np + 1)));
      }
    }
  }
  const auto dim = static_cast<Eigen::Index>(basis->dim());
  FockOperator op{basis, SpMat(dim, dim), 0.0};
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  return op;
}

FockOperator number_operator(const FockBasisPtr& basis) {
  const auto dim = static_cast<Eigen::Index>(basis->dim());
  FockOperator op{basis, SpMat(dim, dim), 0.0};
  std::vector<Triplet> trip;
  for (std::size_t idx = 0; idx < basis->dim(); ++idx)
    trip.emplace_back(static_cast<int>(idx), static_cast<int>(idx), static_cast<double>(basis->sector(idx)));
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  return op;
}

// ---------------------------------------------------------------- kernels

CMat Kernel::dense() const {
  const auto cols = static_cast<Eigen::Index>(upow(dim(), annihilates()));
  CMat Y;
  apply(CMat::Identity(cols, cols), Y);
  return Y;
}

DenseKernel::DenseKernel(int c, int a, int d, CMat K) : c_(c), a_(a), d_(d), K_(std::move(K)) {
  if (K_.rows() != static_cast<Eigen::Index>(upow(d, c)) || K_.cols() != static_cast<Eigen::Index>(upow(d, a)))
    throw ValidationError("dense kernel has wrong shape");
}

KernelPtr DenseKernel::adjoint() const { return std::make_shared<DenseKernel>(a_, c_, d_, K_.adjoint()); }

KernelPtr dense_kernel(int c, int a, int d, CMat K) { return std::make_shared<DenseKernel>(c, a, d, std::move(K)); }

Term Term::adjoint() const {
  Term t;
  t.label = label + "*";
  t.kernel = kernel->adjoint();
  const int shift = kernel->annihilates() - kernel->creates();
  auto f = factor;
  // The adjoint carries the factor on its output side, i.e. on input sector + a - c.
  if (f) t.factor = [f, shift](int n) { return f(n + shift); };
  t.scale = std::conj(scale);
  return t;
}

TermList adjoint_terms(const TermList& terms) {
  TermList out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(t.adjoint());
  return out;
}

FockOperator assemble_sparse(const FockBasisPtr& basis, const TermList& terms) {
  const int d = basis->modes();
  const int P = basis->cutoff();
  std::vector<Triplet> trip;
  double leak2 = 0;
  for (const auto& term : terms) {
    const int c = term.kernel->creates(), a = term.kernel->annihilates();
    if (term.kernel->dim() != d) throw ValidationError("kernel mode count differs from basis");
    if (ipow(d, c + a) > 4e7) throw ValidationError("kernel too large for sparse assembly");
    const CMat K = term.kernel->dense();
    const auto outs = all_multisets(d, c), ins = all_multisets(d, a);
    const CMat S = symmetrize_kernel(K, d, outs, ins);
    std::vector<int> occ(static_cast<std::size_t>(d)), rem(static_cast<std::size_t>(d));
    std::vector<std::uint16_t> tgt;
    for (std::size_t idx = 0; idx < basis->dim(); ++idx) {
      const int n = basis->sector(idx);
      if (n < a) continue;
      const double f = term.factor ? term.factor(n) : 1.0;
      if (f == 0.0) continue;
      std::fill(occ.begin(), occ.end(), 0);
      const std::uint16_t* src = basis->tuple(idx);
      for (int j = 0; j < n; ++j) ++occ[src[j]];
      const int np = n - a + c;
      for (std::size_t J = 0; J < ins.size(); ++J) {
        rem = occ;
        double amp = 1;
        bool ok = true;
        for (auto v : ins[J]) {
          if (rem[v] == 0) {
            ok = false;
            break;
          }
          amp *= std::sqrt(static_cast<double>(rem[v]));
          --rem[v];
        }
        if (!ok) continue;
        for (std::size_t I = 0; I < outs.size(); ++I) {
          const cplx k = S(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(J));
          if (k == cplx(0)) continue;
          std::vector<int> r2 = rem;
          double amp2 = amp;
          for (auto v : outs[I]) {
            ++r2[v];
            amp2 *= std::sqrt(static_cast<double>(r2[v]));
          }
          const cplx val = term.scale * f * k * amp2;
          if (np > P) {
            leak2 += std::norm(val);
            continue;
          }
          tgt.clear();
          for (int m = 0; m < d; ++m)
            for (int q = 0; q < r2[static_cast<std::size_t>(m)]; ++q) tgt.push_back(static_cast<std::uint16_t>(m));
          trip.emplace_back(static_cast<int>(basis->index_of_sorted(tgt.data(), np)), static_cast<int>(idx), val);
        }
      }
    }
  }
  const auto dim = static_cast<Eigen::Index>(basis->dim());
  FockOperator op{basis, SpMat(dim, dim), std::sqrt(leak2)};
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.prune(cplx(0.0));
  return op;
}

// ---------------------------------------------------------------- tensor path

namespace {

const SectorMap& sector_map(const FockBasis& basis, int n) {
  // Cached per (basis, sector); bases live for the duration of an experiment.
  static std::mutex mu;
  struct Entry {
    const FockBasis* basis;
    int d, P, n;
    std::unique_ptr<SectorMap> map;
  };
  static std::vector<Entry> cache;
  std::lock_guard<std::mutex> lock(mu);
  for (auto& e : cache)
    if (e.basis == &basis && e.d == basis.modes() && e.P == basis.cutoff() && e.n == n) return *e.map;
  const int d = basis.modes();
  const std::size_t total = upow(d, n);
  if (total > 50'000'000) throw ValidationError("sector tensor too large");
  auto m = std::make_unique<SectorMap>();
  m->state.resize(total);
  m->weight.resize(total);
  std::vector<std::uint16_t> t(static_cast<std::size_t>(n));
  const std::size_t begin = n <= basis.cutoff() ? basis.sector_begin(n) : 0;
  for (std::size_t f = 0; f < total; ++f) {
    std::size_t r = f;
    for (int j = n - 1; j >= 0; --j) {
      t[static_cast<std::size_t>(j)] = static_cast<std::uint16_t>(r % static_cast<std::size_t>(d));
      r /= static_cast<std::size_t>(d);
    }
    std::sort(t.begin(), t.end());
    double count = 1;
    int run = 1;
    for (int j = 1; j <= n; ++j) {
      count *= j;
      if (j < n && t[static_cast<std::size_t>(j)] == t[static_cast<std::size_t>(j) - 1]) {
        count /= ++run;
      } else {
        run = 1;
      }
    }
    m->state[f] = static_cast<std::uint32_t>(basis.index_of_sorted(t.data(), n) - begin);
    m->weight[f] = 1.0 / std::sqrt(count);
  }
  cache.push_back(Entry{&basis, d, basis.cutoff(), n, std::move(m)});
  return *cache.back().map;
}

}  // namespace

CVec sector_to_tensor(const FockBasis& basis, const CVec& v, int n) {
  const auto& m = sector_map(basis, n);
  const auto begin = static_cast<Eigen::Index>(basis.sector_begin(n));
  CVec T(static_cast<Eigen::Index>(m.state.size()));
  for (std::size_t f = 0; f < m.state.size(); ++f)
    T[static_cast<Eigen::Index>(f)] = v[begin + static_cast<Eigen::Index>(m.state[f])] * m.weight[f];
  return T;
}

void tensor_to_sector(const FockBasis& basis, const CVec& tensor, int n, CVec& v, cplx scale) {
  const auto& m = sector_map(basis, n);
  const auto begin = static_cast<Eigen::Index>(basis.sector_begin(n));
  for (std::size_t f = 0; f < m.state.size(); ++f)
    v[begin + static_cast<Eigen::Index>(m.state[f])] += scale * m.weight[f] * tensor[static_cast<Eigen::Index>(f)];
}

void apply_terms(const FockBasis& basis, const TermList& terms, const CVec& in, CVec& out) {
  const int d = basis.modes();
  const int P = basis.cutoff();
  if (static_cast<std::size_t>(in.size()) != basis.dim()) throw ValidationError("input vector length mismatch");
  out = CVec::Zero(in.size());
  std::vector<CVec> tensors(static_cast<std::size_t>(P) + 1);
  for (int n = 0; n <= P; ++n) tensors[static_cast<std::size_t>(n)] = sector_to_tensor(basis, in, n);
  using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (const auto& term : terms) {
    const int c = term.kernel->creates(), a = term.kernel->annihilates();
    for (int n = a; n <= P; ++n) {
      const int np = n - a + c;
      if (np > P) continue;
      const double f = term.factor ? term.factor(n) : 1.0;
      if (f == 0.0) continue;
      const auto rows_in = static_cast<Eigen::Index>(upow(d, a));
      const auto rest = static_cast<Eigen::Index>(upow(d, n - a));
      Eigen::Map<const RowMat> T(tensors[static_cast<std::size_t>(n)].data(), rows_in, rest);
      CMat X = T;
      CMat Y;
      term.kernel->apply(X, Y);
      CVec U(Y.rows() * Y.cols());
      Eigen::Map<RowMat>(U.data(), Y.rows(), Y.cols()) = Y;
      const double comb = sqrt_fact_ratio(n, n - a) * sqrt_fact_ratio(np, n - a);
      tensor_to_sector(basis, U, np, out, term.scale * (f * comb));
    }
  }
}

}  // namespace qmfd
