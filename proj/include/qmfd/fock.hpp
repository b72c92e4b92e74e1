#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qmfd/grid.hpp"

namespace qmfd {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using CMat = Eigen::MatrixXcd;

// Occupation-number basis of all states with at most P bosons in d modes.
// States are grouped by particle number; inside a sector they are ordered
// lexicographically by their sorted mode tuple, so the index of any tuple
// follows from a closed-form multiset rank.
class FockBasis {
 public:
  FockBasis(int modes, int cutoff);

  int modes() const { return d_; }
  int cutoff() const { return P_; }
  std::size_t dim() const { return dim_; }
  std::size_t sector_begin(int n) const { return offset_[static_cast<std::size_t>(n)]; }
  std::size_t sector_end(int n) const { return offset_[static_cast<std::size_t>(n) + 1]; }
  std::size_t sector_size(int n) const { return sector_end(n) - sector_begin(n); }
  int sector(std::size_t idx) const { return sector_[idx]; }
  // Sorted mode tuple of a state (length = its sector).
  const std::uint16_t* tuple(std::size_t idx) const { return &tuples_[idx * static_cast<std::size_t>(P_)]; }
  int occupation(std::size_t idx, int mode) const;
  std::vector<int> occupations(std::size_t idx) const;
  // Index of a sorted tuple of length n.
  std::size_t index_of_sorted(const std::uint16_t* t, int n) const;
  std::size_t index_of_occupations(const std::vector<int>& occ) const;
  // Number of multisets of size s drawn from r modes.
  static std::size_t multiset_count(int r, int s);

 private:
  int d_, P_;
  std::size_t dim_;
  std::vector<std::size_t> offset_;
  std::vector<int> sector_;
  std::vector<std::uint16_t> tuples_;
  // prefix_[s][i] = sum_{v < i} (#multisets of size s from modes v..d-1)
  std::vector<std::vector<std::size_t>> prefix_;
};

using FockBasisPtr = std::shared_ptr<const FockBasis>;

struct FockVector {
  FockBasisPtr basis;
  CVec coeffs;

  explicit FockVector(FockBasisPtr b) : basis(std::move(b)), coeffs(CVec::Zero(static_cast<Eigen::Index>(basis->dim()))) {}
  FockVector(FockBasisPtr b, CVec c);
  static FockVector vacuum(FockBasisPtr b);
  std::vector<double> sector_weights() const;
  double norm() const { return coeffs.norm(); }
};

struct FockOperator {
  FockBasisPtr basis;
  SpMat matrix;
  double leakage = 0.0;  // Frobenius norm of dropped entries above the cutoff

  FockOperator adjoint() const;
  FockOperator operator+(const FockOperator& o) const;
  FockOperator scaled(cplx s) const;
  CVec apply(const CVec& v) const { return matrix * v; }
  // Dense restriction to sectors <= m.
  CMat dense_block(int m) const;
};

FockOperator ladder(const FockBasisPtr& basis, int mode, bool create);
FockOperator dGamma(const FockBasisPtr& basis, const CMat& A);
FockOperator number_operator(const FockBasisPtr& basis);
FockOperator zero_operator(const FockBasisPtr& basis);

// A linear map from d^a-index tensors to d^c-index tensors. Index tuples are
// flattened row-major, first index most significant. apply works on a batch
// of columns: X is d^a x B, Y is d^c x B.
class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual int creates() const = 0;
  virtual int annihilates() const = 0;
  virtual int dim() const = 0;
  virtual void apply(const CMat& X, CMat& Y) const = 0;
  virtual std::shared_ptr<const Kernel> adjoint() const = 0;
  // Matrix of size d^c x d^a.
  virtual CMat dense() const;
};
using KernelPtr = std::shared_ptr<const Kernel>;

class DenseKernel : public Kernel {
 public:
  DenseKernel(int c, int a, int d, CMat K);
  int creates() const override { return c_; }
  int annihilates() const override { return a_; }
  int dim() const override { return d_; }
  void apply(const CMat& X, CMat& Y) const override { Y = K_ * X; }
  KernelPtr adjoint() const override;
  CMat dense() const override { return K_; }
  const CMat& matrix() const { return K_; }

 private:
  int c_, a_, d_;
  CMat K_;
};

KernelPtr dense_kernel(int c, int a, int d, CMat K);

// One normal-ordered term  scale * sum K(I;J) a*_I a_J f(N),
// where f is evaluated on the input sector.
struct Term {
  std::string label;
  KernelPtr kernel;
  std::function<double(int)> factor;
  cplx scale = 1.0;

  Term adjoint() const;
};
using TermList = std::vector<Term>;

TermList adjoint_terms(const TermList& terms);

// Sparse assembly through multiset-symmetrized kernels (small d).
FockOperator assemble_sparse(const FockBasisPtr& basis, const TermList& terms);

// Matrix-free application through symmetric sector tensors (any d, small P).
void apply_terms(const FockBasis& basis, const TermList& terms, const CVec& in, CVec& out);

// Conversions between a sector block and its full symmetric tensor.
CVec sector_to_tensor(const FockBasis& basis, const CVec& v, int n);
void tensor_to_sector(const FockBasis& basis, const CVec& tensor, int n, CVec& v, cplx scale = 1.0);

// Clamped square root used for the sqrt(N - n - j) factors.
inline double sqrt_clamped(double x) { return x > 0 ? std::sqrt(x) : 0.0; }

}  // namespace qmfd
