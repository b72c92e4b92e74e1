#include "qmfd/krylov.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <vector>

#include "qmfd/error.hpp"

namespace qmfd {

namespace {

struct Tridiag {
  std::vector<double> alpha, beta;
};

Eigen::MatrixXd tridiag_matrix(const Tridiag& t, int m) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    T(i, i) = t.alpha[i];
    if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = t.beta[i];
  }
  return T;
}

void orthogonalize(CVec& w, const std::vector<CVec>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& q : basis) w -= q * q.dot(w);
}

}  // namespace

double lanczos_extreme(const MatVec& op, Eigen::Index dim, bool largest, int max_iter, double tol,
                       unsigned seed) {
  if (dim == 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  CVec q(dim);
  for (Eigen::Index i = 0; i < dim; ++i) q[i] = cplx(nd(rng), nd(rng));
  q.normalize();
  std::vector<CVec> basis{q};
  Tridiag t;
  CVec w(dim);
  double prev = 0.0;
  const int cap = static_cast<int>(std::min<Eigen::Index>(max_iter, dim));
  for (int j = 0; j < cap; ++j) {
    op(basis.back(), w);
    double a = basis.back().dot(w).real();
    t.alpha.push_back(a);
    orthogonalize(w, basis);
    double b = w.norm();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tridiag_matrix(t, j + 1), Eigen::EigenvaluesOnly);
    double ext = largest ? es.eigenvalues()(j) : es.eigenvalues()(0);
    if (j > 3 && std::abs(ext - prev) <= tol * std::max(1.0, std::abs(ext))) return ext;
    prev = ext;
    if (b < 1e-14) return ext;
    t.beta.push_back(b);
    basis.push_back(w / b);
  }
  return prev;
}

CVec krylov_expm(const MatVec& H, const CVec& v, double dt, int max_dim, double tol, KrylovStats* stats) {
  const double nv = v.norm();
  if (nv == 0.0) return v;
  const Eigen::Index dim = v.size();
  max_dim = static_cast<int>(std::min<Eigen::Index>(max_dim, dim));
  std::vector<CVec> basis{v / nv};
  Tridiag t;
  CVec w(dim);
  for (int j = 0; j < max_dim; ++j) {
    H(basis.back(), w);
    t.alpha.push_back(basis.back().dot(w).real());
    orthogonalize(w, basis);
    double b = w.norm();
    const int m = j + 1;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tridiag_matrix(t, m));
    // coefficients of exp(-i dt T) e_1
    Eigen::VectorXcd phase(m);
    for (int i = 0; i < m; ++i) phase[i] = std::exp(cplx(0.0, -dt * es.eigenvalues()(i)));
    Eigen::VectorXcd c = es.eigenvectors().cast<cplx>() *
                         phase.cwiseProduct(es.eigenvectors().row(0).transpose().cast<cplx>());
    // The residual of the Krylov approximation is bounded by b |c_m|.
    double err = b * std::abs(c[m - 1]);
    if (err <= tol || b < 1e-14 || m == dim) {
      CVec out = CVec::Zero(dim);
      for (int i = 0; i < m; ++i) out += c[i] * basis[i];
      if (stats) {
        stats->dimension = m;
        stats->error_estimate = err;
      }
      return nv * out;
    }
    t.beta.push_back(b);
    basis.push_back(w / b);
  }
  throw NumericalError("Krylov exponential did not converge; retry with a smaller dt");
}

}  // namespace qmfd
