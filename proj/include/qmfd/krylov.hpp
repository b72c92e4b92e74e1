#pragma once

#include <functional>

#include "qmfd/grid.hpp"

namespace qmfd {

using MatVec = std::function<void(const CVec&, CVec&)>;

// Extreme eigenvalue of a Hermitian operator by Lanczos with full
// reorthogonalization.
double lanczos_extreme(const MatVec& op, Eigen::Index dim, bool largest, int max_iter = 200,
                       double tol = 1e-10, unsigned seed = 7);

struct KrylovStats {
  int dimension = 0;
  double error_estimate = 0.0;
};

// exp(-i dt H) v for Hermitian H. Throws NumericalError when the
// a-posteriori error exceeds tol within max_dim steps.
CVec krylov_expm(const MatVec& H, const CVec& v, double dt, int max_dim = 40, double tol = 1e-13,
                 KrylovStats* stats = nullptr);

}  // namespace qmfd
