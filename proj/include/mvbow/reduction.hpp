#ifndef MVBOW_REDUCTION_HPP
#define MVBOW_REDUCTION_HPP

#include <string>
#include <vector>

#include "mvbow/bow_encoder.hpp"

namespace mvbow {

// Joint PCA + whitening model for concatenated BOW vectors.
//
// Training eigendecomposes the N x N gram matrix Y_hat Y_hat^T / N when
// N < D (gram eigenvectors u map to basis columns Y_hat^T u, normalized)
// and the D x D covariance otherwise; both share the 1/N eigenvalue scale.
struct ReductionModel {
  Eigen::VectorXd mean;         // D
  Eigen::MatrixXd basis;        // D x D', columns orthonormal
  Eigen::VectorXd eigenvalues;  // D', non-increasing, > 0 after flooring
  std::vector<bool> floored;    // per-component: eigenvalue clamped to the floor

  Eigen::Index dim_in() const { return basis.rows(); }
  Eigen::Index dim_out() const { return basis.cols(); }
  bool any_floored() const;
};

// Reduced unit-norm search vector.
struct ShortVector {
  std::string image_id;
  Eigen::VectorXf values;
  bool zero = false;
};

// Relative eigenvalue cutoffs: components at or below rank_tol * lambda_1
// do not count towards the usable rank; usable eigenvalues at or below
// floor_epsilon * lambda_1 are clamped to the floor and marked.
constexpr double kReductionFloorEpsilon = 1e-10;
constexpr double kReductionRankTol = 1e-12;

// Trains mean/basis/eigenvalues from finalized BOW rows. Fails with the
// usable count when fewer than d_out eigenvalues clear the rank tolerance.
ReductionModel train_reduction(const MatrixRXf& Y, int d_out);

// Eq.-style projection: t = diag(lambda^{-1/2}) P^T (x - mean), returned
// renormalized; inputs collapsing below 1e-12 norm come back zero-flagged.
ShortVector reduce(const BowVector& x, const ReductionModel& M);

// Batch variant over the rows of a labeled matrix.
BowMatrix reduce_matrix(const BowMatrix& Y, const ReductionModel& M);

// Per-component variance of the whitened training projection (before
// re-normalization); 1 for every non-floored component by construction.
Eigen::VectorXd whitening_check(const MatrixRXf& Y, const ReductionModel& M);

// Model file "MVRD": version u32=1, D u32, D' u32, flags u32 (bit0: floored
// components present), mean float32[D], eigenvalues float64[D'], basis
// float32[D*D'] column-major.
ReductionModel load_reduction(const std::string& path);
void save_reduction(const ReductionModel& M, const std::string& path);

namespace detail {

struct TopkEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // one column per value
};

// Top-k eigenpairs of a symmetric matrix. Dense solve when the matrix is
// small relative to k (m <= 4k); otherwise Lanczos with full
// reorthogonalization and thick restarts, which falls back to the dense
// path if it ever fails to converge.
TopkEigen symmetric_topk(const Eigen::MatrixXd& A, int k);

}  // namespace detail

}  // namespace mvbow

#endif  // MVBOW_REDUCTION_HPP
