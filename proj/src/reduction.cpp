#include "mvbow/reduction.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mvbow/io.hpp"
#include "mvbow/linalg.hpp"
#include "mvbow/rng.hpp"

namespace mvbow {

namespace detail {

namespace {

TopkEigen dense_topk(const Eigen::MatrixXd& A, int k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A);
  if (solver.info() != Eigen::Success) throw DataError("dense eigensolver failed");
  TopkEigen out;
  out.values = solver.eigenvalues().reverse().head(k);
  out.vectors = solver.eigenvectors().rowwise().reverse().leftCols(k);
  return out;
}

void orthogonalize_against(const Eigen::MatrixXd& V, Eigen::Index nv, Eigen::VectorXd& w) {
  // Two classical Gram-Schmidt sweeps are enough at working precision.
  w.noalias() -= V.leftCols(nv) * (V.leftCols(nv).transpose() * w);
  w.noalias() -= V.leftCols(nv) * (V.leftCols(nv).transpose() * w);
}

}  // namespace

TopkEigen symmetric_topk(const Eigen::MatrixXd& A, int k) {
  const Eigen::Index m = A.rows();
  if (A.cols() != m) throw ParameterError("symmetric_topk needs a square matrix");
  if (k < 1 || k > m) throw ParameterError("symmetric_topk: k out of range");
  if (m <= 4 * static_cast<Eigen::Index>(k) || m <= 32) return dense_topk(A, k);

  // Lanczos with full reorthogonalization; restarts keep the leading Ritz
  // vectors thick-style and re-expand from the worst unconverged residual.
  const int pad = static_cast<int>(std::min<Eigen::Index>(m - k, std::max(8, k / 2)));
  const Eigen::Index cap = std::min<Eigen::Index>(m, std::max<Eigen::Index>(2 * (k + pad), k + pad + 48));
  const double tol = 1e-12;
  const int max_cycles = 80;
  Rng rng(0x9e3779b97f4a7c15ull);  // fixed stream: results must not vary run to run

  auto random_unit = [&](Eigen::VectorXd& v) {
    v.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) v[i] = rng.normal();
  };

  Eigen::MatrixXd V(m, cap);
  Eigen::VectorXd w;
  random_unit(w);
  V.col(0) = w / w.norm();
  Eigen::Index nv = 1;

  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    while (nv < cap) {
      w.noalias() = A * V.col(nv - 1);
      orthogonalize_against(V, nv, w);
      double beta = w.norm();
      if (!(beta > 1e-300)) {
        // Krylov space exhausted; continue from a fresh direction.
        random_unit(w);
        orthogonalize_against(V, nv, w);
        beta = w.norm();
        if (!(beta > 1e-300)) break;
      }
      V.col(nv) = w / beta;
      ++nv;
    }

    Eigen::MatrixXd AV = A * V.leftCols(nv);
    Eigen::MatrixXd H = V.leftCols(nv).transpose() * AV;
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) break;
    const Eigen::VectorXd theta = es.eigenvalues().reverse();
    const Eigen::MatrixXd Yr = es.eigenvectors().rowwise().reverse();

    const Eigen::Index keep = std::min<Eigen::Index>(nv, k + pad);
    Eigen::MatrixXd ritz = V.leftCols(nv) * Yr.leftCols(keep);
    Eigen::MatrixXd Aritz = AV * Yr.leftCols(k);

    const double scale = std::max(std::abs(theta[0]), 1e-300);
    int first_bad = -1;
    for (int i = 0; i < k; ++i) {
      const double res = (Aritz.col(i) - theta[i] * ritz.col(i)).norm();
      if (res > tol * scale) {
        first_bad = i;
        break;
      }
    }
    if (first_bad < 0 || nv >= m) {
      TopkEigen out;
      out.values = theta.head(k);
      out.vectors = ritz.leftCols(k);
      return out;
    }

    // Thick restart: keep the leading Ritz vectors, re-orthonormalized.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(ritz);
    V.leftCols(keep) = qr.householderQ() * Eigen::MatrixXd::Identity(m, keep);
    nv = keep;
    // Seed the next expansion with the first unconverged residual direction.
    w = Aritz.col(first_bad) - theta[first_bad] * ritz.col(first_bad);
    orthogonalize_against(V, nv, w);
    const double beta = w.norm();
    if (beta > 1e-300 && nv < cap) {
      V.col(nv) = w / beta;
      ++nv;
    }
  }

  if (m <= 4096) return dense_topk(A, k);
  throw DataError("iterative eigensolver failed to converge");
}

}  // namespace detail

bool ReductionModel::any_floored() const {
  return std::any_of(floored.begin(), floored.end(), [](bool b) { return b; });
}

ReductionModel train_reduction(const MatrixRXf& Y, int d_out) {
  const Eigen::Index n = Y.rows(), dim = Y.cols();
  if (d_out < 1 || d_out > dim) throw ParameterError("d_out must lie in [1, D]");
  if (n < d_out + 1)
    throw ParameterError("reduction training needs at least d_out+1 vectors, got " +
                         std::to_string(n));
  check_finite(Y, "reduction training matrix");

  const Eigen::MatrixXd Yd = Y.cast<double>();
  Eigen::VectorXd mean = Yd.colwise().mean().transpose();
  const Eigen::MatrixXd centered = Yd.rowwise() - mean.transpose();

  Eigen::VectorXd evals;
  Eigen::MatrixXd basis;
  if (n < dim) {
    // Dual gram path: same nonzero spectrum as the covariance at 1/N scale;
    // gram eigenvectors map back through the centered data.
    const Eigen::MatrixXd gram = (centered * centered.transpose()) / static_cast<double>(n);
    detail::TopkEigen top = detail::symmetric_topk(gram, d_out);
    evals = top.values;
    basis.resize(dim, d_out);
    for (int i = 0; i < d_out; ++i) {
      Eigen::VectorXd p = centered.transpose() * top.vectors.col(i);
      const double norm = p.norm();
      if (norm > 0.0) p /= norm;
      basis.col(i) = p;
    }
  } else {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
    detail::TopkEigen top = detail::symmetric_topk(cov, d_out);
    evals = top.values;
    basis = top.vectors;
  }

  const double lambda1 = std::max(evals[0], 0.0);
  const double rank_tol = kReductionRankTol * lambda1;
  int usable = 0;
  for (int i = 0; i < d_out; ++i)
    if (evals[i] > rank_tol && evals[i] > 0.0) ++usable;
  if (usable < d_out)
    throw DataError("reduction rank deficiency: only " + std::to_string(usable) +
                    " eigenvalues above tolerance, requested " + std::to_string(d_out));

  ReductionModel M;
  M.mean = std::move(mean);
  M.basis = std::move(basis);
  fix_eigenvector_signs(M.basis);
  M.eigenvalues = std::move(evals);
  M.floored.assign(static_cast<std::size_t>(d_out), false);
  const double floor = kReductionFloorEpsilon * lambda1;
  for (int i = 0; i < d_out; ++i) {
    if (M.eigenvalues[i] <= floor) {
      M.eigenvalues[i] = floor;  // prevents whitening blow-up on near-null directions
      M.floored[static_cast<std::size_t>(i)] = true;
    }
  }
  return M;
}

ShortVector reduce(const BowVector& x, const ReductionModel& M) {
  if (x.values.size() != M.dim_in())
    throw ParameterError("reduce dimension mismatch: vector D=" + std::to_string(x.values.size()) +
                         ", model D=" + std::to_string(M.dim_in()));
  ShortVector out;
  out.image_id = x.image_id;
  const Eigen::VectorXd centered = x.values.cast<double>() - M.mean;
  Eigen::VectorXd t = M.basis.transpose() * centered;
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] /= std::sqrt(M.eigenvalues[i]);
  const double norm = t.norm();
  if (norm < 1e-12) {
    out.zero = true;
    out.values = Eigen::VectorXf::Zero(M.dim_out());
  } else {
    out.values = (t / norm).cast<float>();
  }
  return out;
}

BowMatrix reduce_matrix(const BowMatrix& Y, const ReductionModel& M) {
  BowMatrix out;
  out.ids = Y.ids;
  out.values.resize(Y.n(), M.dim_out());
  const Eigen::Index n = Y.n();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    BowVector row;
    row.values = Y.values.row(i).transpose();
    out.values.row(i) = reduce(row, M).values.transpose();
  }
  return out;
}

Eigen::VectorXd whitening_check(const MatrixRXf& Y, const ReductionModel& M) {
  if (Y.cols() != M.dim_in()) throw ParameterError("whitening_check dimension mismatch");
  const Eigen::MatrixXd Yd = Y.cast<double>();
  const Eigen::MatrixXd centered = Yd.rowwise() - M.mean.transpose();
  Eigen::MatrixXd Z = centered * M.basis;  // n x d_out
  for (Eigen::Index c = 0; c < Z.cols(); ++c) Z.col(c) /= std::sqrt(M.eigenvalues[c]);
  const double n = static_cast<double>(Z.rows());
  Eigen::VectorXd variance(Z.cols());
  for (Eigen::Index c = 0; c < Z.cols(); ++c) {
    const double mu = Z.col(c).mean();
    variance[c] = Z.col(c).squaredNorm() / n - mu * mu;
  }
  return variance;
}

ReductionModel load_reduction(const std::string& path) {
  BinaryReader in(path);
  in.magic("MVRD");
  in.expect_version(1);
  const auto dim = in.scalar<std::uint32_t>();
  const auto d_out = in.scalar<std::uint32_t>();
  const auto flags = in.scalar<std::uint32_t>();
  if (dim == 0 || d_out == 0 || d_out > dim) throw FormatError("bad reduction dims in " + path);

  ReductionModel M;
  std::vector<float> mean(dim);
  in.array(mean.data(), mean.size());
  M.mean.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) M.mean[i] = mean[i];

  M.eigenvalues.resize(d_out);
  in.array(M.eigenvalues.data(), d_out);

  std::vector<float> basis(static_cast<std::size_t>(dim) * d_out);
  in.array(basis.data(), basis.size());
  in.expect_eof();
  M.basis.resize(dim, d_out);
  for (std::uint32_t c = 0; c < d_out; ++c)
    for (std::uint32_t r = 0; r < dim; ++r)
      M.basis(r, c) = basis[static_cast<std::size_t>(c) * dim + r];

  for (std::uint32_t i = 0; i < d_out; ++i) {
    if (!(M.eigenvalues[i] > 0.0)) throw DataError("non-positive eigenvalue in " + path);
    if (i > 0 && M.eigenvalues[i] > M.eigenvalues[i - 1])
      throw DataError("eigenvalues not sorted in " + path);
  }
  const Eigen::MatrixXd gram = M.basis.transpose() * M.basis;
  if ((gram - Eigen::MatrixXd::Identity(d_out, d_out)).cwiseAbs().maxCoeff() > 1e-5)
    throw DataError("reduction basis not column-orthonormal: " + path);

  // Floored components sit exactly at the floor, so the mask is recoverable.
  const double floor = kReductionFloorEpsilon * M.eigenvalues[0];
  M.floored.assign(d_out, false);
  for (std::uint32_t i = 0; i < d_out; ++i)
    if (M.eigenvalues[i] <= floor) M.floored[i] = true;
  if (M.any_floored() != ((flags & 1u) != 0))
    throw DataError("floored-component flag inconsistent with eigenvalues in " + path);
  return M;
}

void save_reduction(const ReductionModel& M, const std::string& path) {
  const auto dim = static_cast<std::uint32_t>(M.dim_in());
  const auto d_out = static_cast<std::uint32_t>(M.dim_out());
  BinaryWriter out(path);
  out.magic("MVRD");
  out.scalar<std::uint32_t>(1);
  out.scalar<std::uint32_t>(dim);
  out.scalar<std::uint32_t>(d_out);
  out.scalar<std::uint32_t>(M.any_floored() ? 1u : 0u);
  std::vector<float> mean(dim);
  for (std::uint32_t i = 0; i < dim; ++i) mean[i] = static_cast<float>(M.mean[i]);
  out.array(mean.data(), mean.size());
  out.array(M.eigenvalues.data(), d_out);
  std::vector<float> basis(static_cast<std::size_t>(dim) * d_out);
  for (std::uint32_t c = 0; c < d_out; ++c)
    for (std::uint32_t r = 0; r < dim; ++r)
      basis[static_cast<std::size_t>(c) * dim + r] = static_cast<float>(M.basis(r, c));
  out.array(basis.data(), basis.size());
  out.close();
}

}  // namespace mvbow
