#include "mvbow/vocabulary.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_set>

#include "mvbow/io.hpp"
#include "mvbow/rng.hpp"

namespace mvbow {

namespace {

// Distance via ||x||^2 - 2 x.c + ||c||^2 with precomputed centroid norms.
// All accumulation in doubles so the argmin scan is reproducible.
template <typename Scalar>
void assign_rows(const MatrixRXf& X,
                 const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& C,
                 std::vector<std::uint32_t>& assign, std::vector<double>& dist) {
  const Eigen::Index n = X.rows(), k = C.rows(), d = X.cols();
  assign.resize(static_cast<std::size_t>(n));
  dist.resize(static_cast<std::size_t>(n));

  std::vector<double> cnorm(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    double s = 0.0;
    for (Eigen::Index t = 0; t < d; ++t) {
      const double c = static_cast<double>(C(j, t));
      s += c * c;
    }
    cnorm[static_cast<std::size_t>(j)] = s;
  }

#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    double xnorm = 0.0;
    for (Eigen::Index t = 0; t < d; ++t) {
      const double x = static_cast<double>(X(i, t));
      xnorm += x * x;
    }
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_j = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      double dot = 0.0;
      for (Eigen::Index t = 0; t < d; ++t)
        dot += static_cast<double>(X(i, t)) * static_cast<double>(C(j, t));
      const double dij = xnorm - 2.0 * dot + cnorm[static_cast<std::size_t>(j)];
      if (dij < best) {  // strict: ties keep the lowest index
        best = dij;
        best_j = static_cast<std::uint32_t>(j);
      }
    }
    assign[static_cast<std::size_t>(i)] = best_j;
    dist[static_cast<std::size_t>(i)] = best < 0.0 ? 0.0 : best;
  }
}

// Sequential sum keeps the objective independent of thread count.
double sum_sequential(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

MatrixRXd kmeanspp_init(const MatrixRXf& X, int k, std::uint64_t seed) {
  const Eigen::Index n = X.rows(), d = X.cols();
  Rng rng(seed);
  MatrixRXd centers(k, d);

  const auto first = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
  centers.row(0) = X.row(first).cast<double>();

  std::vector<double> d2(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i)
    d2[static_cast<std::size_t>(i)] =
        (X.row(i).cast<double>() - centers.row(0)).squaredNorm();

  for (int c = 1; c < k; ++c) {
    const double total = sum_sequential(d2);
    Eigen::Index pick;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        cum += d2[static_cast<std::size_t>(i)];
        if (cum > target) {
          pick = i;
          break;
        }
      }
    } else {
      // All remaining points coincide with existing centers.
      pick = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n)));
    }
    centers.row(c) = X.row(pick).cast<double>();
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dist = (X.row(i).cast<double>() - centers.row(c)).squaredNorm();
      if (dist < d2[static_cast<std::size_t>(i)]) d2[static_cast<std::size_t>(i)] = dist;
    }
  }
  return centers;
}

// Re-seed empty clusters to the point currently farthest from its centroid
// (ties -> lowest point index). Scan order is fixed, so the repair is
// deterministic; repeats until no cluster is empty or no donor point remains.
void repair_empty_clusters(const MatrixRXf& X, MatrixRXd& centers,
                           std::vector<std::uint32_t>& assign, std::vector<double>& dist) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = centers.rows();
  for (Eigen::Index round = 0; round < k; ++round) {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (std::uint32_t a : assign) ++counts[a];
    Eigen::Index empty = -1;
    for (Eigen::Index j = 0; j < k; ++j)
      if (counts[static_cast<std::size_t>(j)] == 0) {
        empty = j;
        break;
      }
    if (empty < 0) return;

    Eigen::Index farthest = -1;
    double best = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double di = dist[static_cast<std::size_t>(i)];
      if (di > best && counts[assign[static_cast<std::size_t>(i)]] > 1) {
        best = di;
        farthest = i;
      }
    }
    if (farthest < 0) return;  // degenerate data, nothing to donate

    centers.row(empty) = X.row(farthest).cast<double>();
    assign[static_cast<std::size_t>(farthest)] = static_cast<std::uint32_t>(empty);
    dist[static_cast<std::size_t>(farthest)] = 0.0;
  }
}

// Update step parallelized over clusters; each cluster sums its members in
// ascending point index order, which fixes the floating-point reduction tree.
void update_centers(const MatrixRXf& X, const std::vector<std::uint32_t>& assign,
                    MatrixRXd& centers) {
  const Eigen::Index n = X.rows(), k = centers.rows(), d = X.cols();
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  for (std::uint32_t a : assign) ++counts[a];
  std::vector<Eigen::Index> offsets(static_cast<std::size_t>(k) + 1, 0);
  for (Eigen::Index j = 0; j < k; ++j)
    offsets[static_cast<std::size_t>(j) + 1] =
        offsets[static_cast<std::size_t>(j)] + counts[static_cast<std::size_t>(j)];
  std::vector<Eigen::Index> members(static_cast<std::size_t>(n));
  {
    std::vector<Eigen::Index> cursor(offsets.begin(), offsets.end() - 1);
    for (Eigen::Index i = 0; i < n; ++i)
      members[static_cast<std::size_t>(cursor[assign[static_cast<std::size_t>(i)]]++)] = i;
  }

#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < k; ++j) {
    if (counts[static_cast<std::size_t>(j)] == 0) continue;  // keep previous centroid
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(d);
    for (Eigen::Index m = offsets[static_cast<std::size_t>(j)];
         m < offsets[static_cast<std::size_t>(j) + 1]; ++m)
      sum += X.row(members[static_cast<std::size_t>(m)]).cast<double>();
    centers.row(j) = sum / static_cast<double>(counts[static_cast<std::size_t>(j)]);
  }
}

void check_no_duplicate_centroids(const MatrixRXf& C) {
  std::unordered_set<std::string> seen;
  const auto row_bytes = static_cast<std::size_t>(C.cols()) * sizeof(float);
  for (Eigen::Index j = 0; j < C.rows(); ++j) {
    std::string key(reinterpret_cast<const char*>(C.row(j).data()), row_bytes);
    if (!seen.insert(std::move(key)).second)
      throw DataError("k-means produced duplicate centroids; training data has fewer than k "
                      "distinct points");
  }
}

}  // namespace

Vocabulary kmeans_train(const MatrixRXf& X, const KmeansParams& params,
                        const VocabProvenance& provenance, KmeansTrace* trace) {
  const Eigen::Index n = X.rows();
  if (params.k < 1) throw ParameterError("k must be >= 1");
  if (n < params.k)
    throw ParameterError("k-means needs n >= k, got n=" + std::to_string(n) +
                         " k=" + std::to_string(params.k));
  if (params.max_iters < 1) throw ParameterError("max_iters must be >= 1");
  check_finite(X, "k-means training sample");

  MatrixRXd centers = kmeanspp_init(X, params.k, params.seed);
  std::vector<std::uint32_t> assign;
  std::vector<double> dist;
  std::vector<double> history;
  double prev_obj = std::numeric_limits<double>::infinity();
  int iters = 0;

  for (int iter = 0; iter < params.max_iters; ++iter) {
    assign_rows<double>(X, centers, assign, dist);
    repair_empty_clusters(X, centers, assign, dist);
    const double obj = sum_sequential(dist);
    history.push_back(obj);
    iters = iter + 1;
    if (iter > 0) {
      if (prev_obj <= 0.0) break;
      if ((prev_obj - obj) / prev_obj < params.tol) break;
    }
    prev_obj = obj;
    update_centers(X, assign, centers);
  }

  Vocabulary V;
  V.centroids = centers.cast<float>();
  V.seed = params.seed;
  V.transform_chain = provenance.transform_chain;
  V.channel = provenance.channel;
  V.training_set = provenance.training_set;
  check_no_duplicate_centroids(V.centroids);

  if (trace != nullptr) {
    trace->objective_history = std::move(history);
    trace->iterations = iters;
    // Final pass against the float32 centroids actually stored, so the
    // reported assignment is a fixed point of quantize().
    assign_rows<float>(X, V.centroids, trace->final_assignment, dist);
    trace->final_objective = sum_sequential(dist);
  }
  return V;
}

Assignment quantize(const DescriptorMatrix& X, const Vocabulary& V) {
  if (X.d() != V.d())
    throw ParameterError("quantize dimension mismatch: descriptors d=" + std::to_string(X.d()) +
                         ", vocabulary d=" + std::to_string(V.d()));
  Assignment A;
  A.image_id = X.image_id;
  A.channel = X.channel;
  std::vector<double> dist;
  assign_rows<float>(X.data, V.centroids, A.word_ids, dist);
  return A;
}

double kmeans_objective(const MatrixRXf& X, const Vocabulary& V) {
  if (X.cols() != V.d()) throw ParameterError("objective dimension mismatch");
  std::vector<std::uint32_t> assign;
  std::vector<double> dist;
  assign_rows<float>(X, V.centroids, assign, dist);
  return sum_sequential(dist);
}

Vocabulary load_vocabulary(const std::string& path) {
  BinaryReader in(path);
  in.magic("MVVC");
  in.expect_version(1);
  const auto k = in.scalar<std::uint32_t>();
  const auto d = in.scalar<std::uint32_t>();
  if (k == 0 || d == 0) throw FormatError("bad vocabulary dims in " + path);
  Vocabulary V;
  V.seed = in.scalar<std::uint64_t>();
  V.transform_chain = in.string();
  V.channel = in.string();
  V.training_set = in.string();
  V.centroids.resize(k, d);
  in.array(V.centroids.data(), static_cast<std::size_t>(k) * d);
  in.expect_eof();
  check_finite(V.centroids, path);
  check_no_duplicate_centroids(V.centroids);
  return V;
}

void save_vocabulary(const Vocabulary& V, const std::string& path) {
  BinaryWriter out(path);
  out.magic("MVVC");
  out.scalar<std::uint32_t>(1);
  out.scalar<std::uint32_t>(static_cast<std::uint32_t>(V.k()));
  out.scalar<std::uint32_t>(static_cast<std::uint32_t>(V.d()));
  out.scalar<std::uint64_t>(V.seed);
  out.string(V.transform_chain);
  out.string(V.channel);
  out.string(V.training_set);
  out.array(V.centroids.data(), static_cast<std::size_t>(V.centroids.size()));
  out.close();
}

}  // namespace mvbow
