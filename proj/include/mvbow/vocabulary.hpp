#ifndef MVBOW_VOCABULARY_HPP
#define MVBOW_VOCABULARY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mvbow/descriptor_store.hpp"

namespace mvbow {

// Trained visual vocabulary: k centroid rows plus provenance describing how
// its training descriptors were produced.
struct Vocabulary {
  MatrixRXf centroids;  // k x d
  std::uint64_t seed = 0;
  std::string transform_chain;  // e.g. "power:0.5" or "none"
  std::string channel;
  std::string training_set;

  Eigen::Index k() const { return centroids.rows(); }
  Eigen::Index d() const { return centroids.cols(); }
};

// Nearest-centroid word ids for one image/channel.
struct Assignment {
  std::string image_id;
  std::string channel;
  std::vector<std::uint32_t> word_ids;
};

struct KmeansParams {
  int k = 0;
  std::uint64_t seed = 0;
  int max_iters = 25;
  double tol = 1e-4;
};

// Optional per-run diagnostics; objective_history holds the Lloyd objective
// measured at each assignment step and must be non-increasing.
struct KmeansTrace {
  std::vector<double> objective_history;
  std::vector<std::uint32_t> final_assignment;  // against the returned float32 centroids
  double final_objective = 0.0;
  int iterations = 0;
};

struct VocabProvenance {
  std::string transform_chain = "none";
  std::string channel;
  std::string training_set;
};

// Lloyd k-means from a k-means++ seeding. Deterministic for fixed inputs and
// seed regardless of thread count. Empty clusters are re-seeded to the point
// farthest from its centroid, never reported as errors.
Vocabulary kmeans_train(const MatrixRXf& X, const KmeansParams& params,
                        const VocabProvenance& provenance = {}, KmeansTrace* trace = nullptr);

// Exhaustive nearest-centroid search: exactly k distance evaluations per
// descriptor, ties broken by lowest centroid index.
Assignment quantize(const DescriptorMatrix& X, const Vocabulary& V);

// Sum over rows of the squared distance to the nearest centroid.
double kmeans_objective(const MatrixRXf& X, const Vocabulary& V);

// Vocabulary file "MVVC": version u32=1, k u32, d u32, seed u64, then
// transform chain / channel / training set as length-prefixed strings,
// centroids float32 row-major.
Vocabulary load_vocabulary(const std::string& path);
void save_vocabulary(const Vocabulary& V, const std::string& path);

}  // namespace mvbow

#endif  // MVBOW_VOCABULARY_HPP
