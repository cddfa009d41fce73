#ifndef MVBOW_BOW_ENCODER_HPP
#define MVBOW_BOW_ENCODER_HPP

#include <optional>
#include <string>
#include <vector>

#include "mvbow/vocabulary.hpp"

namespace mvbow {

// Dense normalized word histogram; `zero` flags images with no descriptors.
struct BowVector {
  std::string image_id;
  Eigen::VectorXf values;
  bool zero = false;
};

// Ordered vocabularies with per-vocabulary concatenation weights and
// optional idf vectors (empty when idf is off).
struct VocabularyBundle {
  std::vector<Vocabulary> vocabularies;
  std::vector<double> weights;
  std::vector<Eigen::VectorXf> idf;  // empty, or one k_v-vector per vocabulary

  std::size_t size() const { return vocabularies.size(); }
  // ln(k_v) when sizes differ, 1 for equal-size bundles.
  static std::vector<double> default_weights(const std::vector<Eigen::Index>& ks);
  void validate() const;
};

// Labeled dense matrix, the on-disk "MVBW" container used for BOW blocks,
// concatenated BOW vectors and reduced short vectors alike.
struct BowMatrix {
  std::vector<std::string> ids;
  MatrixRXf values;  // N x D

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

BowMatrix load_bow_matrix(const std::string& path);
void save_bow_matrix(const BowMatrix& M, const std::string& path);

// Histogram of word occurrences, optionally idf-weighted, L2-normalized.
BowVector encode_bow(const Assignment& A, Eigen::Index k,
                     const std::optional<Eigen::VectorXf>& idf = std::nullopt);

// idf[j] = ln(N / n_j) over the corpus; words in no image get 0.
Eigen::VectorXf compute_idf(const std::vector<Assignment>& corpus, Eigen::Index k);

// Signed power-law |v|^beta * sign(v) followed by L2 normalization.
// beta in [0, 1]; beta = 1 is pure renormalization. Zero vectors stay zero.
Eigen::VectorXf ssr(const Eigen::VectorXf& v, double beta = 0.5);

// Concatenates weighted per-vocabulary blocks and renormalizes.
BowVector concat_bundle(const std::vector<BowVector>& blocks, const std::vector<double>& weights);

// Vector comparisons per local descriptor: sum of vocabulary sizes.
std::int64_t quantization_complexity(const std::vector<Eigen::Index>& ks);

// Number of distinct word-id tuples over a shared descriptor list quantized
// by several vocabularies.
std::int64_t unique_assignments(const std::vector<std::vector<std::uint32_t>>& per_vocab_word_ids);

}  // namespace mvbow

#endif  // MVBOW_BOW_ENCODER_HPP
