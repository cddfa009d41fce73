#include "mvbow/bow_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

#include "mvbow/io.hpp"

namespace mvbow {

std::vector<double> VocabularyBundle::default_weights(const std::vector<Eigen::Index>& ks) {
  const bool all_equal = std::all_of(ks.begin(), ks.end(), [&](Eigen::Index k) { return k == ks.front(); });
  std::vector<double> w(ks.size(), 1.0);
  if (!all_equal)
    for (std::size_t v = 0; v < ks.size(); ++v) w[v] = std::log(static_cast<double>(ks[v]));
  return w;
}

void VocabularyBundle::validate() const {
  if (vocabularies.empty()) throw ParameterError("empty vocabulary bundle");
  if (weights.size() != vocabularies.size())
    throw ParameterError("bundle weight count does not match vocabulary count");
  for (double w : weights)
    if (!(w > 0.0)) throw ParameterError("bundle weights must be strictly positive");
  if (!idf.empty()) {
    if (idf.size() != vocabularies.size())
      throw ParameterError("bundle idf count does not match vocabulary count");
    for (std::size_t v = 0; v < idf.size(); ++v)
      if (idf[v].size() != vocabularies[v].k())
        throw ParameterError("idf vector length does not match vocabulary size");
  }
}

BowMatrix load_bow_matrix(const std::string& path) {
  BinaryReader in(path);
  in.magic("MVBW");
  in.expect_version(1);
  const auto n = in.scalar<std::uint64_t>();
  const auto dim = in.scalar<std::uint32_t>();
  BowMatrix M;
  M.ids.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) M.ids.push_back(in.string());
  M.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  in.array(M.values.data(), n * static_cast<std::uint64_t>(dim));
  in.expect_eof();
  check_finite(M.values, path);
  return M;
}

void save_bow_matrix(const BowMatrix& M, const std::string& path) {
  if (static_cast<Eigen::Index>(M.ids.size()) != M.n())
    throw ParameterError("id count does not match row count");
  BinaryWriter out(path);
  out.magic("MVBW");
  out.scalar<std::uint32_t>(1);
  out.scalar<std::uint64_t>(static_cast<std::uint64_t>(M.n()));
  out.scalar<std::uint32_t>(static_cast<std::uint32_t>(M.dim()));
  for (const auto& id : M.ids) out.string(id);
  out.array(M.values.data(), static_cast<std::size_t>(M.values.size()));
  out.close();
}

BowVector encode_bow(const Assignment& A, Eigen::Index k, const std::optional<Eigen::VectorXf>& idf) {
  if (idf && idf->size() != k) throw ParameterError("idf length does not match k");
  BowVector bow;
  bow.image_id = A.image_id;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (std::uint32_t w : A.word_ids) {
    if (w >= static_cast<std::uint32_t>(k))
      throw DataError("word id " + std::to_string(w) + " out of range [0, " + std::to_string(k) + ")");
    counts[static_cast<Eigen::Index>(w)] += 1.0;
  }
  if (idf)
    for (Eigen::Index j = 0; j < k; ++j) counts[j] *= static_cast<double>((*idf)[j]);

  const double norm = counts.norm();
  bow.zero = norm == 0.0;
  if (!bow.zero) counts /= norm;
  bow.values = counts.cast<float>();
  return bow;
}

Eigen::VectorXf compute_idf(const std::vector<Assignment>& corpus, Eigen::Index k) {
  if (corpus.empty()) throw ParameterError("idf needs at least one image");
  Eigen::VectorXd docs_with_word = Eigen::VectorXd::Zero(k);
  std::vector<char> seen(static_cast<std::size_t>(k));
  for (const auto& a : corpus) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::uint32_t w : a.word_ids) {
      if (w >= static_cast<std::uint32_t>(k)) throw DataError("word id out of range in idf corpus");
      seen[w] = 1;
    }
    for (Eigen::Index j = 0; j < k; ++j)
      if (seen[static_cast<std::size_t>(j)]) docs_with_word[j] += 1.0;
  }
  const double n_images = static_cast<double>(corpus.size());
  Eigen::VectorXf idf(k);
  for (Eigen::Index j = 0; j < k; ++j)
    idf[j] = docs_with_word[j] > 0.0
                 ? static_cast<float>(std::log(n_images / docs_with_word[j]))
                 : 0.0f;  // unseen words carry no weight by convention
  return idf;
}

Eigen::VectorXf ssr(const Eigen::VectorXf& v, double beta) {
  if (beta < 0.0 || beta > 1.0)
    throw ParameterError("ssr exponent must lie in [0, 1], got " + std::to_string(beta));
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double x = v[i];
    out[i] = x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), beta), x);
  }
  const double norm = out.norm();
  if (norm > 0.0) out /= norm;
  return out.cast<float>();
}

BowVector concat_bundle(const std::vector<BowVector>& blocks, const std::vector<double>& weights) {
  if (blocks.empty()) throw ParameterError("concat_bundle needs at least one block");
  if (blocks.size() != weights.size())
    throw ParameterError("block count does not match weight count");
  for (double w : weights)
    if (!(w > 0.0)) throw ParameterError("bundle weights must be strictly positive");

  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.values.size();

  BowVector out;
  out.image_id = blocks.front().image_id;
  Eigen::VectorXd cat(total);
  Eigen::Index offset = 0;
  for (std::size_t v = 0; v < blocks.size(); ++v) {
    cat.segment(offset, blocks[v].values.size()) =
        blocks[v].values.cast<double>() * weights[v];
    offset += blocks[v].values.size();
  }
  const double norm = cat.norm();
  out.zero = norm == 0.0;
  if (!out.zero) cat /= norm;
  out.values = cat.cast<float>();
  return out;
}

std::int64_t quantization_complexity(const std::vector<Eigen::Index>& ks) {
  std::int64_t total = 0;
  for (Eigen::Index k : ks) total += static_cast<std::int64_t>(k);
  return total;
}

std::int64_t unique_assignments(const std::vector<std::vector<std::uint32_t>>& per_vocab_word_ids) {
  if (per_vocab_word_ids.empty()) return 0;
  const std::size_t n = per_vocab_word_ids.front().size();
  for (const auto& ids : per_vocab_word_ids)
    if (ids.size() != n)
      throw DataError("unique_assignments needs equal-length assignment lists");
  std::set<std::vector<std::uint32_t>> tuples;
  std::vector<std::uint32_t> tuple(per_vocab_word_ids.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t v = 0; v < per_vocab_word_ids.size(); ++v) tuple[v] = per_vocab_word_ids[v][i];
    tuples.insert(tuple);
  }
  return static_cast<std::int64_t>(tuples.size());
}

}  // namespace mvbow
