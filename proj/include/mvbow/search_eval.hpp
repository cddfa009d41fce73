#ifndef MVBOW_SEARCH_EVAL_HPP
#define MVBOW_SEARCH_EVAL_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mvbow/reduction.hpp"

namespace mvbow {

// Exhaustive inner-product index over unit short vectors. Zero-flagged rows
// are kept but always ranked behind every non-zero row.
class SearchIndex {
 public:
  static SearchIndex build(const BowMatrix& vectors);

  Eigen::Index size() const { return vectors_.rows(); }
  Eigen::Index dim() const { return vectors_.cols(); }
  const std::vector<std::string>& ids() const { return ids_; }
  bool is_zero(Eigen::Index row) const { return zero_[static_cast<std::size_t>(row)] != 0; }
  // Row for an image id; throws DataError when absent.
  Eigen::Index row_of(const std::string& image_id) const;
  ShortVector vector_of(const std::string& image_id) const;

  const MatrixRXf& matrix() const { return vectors_; }

 private:
  MatrixRXf vectors_;
  std::vector<std::string> ids_;
  std::vector<char> zero_;
  std::map<std::string, Eigen::Index> by_id_;
};

struct RankedHit {
  std::string image_id;
  double score = 0.0;
};

// Descending inner product; ties by ascending image id; zero rows last.
std::vector<RankedHit> query(const SearchIndex& index, const ShortVector& q, int top);

struct GroundTruthEntry {
  std::string query_id;
  bool exclude_self = false;
  std::set<std::string> positives;
  std::set<std::string> junk;
};

struct GroundTruth {
  std::vector<GroundTruthEntry> queries;

  // Text format: per query a `Q<TAB>id<TAB>0|1` line followed by
  // `P<TAB>id` and `J<TAB>id` lines.
  static GroundTruth load(const std::string& path);
  void save(const std::string& path) const;
  void validate() const;
};

// AP over a ranked id list: junk ids are dropped from the ranking, the query
// itself is dropped when exclude_self, and positives missing from the list
// contribute zero precision.
double average_precision(const std::vector<std::string>& ranked_ids, const GroundTruthEntry& gt);

// Mean AP over all queries. Query vectors come from `external_queries` when
// present (id match), otherwise from the indexed row with the query id.
double mean_ap(const SearchIndex& index, const GroundTruth& gt,
               const std::map<std::string, ShortVector>& external_queries = {});

// Per-query APs in ground-truth order (same resolution rules as mean_ap).
std::vector<double> per_query_ap(const SearchIndex& index, const GroundTruth& gt,
                                 const std::map<std::string, ShortVector>& external_queries = {});

// ---- Result file -----------------------------------------------------------
// `query_id<TAB>rank<TAB>image_id<TAB>score` with scores at 6 decimals.
void save_results(const std::vector<std::pair<std::string, std::vector<RankedHit>>>& results,
                  const std::string& path);
std::vector<std::pair<std::string, std::vector<RankedHit>>> load_results(const std::string& path);

// ---- Synthetic planted benchmark -------------------------------------------

struct SynthSpec {
  std::uint64_t seed = 0;
  int n_images = 0;
  int n_queries = 0;
  int descriptors_per_image = 0;
  int dim = 0;
  int n_clusters = 0;   // latent appearance patterns
  double spread = 0.0;  // per-component descriptor noise
  int positives_per_query = 0;

  void validate() const;
};

struct SynthOutput {
  std::string manifest_path;
  std::string ground_truth_path;
};

// Plants groups of images sharing latent descriptor patterns plus random
// distractors; writes descriptor files, a manifest and a ground-truth file
// under out_dir. Byte-reproducible for a fixed spec.
SynthOutput generate_synthetic(const SynthSpec& spec, const std::string& out_dir);

}  // namespace mvbow

#endif  // MVBOW_SEARCH_EVAL_HPP
