#include "mvbow/search_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mvbow {

SearchIndex SearchIndex::build(const BowMatrix& vectors) {
  SearchIndex idx;
  idx.vectors_ = vectors.values;
  idx.ids_ = vectors.ids;
  idx.zero_.resize(static_cast<std::size_t>(vectors.n()), 0);
  for (Eigen::Index i = 0; i < vectors.n(); ++i) {
    const double norm = vectors.values.row(i).cast<double>().norm();
    if (norm == 0.0) {
      idx.zero_[static_cast<std::size_t>(i)] = 1;
    } else if (std::abs(norm - 1.0) > 1e-4) {
      throw DataError("index row " + vectors.ids[static_cast<std::size_t>(i)] +
                      " is neither unit nor zero (norm " + std::to_string(norm) + ")");
    }
    auto [it, inserted] = idx.by_id_.emplace(vectors.ids[static_cast<std::size_t>(i)], i);
    if (!inserted) throw DataError("duplicate image id in index: " + it->first);
  }
  return idx;
}

Eigen::Index SearchIndex::row_of(const std::string& image_id) const {
  auto it = by_id_.find(image_id);
  if (it == by_id_.end()) throw DataError("image id not in index: " + image_id);
  return it->second;
}

ShortVector SearchIndex::vector_of(const std::string& image_id) const {
  const Eigen::Index row = row_of(image_id);
  ShortVector v;
  v.image_id = image_id;
  v.values = vectors_.row(row).transpose();
  v.zero = is_zero(row);
  return v;
}

std::vector<RankedHit> query(const SearchIndex& index, const ShortVector& q, int top) {
  if (top <= 0) throw ParameterError("top must be positive");
  if (q.values.size() != index.dim()) throw ParameterError("query dimension mismatch");

  const Eigen::Index n = index.size();
  std::vector<double> scores(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    double dot = 0.0;
    for (Eigen::Index t = 0; t < index.dim(); ++t)
      dot += static_cast<double>(index.matrix()(i, t)) * static_cast<double>(q.values[t]);
    scores[static_cast<std::size_t>(i)] = dot;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const bool za = index.is_zero(a), zb = index.is_zero(b);
    if (za != zb) return zb;  // zero rows last
    const double sa = scores[static_cast<std::size_t>(a)], sb = scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return index.ids()[static_cast<std::size_t>(a)] < index.ids()[static_cast<std::size_t>(b)];
  });

  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(top), order.size());
  std::vector<RankedHit> hits(take);
  for (std::size_t r = 0; r < take; ++r) {
    hits[r].image_id = index.ids()[static_cast<std::size_t>(order[r])];
    hits[r].score = scores[static_cast<std::size_t>(order[r])];
  }
  return hits;
}

// ---- Ground truth -----------------------------------------------------------

void GroundTruth::validate() const {
  for (const auto& q : queries) {
    if (q.positives.empty()) throw DataError("query " + q.query_id + " has no positives");
    for (const auto& id : q.positives)
      if (q.junk.count(id) > 0)
        throw DataError("query " + q.query_id + ": id " + id + " is both positive and junk");
  }
}

GroundTruth GroundTruth::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground truth: " + path);
  GroundTruth gt;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag, a, b;
    std::getline(ls, tag, '\t');
    std::getline(ls, a, '\t');
    if (tag == "Q") {
      std::getline(ls, b, '\t');
      if (a.empty() || (b != "0" && b != "1"))
        throw DataError("malformed query line " + std::to_string(lineno) + " in " + path);
      gt.queries.push_back({a, b == "1", {}, {}});
    } else if (tag == "P" || tag == "J") {
      if (gt.queries.empty() || a.empty())
        throw DataError("orphan " + tag + " line " + std::to_string(lineno) + " in " + path);
      auto& q = gt.queries.back();
      (tag == "P" ? q.positives : q.junk).insert(a);
    } else {
      throw DataError("unknown tag '" + tag + "' at line " + std::to_string(lineno) + " in " + path);
    }
  }
  gt.validate();
  return gt;
}

void GroundTruth::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write ground truth: " + path);
  for (const auto& q : queries) {
    out << "Q\t" << q.query_id << '\t' << (q.exclude_self ? 1 : 0) << '\n';
    for (const auto& id : q.positives) out << "P\t" << id << '\n';
    for (const auto& id : q.junk) out << "J\t" << id << '\n';
  }
  if (!out) throw DataError("ground truth write failed: " + path);
}

double average_precision(const std::vector<std::string>& ranked_ids, const GroundTruthEntry& gt) {
  if (gt.positives.empty()) throw DataError("query " + gt.query_id + " has no positives");
  double sum = 0.0;
  std::size_t hits = 0, rank = 0;
  for (const auto& id : ranked_ids) {
    if (gt.junk.count(id) > 0) continue;            // junk neither helps nor hurts
    if (gt.exclude_self && id == gt.query_id) continue;
    ++rank;
    if (gt.positives.count(id) > 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  return sum / static_cast<double>(gt.positives.size());
}

static ShortVector resolve_query(const SearchIndex& index, const GroundTruthEntry& gt,
                                 const std::map<std::string, ShortVector>& external) {
  auto it = external.find(gt.query_id);
  if (it != external.end()) return it->second;
  return index.vector_of(gt.query_id);
}

std::vector<double> per_query_ap(const SearchIndex& index, const GroundTruth& gt,
                                 const std::map<std::string, ShortVector>& external_queries) {
  gt.validate();
  std::vector<double> aps;
  aps.reserve(gt.queries.size());
  for (const auto& entry : gt.queries) {
    ShortVector q;
    try {
      q = resolve_query(index, entry, external_queries);
    } catch (const Error& e) {
      throw DataError("query " + entry.query_id + ": " + e.what());
    }
    const auto hits = query(index, q, static_cast<int>(index.size()));
    std::vector<std::string> ranked(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) ranked[i] = hits[i].image_id;
    aps.push_back(average_precision(ranked, entry));
  }
  return aps;
}

double mean_ap(const SearchIndex& index, const GroundTruth& gt,
               const std::map<std::string, ShortVector>& external_queries) {
  if (gt.queries.empty()) throw DataError("ground truth has no queries");
  const auto aps = per_query_ap(index, gt, external_queries);
  double sum = 0.0;
  for (double ap : aps) sum += ap;
  return sum / static_cast<double>(aps.size());
}

// ---- Result file ------------------------------------------------------------

void save_results(const std::vector<std::pair<std::string, std::vector<RankedHit>>>& results,
                  const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write results: " + path);
  char score[32];
  for (const auto& [query_id, hits] : results) {
    for (std::size_t r = 0; r < hits.size(); ++r) {
      std::snprintf(score, sizeof(score), "%.6f", hits[r].score);
      out << query_id << '\t' << (r + 1) << '\t' << hits[r].image_id << '\t' << score << '\n';
    }
  }
  if (!out) throw DataError("results write failed: " + path);
}

std::vector<std::pair<std::string, std::vector<RankedHit>>> load_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open results: " + path);
  std::vector<std::pair<std::string, std::vector<RankedHit>>> results;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string qid, rank_str, id, score_str;
    if (!std::getline(ls, qid, '\t') || !std::getline(ls, rank_str, '\t') ||
        !std::getline(ls, id, '\t') || !std::getline(ls, score_str, '\t'))
      throw DataError("malformed results line " + std::to_string(lineno) + " in " + path);
    if (results.empty() || results.back().first != qid) results.push_back({qid, {}});
    std::size_t expected_rank = results.back().second.size() + 1;
    if (std::stoull(rank_str) != expected_rank)
      throw DataError("rank out of order at line " + std::to_string(lineno) + " in " + path);
    results.back().second.push_back({id, std::stod(score_str)});
  }
  return results;
}

}  // namespace mvbow
