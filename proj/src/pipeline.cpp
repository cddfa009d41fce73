#include "mvbow/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace mvbow {
namespace pipeline {

namespace fs = std::filesystem;

namespace {

class StageTimer {
 public:
  explicit StageTimer(std::string name)
      : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_);
    std::fprintf(stderr, "[mvbow] %s: %.3f s\n", name_.c_str(), wall.count());
  }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

std::string set_name(const Artifacts& art, const std::string& set) {
  return set == "train" && art.train_is_db ? "db" : set;
}

const ChannelManifest& manifest_for(const Artifacts& art, const std::string& set,
                                    std::map<std::string, ChannelManifest>& cache) {
  std::string path;
  if (set == "db")
    path = art.manifest;
  else if (set == "train")
    path = art.train_is_db ? art.manifest : art.training_manifest;
  else if (set == "queries")
    path = art.queries_manifest;
  else
    throw ParameterError("unknown descriptor set " + set);
  require_file(path, set + " manifest");
  auto it = cache.find(path);
  if (it == cache.end()) it = cache.emplace(path, ChannelManifest::load(path)).first;
  return it->second;
}

// Projection references resolve against [desc_pca] outputs (@name) or the
// config location (plain paths).
std::string resolve_projection_ref(const PipelineConfig& cfg, const Artifacts& art,
                                   const std::string& ref) {
  if (!ref.empty() && ref.front() == '@') return art.desc_pca_model(ref.substr(1));
  return cfg.resolve(ref);
}

DescriptorMatrix apply_chain(const PipelineConfig& cfg, const Artifacts& art,
                             const VocabEntryConfig& entry, DescriptorMatrix X,
                             std::map<std::string, DescriptorProjection>& proj_cache) {
  for (const auto& step : entry.transform) {
    if (step.kind == TransformStep::Kind::PowerLaw) {
      X = power_law_descriptors(X, step.beta);
    } else {
      const std::string path = resolve_projection_ref(cfg, art, step.model_ref);
      auto it = proj_cache.find(path);
      if (it == proj_cache.end()) {
        require_file(path, "projection model");
        it = proj_cache.emplace(path, load_projection(path)).first;
      }
      X = project_descriptors(X, it->second);
    }
  }
  return X;
}

std::vector<std::string> active_sets(const Artifacts& art) {
  std::vector<std::string> sets = {"db"};
  if (!art.train_is_db) sets.push_back("train");
  if (!art.queries_manifest.empty()) sets.push_back("queries");
  return sets;
}

std::vector<double> bundle_weights(const PipelineConfig& cfg) {
  std::vector<Eigen::Index> ks;
  ks.reserve(cfg.vocabs.size());
  for (const auto& e : cfg.vocabs) ks.push_back(e.k);
  std::vector<double> weights = VocabularyBundle::default_weights(ks);
  for (std::size_t v = 0; v < cfg.vocabs.size(); ++v)
    if (cfg.vocabs[v].weight) weights[v] = *cfg.vocabs[v].weight;
  return weights;
}

Vocabulary load_entry_vocab(const Artifacts& art, std::size_t entry) {
  const std::string path = art.vocab_file(entry);
  require_file(path, "vocabulary");
  return load_vocabulary(path);
}

}  // namespace

// ---- Artifact layout --------------------------------------------------------

std::string Artifacts::synth_dir() const { return (fs::path(out) / "synth").string(); }
std::string Artifacts::desc_pca_model(const std::string& name) const {
  return (fs::path(out) / "desc_pca" / (name + ".mvpj")).string();
}
std::string Artifacts::transformed_dir(std::size_t entry, const std::string& set) const {
  return (fs::path(out) / "transformed" / ("e" + std::to_string(entry)) / set).string();
}
std::string Artifacts::transformed_file(std::size_t entry, const std::string& set,
                                        const std::string& image_id) const {
  return (fs::path(transformed_dir(entry, set)) / (image_id + ".mvsd")).string();
}
std::string Artifacts::vocab_file(std::size_t entry) const {
  return (fs::path(out) / "vocab" / ("e" + std::to_string(entry) + ".mvvc")).string();
}
std::string Artifacts::bow_file(const std::string& set) const {
  return (fs::path(out) / "bow" / (set + ".mvbw")).string();
}
std::string Artifacts::reduction_model() const {
  return (fs::path(out) / "model" / "reduction.mvrd").string();
}
std::string Artifacts::vec_file(const std::string& set) const {
  return (fs::path(out) / "vec" / (set + ".mvbw")).string();
}
std::string Artifacts::index_file() const { return (fs::path(out) / "index" / "index.mvbw").string(); }
std::string Artifacts::results_file() const { return (fs::path(out) / "results.tsv").string(); }
std::string Artifacts::eval_file() const { return (fs::path(out) / "eval.txt").string(); }
std::string Artifacts::stats_file() const { return (fs::path(out) / "stats.txt").string(); }

Artifacts resolve_artifacts(const PipelineConfig& cfg, const std::string& out_dir) {
  Artifacts art;
  art.out = out_dir.empty() ? cfg.resolve(cfg.output) : out_dir;
  if (art.out.empty()) throw ConfigError("no output directory (config `output` or --out)");

  const std::string synth_manifest = (fs::path(art.synth_dir()) / "manifest.tsv").string();
  const std::string synth_gt = (fs::path(art.synth_dir()) / "ground_truth.txt").string();

  art.manifest = cfg.manifest.empty() ? (cfg.synth ? synth_manifest : "")
                                      : cfg.resolve(cfg.manifest);
  art.training_manifest =
      cfg.training_manifest.empty() ? art.manifest : cfg.resolve(cfg.training_manifest);
  art.train_is_db = art.training_manifest == art.manifest;
  art.queries_manifest = cfg.queries_manifest.empty() ? "" : cfg.resolve(cfg.queries_manifest);
  art.ground_truth = cfg.ground_truth.empty() ? (cfg.synth ? synth_gt : "")
                                              : cfg.resolve(cfg.ground_truth);
  return art;
}

// ---- Stages ------------------------------------------------------------------

void run_synth(const PipelineConfig& cfg, const std::string& out_dir) {
  if (!cfg.synth) throw ConfigError("config has no [synth] section");
  StageTimer timer("synth");
  const Artifacts art = resolve_artifacts(cfg, out_dir);
  generate_synthetic(*cfg.synth, art.synth_dir());
}

void run_train_desc_pca(const PipelineConfig& cfg, const std::string& out_dir) {
  if (cfg.desc_pca.empty()) return;
  StageTimer timer("train-desc-pca");
  const Artifacts art = resolve_artifacts(cfg, out_dir);
  std::map<std::string, ChannelManifest> manifests;
  const ChannelManifest& train = manifest_for(art, "train", manifests);

  fs::create_directories(fs::path(art.out) / "desc_pca");
  for (const auto& p : cfg.desc_pca) {
    std::vector<DescriptorMatrix> sets;
    sets.reserve(train.images().size());
    for (const auto& image : train.images())
      sets.push_back(load_descriptors(train.resolve(image, p.channel)));
    DescriptorMatrix sample;
    sample.channel = p.channel;
    sample.data = sample_rows(stack_descriptors(sets), p.sample, p.seed);
    DescriptorProjection proj = train_descriptor_pca(sample, p.d_out);
    proj.source_tag = cfg.training_tag;
    save_projection(proj, art.desc_pca_model(p.name));
  }
}

void run_transform(const PipelineConfig& cfg, const std::string& out_dir) {
  StageTimer timer("transform");
  const Artifacts art = resolve_artifacts(cfg, out_dir);
  std::map<std::string, ChannelManifest> manifests;
  std::map<std::string, DescriptorProjection> projections;

  for (std::size_t e = 0; e < cfg.vocabs.size(); ++e) {
    const auto& entry = cfg.vocabs[e];
    for (const auto& set : active_sets(art)) {
      const ChannelManifest& m = manifest_for(art, set, manifests);
      if (std::find(m.channels().begin(), m.channels().end(), entry.channel) == m.channels().end())
        throw ConfigError("channel '" + entry.channel + "' missing from " + set + " manifest");
      fs::create_directories(art.transformed_dir(e, set));
      for (const auto& image : m.images()) {
        DescriptorMatrix X = load_descriptors(m.resolve(image, entry.channel));
        X.image_id = image;
        X.channel = entry.channel;
        X = apply_chain(cfg, art, entry, std::move(X), projections);
        save_descriptors(X, art.transformed_file(e, set, image));
      }
    }
  }
}

void run_train_vocab(const PipelineConfig& cfg, const std::string& out_dir) {
  const Artifacts art = resolve_artifacts(cfg, out_dir);
  std::map<std::string, ChannelManifest> manifests;
  const ChannelManifest& train = manifest_for(art, "train", manifests);
  fs::create_directories(fs::path(art.out) / "vocab");

  for (std::size_t e = 0; e < cfg.vocabs.size(); ++e) {
    const auto& entry = cfg.vocabs[e];
    StageTimer timer("train-vocab e" + std::to_string(e) + " (k=" + std::to_string(entry.k) + ")");
    std::vector<DescriptorMatrix> sets;
    sets.reserve(train.images().size());
    for (const auto& image : train.images()) {
      const std::string path = art.transformed_file(e, set_name(art, "train"), image);
      require_file(path, "transformed descriptors");
      sets.push_back(load_descriptors(path));
    }
    const MatrixRXf sample =
        sample_rows(stack_descriptors(sets), cfg.kmeans_sample, entry.seed);
    KmeansParams params;
    params.k = entry.k;
    params.seed = entry.seed;
    params.max_iters = cfg.kmeans_max_iters;
    params.tol = cfg.kmeans_tol;
    VocabProvenance prov{entry.chain_label(), entry.channel, cfg.training_tag};
    save_vocabulary(kmeans_train(sample, params, prov), art.vocab_file(e));
  }
}

void run_encode(const PipelineConfig& cfg, const std::string& out_dir) {
  StageTimer timer("encode");
  const Artifacts art = resolve_artifacts(cfg, out_dir);
  std::map<std::string, ChannelManifest> manifests;
  const std::vector<double> weights = bundle_weights(cfg);

  std::vector<Vocabulary> vocabs;
  vocabs.reserve(cfg.vocabs.size());
  for (std::size_t e = 0; e < cfg.vocabs.size(); ++e) vocabs.push_back(load_entry_vocab(art, e));

  // Word assignments per set and entry, in manifest image order.
  auto quantize_set = [&](const std::string& set, std::size_t e) {
    const ChannelManifest& m = manifest_for(art, set, manifests);
    std::vector<Assignment> assignments;
    assignments.reserve(m.images().size());
    for (const auto& image : m.images()) {
      const std::string path = art.transformed_file(e, set_name(art, set), image);
      require_file(path, "transformed descriptors");
      DescriptorMatrix X = load_descriptors(path);
      X.image_id = image;
      assignments.push_back(quantize(X, vocabs[e]));
    }
    return assignments;
  };

  // idf statistics are learned on the training corpus, like the
  // vocabularies themselves.
  std::vector<std::optional<Eigen::VectorXf>> idf(cfg.vocabs.size());
  if (cfg.idf) {
    for (std::size_t e = 0; e < cfg.vocabs.size(); ++e) {
      const auto train_assignments = quantize_set("train", e);
      idf[e] = compute_idf(train_assignments, vocabs[e].k());
    }
  }

  fs::create_directories(fs::path(art.out) / "bow");
  for (const auto& set : active_sets(art)) {
    const ChannelManifest& m = manifest_for(art, set, manifests);
    std::vector<std::vector<BowVector>> blocks(cfg.vocabs.size());
    for (std::size_t e = 0; e < cfg.vocabs.size(); ++e) {
      const auto assignments = quantize_set(set, e);
      blocks[e].reserve(assignments.size());
      for (const auto& a : assignments) {
        BowVector b = encode_bow(a, vocabs[e].k(), idf[e]);
        b.values = ssr(b.values, cfg.ssr_beta);
        blocks[e].push_back(std::move(b));
      }
    }

    BowMatrix out;
    out.ids = m.images();
    Eigen::Index dim = 0;
    for (const auto& v : vocabs) dim += v.k();
    out.values.resize(static_cast<Eigen::Index>(m.images().size()), dim);
    for (std::size_t i = 0; i < m.images().size(); ++i) {
      std::vector<BowVector> per_image;
      per_image.reserve(cfg.vocabs.size());
      for (std::size_t e = 0; e < cfg.vocabs.size(); ++e) per_image.push_back(blocks[e][i]);
      out.values.row(static_cast<Eigen::Index>(i)) =
          concat_bundle(per_image, weights).values.transpose();
    }
    save_bow_matrix(out, art.bow_file(set));
  }
  if (art.train_is_db) {
    // Stage isolation keeps a training copy even when it equals the database.
    save_bow_matrix(load_bow_matrix(art.bow_file("db")), art.bow_file("train"));
  }
}

void run_train_reduction(const PipelineConfig& cfg, const std::string& out_dir) {
  StageTimer timer("train-reduction");
  const Artifacts art = resolve_artifacts(cfg, out_dir);
  require_file(art.bow_file("train"), "training BOW matrix");
  const BowMatrix train = load_bow_matrix(art.bow_file("train"));

  // Zero-descriptor images are kept in the index but carry no signal for PCA.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < train.n(); ++i)
    if (train.values.row(i).cast<double>().norm() > 0.0) keep.push_back(i);
  MatrixRXf Y(static_cast<Eigen::Index>(keep.size()), train.dim());
  for (std::size_t i = 0; i < keep.size(); ++i)
    Y.row(static_cast<Eigen::Index>(i)) = train.values.row(keep[i]);

  const ReductionModel model = train_reduction(Y, cfg.d_out);
  fs::create_directories(fs::path(art.out) / "model");
  save_reduction(model, art.reduction_model());
}

void run_reduce(const PipelineConfig& cfg, const std::string& out_dir) {
  StageTimer timer("reduce");
  const Artifacts art = resolve_artifacts(cfg, out_dir);
  require_file(art.reduction_model(), "reduction model");
  const ReductionModel model = load_reduction(art.reduction_model());
  fs::create_directories(fs::path(art.out) / "vec");
  for (const std::string set : {"db", "queries"}) {
    if (set == "queries" && art.queries_manifest.empty()) continue;
    require_file(art.bow_file(set), set + " BOW matrix");
    save_bow_matrix(reduce_matrix(load_bow_matrix(art.bow_file(set)), model), art.vec_file(set));
  }
}

void run_index(const PipelineConfig& cfg, const std::string& out_dir) {
  StageTimer timer("index");
  const Artifacts art = resolve_artifacts(cfg, out_dir);
  require_file(art.vec_file("db"), "reduced database vectors");
  const BowMatrix vectors = load_bow_matrix(art.vec_file("db"));
  SearchIndex::build(vectors);  // norm/uniqueness validation
  fs::create_directories(fs::path(art.out) / "index");
  save_bow_matrix(vectors, art.index_file());
}

void run_search(const PipelineConfig& cfg, const std::string& out_dir) {
  StageTimer timer("search");
  const Artifacts art = resolve_artifacts(cfg, out_dir);
  require_file(art.index_file(), "search index");
  const SearchIndex index = SearchIndex::build(load_bow_matrix(art.index_file()));

  // Query list: the queries manifest when present, else ground-truth queries
  // answered by their own indexed vectors.
  std::vector<std::string> query_ids;
  std::map<std::string, ShortVector> external;
  if (!art.queries_manifest.empty()) {
    require_file(art.vec_file("queries"), "reduced query vectors");
    const BowMatrix qv = load_bow_matrix(art.vec_file("queries"));
    for (Eigen::Index i = 0; i < qv.n(); ++i) {
      ShortVector v;
      v.image_id = qv.ids[static_cast<std::size_t>(i)];
      v.values = qv.values.row(i).transpose();
      v.zero = v.values.norm() == 0.0f;
      external.emplace(v.image_id, v);
      query_ids.push_back(v.image_id);
    }
  } else {
    if (art.ground_truth.empty())
      throw ConfigError("search needs a queries manifest or a ground_truth file");
    require_file(art.ground_truth, "ground truth");
    for (const auto& q : GroundTruth::load(art.ground_truth).queries)
      query_ids.push_back(q.query_id);
  }

  const int top = cfg.search_top == 0 ? static_cast<int>(index.size()) : cfg.search_top;
  std::vector<std::pair<std::string, std::vector<RankedHit>>> results;
  results.reserve(query_ids.size());
  for (const auto& qid : query_ids) {
    const auto it = external.find(qid);
    const ShortVector q = it != external.end() ? it->second : index.vector_of(qid);
    results.emplace_back(qid, query(index, q, top));
  }
  fs::create_directories(art.out);
  save_results(results, art.results_file());
}

double run_eval(const PipelineConfig& cfg, const std::string& out_dir) {
  StageTimer timer("eval");
  const Artifacts art = resolve_artifacts(cfg, out_dir);
  if (art.ground_truth.empty()) throw ConfigError("eval needs a ground_truth file");
  require_file(art.ground_truth, "ground truth");
  require_file(art.results_file(), "search results");

  const GroundTruth gt = GroundTruth::load(art.ground_truth);
  const auto results = load_results(art.results_file());
  std::map<std::string, const std::vector<RankedHit>*> by_query;
  for (const auto& [qid, hits] : results) by_query[qid] = &hits;

  std::ostringstream report;
  char buf[64];
  double sum = 0.0;
  for (const auto& entry : gt.queries) {
    auto it = by_query.find(entry.query_id);
    if (it == by_query.end()) throw DataError("no search results for query " + entry.query_id);
    std::vector<std::string> ranked(it->second->size());
    for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i] = (*it->second)[i].image_id;
    const double ap = average_precision(ranked, entry);
    sum += ap;
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\n", entry.query_id.c_str(), ap);
    report << buf;
  }
  const double map = sum / static_cast<double>(gt.queries.size());
  std::snprintf(buf, sizeof(buf), "mAP\t%.6f\n", map);
  report << buf;

  std::ofstream out(art.eval_file(), std::ios::trunc);
  if (!out) throw DataError("cannot write " + art.eval_file());
  out << report.str();
  std::cout << report.str();
  return map;
}

void run_stats(const PipelineConfig& cfg, const std::string& out_dir) {
  StageTimer timer("stats");
  const Artifacts art = resolve_artifacts(cfg, out_dir);

  std::vector<Eigen::Index> ks;
  for (const auto& e : cfg.vocabs) ks.push_back(e.k);
  std::ostringstream report;
  report << "complexity\t" << quantization_complexity(ks) << '\n';

  // Unique product-vocabulary assignments need trained vocabularies and
  // transformed database descriptors; skip them when those are absent.
  bool have_artifacts = true;
  for (std::size_t e = 0; e < cfg.vocabs.size() && have_artifacts; ++e)
    if (!fs::exists(art.vocab_file(e))) have_artifacts = false;
  if (have_artifacts && !art.manifest.empty() && fs::exists(art.manifest)) {
    std::map<std::string, ChannelManifest> manifests;
    const ChannelManifest& m = manifest_for(art, "db", manifests);
    std::vector<std::vector<std::uint32_t>> per_vocab(cfg.vocabs.size());
    for (std::size_t e = 0; e < cfg.vocabs.size(); ++e) {
      const Vocabulary vocab = load_entry_vocab(art, e);
      for (const auto& image : m.images()) {
        const std::string path = art.transformed_file(e, "db", image);
        if (!fs::exists(path)) {
          have_artifacts = false;
          break;
        }
        DescriptorMatrix X = load_descriptors(path);
        const Assignment a = quantize(X, vocab);
        per_vocab[e].insert(per_vocab[e].end(), a.word_ids.begin(), a.word_ids.end());
      }
      if (!have_artifacts) break;
    }
    if (have_artifacts) {
      for (std::size_t v = 1; v <= cfg.vocabs.size(); ++v) {
        std::vector<std::vector<std::uint32_t>> prefix(per_vocab.begin(),
                                                       per_vocab.begin() + static_cast<long>(v));
        report << "unique_assignments\t" << v << '\t' << unique_assignments(prefix) << '\n';
      }
    }
  }
  if (!have_artifacts)
    std::fprintf(stderr, "[mvbow] stats: vocabularies or transformed descriptors missing, "
                         "unique-assignment counts skipped\n");

  std::ofstream out(art.stats_file(), std::ios::trunc);
  if (!out) throw DataError("cannot write " + art.stats_file());
  out << report.str();
  std::cout << report.str();
}

double run_pipeline(const PipelineConfig& cfg, const std::string& out_dir) {
  StageTimer timer("pipeline");
  if (cfg.synth) run_synth(cfg, out_dir);
  run_train_desc_pca(cfg, out_dir);
  run_transform(cfg, out_dir);
  run_train_vocab(cfg, out_dir);
  run_encode(cfg, out_dir);
  run_train_reduction(cfg, out_dir);
  run_reduce(cfg, out_dir);
  run_index(cfg, out_dir);
  run_search(cfg, out_dir);
  const double map = run_eval(cfg, out_dir);
  run_stats(cfg, out_dir);
  return map;
}

}  // namespace pipeline
}  // namespace mvbow
