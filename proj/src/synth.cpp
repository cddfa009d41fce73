#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "mvbow/rng.hpp"
#include "mvbow/search_eval.hpp"

namespace mvbow {

namespace {

std::string image_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "im%06d", i);
  return buf;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_images < 1 || n_queries < 1 || descriptors_per_image < 1 || dim < 1 || n_clusters < 1 ||
      positives_per_query < 1)
    throw ParameterError("synthetic spec counts must all be >= 1");
  if (spread < 0.0) throw ParameterError("synthetic spread must be >= 0");
  const long long group = 1ll + positives_per_query;
  if (static_cast<long long>(n_queries) * group > n_images)
    throw ParameterError("infeasible synthetic spec: " + std::to_string(n_queries) + " groups of " +
                         std::to_string(group) + " images exceed " + std::to_string(n_images));
}

SynthOutput generate_synthetic(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  const fs::path desc_dir = root / "desc";
  fs::create_directories(desc_dir);

  Rng rng(spec.seed);
  const std::string channel = "r1.00";

  // Latent appearance patterns shared by all images.
  MatrixRXd patterns(spec.n_clusters, spec.dim);
  for (Eigen::Index r = 0; r < patterns.rows(); ++r)
    for (Eigen::Index c = 0; c < patterns.cols(); ++c) patterns(r, c) = rng.uniform();

  // Each planted group shares one fixed pattern sequence; group g holds
  // images [g*gs, (g+1)*gs) with the query first.
  const int group_size = 1 + spec.positives_per_query;
  std::vector<std::vector<int>> group_patterns(static_cast<std::size_t>(spec.n_queries));
  for (auto& seq : group_patterns) {
    seq.resize(static_cast<std::size_t>(spec.descriptors_per_image));
    for (auto& p : seq) p = static_cast<int>(rng.index(static_cast<std::size_t>(spec.n_clusters)));
  }

  ChannelManifest manifest;
  GroundTruth gt;

  for (int i = 0; i < spec.n_images; ++i) {
    const int group = i / group_size < spec.n_queries ? i / group_size : -1;
    std::vector<int> own_patterns;
    const std::vector<int>* seq;
    if (group >= 0) {
      seq = &group_patterns[static_cast<std::size_t>(group)];
    } else {
      own_patterns.resize(static_cast<std::size_t>(spec.descriptors_per_image));
      for (auto& p : own_patterns)
        p = static_cast<int>(rng.index(static_cast<std::size_t>(spec.n_clusters)));
      seq = &own_patterns;
    }

    DescriptorMatrix X;
    X.image_id = image_name(i);
    X.channel = channel;
    X.data.resize(spec.descriptors_per_image, spec.dim);
    for (int j = 0; j < spec.descriptors_per_image; ++j) {
      for (int c = 0; c < spec.dim; ++c) {
        double v = patterns((*seq)[static_cast<std::size_t>(j)], c);
        if (spec.spread > 0.0) v += spec.spread * rng.normal();
        X.data(j, c) = static_cast<float>(std::max(0.0, v));
      }
    }
    const std::string rel = "desc/" + X.image_id + ".mvsd";
    save_descriptors(X, (root / rel).string());
    manifest.add(X.image_id, channel, rel);
  }

  for (int g = 0; g < spec.n_queries; ++g) {
    GroundTruthEntry entry;
    entry.query_id = image_name(g * group_size);
    entry.exclude_self = true;
    for (int m = 1; m < group_size; ++m) entry.positives.insert(image_name(g * group_size + m));
    gt.queries.push_back(std::move(entry));
  }

  SynthOutput out;
  out.manifest_path = (root / "manifest.tsv").string();
  out.ground_truth_path = (root / "ground_truth.txt").string();
  manifest.save(out.manifest_path);
  gt.save(out.ground_truth_path);
  return out;
}

}  // namespace mvbow
