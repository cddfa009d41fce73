#ifndef MVBOW_CONFIG_HPP
#define MVBOW_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include "mvbow/search_eval.hpp"

namespace mvbow {

// One step of a descriptor transform chain.
struct TransformStep {
  enum class Kind { PowerLaw, Project };
  Kind kind = Kind::PowerLaw;
  double beta = 0.5;        // PowerLaw
  std::string model_ref;    // Project: path or "@name" of a [desc_pca] entry
};

struct VocabEntryConfig {
  std::string channel;
  std::vector<TransformStep> transform;  // empty = none
  int k = 0;
  std::uint64_t seed = 0;
  std::optional<double> weight;  // unset = auto (log-size rule)

  std::string chain_label() const;
};

struct DescPcaConfig {
  std::string name;
  std::string channel;
  int d_out = 0;
  std::size_t sample = 0;  // 0 = all descriptors
  std::uint64_t seed = 0;
};

// Parsed pipeline configuration; grammar documented in the README.
struct PipelineConfig {
  std::string config_dir;  // directory of the config file, for relative paths

  std::string manifest;
  std::string training_manifest;  // empty = same as manifest
  std::string queries_manifest;   // empty = queries come from the index
  std::string ground_truth;
  std::string output;

  double ssr_beta = 0.5;
  bool idf = false;
  int d_out = 128;
  std::string training_tag;
  int kmeans_max_iters = 25;
  double kmeans_tol = 1e-4;
  std::size_t kmeans_sample = 0;  // 0 = all descriptors
  int search_top = 0;             // 0 = full ranking

  std::vector<VocabEntryConfig> vocabs;
  std::vector<DescPcaConfig> desc_pca;
  std::optional<SynthSpec> synth;

  static PipelineConfig load(const std::string& path);
  // Structural checks that need no file access.
  void validate() const;
  // Joins a config-relative path.
  std::string resolve(const std::string& path) const;
};

std::vector<TransformStep> parse_transform_chain(const std::string& text);
std::string transform_chain_label(const std::vector<TransformStep>& chain);

}  // namespace mvbow

#endif  // MVBOW_CONFIG_HPP
