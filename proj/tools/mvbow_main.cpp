// Batch CLI over the mvbow pipeline: builds compact image representations
// from pre-extracted local descriptors and evaluates retrieval quality.

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>

#include "mvbow/pipeline.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct SharedOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

void add_shared(CLI::App* cmd, SharedOptions& opts, bool config_required = true) {
  auto* config = cmd->add_option("--config", opts.config_path, "pipeline config file");
  if (config_required) config->required();
  cmd->add_option("--out", opts.out_dir, "output directory (overrides config `output`)");
  cmd->add_option("--seed", opts.seed, "override the [synth] seed")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--threads", opts.threads, "cap internal parallelism (0 = default)");
}

mvbow::PipelineConfig load_config(const SharedOptions& opts) {
  auto cfg = mvbow::PipelineConfig::load(opts.config_path);
  if (opts.seed_set) {
    if (!cfg.synth) throw mvbow::ConfigError("--seed given but config has no [synth] section");
    cfg.synth->seed = opts.seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvbow - multi-vocabulary bag-of-words retrieval pipeline"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SharedOptions opts;
  using Runner = std::function<void(const mvbow::PipelineConfig&, const std::string&)>;
  struct Sub {
    const char* name;
    const char* help;
    Runner run;
  };
  const Sub subs[] = {
      {"synth", "generate the synthetic planted benchmark", mvbow::pipeline::run_synth},
      {"train-desc-pca", "train descriptor-level PCA projections", mvbow::pipeline::run_train_desc_pca},
      {"transform", "apply per-entry descriptor transform chains", mvbow::pipeline::run_transform},
      {"train-vocab", "train the k-means vocabularies", mvbow::pipeline::run_train_vocab},
      {"encode", "quantize and encode weighted concatenated BOW vectors", mvbow::pipeline::run_encode},
      {"train-reduction", "train the joint PCA + whitening model", mvbow::pipeline::run_train_reduction},
      {"reduce", "project BOW vectors to short search vectors", mvbow::pipeline::run_reduce},
      {"index", "validate and store the search index", mvbow::pipeline::run_index},
      {"search", "rank the index for every query", mvbow::pipeline::run_search},
      {"eval", "compute per-query AP and mAP from search results",
       [](const mvbow::PipelineConfig& cfg, const std::string& out) { mvbow::pipeline::run_eval(cfg, out); }},
      {"stats", "print quantization complexity and unique assignments", mvbow::pipeline::run_stats},
      {"pipeline", "run every stage in order",
       [](const mvbow::PipelineConfig& cfg, const std::string& out) { mvbow::pipeline::run_pipeline(cfg, out); }},
  };

  for (const auto& sub : subs) {
    auto* cmd = app.add_subcommand(sub.name, sub.help);
    add_shared(cmd, opts);
    cmd->callback([&opts, &sub]() {
      if (opts.threads > 0) omp_set_num_threads(opts.threads);
      const auto cfg = load_config(opts);
      sub.run(cfg, opts.out_dir);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  } catch (const mvbow::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const mvbow::ParameterError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const mvbow::Error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
