#ifndef MVBOW_PIPELINE_HPP
#define MVBOW_PIPELINE_HPP

#include <string>

#include "mvbow/config.hpp"

namespace mvbow {
namespace pipeline {

// Resolved input/artifact locations for one pipeline run rooted at out_dir.
struct Artifacts {
  std::string out;
  std::string manifest;
  std::string training_manifest;  // equals manifest when not distinct
  std::string queries_manifest;   // empty when queries come from the index
  std::string ground_truth;       // empty when absent
  bool train_is_db = true;

  std::string synth_dir() const;
  std::string desc_pca_model(const std::string& name) const;
  std::string transformed_dir(std::size_t entry, const std::string& set) const;
  std::string transformed_file(std::size_t entry, const std::string& set,
                               const std::string& image_id) const;
  std::string vocab_file(std::size_t entry) const;
  std::string bow_file(const std::string& set) const;
  std::string reduction_model() const;
  std::string vec_file(const std::string& set) const;
  std::string index_file() const;
  std::string results_file() const;
  std::string eval_file() const;
  std::string stats_file() const;
};

Artifacts resolve_artifacts(const PipelineConfig& cfg, const std::string& out_dir);

// Stage runners; each reads its inputs from disk and writes its artifacts
// under out_dir, so chaining them equals one `run_pipeline` call.
void run_synth(const PipelineConfig& cfg, const std::string& out_dir);
void run_train_desc_pca(const PipelineConfig& cfg, const std::string& out_dir);
void run_transform(const PipelineConfig& cfg, const std::string& out_dir);
void run_train_vocab(const PipelineConfig& cfg, const std::string& out_dir);
void run_encode(const PipelineConfig& cfg, const std::string& out_dir);
void run_train_reduction(const PipelineConfig& cfg, const std::string& out_dir);
void run_reduce(const PipelineConfig& cfg, const std::string& out_dir);
void run_index(const PipelineConfig& cfg, const std::string& out_dir);
void run_search(const PipelineConfig& cfg, const std::string& out_dir);
// Prints per-query AP lines and the final mAP; returns the mAP.
double run_eval(const PipelineConfig& cfg, const std::string& out_dir);
// Prints quantization complexity and, when the artifacts exist,
// unique-assignment counts per bundle prefix.
void run_stats(const PipelineConfig& cfg, const std::string& out_dir);

// All stages in order (synth only when configured); returns the mAP.
double run_pipeline(const PipelineConfig& cfg, const std::string& out_dir);

}  // namespace pipeline
}  // namespace mvbow

#endif  // MVBOW_PIPELINE_HPP
