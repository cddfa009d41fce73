#ifndef MVBOW_DESCRIPTOR_STORE_HPP
#define MVBOW_DESCRIPTOR_STORE_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvbow/error.hpp"

namespace mvbow {

using MatrixRXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixRXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Local descriptors of one image in one channel, one row per feature.
struct DescriptorMatrix {
  std::string image_id;
  std::string channel;
  MatrixRXf data;  // n x d, float32

  Eigen::Index n() const { return data.rows(); }
  Eigen::Index d() const { return data.cols(); }
};

// Maps (image, channel) to a descriptor file. Channels and images keep
// their first-appearance order; the (image x channel) grid must be complete.
class ChannelManifest {
 public:
  static ChannelManifest load(const std::string& path);
  void save(const std::string& path) const;

  void add(const std::string& image_id, const std::string& channel, const std::string& rel_path);
  // Validates uniqueness and grid completeness; throws DataError.
  void validate() const;

  const std::vector<std::string>& channels() const { return channels_; }
  const std::vector<std::string>& images() const { return images_; }
  // Path relative to the manifest location.
  const std::string& path_for(const std::string& image_id, const std::string& channel) const;
  // Absolute/joined path using the directory the manifest was loaded from.
  std::string resolve(const std::string& image_id, const std::string& channel) const;
  const std::string& base_dir() const { return base_dir_; }
  void set_base_dir(const std::string& dir) { base_dir_ = dir; }

 private:
  std::vector<std::string> channels_;
  std::vector<std::string> images_;
  std::map<std::pair<std::string, std::string>, std::string> paths_;  // (image, channel) -> rel path
  std::string base_dir_;
};

// Learned linear projection of raw descriptors (PCA basis).
struct DescriptorProjection {
  Eigen::VectorXd mean;   // d
  Eigen::MatrixXd basis;  // d x d_out, column-orthonormal
  std::string source_tag;
  bool renormalize = true;

  Eigen::Index d_in() const { return basis.rows(); }
  Eigen::Index d_out() const { return basis.cols(); }
};

// ---- Binary formats -------------------------------------------------------
// Descriptor file "MVSD": version u32=1, n u64, d u32, float32 row-major.
DescriptorMatrix load_descriptors(const std::string& path);
void save_descriptors(const DescriptorMatrix& X, const std::string& path);

// Projection file "MVPJ": version u32=1, d u32, d_out u32, renormalize u8,
// mean float32[d], basis float32[d*d_out] column-major.
DescriptorProjection load_projection(const std::string& path);
void save_projection(const DescriptorProjection& proj, const std::string& path);

// ---- Transforms ------------------------------------------------------------

// Component-wise |x|^beta * sign(x) followed by row L2 renormalization.
// Zero rows stay zero. beta must lie in (0, 1].
DescriptorMatrix power_law_descriptors(const DescriptorMatrix& X, double beta);

// PCA on a descriptor sample: mean = column mean, basis = top d_out
// covariance eigenvectors (1/n convention, descending eigenvalues, sign
// fixed so the largest-magnitude component of each column is positive).
DescriptorProjection train_descriptor_pca(const DescriptorMatrix& sample, int d_out);

// Rows mapped to (x - mean)^T basis; L2-renormalized when proj.renormalize
// (zero rows left zero).
DescriptorMatrix project_descriptors(const DescriptorMatrix& X, const DescriptorProjection& proj);

// ---- Helpers ---------------------------------------------------------------

// Stacks descriptor sets row-wise (shared d required).
MatrixRXf stack_descriptors(const std::vector<DescriptorMatrix>& sets);

// Deterministic sample of max_rows rows (partial Fisher-Yates with `seed`);
// max_rows == 0 keeps everything.
MatrixRXf sample_rows(const MatrixRXf& X, std::size_t max_rows, std::uint64_t seed);

// Checks that every row is unit-norm within tol or exactly zero; returns the
// number of zero rows, throws DataError for an off-norm nonzero row.
std::size_t check_unit_rows(const MatrixRXf& X, double tol = 1e-4);

// Throws DataError if any entry is not finite.
void check_finite(const MatrixRXf& X, const std::string& context);

}  // namespace mvbow

#endif  // MVBOW_DESCRIPTOR_STORE_HPP
