#include "mvbow/descriptor_store.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mvbow/io.hpp"
#include "mvbow/linalg.hpp"
#include "mvbow/rng.hpp"

namespace mvbow {

std::vector<char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---- ChannelManifest -------------------------------------------------------

ChannelManifest ChannelManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  ChannelManifest m;
  m.base_dir_ = std::filesystem::path(path).parent_path().string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string image, channel, rel;
    if (!std::getline(ls, image, '\t') || !std::getline(ls, channel, '\t') ||
        !std::getline(ls, rel, '\t') || image.empty() || channel.empty() || rel.empty()) {
      throw DataError("malformed manifest line " + std::to_string(lineno) + " in " + path);
    }
    m.add(image, channel, rel);
  }
  m.validate();
  return m;
}

void ChannelManifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest: " + path);
  for (const auto& image : images_)
    for (const auto& channel : channels_)
      out << image << '\t' << channel << '\t' << paths_.at({image, channel}) << '\n';
  if (!out) throw DataError("manifest write failed: " + path);
}

void ChannelManifest::add(const std::string& image_id, const std::string& channel,
                          const std::string& rel_path) {
  auto [it, inserted] = paths_.emplace(std::make_pair(image_id, channel), rel_path);
  if (!inserted)
    throw DataError("duplicate manifest entry for (" + image_id + ", " + channel + ")");
  if (std::find(channels_.begin(), channels_.end(), channel) == channels_.end())
    channels_.push_back(channel);
  if (std::find(images_.begin(), images_.end(), image_id) == images_.end())
    images_.push_back(image_id);
}

void ChannelManifest::validate() const {
  for (const auto& image : images_)
    for (const auto& channel : channels_)
      if (paths_.find({image, channel}) == paths_.end())
        throw DataError("manifest misses descriptor file for (" + image + ", " + channel + ")");
}

const std::string& ChannelManifest::path_for(const std::string& image_id,
                                             const std::string& channel) const {
  auto it = paths_.find({image_id, channel});
  if (it == paths_.end())
    throw DataError("no manifest entry for (" + image_id + ", " + channel + ")");
  return it->second;
}

std::string ChannelManifest::resolve(const std::string& image_id, const std::string& channel) const {
  const std::string& rel = path_for(image_id, channel);
  if (base_dir_.empty()) return rel;
  return (std::filesystem::path(base_dir_) / rel).string();
}

// ---- Descriptor file I/O ---------------------------------------------------

DescriptorMatrix load_descriptors(const std::string& path) {
  BinaryReader in(path);
  in.magic("MVSD");
  in.expect_version(1);
  const auto n = in.scalar<std::uint64_t>();
  const auto d = in.scalar<std::uint32_t>();
  if (d == 0) throw FormatError("descriptor dimension 0 in " + path);
  DescriptorMatrix X;
  X.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  in.array(X.data.data(), n * static_cast<std::uint64_t>(d));
  in.expect_eof();
  check_finite(X.data, path);
  return X;
}

void save_descriptors(const DescriptorMatrix& X, const std::string& path) {
  BinaryWriter out(path);
  out.magic("MVSD");
  out.scalar<std::uint32_t>(1);
  out.scalar<std::uint64_t>(static_cast<std::uint64_t>(X.n()));
  out.scalar<std::uint32_t>(static_cast<std::uint32_t>(X.d()));
  out.array(X.data.data(), static_cast<std::size_t>(X.data.size()));
  out.close();
}

DescriptorProjection load_projection(const std::string& path) {
  BinaryReader in(path);
  in.magic("MVPJ");
  in.expect_version(1);
  const auto d = in.scalar<std::uint32_t>();
  const auto d_out = in.scalar<std::uint32_t>();
  const auto renorm = in.scalar<std::uint8_t>();
  if (d == 0 || d_out == 0 || d_out > d) throw FormatError("bad projection dims in " + path);
  std::vector<float> mean(d), basis(static_cast<std::size_t>(d) * d_out);
  in.array(mean.data(), mean.size());
  in.array(basis.data(), basis.size());
  in.expect_eof();

  DescriptorProjection proj;
  proj.renormalize = renorm != 0;
  proj.mean.resize(d);
  for (std::uint32_t i = 0; i < d; ++i) proj.mean[i] = mean[i];
  proj.basis.resize(d, d_out);
  for (std::uint32_t c = 0; c < d_out; ++c)  // column-major payload
    for (std::uint32_t r = 0; r < d; ++r)
      proj.basis(r, c) = basis[static_cast<std::size_t>(c) * d + r];

  const Eigen::MatrixXd gram = proj.basis.transpose() * proj.basis;
  if ((gram - Eigen::MatrixXd::Identity(d_out, d_out)).cwiseAbs().maxCoeff() > 1e-5)
    throw DataError("projection basis not column-orthonormal: " + path);
  return proj;
}

void save_projection(const DescriptorProjection& proj, const std::string& path) {
  const auto d = static_cast<std::uint32_t>(proj.d_in());
  const auto d_out = static_cast<std::uint32_t>(proj.d_out());
  BinaryWriter out(path);
  out.magic("MVPJ");
  out.scalar<std::uint32_t>(1);
  out.scalar<std::uint32_t>(d);
  out.scalar<std::uint32_t>(d_out);
  out.scalar<std::uint8_t>(proj.renormalize ? 1 : 0);
  std::vector<float> mean(d), basis(static_cast<std::size_t>(d) * d_out);
  for (std::uint32_t i = 0; i < d; ++i) mean[i] = static_cast<float>(proj.mean[i]);
  for (std::uint32_t c = 0; c < d_out; ++c)
    for (std::uint32_t r = 0; r < d; ++r)
      basis[static_cast<std::size_t>(c) * d + r] = static_cast<float>(proj.basis(r, c));
  out.array(mean.data(), mean.size());
  out.array(basis.data(), basis.size());
  out.close();
}

// ---- Transforms ------------------------------------------------------------

DescriptorMatrix power_law_descriptors(const DescriptorMatrix& X, double beta) {
  if (!(beta > 0.0) || beta > 1.0)
    throw ParameterError("power-law exponent must lie in (0, 1], got " + std::to_string(beta));
  DescriptorMatrix out;
  out.image_id = X.image_id;
  out.channel = X.channel;
  out.data.resize(X.n(), X.d());
  const Eigen::Index n = X.n(), d = X.d();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double x = X.data(i, j);
      const double p = x == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(x), beta), x);
      out.data(i, j) = static_cast<float>(p);
      norm2 += p * p;
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (Eigen::Index j = 0; j < d; ++j)
        out.data(i, j) = static_cast<float>(static_cast<double>(out.data(i, j)) * inv);
    }
  }
  return out;
}

DescriptorProjection train_descriptor_pca(const DescriptorMatrix& sample, int d_out) {
  const Eigen::Index n = sample.n(), d = sample.d();
  if (d_out < 1 || d_out > d)
    throw ParameterError("d_out must lie in [1, d]");
  if (n <= d_out)
    throw ParameterError("need more than d_out sample rows, got " + std::to_string(n));

  const MatrixRXd S = sample.data.cast<double>();
  const Eigen::RowVectorXd mean = S.colwise().mean();
  const MatrixRXd centered = S.rowwise() - mean;
  // 1/n covariance convention; scale cancels in downstream whitening.
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw DataError("descriptor PCA eigensolver failed");
  // Eigen returns ascending order.
  Eigen::VectorXd evals = solver.eigenvalues().reverse();
  Eigen::MatrixXd evecs = solver.eigenvectors().rowwise().reverse();

  const double lambda1 = std::max(evals[0], 0.0);
  const double rank_tol = 1e-12 * lambda1;
  int usable = 0;
  for (Eigen::Index i = 0; i < evals.size(); ++i)
    if (evals[i] > rank_tol && evals[i] > 0.0) ++usable;
  if (usable < d_out)
    throw DataError("rank deficiency: only " + std::to_string(usable) +
                    " positive eigenvalues, requested " + std::to_string(d_out));

  Eigen::MatrixXd basis = evecs.leftCols(d_out);
  fix_eigenvector_signs(basis);

  DescriptorProjection proj;
  proj.mean = mean.transpose();
  proj.basis = std::move(basis);
  return proj;
}

DescriptorMatrix project_descriptors(const DescriptorMatrix& X, const DescriptorProjection& proj) {
  if (X.d() != proj.d_in())
    throw ParameterError("projection expects d=" + std::to_string(proj.d_in()) +
                         ", got " + std::to_string(X.d()));
  DescriptorMatrix out;
  out.image_id = X.image_id;
  out.channel = X.channel;
  const Eigen::Index n = X.n(), dn = proj.d_out();
  out.data.resize(n, dn);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = X.data.row(i).cast<double>().transpose() - proj.mean;
    Eigen::VectorXd y = proj.basis.transpose() * x;
    if (proj.renormalize) {
      const double norm = y.norm();
      if (norm > 0.0) y /= norm;
    }
    for (Eigen::Index j = 0; j < dn; ++j) out.data(i, j) = static_cast<float>(y[j]);
  }
  return out;
}

// ---- Helpers ---------------------------------------------------------------

MatrixRXf stack_descriptors(const std::vector<DescriptorMatrix>& sets) {
  Eigen::Index total = 0, d = 0;
  for (const auto& s : sets) {
    if (s.n() == 0) continue;
    if (d == 0)
      d = s.d();
    else if (s.d() != d)
      throw ParameterError("descriptor dimension mismatch while stacking");
    total += s.n();
  }
  MatrixRXf out(total, d);
  Eigen::Index row = 0;
  for (const auto& s : sets) {
    if (s.n() == 0) continue;
    out.middleRows(row, s.n()) = s.data;
    row += s.n();
  }
  return out;
}

MatrixRXf sample_rows(const MatrixRXf& X, std::size_t max_rows, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(X.rows());
  if (max_rows == 0 || max_rows >= n) return X;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < max_rows; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(idx[i], idx[j]);
  }
  MatrixRXf out(static_cast<Eigen::Index>(max_rows), X.cols());
  for (std::size_t i = 0; i < max_rows; ++i)
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

std::size_t check_unit_rows(const MatrixRXf& X, double tol) {
  std::size_t zero_rows = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double norm = X.row(i).cast<double>().norm();
    if (norm == 0.0) {
      ++zero_rows;
    } else if (std::abs(norm - 1.0) > tol) {
      throw DataError("row " + std::to_string(i) + " has norm " + std::to_string(norm) +
                      ", expected 1");
    }
  }
  return zero_rows;
}

void check_finite(const MatrixRXf& X, const std::string& context) {
  if (!X.allFinite()) throw DataError("non-finite descriptor values in " + context);
}

}  // namespace mvbow
