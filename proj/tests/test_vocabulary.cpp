#include <doctest.h>
#include <omp.h>

#include <cstring>
#include <filesystem>

#include "mvbow/io.hpp"
#include "mvbow/vocabulary.hpp"
#include "oracles.hpp"

using namespace mvbow;

namespace {

MatrixRXf points_1d(std::initializer_list<double> values) {
  MatrixRXf X(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) X(i++, 0) = static_cast<float>(v);
  return X;
}

std::string temp_path(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mvbow_tests";
  fs::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("kmeans: exact two-point fit") {
  KmeansParams params{2, 7, 25, 1e-4};
  KmeansTrace trace;
  const auto V = kmeans_train(points_1d({0, 10}), params, {}, &trace);
  std::vector<float> sorted{V.centroids(0, 0), V.centroids(1, 0)};
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted[0] == 0.0f);
  CHECK(sorted[1] == 10.0f);
  CHECK(trace.final_objective == 0.0);
}

TEST_CASE("kmeans: {0,1,10} reaches the enumeration optimum") {
  const auto X = points_1d({0, 1, 10});
  const double oracle = oracles::best_two_partition_sse({0, 1, 10});
  CHECK(oracle == doctest::Approx(0.5));  // frozen from the oracle

  KmeansParams params{2, 3, 25, 1e-4};
  KmeansTrace trace;
  const auto V = kmeans_train(X, params, {}, &trace);
  CHECK(trace.final_objective == doctest::Approx(0.5).epsilon(1e-12));
  std::vector<float> sorted{V.centroids(0, 0), V.centroids(1, 0)};
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted[0] == doctest::Approx(0.5));
  CHECK(sorted[1] == doctest::Approx(10.0));
}

TEST_CASE("kmeans: k=1 is the sample mean with total variance objective") {
  const auto X = oracles::random_matrix(40, 3, 17);
  KmeansParams params{1, 5, 25, 1e-4};
  KmeansTrace trace;
  const auto V = kmeans_train(X, params, {}, &trace);
  const Eigen::RowVectorXd mean = X.cast<double>().colwise().mean();
  for (int j = 0; j < 3; ++j)
    CHECK(V.centroids(0, j) == doctest::Approx(mean[j]).epsilon(1e-6));
  double want = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    want += (X.row(i).cast<double>() - mean).squaredNorm();
  CHECK(trace.final_objective == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("kmeans: parameter errors") {
  const auto X = points_1d({0, 1});
  CHECK_THROWS_AS(kmeans_train(X, KmeansParams{3, 1, 25, 1e-4}), ParameterError);
  CHECK_THROWS_AS(kmeans_train(X, KmeansParams{0, 1, 25, 1e-4}), ParameterError);
}

TEST_CASE("kmeans: objective history is non-increasing and ends in a fixed point") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto X = oracles::random_matrix(300, 6, 1000 + seed);
    KmeansParams params{8, seed, 25, 0.0};  // tol 0 forces full iteration budget
    KmeansTrace trace;
    const auto V = kmeans_train(X, params, {}, &trace);
    for (std::size_t t = 1; t < trace.objective_history.size(); ++t)
      CHECK(trace.objective_history[t] <= trace.objective_history[t - 1] + 1e-9);

    DescriptorMatrix D;
    D.data = X;
    const auto A = quantize(D, V);
    CHECK(A.word_ids == trace.final_assignment);
  }
}

TEST_CASE("kmeans: bit-identical centroids across thread counts") {
  const auto X = oracles::random_matrix(500, 8, 99);
  KmeansParams params{16, 42, 25, 1e-4};
  const int default_threads = omp_get_max_threads();
  std::vector<MatrixRXf> runs;
  for (int threads : {1, 4, 8}) {
    omp_set_num_threads(threads);
    runs.push_back(kmeans_train(X, params).centroids);
  }
  omp_set_num_threads(default_threads);
  for (std::size_t r = 1; r < runs.size(); ++r)
    CHECK(std::memcmp(runs[0].data(), runs[r].data(), sizeof(float) * 16 * 8) == 0);
}

TEST_CASE("kmeans: no failures on degenerate-ish random stress inputs") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const int n = 5 + static_cast<int>(rng.index(20));
    const int k = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    MatrixRXf X(n, 2);
    for (int i = 0; i < n; ++i) {
      // Coarse grid makes duplicates and empty-cluster repairs likely.
      X(i, 0) = static_cast<float>(rng.index(6));
      X(i, 1) = static_cast<float>(rng.index(6));
    }
    // Degenerate samples with fewer than k distinct rows are data errors,
    // anything else must train.
    try {
      const auto V = kmeans_train(X, KmeansParams{k, seed, 25, 1e-4});
      CHECK(V.k() == k);
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("duplicate centroids") != std::string::npos);
    }
  }
}

TEST_CASE("quantize: tie goes to the lowest centroid index") {
  Vocabulary V;
  V.centroids = points_1d({0, 10});
  DescriptorMatrix X;
  X.data = points_1d({5});
  CHECK(quantize(X, V).word_ids == std::vector<std::uint32_t>{0});
}

TEST_CASE("quantize: exact centroid match and empty input") {
  Vocabulary V;
  V.centroids = points_1d({0, 1, 2, 3, 4});
  DescriptorMatrix X;
  X.data = points_1d({3});
  CHECK(quantize(X, V).word_ids == std::vector<std::uint32_t>{3});

  DescriptorMatrix empty;
  empty.data.resize(0, 1);
  CHECK(quantize(empty, V).word_ids.empty());
}

TEST_CASE("quantize: dimension mismatch") {
  Vocabulary V;
  V.centroids = oracles::random_matrix(3, 4, 1);
  DescriptorMatrix X;
  X.data = oracles::random_matrix(2, 5, 2);
  CHECK_THROWS_AS(quantize(X, V), ParameterError);
}

TEST_CASE("quantize: agrees with the naive double-loop oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Vocabulary V;
    V.centroids = oracles::random_matrix(9, 5, 600 + seed);
    DescriptorMatrix X;
    X.data = oracles::random_matrix(50, 5, 700 + seed);
    CHECK(quantize(X, V).word_ids == oracles::naive_assign(X.data, V.centroids));
  }
}

TEST_CASE("objective: centroids themselves and simple values") {
  Vocabulary V;
  V.centroids = points_1d({0.5, 10});
  CHECK(kmeans_objective(V.centroids, V) == 0.0);
  CHECK(kmeans_objective(points_1d({0, 1, 10}), V) == doctest::Approx(0.5));

  Vocabulary single;
  single.centroids = points_1d({3});
  CHECK(kmeans_objective(points_1d({0}), single) == doctest::Approx(9.0));
}

TEST_CASE("vocabulary file: round trip and duplicate rejection") {
  Vocabulary V;
  V.centroids = oracles::random_matrix(6, 3, 8);
  V.seed = 1234;
  V.transform_chain = "power:0.5";
  V.channel = "r1.00";
  V.training_set = "unit";
  const auto path = temp_path("vocab.mvvc");
  save_vocabulary(V, path);
  const auto back = load_vocabulary(path);
  CHECK(back.seed == V.seed);
  CHECK(back.transform_chain == V.transform_chain);
  CHECK(back.channel == V.channel);
  CHECK(back.training_set == V.training_set);
  CHECK(std::memcmp(back.centroids.data(), V.centroids.data(), sizeof(float) * 18) == 0);

  Vocabulary dup = V;
  dup.centroids.row(1) = dup.centroids.row(4);
  const auto bad = temp_path("vocab_dup.mvvc");
  save_vocabulary(dup, bad);
  CHECK_THROWS_AS(load_vocabulary(bad), DataError);
}
