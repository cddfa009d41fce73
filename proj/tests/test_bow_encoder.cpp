#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mvbow/bow_encoder.hpp"
#include "mvbow/io.hpp"
#include "oracles.hpp"

using namespace mvbow;

namespace {

Assignment make_assignment(std::initializer_list<std::uint32_t> ids) {
  Assignment a;
  a.image_id = "img";
  a.word_ids = ids;
  return a;
}

std::string temp_path(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mvbow_tests";
  fs::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("encode_bow: direct counts, normalized") {
  const auto bow = encode_bow(make_assignment({0, 0, 2}), 4);
  const double norm = std::sqrt(5.0);
  CHECK(bow.values[0] == doctest::Approx(2.0 / norm));
  CHECK(bow.values[1] == 0.0f);
  CHECK(bow.values[2] == doctest::Approx(1.0 / norm));
  CHECK(bow.values[3] == 0.0f);
  CHECK_FALSE(bow.zero);
}

TEST_CASE("encode_bow: empty assignment gives a flagged zero vector") {
  const auto bow = encode_bow(make_assignment({}), 4);
  CHECK(bow.zero);
  CHECK(bow.values.norm() == 0.0f);
}

TEST_CASE("encode_bow: idf weighting") {
  Eigen::VectorXf idf(2);
  idf << 0.5f, 2.0f;
  const auto bow = encode_bow(make_assignment({1}), 2, idf);
  CHECK(bow.values[0] == 0.0f);
  CHECK(bow.values[1] == doctest::Approx(1.0));
}

TEST_CASE("encode_bow: out-of-range word id") {
  CHECK_THROWS_AS(encode_bow(make_assignment({4}), 4), DataError);
}

TEST_CASE("compute_idf: definition and conventions") {
  std::vector<Assignment> corpus = {
      make_assignment({0, 1}), make_assignment({0}), make_assignment({0, 1}), make_assignment({0})};
  const auto idf = compute_idf(corpus, 3);
  CHECK(idf[0] == doctest::Approx(0.0));            // in all N images
  CHECK(idf[1] == doctest::Approx(std::log(2.0)));  // in 2 of 4
  CHECK(idf[2] == 0.0f);                            // in none: convention
}

TEST_CASE("ssr: signed square root then normalize") {
  Eigen::VectorXf v(3);
  v << 4, 0, -1;
  const auto out = ssr(v, 0.5);
  const double norm = std::sqrt(5.0);
  CHECK(out[0] == doctest::Approx(2.0 / norm));
  CHECK(out[1] == 0.0f);
  CHECK(out[2] == doctest::Approx(-1.0 / norm));
}

TEST_CASE("ssr: unit basis vector is invariant for any beta") {
  Eigen::VectorXf v = Eigen::VectorXf::Zero(5);
  v[3] = 1.0f;
  for (double beta : {0.0, 0.3, 0.5, 1.0}) {
    const auto out = ssr(v, beta);
    CHECK(out[3] == doctest::Approx(1.0));
    CHECK(out.norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("ssr: symmetry and beta=1 renormalization") {
  Eigen::VectorXf v(4);
  v << 1, 1, 1, 1;
  const auto out = ssr(v, 0.5);
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(0.5));

  Eigen::VectorXf w(2);
  w << 3, -4;
  const auto renorm = ssr(w, 1.0);
  CHECK(renorm[0] == doctest::Approx(0.6));
  CHECK(renorm[1] == doctest::Approx(-0.8));
}

TEST_CASE("ssr: zero stays zero, bad exponent rejected") {
  CHECK(ssr(Eigen::VectorXf::Zero(3), 0.5).norm() == 0.0f);
  CHECK_THROWS_AS(ssr(Eigen::VectorXf::Zero(3), -0.1), ParameterError);
  CHECK_THROWS_AS(ssr(Eigen::VectorXf::Zero(3), 1.1), ParameterError);
}

TEST_CASE("ssr: output is unit norm or zero on random inputs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto X = oracles::random_matrix(1, 16, 50 + seed);
    const auto out = ssr(X.row(0).transpose(), 0.5);
    CHECK(std::abs(out.cast<double>().norm() - 1.0) < 1e-6);
  }
}

TEST_CASE("concat_bundle: log-size weights force the 1:2 ratio") {
  BowVector a, b;
  a.image_id = b.image_id = "img";
  a.values.resize(2);
  a.values << 1, 0;
  b.values.resize(4);
  b.values << 0, 1, 0, 0;
  const auto out = concat_bundle({a, b}, {std::log(2.0), std::log(4.0)});
  const double norm = std::sqrt(5.0);
  CHECK(out.values[0] == doctest::Approx(1.0 / norm));
  CHECK(out.values[3] == doctest::Approx(2.0 / norm));
  CHECK(out.values.cast<double>().norm() == doctest::Approx(1.0));
}

TEST_CASE("concat_bundle: single block is returned unchanged") {
  BowVector a;
  a.values.resize(3);
  a.values << 0.6f, 0.8f, 0.0f;
  const auto out = concat_bundle({a}, {std::log(8.0)});
  for (int i = 0; i < 3; ++i) CHECK(out.values[i] == doctest::Approx(a.values[i]));
}

TEST_CASE("concat_bundle: equal blocks share energy") {
  BowVector a;
  a.values.resize(2);
  a.values << 1, 0;
  const auto out = concat_bundle({a, a}, {1.0, 1.0});
  CHECK(out.values[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(out.values[2] == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("concat_bundle: parameter errors") {
  BowVector a;
  a.values.resize(2);
  a.values << 1, 0;
  CHECK_THROWS_AS(concat_bundle({a, a}, {1.0}), ParameterError);
  CHECK_THROWS_AS(concat_bundle({a}, {0.0}), ParameterError);
  CHECK_THROWS_AS(concat_bundle({}, {}), ParameterError);
}

TEST_CASE("default_weights: equal sizes unweighted, mixed sizes log-sized") {
  CHECK(VocabularyBundle::default_weights({256, 256}) == std::vector<double>{1.0, 1.0});
  const auto w = VocabularyBundle::default_weights({4096, 128});
  CHECK(w[0] == doctest::Approx(std::log(4096.0)));
  CHECK(w[1] == doctest::Approx(std::log(128.0)));
}

TEST_CASE("quantization_complexity: single vocabularies and bundles") {
  CHECK(quantization_complexity({8192}) == 8192);
  CHECK(quantization_complexity({4096, 2048, 1024, 512, 256, 128}) == 8064);
  CHECK(quantization_complexity({512, 256, 128}) == 896);
}

TEST_CASE("unique_assignments: tuples, degenerate product, bound") {
  CHECK(unique_assignments({{0, 0, 1}, {1, 1, 1}}) == 2);
  CHECK(unique_assignments({{3, 1, 3, 2}}) == 3);

  Rng rng(7);
  std::vector<std::vector<std::uint32_t>> lists(3, std::vector<std::uint32_t>(40));
  const std::vector<std::size_t> ks = {4, 3, 2};
  for (std::size_t v = 0; v < 3; ++v)
    for (auto& w : lists[v]) w = static_cast<std::uint32_t>(rng.index(ks[v]));
  const auto count = unique_assignments(lists);
  CHECK(count <= 24);  // Pi k_v
  CHECK(count <= 40);  // n
  CHECK(count >= 1);
}

TEST_CASE("unique_assignments: non-decreasing as vocabularies are appended") {
  Rng rng(11);
  std::vector<std::vector<std::uint32_t>> lists;
  std::int64_t prev = 0;
  for (int v = 0; v < 5; ++v) {
    std::vector<std::uint32_t> ids(60);
    for (auto& w : ids) w = static_cast<std::uint32_t>(rng.index(3));
    lists.push_back(std::move(ids));
    const auto count = unique_assignments(lists);
    CHECK(count >= prev);
    prev = count;
  }
}

TEST_CASE("unique_assignments: length mismatch is a data error") {
  CHECK_THROWS_AS(unique_assignments({{0, 1}, {0}}), DataError);
}

TEST_CASE("encode then ssr is invariant to duplicating the descriptor set") {
  const auto once = make_assignment({0, 0, 2, 3, 3, 3});
  auto twice = once;
  twice.word_ids.insert(twice.word_ids.end(), once.word_ids.begin(), once.word_ids.end());
  const auto a = ssr(encode_bow(once, 5).values, 0.5);
  const auto b = ssr(encode_bow(twice, 5).values, 0.5);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6f);
}

TEST_CASE("bow matrix file: round trip preserves ids and bytes") {
  BowMatrix M;
  M.ids = {"a", "b", "c"};
  M.values = oracles::random_matrix(3, 7, 13);
  const auto path = temp_path("bow.mvbw");
  save_bow_matrix(M, path);
  const auto back = load_bow_matrix(path);
  CHECK(back.ids == M.ids);
  const auto path2 = temp_path("bow2.mvbw");
  save_bow_matrix(back, path2);
  CHECK(read_file_bytes(path) == read_file_bytes(path2));
}
