#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "ap_cases.hpp"
#include "mvbow/io.hpp"
#include "mvbow/search_eval.hpp"
#include "oracles.hpp"

using namespace mvbow;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mvbow_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

BowMatrix unit_rows(std::vector<std::string> ids, std::vector<std::vector<float>> rows) {
  BowMatrix M;
  M.ids = std::move(ids);
  M.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      M.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return M;
}

ShortVector make_query(std::vector<float> values) {
  ShortVector q;
  q.image_id = "query";
  q.values = Eigen::Map<Eigen::VectorXf>(values.data(), static_cast<Eigen::Index>(values.size()));
  return q;
}

}  // namespace

TEST_CASE("query: an indexed vector ranks itself first with score 1") {
  const auto index = SearchIndex::build(unit_rows({"a", "b"}, {{1, 0}, {0, 1}}));
  const auto hits = query(index, index.vector_of("b"), 2);
  CHECK(hits[0].image_id == "b");
  CHECK(hits[0].score == doctest::Approx(1.0));
  CHECK(hits[1].image_id == "a");
}

TEST_CASE("query: orthogonal query ties break by ascending image id") {
  const auto index = SearchIndex::build(unit_rows({"zeta", "alpha", "mid"},
                                                  {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
  const auto hits = query(index, make_query({0, 0, 0}), 3);
  CHECK(hits[0].image_id == "alpha");
  CHECK(hits[1].image_id == "mid");
  CHECK(hits[2].image_id == "zeta");
  for (const auto& h : hits) CHECK(h.score == 0.0);
}

TEST_CASE("query: direct dot products order the basis index") {
  const auto index = SearchIndex::build(unit_rows({"e1", "e2"}, {{1, 0}, {0, 1}}));
  const auto hits = query(index, make_query({0.6f, 0.8f}), 2);
  CHECK(hits[0].image_id == "e2");
  CHECK(hits[0].score == doctest::Approx(0.8));
  CHECK(hits[1].image_id == "e1");
  CHECK(hits[1].score == doctest::Approx(0.6));
}

TEST_CASE("query: zero rows always rank last") {
  const auto index =
      SearchIndex::build(unit_rows({"live", "dead"}, {{-1, 0}, {0, 0}}));
  // The zero row scores 0, better than the live row's -1, yet ranks last.
  const auto hits = query(index, make_query({1, 0}), 2);
  CHECK(hits[0].image_id == "live");
  CHECK(hits[1].image_id == "dead");
}

TEST_CASE("query: top must be positive, dimensions must match") {
  const auto index = SearchIndex::build(unit_rows({"a"}, {{1, 0}}));
  CHECK_THROWS_AS(query(index, make_query({1, 0}), 0), ParameterError);
  CHECK_THROWS_AS(query(index, make_query({1, 0, 0}), 1), ParameterError);
}

TEST_CASE("index: off-norm rows and duplicate ids rejected") {
  CHECK_THROWS_AS(SearchIndex::build(unit_rows({"a"}, {{0.5f, 0}})), DataError);
  CHECK_THROWS_AS(SearchIndex::build(unit_rows({"a", "a"}, {{1, 0}, {0, 1}})), DataError);
}

TEST_CASE("average_precision: hand-computed table") {
  for (const auto& c : ap_cases::table()) {
    INFO(c.name);
    CHECK(average_precision(c.ranked, c.gt) == doctest::Approx(c.expected).epsilon(1e-12));
  }
}

TEST_CASE("average_precision: junk insertion never changes AP") {
  GroundTruthEntry gt{"q", false, {"p1", "p2"}, {"junk"}};
  const std::vector<std::string> base = {"p1", "n1", "p2", "n2"};
  const double want = average_precision(base, gt);
  for (std::size_t pos = 0; pos <= base.size(); ++pos) {
    auto with_junk = base;
    with_junk.insert(with_junk.begin() + static_cast<long>(pos), "junk");
    CHECK(average_precision(with_junk, gt) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("average_precision: AP is 1 iff positives precede all non-junk negatives") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::string> ids;
    for (int i = 0; i < 12; ++i) ids.push_back("x" + std::to_string(i));
    GroundTruthEntry gt{"q", false, {}, {}};
    for (int i = 0; i < 4; ++i) gt.positives.insert("x" + std::to_string(rng.index(12)));
    // deterministic shuffle
    for (std::size_t i = ids.size(); i > 1; --i)
      std::swap(ids[i - 1], ids[rng.index(i)]);
    const double ap = average_precision(ids, gt);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
    bool seen_negative = false, positives_first = true;
    for (const auto& id : ids) {
      if (gt.positives.count(id)) {
        if (seen_negative) positives_first = false;
      } else {
        seen_negative = true;
      }
    }
    CHECK((ap == 1.0) == positives_first);
  }
}

TEST_CASE("average_precision: empty positives is a data error") {
  GroundTruthEntry gt{"q", false, {}, {}};
  CHECK_THROWS_AS(average_precision({"a"}, gt), DataError);
}

TEST_CASE("mean_ap: arithmetic mean and permutation invariance") {
  // Index where query a retrieves its positive first (AP 1) and query d
  // finds its positive at cleaned rank 2 (AP 0.5).
  const auto index = SearchIndex::build(unit_rows(
      {"a", "b", "c", "d"}, {{1, 0}, {1, 0}, {0, 1}, {0.6f, 0.8f}}));
  GroundTruth gt;
  gt.queries.push_back({"a", true, {"b"}, {}});
  gt.queries.push_back({"c", true, {"a"}, {}});
  const double map = mean_ap(index, gt);
  const auto aps = per_query_ap(index, gt);
  CHECK(map == doctest::Approx((aps[0] + aps[1]) / 2.0));
  CHECK(aps[0] == doctest::Approx(1.0));

  std::swap(gt.queries[0], gt.queries[1]);
  CHECK(mean_ap(index, gt) == doctest::Approx(map).epsilon(1e-12));

  GroundTruth dup;
  dup.queries = {gt.queries[0], gt.queries[0]};
  const double single = mean_ap(index, GroundTruth{{gt.queries[0]}});
  CHECK(mean_ap(index, dup) == doctest::Approx(single).epsilon(1e-12));
}

TEST_CASE("mean_ap: single query equals its AP; unresolvable query names the culprit") {
  const auto index = SearchIndex::build(unit_rows({"a", "b"}, {{1, 0}, {0, 1}}));
  GroundTruth gt;
  gt.queries.push_back({"a", true, {"b"}, {}});
  CHECK(mean_ap(index, gt) == doctest::Approx(per_query_ap(index, gt)[0]));

  GroundTruth missing;
  missing.queries.push_back({"ghost", false, {"a"}, {}});
  CHECK_THROWS_WITH_AS(mean_ap(index, missing), doctest::Contains("ghost"), DataError);
}

TEST_CASE("ground truth file: round trip and validation") {
  GroundTruth gt;
  gt.queries.push_back({"q1", true, {"a", "b"}, {"z"}});
  gt.queries.push_back({"q2", false, {"c"}, {}});
  const auto dir = temp_dir("gt");
  const auto path = dir + "/gt.txt";
  gt.save(path);
  const auto back = GroundTruth::load(path);
  REQUIRE(back.queries.size() == 2);
  CHECK(back.queries[0].query_id == "q1");
  CHECK(back.queries[0].exclude_self);
  CHECK(back.queries[0].positives == std::set<std::string>{"a", "b"});
  CHECK(back.queries[0].junk == std::set<std::string>{"z"});
  CHECK_FALSE(back.queries[1].exclude_self);

  GroundTruth bad;
  bad.queries.push_back({"q", false, {"a"}, {"a"}});
  CHECK_THROWS_AS(bad.validate(), DataError);

  std::ofstream(path) << "X\tbogus\n";
  CHECK_THROWS_AS(GroundTruth::load(path), DataError);
}

TEST_CASE("results file: round trip with 6-decimal scores") {
  std::vector<std::pair<std::string, std::vector<RankedHit>>> results;
  results.push_back({"q1", {{"a", 0.987654321}, {"b", -0.25}}});
  results.push_back({"q2", {{"c", 1.0}}});
  const auto dir = temp_dir("results");
  const auto path = dir + "/results.tsv";
  save_results(results, path);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "q1\t1\ta\t0.987654");

  const auto back = load_results(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].second[1].image_id == "b");
  CHECK(back[0].second[1].score == doctest::Approx(-0.25));
  CHECK(back[1].first == "q2");
}

TEST_CASE("synthetic benchmark: byte-reproducible from the seed") {
  SynthSpec spec;
  spec.seed = 77;
  spec.n_images = 12;
  spec.n_queries = 2;
  spec.descriptors_per_image = 6;
  spec.dim = 5;
  spec.n_clusters = 4;
  spec.spread = 0.2;
  spec.positives_per_query = 2;

  const auto dir_a = temp_dir("synth_a");
  const auto dir_b = temp_dir("synth_b");
  const auto out_a = generate_synthetic(spec, dir_a);
  const auto out_b = generate_synthetic(spec, dir_b);

  CHECK(read_file_bytes(out_a.manifest_path) == read_file_bytes(out_b.manifest_path));
  CHECK(read_file_bytes(out_a.ground_truth_path) == read_file_bytes(out_b.ground_truth_path));
  const auto manifest = ChannelManifest::load(out_a.manifest_path);
  REQUIRE(manifest.images().size() == 12);
  for (const auto& image : manifest.images()) {
    const auto rel = manifest.path_for(image, "r1.00");
    CHECK(read_file_bytes(dir_a + "/" + rel) == read_file_bytes(dir_b + "/" + rel));
  }

  const auto gt = GroundTruth::load(out_a.ground_truth_path);
  REQUIRE(gt.queries.size() == 2);
  for (const auto& q : gt.queries) {
    CHECK(q.positives.size() == 2);
    CHECK(q.exclude_self);
  }
}

TEST_CASE("synthetic benchmark: infeasible counts rejected") {
  SynthSpec spec;
  spec.seed = 1;
  spec.n_images = 5;
  spec.n_queries = 2;
  spec.descriptors_per_image = 4;
  spec.dim = 3;
  spec.n_clusters = 2;
  spec.spread = 0.0;
  spec.positives_per_query = 3;  // 2 groups of 4 > 5 images
  CHECK_THROWS_AS(spec.validate(), ParameterError);
}

TEST_CASE("synthetic benchmark: zero spread forces mAP 1.0 end to end") {
  SynthSpec spec;
  spec.seed = 9;
  spec.n_images = 30;
  spec.n_queries = 5;
  spec.descriptors_per_image = 20;
  spec.dim = 8;
  spec.n_clusters = 24;
  spec.spread = 0.0;
  spec.positives_per_query = 2;

  const auto dir = temp_dir("synth_e2e");
  const auto out = generate_synthetic(spec, dir);
  const auto manifest = ChannelManifest::load(out.manifest_path);
  const auto gt = GroundTruth::load(out.ground_truth_path);

  // Single vocabulary pipeline run through the library.
  std::vector<DescriptorMatrix> all;
  for (const auto& image : manifest.images())
    all.push_back(load_descriptors(manifest.resolve(image, "r1.00")));
  const auto V = kmeans_train(stack_descriptors(all), KmeansParams{16, 5, 25, 1e-4});

  BowMatrix bow;
  bow.ids = manifest.images();
  bow.values.resize(static_cast<Eigen::Index>(all.size()), 16);
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i].image_id = manifest.images()[i];
    auto b = encode_bow(quantize(all[i], V), 16);
    b.values = ssr(b.values, 0.5);
    bow.values.row(static_cast<Eigen::Index>(i)) = b.values.transpose();
  }

  const auto model = train_reduction(bow.values, 8);
  const auto index = SearchIndex::build(reduce_matrix(bow, model));
  CHECK(mean_ap(index, gt) == doctest::Approx(1.0).epsilon(1e-9));
}
