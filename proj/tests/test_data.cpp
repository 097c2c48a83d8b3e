#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "support.hpp"

using namespace genesim;
using genesim::testing::from_csv_text;

TEST_CASE("iris loads with the published shape", "[data]") {
  const Dataset d = genesim::testing::iris();
  CHECK(d.n_samples() == 150);
  CHECK(d.count_kind(FeatureKind::continuous) == 4);
  CHECK(d.count_kind(FeatureKind::discrete) == 0);
  REQUIRE(d.n_classes() == 3);
  for (auto c : d.class_counts()) CHECK(c == 50);
  CHECK(d.class_names() == std::vector<std::string>{"setosa", "versicolor", "virginica"});
}

TEST_CASE("breast loads as nine discrete features with imputed gaps", "[data]") {
  const Dataset d = genesim::testing::breast();
  // 699 rows in this copy; the published table lists 698.
  CHECK(d.n_samples() == 699);
  CHECK(d.count_kind(FeatureKind::discrete) == 9);
  CHECK(d.count_kind(FeatureKind::continuous) == 0);
  const auto counts = d.class_counts();
  CHECK(counts[0] == 458);
  CHECK(counts[1] == 241);
  // ordinal scores keep their numeric order
  const auto& nuclei = d.features()[5];
  CHECK(nuclei.name == "bare_nuclei");
  CHECK(nuclei.categories.front() == "1");
  CHECK(nuclei.categories.back() == "10");
}

TEST_CASE("wine loads as thirteen continuous features", "[data]") {
  const Dataset d = load_csv(genesim::testing::data_path("wine.csv"), "class");
  CHECK(d.n_samples() == 178);
  CHECK(d.count_kind(FeatureKind::continuous) == 13);
}

TEST_CASE("minimal two-row dataset", "[data]") {
  const Dataset d = from_csv_text("x,y\n1.5,a\n2.5,b\n", "y");
  CHECK(d.n_samples() == 2);
  CHECK(d.n_features() == 1);
  CHECK(d.n_classes() == 2);
  CHECK(d.label(0) == 0);
  CHECK(d.label(1) == 1);
}

TEST_CASE("typing threshold and overrides", "[data]") {
  std::string text = "few,many,word,y\n";
  for (int i = 0; i < 30; ++i)
    text += std::to_string(i % 3) + "," + std::to_string(i) + "," + (i % 2 ? "red" : "blue") + "," +
            (i % 2 ? "p" : "q") + "\n";
  const Dataset d = from_csv_text(text, "y");
  CHECK(d.features()[0].kind == FeatureKind::discrete);
  CHECK(d.features()[0].category_count() == 3);
  CHECK(d.features()[1].kind == FeatureKind::continuous);
  CHECK(d.features()[2].kind == FeatureKind::discrete);
  // first-appearance order for text categories
  CHECK(d.features()[2].categories == std::vector<std::string>{"blue", "red"});

  std::istringstream in(text);
  const Dataset o = read_csv(in, "y", {{"few", FeatureKind::continuous}, {"many", FeatureKind::discrete}});
  CHECK(o.features()[0].kind == FeatureKind::continuous);
  CHECK(o.features()[1].kind == FeatureKind::discrete);
  CHECK(o.features()[1].category_count() == 30);

  std::istringstream bad(text);
  CHECK_THROWS_AS(read_csv(bad, "y", {{"word", FeatureKind::continuous}}), ConfigError);
}

TEST_CASE("missing cells are imputed with median or mode", "[data]") {
  std::string text = "c,d,y\n";
  // c has 12 distinct values -> continuous; d has 3 -> discrete
  const char* c_vals[] = {"1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "?"};
  const char* d_vals[] = {"x", "y", "y", "z", "y", "x", "", "z", "y", "x", "y", "z", "x"};
  for (int i = 0; i < 13; ++i) text += std::string(c_vals[i]) + "," + d_vals[i] + "," + (i % 2 ? "a" : "b") + "\n";
  const Dataset d = from_csv_text(text, "y");
  CHECK(d.value(12, 0) == Catch::Approx(6.5));
  CHECK(d.decode(1, d.value(6, 1)) == "y");
  CHECK(d.features()[0].min == 1.0);
  CHECK(d.features()[0].max == 12.0);
}

TEST_CASE("ordinal codes decode to their original text", "[data][property]") {
  const Dataset d = genesim::testing::breast();
  std::ifstream in(genesim::testing::data_path("breast.csv"));
  std::string line;
  std::getline(in, line);
  for (Index r = 0; std::getline(in, line); ++r) {
    std::istringstream ss(line);
    std::string cell;
    for (std::size_t f = 0; f < d.n_features(); ++f) {
      std::getline(ss, cell, ',');
      if (cell == "?") continue;
      REQUIRE(d.decode(f, d.value(r, f)) == cell);
    }
  }
}

TEST_CASE("loading is idempotent", "[data]") {
  CHECK(genesim::testing::breast() == genesim::testing::breast());
}

TEST_CASE("csv errors", "[data]") {
  SECTION("ragged row names its line") {
    try {
      from_csv_text("a,b,y\n1,2,p\n3,q\n", "y");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SECTION("unterminated quote") { CHECK_THROWS_AS(from_csv_text("a,y\n\"1,p\n", "y"), ParseError); }
  SECTION("missing label column") { CHECK_THROWS_AS(from_csv_text("a,b\n1,2\n", "y"), ConfigError); }
  SECTION("single class") { CHECK_THROWS_AS(from_csv_text("a,y\n1,p\n2,p\n", "y"), ValidationError); }
  SECTION("missing file") { CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", "y"), IoError); }
  SECTION("quoted fields with commas") {
    const Dataset d = from_csv_text("a,y\n1,\"p, q\"\n2,\"r \"\"s\"\"\"\n", "y");
    CHECK(d.class_names() == std::vector<std::string>{"p, q", "r \"s\""});
  }
}

TEST_CASE("manifest sets kinds and the label column", "[data]") {
  const auto m = parse_manifest(nlohmann::json::parse(
      R"({"columns": {"few": {"kind": "continuous"}, "y": {"label_column": true}}})"));
  REQUIRE(m.label_column);
  CHECK(*m.label_column == "y");
  CHECK(m.kinds.at("few") == FeatureKind::continuous);
  CHECK_THROWS_AS(parse_manifest(nlohmann::json::parse(R"({"columns": {"a": {"kind": "weird"}}})")), ConfigError);
}

namespace {

// per class, per fold counts for one repeat
std::vector<std::vector<std::size_t>> fold_class_counts(const Dataset& d, const FoldPlan& plan, std::size_t r) {
  std::vector<std::vector<std::size_t>> counts(d.n_classes(), std::vector<std::size_t>(plan.n_folds, 0));
  for (Index i = 0; i < d.n_samples(); ++i) ++counts[static_cast<std::size_t>(d.label(i))][plan.assignments[r][i]];
  return counts;
}

}  // namespace

TEST_CASE("iris 3x10 folds are stratified", "[data]") {
  const Dataset d = genesim::testing::iris();
  const FoldPlan plan = make_folds(d, 3, 10, 1);
  REQUIRE(plan.assignments.size() == 10);
  for (std::size_t r = 0; r < 10; ++r) {
    const auto counts = fold_class_counts(d, plan, r);
    for (std::size_t f = 0; f < 3; ++f) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(counts[c][f] >= 16);
        CHECK(counts[c][f] <= 17);
        total += counts[c][f];
      }
      CHECK(total == 50);
    }
  }
  std::set<std::vector<std::size_t>> distinct(plan.assignments.begin(), plan.assignments.end());
  CHECK(distinct.size() == 10);
}

TEST_CASE("fold plans partition and stratify on random datasets", "[data][property]") {
  Rng rng = make_rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n_classes = 2 + uniform_index(rng, 4);
    const std::size_t n_folds = 2 + uniform_index(rng, 4);
    std::string text = "x,y\n";
    std::size_t n = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const std::size_t size = n_folds + uniform_index(rng, 30);
      for (std::size_t i = 0; i < size; ++i, ++n) text += std::to_string(n) + ",c" + std::to_string(c) + "\n";
    }
    const Dataset d = from_csv_text(text, "y");
    const FoldPlan plan = make_folds(d, n_folds, 3, trial);
    for (std::size_t r = 0; r < 3; ++r) {
      std::vector<std::size_t> seen(d.n_samples(), 0);
      for (std::size_t f = 0; f < n_folds; ++f)
        for (Index i : plan.test_indices(r, f)) ++seen[i];
      for (auto s : seen) REQUIRE(s == 1);
      for (const auto& row : fold_class_counts(d, plan, r)) {
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        REQUIRE(*hi - *lo <= 1);
      }
      for (std::size_t f = 0; f < n_folds; ++f) {
        auto train = plan.train_indices(r, f);
        auto test = plan.test_indices(r, f);
        REQUIRE(train.size() + test.size() == d.n_samples());
      }
    }
  }
}

TEST_CASE("fold plans are deterministic and validate class sizes", "[data]") {
  const Dataset d = genesim::testing::iris();
  CHECK(make_folds(d, 2, 1, 5).assignments == make_folds(d, 2, 1, 5).assignments);
  CHECK(make_folds(d, 2, 1, 5).assignments != make_folds(d, 2, 1, 6).assignments);

  const Dataset small = from_csv_text("x,y\n1,a\n2,a\n3,a\n4,b\n5,b\n", "y");
  try {
    make_folds(small, 3, 1, 0);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK_THROWS_AS(make_folds(d, 1, 1, 0), ValidationError);
}

TEST_CASE("split_half", "[data]") {
  std::string text = "x,y\n";
  for (int i = 0; i < 100; ++i) text += std::to_string(i) + "," + (i % 2 ? "a" : "b") + "\n";
  const Dataset d = from_csv_text(text, "y");

  SECTION("100 indices split into disjoint halves of 50") {
    const auto all = d.all_indices();
    const auto s = split_half(d, all, 3);
    CHECK(s.grow.size() == 50);
    CHECK(s.validation.size() == 50);
    std::set<Index> u(s.grow.begin(), s.grow.end());
    u.insert(s.validation.begin(), s.validation.end());
    CHECK(u.size() == 100);
  }
  SECTION("99 indices give 50/49") {
    IndexList idx(99);
    std::iota(idx.begin(), idx.end(), 0);
    const auto s = split_half(d, idx, 3);
    CHECK(s.grow.size() + s.validation.size() == 99);
    CHECK(std::max(s.grow.size(), s.validation.size()) == 50);
  }
  SECTION("deterministic and validated") {
    const auto all = d.all_indices();
    CHECK(split_half(d, all, 8).grow == split_half(d, all, 8).grow);
    const IndexList one{0};
    CHECK_THROWS_AS(split_half(d, one, 0), ValidationError);
  }
}

TEST_CASE("split_half of an iris training fold is stratified", "[data]") {
  const Dataset d = genesim::testing::iris();
  const FoldPlan plan = make_folds(d, 3, 10, 1);
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t f = 0; f < 3; ++f) {
      const auto train = plan.train_indices(r, f);
      REQUIRE(train.size() == 100);
      const auto s = split_half(d, train, r * 3 + f);
      for (const auto* half : {&s.grow, &s.validation}) {
        std::vector<std::size_t> per(3, 0);
        for (Index i : *half) ++per[static_cast<std::size_t>(d.label(i))];
        for (auto c : per) {
          CHECK(c >= 16);
          CHECK(c <= 17);
        }
      }
    }
}
