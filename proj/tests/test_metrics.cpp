#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include <json.hpp>

#include "ragcomp/error.hpp"
#include "ragcomp/metrics.hpp"

using namespace ragcomp;

namespace {

nlohmann::json load_fixture() {
  std::ifstream in(std::string(RAGCOMP_TEST_DATA_DIR) + "/squad_parity.json");
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("normalize matches the frozen evaluator outputs") {
  const auto fixture = load_fixture();
  for (const auto& row : fixture["normalize"]) {
    CAPTURE(row["input"].get<std::string>());
    CHECK(metrics::normalize(row["input"].get<std::string>()) ==
          row["expected"].get<std::string>());
  }
}

TEST_CASE("normalize is idempotent") {
  const auto fixture = load_fixture();
  for (const auto& row : fixture["normalize"]) {
    const auto once = metrics::normalize(row["input"].get<std::string>());
    CHECK(metrics::normalize(once) == once);
  }
}

TEST_CASE("em and f1 match the frozen evaluator outputs exactly") {
  const auto fixture = load_fixture();
  for (const auto& row : fixture["pairs"]) {
    const auto prediction = row["prediction"].get<std::string>();
    const auto golds = row["golds"].get<std::vector<std::string>>();
    CAPTURE(prediction);
    CHECK(metrics::exact_match(prediction, golds) == row["em"].get<int>());
    // tolerance zero: the float op order mirrors the reference script
    CHECK(metrics::token_f1(prediction, golds) == row["f1"].get<double>());
  }
}

TEST_CASE("normalization handles articles and punctuation jointly") {
  CHECK(metrics::normalize("The  Quick, Brown Fox!") == "quick brown fox");
  CHECK(metrics::normalize("an apple a day") == "apple day");
  CHECK(metrics::normalize("a") == "");
  CHECK(metrics::normalize("THE THEATER") == "theater");   // not an article
  CHECK(metrics::normalize("cat-a-log") == "catalog");     // punctuation first
  CHECK(metrics::normalize("  lots   of\tspace\n") == "lots of space");
  CHECK(metrics::normalize("") == "");
  // non-breaking space is evaluator whitespace
  CHECK(metrics::normalize("one\xc2\xa0two") == "one two");
}

TEST_CASE("exact match implies f1 = 1 and inclusion = 1") {
  const auto fixture = load_fixture();
  for (const auto& row : fixture["pairs"]) {
    const auto prediction = row["prediction"].get<std::string>();
    const auto golds = row["golds"].get<std::vector<std::string>>();
    if (metrics::exact_match(prediction, golds) == 1) {
      CHECK(metrics::token_f1(prediction, golds) == 1.0);
      CHECK(metrics::inclusion(prediction, golds) == 1);
    }
  }
}

TEST_CASE("em is never above inclusion") {
  const auto fixture = load_fixture();
  for (const auto& row : fixture["pairs"]) {
    const auto prediction = row["prediction"].get<std::string>();
    const auto golds = row["golds"].get<std::vector<std::string>>();
    CHECK(metrics::exact_match(prediction, golds) <=
          metrics::inclusion(prediction, golds));
  }
}

TEST_CASE("inclusion is substring containment after normalization") {
  CHECK(metrics::inclusion("I think it was the Denver Broncos.",
                           {"Denver Broncos"}) == 1);
  CHECK(metrics::inclusion("Denver", {"Denver Broncos"}) == 0);
  CHECK(metrics::inclusion("broncos of denver", {"Denver Broncos"}) == 0);
  // best over golds
  CHECK(metrics::inclusion("Denver", {"Denver Broncos", "Denver"}) == 1);
}

TEST_CASE("f1 is the best score over golds") {
  // vs "a b": overlap 2/2; vs "a b c d": p=1, r=1/2 -> 2/3
  CHECK(metrics::token_f1("x y", {"x q", "x y z w"}) ==
        doctest::Approx(2.0 / 3.0));
  CHECK(metrics::token_f1("x y", {"x y", "x y z w"}) == 1.0);
  CHECK(metrics::token_f1("q", {"x y"}) == 0.0);
}

TEST_CASE("metrics require at least one gold") {
  CHECK_THROWS_AS(metrics::exact_match("x", {}), Error);
  CHECK_THROWS_AS(metrics::token_f1("x", {}), Error);
  CHECK_THROWS_AS(metrics::inclusion("x", {}), Error);
  try {
    metrics::token_f1("x", {});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Contract);
  }
}

TEST_CASE("score_prediction bundles all three metrics") {
  const auto rec = metrics::score_prediction("q1", "hard_19", "The Answer",
                                             {"answer"}, 120);
  CHECK(rec.question_id == "q1");
  CHECK(rec.condition == "hard_19");
  CHECK(rec.em == 1);
  CHECK(rec.f1 == 1.0);
  CHECK(rec.inclusion == 1);
  CHECK(rec.prompt_tokens == 120);
}

TEST_CASE("aggregate averages and scales") {
  std::vector<metrics::ScoreRecord> records{
      {"q1", "hard_19", 1, 1.0, 1, 100},
      {"q2", "hard_19", 0, 0.5, 1, 200},
      {"q3", "hard_19", 0, 0.0, 0, 300},
      {"q4", "hard_19", 1, 1.0, 1, 400},
  };
  const auto agg = metrics::aggregate(records);
  CHECK(agg.n == 4);
  CHECK(agg.em_pct == doctest::Approx(50.0));
  CHECK(agg.f1_mean == doctest::Approx(0.625));
  CHECK(agg.inclusion_pct == doctest::Approx(75.0));
  CHECK(agg.avg_tokens == doctest::Approx(250.0));
}

TEST_CASE("aggregate rejects empty and mixed-condition input") {
  CHECK_THROWS_AS(metrics::aggregate({}), Error);
  std::vector<metrics::ScoreRecord> mixed{
      {"q1", "hard_19", 1, 1.0, 1, 100},
      {"q2", "gold_only", 0, 0.5, 1, 200},
  };
  try {
    metrics::aggregate(mixed);
    FAIL("expected Contract error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Contract);
    CHECK(std::string(e.what()).find("mixed conditions") != std::string::npos);
  }
}
