#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <unordered_set>

#include "ragcomp/corpus.hpp"
#include "ragcomp/error.hpp"
#include "ragcomp/retrieval.hpp"

#include "support/oracles.hpp"
#include "support/synth_squad.hpp"
#include "support/tmpdir.hpp"

using namespace ragcomp;
using namespace ragcomp::retrieval;

namespace {

Corpus tiny_corpus() {
  std::vector<Passage> passages{
      {"doc-a", "T", "the cat sat on the mat"},
      {"doc-b", "T", "the dog chased the cat around"},
      {"doc-c", "T", "ships sailed the quiet harbor at dusk"},
  };
  return Corpus::from_parts(std::move(passages), {});
}

}  // namespace

TEST_CASE("tokenize splits on non-alphanumerics and lowercases") {
  TokenizerConfig config;
  CHECK(tokenize("The cat, the CAT!", config) ==
        std::vector<std::string>{"the", "cat", "the", "cat"});
  CHECK(tokenize("x86-64 rocks", config) ==
        std::vector<std::string>{"x86", "64", "rocks"});
  CHECK(tokenize("", config).empty());
  CHECK(tokenize("...", config).empty());
  // non-ASCII code points are token characters
  CHECK(tokenize("caf\xc3\xa9 au lait", config) ==
        std::vector<std::string>{"caf\xc3\xa9", "au", "lait"});
  TokenizerConfig keep;
  keep.lowercase = false;
  CHECK(tokenize("The CAT", keep) == std::vector<std::string>{"The", "CAT"});
}

TEST_CASE("index statistics describe the corpus") {
  const auto corpus = tiny_corpus();
  const auto index = build_index(corpus, {}, {});
  CHECK(index.doc_count() == 3);
  CHECK(index.doc_length("doc-a") == 6);
  CHECK(index.doc_length("doc-b") == 6);
  CHECK(index.doc_length("doc-c") == 7);
  CHECK(index.avg_doc_length() == doctest::Approx(19.0 / 3.0));
  REQUIRE(index.postings("cat") != nullptr);
  CHECK(index.postings("cat")->size() == 2);
  REQUIRE(index.postings("the") != nullptr);
  CHECK(index.postings("the")->size() == 3);
  CHECK(index.postings("absent") == nullptr);
  CHECK_THROWS_AS(index.doc_ordinal("nope"), Error);
}

TEST_CASE("build_index rejects an empty corpus") {
  CHECK_THROWS_AS(build_index(Corpus{}, {}, {}), Error);
}

TEST_CASE("bm25_score matches the closed form on a hand example") {
  // Single doc: idf = ln((1 - 1 + 0.5)/(1 + 0.5) + 1) = ln(4/3); doc_len =
  // avgdl makes the length norm 1, so score = idf * tf(k1+1)/(tf+k1).
  const auto corpus =
      Corpus::from_parts({{"only", "T", "alpha beta gamma"}}, {});
  const auto index = build_index(corpus, {}, {});
  const double idf = std::log(4.0 / 3.0);
  CHECK(bm25_score(index, {"alpha"}, "only") ==
        doctest::Approx(idf * (1.0 * 2.2) / (1.0 + 1.2)).epsilon(1e-12));
  // two query occurrences double the contribution
  CHECK(bm25_score(index, {"alpha", "alpha"}, "only") ==
        doctest::Approx(2 * idf * (1.0 * 2.2) / (1.0 + 1.2)).epsilon(1e-12));
  CHECK(bm25_score(index, {"absent"}, "only") == 0.0);
}

TEST_CASE("bm25_score applies tf saturation and length normalization") {
  const auto corpus = Corpus::from_parts(
      {{"short", "T", "cat cat"}, {"long", "T", "cat dog bird fish mouse hen"}},
      {});
  const auto index = build_index(corpus, {}, {});
  // df("cat") = 2, N = 2 -> idf = ln((0.5/2.5) + 1)
  const double idf = std::log(0.5 / 2.5 + 1.0);
  const double avgdl = 4.0;
  auto contribution = [&](double tf, double len) {
    return idf * (tf * 2.2) / (tf + 1.2 * (1.0 - 0.75 + 0.75 * len / avgdl));
  };
  CHECK(bm25_score(index, {"cat"}, "short") ==
        doctest::Approx(contribution(2, 2)).epsilon(1e-12));
  CHECK(bm25_score(index, {"cat"}, "long") ==
        doctest::Approx(contribution(1, 6)).epsilon(1e-12));
  CHECK(bm25_score(index, {"cat"}, "short") >
        bm25_score(index, {"cat"}, "long"));
}

TEST_CASE("rank_all orders by score with id tie-breaks and a zero tail") {
  const auto corpus = tiny_corpus();
  const auto index = build_index(corpus, {}, {});
  const auto ranking = rank_all(index, "cat", {});
  REQUIRE(ranking.size() == 3);
  // doc-a (len 6, tf 1) and doc-b (len 6, tf 1) tie exactly -> id order
  CHECK(ranking[0].passage_id == "doc-a");
  CHECK(ranking[1].passage_id == "doc-b");
  CHECK(ranking[0].score == ranking[1].score);
  CHECK(ranking[0].score > 0.0);
  CHECK(ranking[2].passage_id == "doc-c");
  CHECK(ranking[2].score == 0.0);
  for (size_t i = 0; i < ranking.size(); ++i) CHECK(ranking[i].rank == i + 1);
}

TEST_CASE("rank_all honors the exclusion set") {
  const auto corpus = tiny_corpus();
  const auto index = build_index(corpus, {}, {});
  const auto ranking = rank_all(index, "cat", {"doc-a"});
  REQUIRE(ranking.size() == 2);
  CHECK(ranking[0].passage_id == "doc-b");
  CHECK(ranking[1].passage_id == "doc-c");
  CHECK(ranking[0].rank == 1);
  CHECK(ranking[1].rank == 2);
}

TEST_CASE("search truncates the full ranking") {
  const auto corpus = tiny_corpus();
  const auto index = build_index(corpus, {}, {});
  const auto top = search(index, "cat", 2, {});
  const auto all = rank_all(index, "cat", {});
  REQUIRE(top.size() == 2);
  for (size_t i = 0; i < top.size(); ++i) {
    CHECK(top[i].passage_id == all[i].passage_id);
    CHECK(top[i].score == all[i].score);
  }
  CHECK(search(index, "cat", 100, {}).size() == 3);
}

TEST_CASE("rank_all agrees exactly with the brute-force oracle") {
  testsupport::SynthOptions opt;
  opt.articles = 40;  // 240 passages
  const auto corpus = testsupport::synth_corpus(opt);
  const auto index = build_index(corpus, {}, {});
  const testsupport::OracleRanker oracle(corpus, {}, {});

  // corpus questions plus synthetic probe queries
  std::vector<std::string> queries;
  for (size_t i = 0; i < corpus.questions().size(); i += 7)
    queries.push_back(corpus.questions()[i].text);
  queries.push_back("district3 section 2");
  queries.push_back("harbor ledger quarry");
  queries.push_back("nonsense tokens nowhere");
  queries.push_back("");

  for (const auto& query : queries) {
    CAPTURE(query);
    const auto got = rank_all(index, query, {});
    const auto want = oracle.rank(query);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].passage_id == want[i].passage_id);
      CHECK(got[i].score == want[i].score);  // tolerance zero
      CHECK(got[i].rank == want[i].rank);
    }
  }
}

TEST_CASE("far_rank_order permutes exactly the beyond-threshold tail") {
  testsupport::SynthOptions opt;
  opt.articles = 20;  // 120 passages
  const auto corpus = testsupport::synth_corpus(opt);
  const auto index = build_index(corpus, {}, {});
  const auto ranking = rank_all(index, corpus.questions()[0].text, {});
  const size_t threshold = 30;

  const auto order = far_rank_order(ranking, threshold, 99);
  CHECK(order.size() == ranking.size() - threshold);
  std::set<std::string> expected, got;
  for (size_t i = threshold; i < ranking.size(); ++i)
    expected.insert(ranking[i].passage_id);
  for (const auto& doc : order) {
    got.insert(doc.passage_id);
    CHECK(doc.rank > threshold);  // global rank preserved
  }
  CHECK(got == expected);

  // deterministic, and a different seed gives a different order
  const auto again = far_rank_order(ranking, threshold, 99);
  REQUIRE(again.size() == order.size());
  for (size_t i = 0; i < order.size(); ++i)
    CHECK(again[i].passage_id == order[i].passage_id);
  const auto other = far_rank_order(ranking, threshold, 100);
  bool differs = false;
  for (size_t i = 0; i < order.size(); ++i)
    differs = differs || other[i].passage_id != order[i].passage_id;
  CHECK(differs);
}

TEST_CASE("far_rank_sample avoids the top ranks and extends by prefix") {
  testsupport::SynthOptions opt;
  opt.articles = 20;
  const auto corpus = testsupport::synth_corpus(opt);
  const auto index = build_index(corpus, {}, {});
  const std::string query = corpus.questions()[1].text;
  const size_t threshold = 25;

  const auto small = far_rank_sample(index, query, 4, 7, {}, threshold);
  const auto large = far_rank_sample(index, query, 19, 7, {}, threshold);
  REQUIRE(small.size() == 4);
  REQUIRE(large.size() == 19);
  for (size_t i = 0; i < small.size(); ++i)
    CHECK(small[i].passage_id == large[i].passage_id);

  // no sampled passage may sit at or above the rank threshold
  std::set<std::string> top;
  const auto ranking = rank_all(index, query, {});
  for (size_t i = 0; i < threshold; ++i) top.insert(ranking[i].passage_id);
  for (const auto& doc : large) {
    CHECK(doc.rank > threshold);
    CHECK(top.count(doc.passage_id) == 0);
  }
}

TEST_CASE("far_rank_sample fails cleanly when the tail is too short") {
  const auto corpus = tiny_corpus();
  const auto index = build_index(corpus, {}, {});
  try {
    far_rank_sample(index, "cat", 3, 1, {}, 2);
    FAIL("expected InsufficientCandidates");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientCandidates);
    CHECK(std::string(e.what()).find("rank threshold 2") != std::string::npos);
  }
}

TEST_CASE("save/load round-trips the index with identical scores") {
  testsupport::TempDir tmp;
  testsupport::SynthOptions opt;
  opt.articles = 8;
  const auto corpus = testsupport::synth_corpus(opt);
  const auto index = build_index(corpus, {}, {0.9, 0.4});
  save_index(index, tmp.file("index.json"));
  const auto loaded = load_index(tmp.file("index.json"));

  CHECK(loaded.doc_count() == index.doc_count());
  CHECK(loaded.avg_doc_length() == index.avg_doc_length());
  CHECK(loaded.bm25().k1 == 0.9);
  CHECK(loaded.bm25().b == 0.4);
  CHECK(loaded.tokenizer().lowercase == index.tokenizer().lowercase);

  for (const auto& question : corpus.questions()) {
    const auto a = rank_all(index, question.text, {});
    const auto b = rank_all(loaded, question.text, {});
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].passage_id == b[i].passage_id);
      CHECK(a[i].score == b[i].score);
    }
  }
}

TEST_CASE("load_index rejects foreign or corrupt files") {
  testsupport::TempDir tmp;
  CHECK_THROWS_AS(load_index(tmp.file("missing.json")), Error);
  {
    std::ofstream out(tmp.file("other.json"));
    out << "{\"format\": \"something-else\", \"version\": 1}\n";
  }
  try {
    load_index(tmp.file("other.json"));
    FAIL("expected Parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
  }
}

TEST_CASE("Bm25Retriever exposes rank_all through the interface") {
  const auto corpus = tiny_corpus();
  const auto index = build_index(corpus, {}, {});
  const Bm25Retriever retriever(index);
  const auto via_interface = retriever.rank("cat", {});
  const auto direct = rank_all(index, "cat", {});
  REQUIRE(via_interface.size() == direct.size());
  for (size_t i = 0; i < direct.size(); ++i)
    CHECK(via_interface[i].passage_id == direct[i].passage_id);
}
