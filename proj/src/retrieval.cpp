#include "ragcomp/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ragcomp/error.hpp"
#include "ragcomp/rng.hpp"
#include "ragcomp/unicode.hpp"

namespace ragcomp::retrieval {

namespace {

using nlohmann::json;

bool is_token_cp(uint32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
           (cp >= 'A' && cp <= 'Z');
  }
  return true;
}

// One term's contribution for a document. Shared by bm25_score and rank_all
// so both paths produce bit-identical sums.
inline double term_contribution(double idf, double tf, double doc_len,
                                double avgdl, const Bm25Params& p) {
  return idf * (tf * (p.k1 + 1.0)) /
         (tf + p.k1 * (1.0 - p.b + p.b * doc_len / avgdl));
}

inline double idf_smoothed(size_t doc_count, size_t df) {
  return std::log((static_cast<double>(doc_count) - static_cast<double>(df) +
                   0.5) /
                      (static_cast<double>(df) + 0.5) +
                  1.0);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text,
                                  const TokenizerConfig& config) {
  std::vector<std::string> tokens;
  std::string current;
  for (uint32_t cp : utf8_decode(text)) {
    if (is_token_cp(cp)) {
      utf8_append(current, config.lowercase ? lower_codepoint(cp) : cp);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

size_t InvertedIndex::doc_length(const std::string& passage_id) const {
  return doc_lengths_[doc_ordinal(passage_id)];
}

uint32_t InvertedIndex::doc_ordinal(const std::string& passage_id) const {
  auto it = ordinal_by_id_.find(passage_id);
  if (it == ordinal_by_id_.end())
    fail(ErrorKind::Lookup, "passage not indexed: " + passage_id);
  return it->second;
}

const std::vector<Posting>* InvertedIndex::postings(
    const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

void InvertedIndex::finalize() {
  double total = 0.0;
  for (uint32_t len : doc_lengths_) total += len;
  avgdl_ = doc_count() ? total / static_cast<double>(doc_count()) : 0.0;
  by_id_.resize(doc_count());
  for (uint32_t i = 0; i < by_id_.size(); ++i) by_id_[i] = i;
  std::sort(by_id_.begin(), by_id_.end(), [this](uint32_t a, uint32_t b) {
    return doc_ids_[a] < doc_ids_[b];
  });
}

InvertedIndex build_index(const Corpus& corpus, const TokenizerConfig& config,
                          const Bm25Params& params) {
  if (corpus.passages().empty())
    fail(ErrorKind::Config, "build_index: empty corpus");
  InvertedIndex index;
  index.tokenizer_ = config;
  index.params_ = params;
  index.doc_ids_.reserve(corpus.passages().size());
  index.doc_lengths_.reserve(corpus.passages().size());

  for (const auto& passage : corpus.passages()) {
    const uint32_t ordinal = static_cast<uint32_t>(index.doc_ids_.size());
    const auto tokens = tokenize(passage.text, config);
    std::unordered_map<std::string, uint32_t> tf;
    for (const auto& token : tokens) ++tf[token];
    for (auto& [term, count] : tf)
      index.postings_[term].push_back({ordinal, count});
    index.doc_ids_.push_back(passage.id);
    index.doc_lengths_.push_back(static_cast<uint32_t>(tokens.size()));
    index.ordinal_by_id_.emplace(passage.id, ordinal);
  }
  // postings were appended in corpus order, so they are already sorted by doc
  index.finalize();
  return index;
}

double bm25_score(const InvertedIndex& index,
                  const std::vector<std::string>& query_tokens,
                  const std::string& passage_id) {
  const uint32_t doc = index.doc_ordinal(passage_id);
  const double doc_len = index.doc_lengths()[doc];
  double score = 0.0;
  for (const auto& term : query_tokens) {
    const auto* plist = index.postings(term);
    if (!plist) continue;
    auto it = std::lower_bound(
        plist->begin(), plist->end(), doc,
        [](const Posting& p, uint32_t d) { return p.doc < d; });
    if (it == plist->end() || it->doc != doc) continue;
    const double idf = idf_smoothed(index.doc_count(), plist->size());
    score += term_contribution(idf, it->tf, doc_len, index.avg_doc_length(),
                               index.bm25());
  }
  return score;
}

std::vector<ScoredDoc> rank_all(
    const InvertedIndex& index, const std::string& query,
    const std::unordered_set<std::string>& exclude) {
  const auto query_tokens = tokenize(query, index.tokenizer());
  std::vector<double> scores(index.doc_count(), 0.0);
  std::vector<char> touched(index.doc_count(), 0);

  for (const auto& term : query_tokens) {
    const auto* plist = index.postings(term);
    if (!plist) continue;
    const double idf = idf_smoothed(index.doc_count(), plist->size());
    for (const Posting& posting : *plist) {
      scores[posting.doc] +=
          term_contribution(idf, posting.tf, index.doc_lengths()[posting.doc],
                            index.avg_doc_length(), index.bm25());
      touched[posting.doc] = 1;
    }
  }

  const auto excluded = [&](uint32_t doc) {
    return !exclude.empty() && exclude.count(index.doc_ids()[doc]) > 0;
  };

  std::vector<uint32_t> matched;
  matched.reserve(index.doc_count());
  for (uint32_t doc = 0; doc < index.doc_count(); ++doc)
    if (touched[doc] && !excluded(doc)) matched.push_back(doc);
  std::sort(matched.begin(), matched.end(), [&](uint32_t a, uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return index.doc_ids()[a] < index.doc_ids()[b];
  });

  std::vector<ScoredDoc> out;
  out.reserve(index.doc_count());
  for (uint32_t doc : matched)
    out.push_back({index.doc_ids()[doc], scores[doc], out.size() + 1});
  // zero-score passages follow, in id order
  for (uint32_t doc : index.ordinals_by_id())
    if (!touched[doc] && !excluded(doc))
      out.push_back({index.doc_ids()[doc], 0.0, out.size() + 1});
  return out;
}

std::vector<ScoredDoc> search(const InvertedIndex& index,
                              const std::string& query, size_t k,
                              const std::unordered_set<std::string>& exclude) {
  auto ranking = rank_all(index, query, exclude);
  if (ranking.size() > k) ranking.resize(k);
  return ranking;
}

std::vector<ScoredDoc> far_rank_order(const std::vector<ScoredDoc>& ranking,
                                      size_t far_rank_threshold,
                                      uint64_t seed) {
  std::vector<ScoredDoc> eligible;
  if (ranking.size() > far_rank_threshold)
    eligible.assign(ranking.begin() + far_rank_threshold, ranking.end());
  Rng rng(seed);
  // Fisher-Yates front to back; a prefix depends only on its own draws.
  for (size_t i = 0; i + 1 < eligible.size(); ++i) {
    const size_t j = i + static_cast<size_t>(rng.below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
  }
  return eligible;
}

std::vector<ScoredDoc> far_rank_sample(
    const InvertedIndex& index, const std::string& query, size_t count,
    uint64_t seed, const std::unordered_set<std::string>& exclude,
    size_t far_rank_threshold) {
  const auto ranking = rank_all(index, query, exclude);
  auto order = far_rank_order(ranking, far_rank_threshold, seed);
  if (order.size() < count)
    fail(ErrorKind::InsufficientCandidates,
         "far_rank_sample: only " + std::to_string(order.size()) +
             " candidates beyond rank threshold " +
             std::to_string(far_rank_threshold) + ", need " +
             std::to_string(count));
  order.resize(count);
  return order;
}

void save_index(const InvertedIndex& index, const std::string& path) {
  json docs = json::array();
  for (size_t i = 0; i < index.doc_count(); ++i)
    docs.push_back({{"id", index.doc_ids()[i]},
                    {"length", index.doc_lengths()[i]}});
  json postings = json::object();
  for (const auto& [term, plist] : index.all_postings()) {
    json rows = json::array();
    for (const auto& posting : plist)
      rows.push_back({posting.doc, posting.tf});
    postings[term] = std::move(rows);
  }
  json root{{"format", "ragcomp-index"},
            {"version", 1},
            {"tokenizer", {{"lowercase", index.tokenizer().lowercase}}},
            {"bm25", {{"k1", index.bm25().k1}, {"b", index.bm25().b}}},
            {"docs", std::move(docs)},
            {"postings", std::move(postings)}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << root.dump() << "\n";
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

InvertedIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, path + ": " + e.what());
  }
  if (root.value("format", "") != "ragcomp-index" || root.value("version", 0) != 1)
    fail(ErrorKind::Parse, path + ": not a version-1 ragcomp index file");

  InvertedIndex index;
  index.tokenizer_.lowercase = root.at("tokenizer").at("lowercase").get<bool>();
  index.params_.k1 = root.at("bm25").at("k1").get<double>();
  index.params_.b = root.at("bm25").at("b").get<double>();
  for (const auto& doc : root.at("docs")) {
    const uint32_t ordinal = static_cast<uint32_t>(index.doc_ids_.size());
    index.doc_ids_.push_back(doc.at("id").get<std::string>());
    index.doc_lengths_.push_back(doc.at("length").get<uint32_t>());
    index.ordinal_by_id_.emplace(index.doc_ids_.back(), ordinal);
  }
  for (const auto& [term, rows] : root.at("postings").items()) {
    auto& plist = index.postings_[term];
    for (const auto& row : rows)
      plist.push_back({row.at(0).get<uint32_t>(), row.at(1).get<uint32_t>()});
    for (const auto& posting : plist)
      if (posting.doc >= index.doc_ids_.size())
        fail(ErrorKind::Parse, path + ": posting references unknown doc");
  }
  index.finalize();
  return index;
}

}  // namespace ragcomp::retrieval
