#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ragcomp/corpus.hpp"

namespace ragcomp::retrieval {

struct TokenizerConfig {
  bool lowercase = true;
};

// Contiguous alphanumeric runs. ASCII alphanumerics and all non-ASCII code
// points count as token characters; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view text,
                                  const TokenizerConfig& config);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct ScoredDoc {
  std::string passage_id;
  double score = 0.0;
  size_t rank = 0;  // 1-based position in the full ranking
};

struct Posting {
  uint32_t doc = 0;  // ordinal into doc_ids(), ascending within a term
  uint32_t tf = 0;
};

// Lexical index over a corpus. Immutable once built; concurrent queries are
// safe.
class InvertedIndex {
 public:
  size_t doc_count() const { return doc_ids_.size(); }
  double avg_doc_length() const { return avgdl_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<uint32_t>& doc_lengths() const { return doc_lengths_; }
  const TokenizerConfig& tokenizer() const { return tokenizer_; }
  const Bm25Params& bm25() const { return params_; }

  size_t doc_length(const std::string& passage_id) const;
  uint32_t doc_ordinal(const std::string& passage_id) const;

  const std::vector<Posting>* postings(const std::string& term) const;
  const std::unordered_map<std::string, std::vector<Posting>>& all_postings()
      const {
    return postings_;
  }

  // Doc ordinals sorted by passage id; the deterministic tie-break order.
  const std::vector<uint32_t>& ordinals_by_id() const { return by_id_; }

 private:
  friend InvertedIndex build_index(const Corpus&, const TokenizerConfig&,
                                   const Bm25Params&);
  friend InvertedIndex load_index(const std::string&);

  void finalize();  // fills avgdl_ and by_id_

  TokenizerConfig tokenizer_;
  Bm25Params params_;
  std::vector<std::string> doc_ids_;      // corpus order
  std::vector<uint32_t> doc_lengths_;
  std::vector<uint32_t> by_id_;
  double avgdl_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::string, uint32_t> ordinal_by_id_;
};

InvertedIndex build_index(const Corpus& corpus, const TokenizerConfig& config,
                          const Bm25Params& params = {});

// Okapi BM25 with the smoothed IDF ln((N - df + 0.5)/(df + 0.5) + 1), so all
// scores are >= 0. Each query token occurrence contributes.
double bm25_score(const InvertedIndex& index,
                  const std::vector<std::string>& query_tokens,
                  const std::string& passage_id);

// Every non-excluded passage ordered by (score desc, passage id asc); ranks
// 1..n. Zero-score passages are included, after all positive scores.
std::vector<ScoredDoc> rank_all(
    const InvertedIndex& index, const std::string& query,
    const std::unordered_set<std::string>& exclude);

// First k entries of rank_all.
std::vector<ScoredDoc> search(const InvertedIndex& index,
                              const std::string& query, size_t k,
                              const std::unordered_set<std::string>& exclude);

// Seeded permutation of the candidates ranked strictly beyond
// far_rank_threshold. Entries keep their global rank. A longer prefix with
// the same seed extends a shorter one.
std::vector<ScoredDoc> far_rank_order(const std::vector<ScoredDoc>& ranking,
                                      size_t far_rank_threshold, uint64_t seed);

// First `count` entries of far_rank_order; InsufficientCandidates if fewer
// passages lie beyond the threshold.
std::vector<ScoredDoc> far_rank_sample(
    const InvertedIndex& index, const std::string& query, size_t count,
    uint64_t seed, const std::unordered_set<std::string>& exclude,
    size_t far_rank_threshold = 500);

// Versioned JSON persistence. Internal format, not a compatibility surface.
void save_index(const InvertedIndex& index, const std::string& path);
InvertedIndex load_index(const std::string& path);

// Query -> ranked passages. BM25 is the only implementation shipped; the
// interface leaves room for e.g. a dense retriever.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<ScoredDoc> rank(
      const std::string& query,
      const std::unordered_set<std::string>& exclude) const = 0;
};

class Bm25Retriever final : public Retriever {
 public:
  explicit Bm25Retriever(const InvertedIndex& index) : index_(index) {}
  std::vector<ScoredDoc> rank(
      const std::string& query,
      const std::unordered_set<std::string>& exclude) const override {
    return rank_all(index_, query, exclude);
  }

 private:
  const InvertedIndex& index_;
};

}  // namespace ragcomp::retrieval
