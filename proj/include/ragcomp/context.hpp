#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ragcomp/corpus.hpp"
#include "ragcomp/retrieval.hpp"

namespace ragcomp::context {

// A word is a maximal run of non-whitespace bytes (ASCII whitespace); this is
// the unit for all snippet budgets.
size_t count_words(std::string_view text);

struct Snippet {
  std::string source_passage_id;
  std::string text;  // verbatim substring of the source passage
  size_t word_count = 0;
  bool is_gold = false;
};

enum class ConditionKind { GoldOnly, Hard, FarControl };

const char* kind_name(ConditionKind kind);
ConditionKind kind_from_name(std::string_view name);

struct ConditionSpec {
  ConditionKind kind = ConditionKind::GoldOnly;
  size_t hard_count = 0;     // H for Hard; number of BM25 negatives for FarControl
  size_t far_count = 0;      // far-rank snippets (FarControl only)
  size_t snippet_words = 50; // W
  uint64_t seed = 0;         // run seed; gold position and far sampling derive from it

  size_t total_snippets() const { return 1 + hard_count + far_count; }
  std::string name() const;  // "gold_only", "hard_19", "far_4_15"
  void validate() const;

  static ConditionSpec gold_only(size_t W, uint64_t seed);
  static ConditionSpec hard(size_t H, size_t W, uint64_t seed);
  static ConditionSpec far_control(size_t n_hard, size_t n_far, size_t W,
                                   uint64_t seed);
};

struct PromptTemplate {
  std::string instruction =
      "Answer the question using only the numbered passages below. "
      "Reply with the exact answer span and nothing else.";
  std::string question_prefix = "Question: ";
  std::string answer_cue = "Answer:";
};

struct BuiltContext {
  std::string question_id;
  ConditionSpec condition;
  std::vector<Snippet> snippets;
  size_t gold_position = 0;
  std::string prompt;
  bool truncated_answer = false;
};

struct GoldSnippetResult {
  Snippet snippet;
  bool truncated_answer = false;
};

// Window of at most W words centered on the word containing the answer's
// first character, shifted (never shrunk) at passage edges and shifted right
// if needed so the whole answer fits whenever the answer is <= W words. An
// answer longer than W words yields the W words starting at the answer and
// sets truncated_answer.
GoldSnippetResult gold_snippet(const Passage& passage, size_t answer_char_start,
                               const std::string& answer, size_t budget_words);

// First W words of the passage.
Snippet distractor_snippet(const Passage& passage, size_t budget_words);

// True iff no normalized gold answer occurs as a substring of the normalized
// snippet text. Golds whose normalization is empty are ignored (an empty
// pattern would match everything).
bool is_answer_free(const Snippet& snippet,
                    const std::vector<std::string>& gold_answers);

std::string render_prompt(const std::vector<Snippet>& snippets,
                          const Question& question,
                          const PromptTemplate& tmpl);

// Uniform gold position derived from (seed, question id, condition kind).
size_t gold_position_draw(uint64_t seed, const std::string& question_id,
                          ConditionKind kind, size_t n_snippets);

// Assembles the context for one question under one condition:
//   GoldOnly   — the gold snippet alone at position 0;
//   Hard       — gold + the first H answer-free snippets walking down the
//                BM25 ranking (gold passage excluded);
//   FarControl — gold + first n_hard answer-free BM25 negatives + n_far
//                answer-free far-rank snippets.
// Gold position is randomized except for GoldOnly.
BuiltContext build_context(const Question& question, const Corpus& corpus,
                           const retrieval::InvertedIndex& index,
                           const ConditionSpec& condition,
                           const PromptTemplate& tmpl = {},
                           size_t far_rank_threshold = 500);

}  // namespace ragcomp::context
