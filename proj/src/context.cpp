#include "ragcomp/context.hpp"

#include <algorithm>

#include "ragcomp/error.hpp"
#include "ragcomp/metrics.hpp"
#include "ragcomp/rng.hpp"
#include "ragcomp/unicode.hpp"

namespace ragcomp::context {

namespace {

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

struct WordSpan {
  size_t begin;
  size_t end;  // byte range [begin, end)
};

std::vector<WordSpan> split_words(std::string_view text) {
  std::vector<WordSpan> words;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ws(text[i])) ++i;
    const size_t start = i;
    while (i < text.size() && !is_ws(text[i])) ++i;
    if (i > start) words.push_back({start, i});
  }
  return words;
}

std::string word_window_text(const std::string& text,
                             const std::vector<WordSpan>& words, size_t s,
                             size_t e) {
  if (s >= e) return {};
  return text.substr(words[s].begin, words[e - 1].end - words[s].begin);
}

}  // namespace

size_t count_words(std::string_view text) {
  size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_ws(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

const char* kind_name(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::GoldOnly: return "gold_only";
    case ConditionKind::Hard: return "hard";
    case ConditionKind::FarControl: return "far_control";
  }
  return "unknown";
}

ConditionKind kind_from_name(std::string_view name) {
  if (name == "gold_only") return ConditionKind::GoldOnly;
  if (name == "hard") return ConditionKind::Hard;
  if (name == "far_control") return ConditionKind::FarControl;
  fail(ErrorKind::Config, "unknown condition kind: " + std::string(name));
}

std::string ConditionSpec::name() const {
  switch (kind) {
    case ConditionKind::GoldOnly:
      return "gold_only";
    case ConditionKind::Hard:
      return "hard_" + std::to_string(hard_count);
    case ConditionKind::FarControl:
      return "far_" + std::to_string(hard_count) + "_" +
             std::to_string(far_count);
  }
  return "unknown";
}

void ConditionSpec::validate() const {
  if (snippet_words == 0)
    fail(ErrorKind::Config, "condition " + name() + ": snippet_words must be > 0");
  switch (kind) {
    case ConditionKind::GoldOnly:
      if (hard_count != 0 || far_count != 0)
        fail(ErrorKind::Config, "gold_only condition cannot have distractors");
      break;
    case ConditionKind::Hard:
      if (far_count != 0)
        fail(ErrorKind::Config, "hard condition cannot have far snippets");
      if (hard_count == 0)
        fail(ErrorKind::Config, "hard condition needs H >= 1");
      break;
    case ConditionKind::FarControl:
      if (hard_count + far_count == 0)
        fail(ErrorKind::Config, "far_control condition needs distractors");
      break;
  }
}

ConditionSpec ConditionSpec::gold_only(size_t W, uint64_t seed) {
  return {ConditionKind::GoldOnly, 0, 0, W, seed};
}
ConditionSpec ConditionSpec::hard(size_t H, size_t W, uint64_t seed) {
  return {ConditionKind::Hard, H, 0, W, seed};
}
ConditionSpec ConditionSpec::far_control(size_t n_hard, size_t n_far, size_t W,
                                         uint64_t seed) {
  return {ConditionKind::FarControl, n_hard, n_far, W, seed};
}

GoldSnippetResult gold_snippet(const Passage& passage, size_t answer_char_start,
                               const std::string& answer,
                               size_t budget_words) {
  if (answer.empty())
    fail(ErrorKind::Contract, "gold_snippet: empty answer string");
  const std::string& text = passage.text;
  const size_t ab = utf8_byte_offset(text, answer_char_start);
  if (ab + answer.size() > text.size() ||
      text.compare(ab, answer.size(), answer) != 0)
    fail(ErrorKind::Contract, "gold_snippet: answer not found at offset in " +
                                  passage.id);

  const auto words = split_words(text);
  const size_t n = words.size();
  const size_t W = budget_words;

  GoldSnippetResult result;
  result.snippet.source_passage_id = passage.id;
  result.snippet.is_gold = true;

  if (n <= W) {
    result.snippet.text = word_window_text(text, words, 0, n);
    result.snippet.word_count = n;
    return result;
  }

  // word containing the answer's first byte, and its last byte
  const size_t ae = ab + answer.size() - 1;
  auto word_at = [&](size_t byte_pos) {
    size_t lo = 0;
    while (lo + 1 < n && words[lo].end <= byte_pos) ++lo;
    return lo;
  };
  const size_t c = word_at(ab);
  const size_t c_end = word_at(ae);
  const size_t answer_words = c_end - c + 1;

  size_t s, e;
  if (answer_words > W) {
    s = c;
    e = std::min(n, c + W);
    result.truncated_answer = true;
  } else {
    const long long ideal = static_cast<long long>(c) -
                            static_cast<long long>(W / 2);
    const size_t s_min = (c_end + 1 >= W) ? c_end + 1 - W : 0;
    const size_t s_max = std::min(c, n - W);
    s = static_cast<size_t>(std::max<long long>(0, ideal));
    s = std::clamp(s, s_min, s_max);
    e = s + W;
  }
  result.snippet.text = word_window_text(text, words, s, e);
  result.snippet.word_count = e - s;
  return result;
}

Snippet distractor_snippet(const Passage& passage, size_t budget_words) {
  const auto words = split_words(passage.text);
  const size_t e = std::min(words.size(), budget_words);
  Snippet snippet;
  snippet.source_passage_id = passage.id;
  snippet.text = word_window_text(passage.text, words, 0, e);
  snippet.word_count = e;
  snippet.is_gold = false;
  return snippet;
}

bool is_answer_free(const Snippet& snippet,
                    const std::vector<std::string>& gold_answers) {
  const std::string normalized = metrics::normalize(snippet.text);
  for (const auto& gold : gold_answers) {
    const std::string pattern = metrics::normalize(gold);
    if (pattern.empty()) continue;
    if (normalized.find(pattern) != std::string::npos) return false;
  }
  return true;
}

std::string render_prompt(const std::vector<Snippet>& snippets,
                          const Question& question,
                          const PromptTemplate& tmpl) {
  if (snippets.empty())
    fail(ErrorKind::Contract, "render_prompt: empty context");
  std::string out = tmpl.instruction;
  out += "\n\n";
  for (size_t i = 0; i < snippets.size(); ++i) {
    out += "Passage " + std::to_string(i + 1) + ": " + snippets[i].text + "\n";
  }
  out += "\n";
  out += tmpl.question_prefix + question.text + "\n";
  out += tmpl.answer_cue;
  return out;
}

size_t gold_position_draw(uint64_t seed, const std::string& question_id,
                          ConditionKind kind, size_t n_snippets) {
  Rng rng(mix64(seed ^ stable_hash({question_id, kind_name(kind)})));
  return static_cast<size_t>(rng.below(n_snippets));
}

BuiltContext build_context(const Question& question, const Corpus& corpus,
                           const retrieval::InvertedIndex& index,
                           const ConditionSpec& condition,
                           const PromptTemplate& tmpl,
                           size_t far_rank_threshold) {
  condition.validate();
  const Passage& gold_passage = corpus.passage(question.gold_passage_id);
  auto gold = gold_snippet(gold_passage, question.answer_char_start,
                           question.gold_answers.front(),
                           condition.snippet_words);

  BuiltContext built;
  built.question_id = question.id;
  built.condition = condition;
  built.truncated_answer = gold.truncated_answer;

  std::vector<Snippet> distractors;
  if (condition.kind != ConditionKind::GoldOnly) {
    const std::unordered_set<std::string> exclude{question.gold_passage_id};
    const auto ranking = retrieval::rank_all(index, question.text, exclude);

    std::unordered_set<std::string> used;
    auto take = [&](const std::vector<retrieval::ScoredDoc>& candidates,
                    size_t want, const char* label) {
      size_t got = 0;
      for (const auto& cand : candidates) {
        if (got == want) break;
        if (used.count(cand.passage_id)) continue;
        auto snippet = distractor_snippet(corpus.passage(cand.passage_id),
                                          condition.snippet_words);
        if (!is_answer_free(snippet, question.gold_answers)) continue;
        used.insert(cand.passage_id);
        distractors.push_back(std::move(snippet));
        ++got;
      }
      if (got < want)
        fail(ErrorKind::InsufficientCandidates,
             "question " + question.id + ": only " + std::to_string(got) +
                 " of " + std::to_string(want) + " answer-free " + label +
                 " candidates under condition " + condition.name());
    };

    take(ranking, condition.hard_count, "hard");
    if (condition.far_count > 0) {
      const uint64_t far_seed =
          mix64(condition.seed ^ stable_hash({question.id, "far"}));
      const auto far_order =
          retrieval::far_rank_order(ranking, far_rank_threshold, far_seed);
      take(far_order, condition.far_count, "far-rank");
    }
  }

  const size_t total = 1 + distractors.size();
  built.gold_position =
      condition.kind == ConditionKind::GoldOnly
          ? 0
          : gold_position_draw(condition.seed, question.id, condition.kind,
                               total);

  built.snippets.reserve(total);
  size_t next_distractor = 0;
  for (size_t pos = 0; pos < total; ++pos) {
    if (pos == built.gold_position)
      built.snippets.push_back(gold.snippet);
    else
      built.snippets.push_back(std::move(distractors[next_distractor++]));
  }
  built.prompt = render_prompt(built.snippets, question, tmpl);
  return built;
}

}  // namespace ragcomp::context
