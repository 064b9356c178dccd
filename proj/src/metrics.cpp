#include "ragcomp/metrics.hpp"

#include <algorithm>
#include <unordered_map>

#include "ragcomp/error.hpp"
#include "ragcomp/unicode.hpp"

namespace ragcomp::metrics {

namespace {

// Whitespace per Python str.split(), which the official evaluator relies on.
bool is_space_cp(uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0a: case 0x0b: case 0x0c: case 0x0d:
    case 0x1c: case 0x1d: case 0x1e: case 0x1f: case 0x20:
    case 0x85: case 0xa0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202f: case 0x205f: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200a;
  }
}

// string.punctuation — the 32 ASCII punctuation characters.
bool is_ascii_punct(uint32_t cp) {
  return (cp >= 0x21 && cp <= 0x2f) || (cp >= 0x3a && cp <= 0x40) ||
         (cp >= 0x5b && cp <= 0x60) || (cp >= 0x7b && cp <= 0x7e);
}

// Word character for the \b(a|an|the)\b article regex. ASCII alnum, plus
// non-ASCII code points except common punctuation/space blocks. This is an
// approximation of the regex's Unicode word classes that is exact on Latin
// text with typographic quotes/dashes; exotic symbol classes adjacent to an
// article with no intervening space may differ from the Python evaluator.
bool is_word_cp(uint32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
           (cp >= 'A' && cp <= 'Z');
  }
  if (is_space_cp(cp)) return false;
  switch (cp) {
    case 0xa1: case 0xab: case 0xbb: case 0xbf:  // ¡ « » ¿
      return false;
    default:
      return !(cp >= 0x2000 && cp <= 0x206f);  // general punctuation block
  }
}

bool is_article(const std::vector<uint32_t>& cps, size_t begin, size_t end) {
  const size_t len = end - begin;
  if (len == 1) return cps[begin] == 'a';
  if (len == 2) return cps[begin] == 'a' && cps[begin + 1] == 'n';
  if (len == 3)
    return cps[begin] == 't' && cps[begin + 1] == 'h' && cps[begin + 2] == 'e';
  return false;
}

std::vector<std::string> split_tokens(const std::string& normalized) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < normalized.size()) {
    while (i < normalized.size() && normalized[i] == ' ') ++i;
    size_t start = i;
    while (i < normalized.size() && normalized[i] != ' ') ++i;
    if (i > start) tokens.push_back(normalized.substr(start, i - start));
  }
  return tokens;
}

double f1_single(const std::vector<std::string>& pred_tokens,
                 const std::vector<std::string>& gold_tokens) {
  // Both-empty counts as a perfect match; the v1.1 script scores this 0
  // through its zero-overlap early return, but an empty-vs-empty comparison
  // is a match under the same reading the v2.0 script adopted.
  if (pred_tokens.empty() && gold_tokens.empty()) return 1.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& t : gold_tokens) ++counts[t];
  long num_same = 0;
  for (const auto& t : pred_tokens) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++num_same;
    }
  }
  if (num_same == 0) return 0.0;
  const double precision =
      static_cast<double>(num_same) / static_cast<double>(pred_tokens.size());
  const double recall =
      static_cast<double>(num_same) / static_cast<double>(gold_tokens.size());
  return (2 * precision * recall) / (precision + recall);
}

void require_golds(const std::vector<std::string>& gold_answers,
                   const char* op) {
  if (gold_answers.empty())
    fail(ErrorKind::Contract, std::string(op) + ": gold_answers is empty");
}

}  // namespace

std::string normalize(std::string_view text) {
  std::vector<uint32_t> cps = utf8_decode(text);

  // lower
  for (auto& cp : cps) cp = lower_codepoint(cp);

  // remove ASCII punctuation (characters vanish; no space is inserted)
  std::vector<uint32_t> stripped;
  stripped.reserve(cps.size());
  for (uint32_t cp : cps)
    if (!is_ascii_punct(cp)) stripped.push_back(cp);

  // remove articles: any maximal word-character run equal to a/an/the
  // becomes a single space
  std::vector<uint32_t> dearticled;
  dearticled.reserve(stripped.size());
  size_t i = 0;
  while (i < stripped.size()) {
    if (!is_word_cp(stripped[i])) {
      dearticled.push_back(stripped[i]);
      ++i;
      continue;
    }
    size_t j = i;
    while (j < stripped.size() && is_word_cp(stripped[j])) ++j;
    if (is_article(stripped, i, j)) {
      dearticled.push_back(' ');
    } else {
      dearticled.insert(dearticled.end(), stripped.begin() + i,
                        stripped.begin() + j);
    }
    i = j;
  }

  // collapse whitespace
  std::string out;
  out.reserve(dearticled.size());
  bool pending_space = false;
  bool seen_token = false;
  for (uint32_t cp : dearticled) {
    if (is_space_cp(cp)) {
      pending_space = true;
      continue;
    }
    if (pending_space && seen_token) out.push_back(' ');
    pending_space = false;
    seen_token = true;
    utf8_append(out, cp);
  }
  return out;
}

int exact_match(std::string_view prediction,
                const std::vector<std::string>& gold_answers) {
  require_golds(gold_answers, "exact_match");
  const std::string pred = normalize(prediction);
  for (const auto& gold : gold_answers)
    if (pred == normalize(gold)) return 1;
  return 0;
}

double token_f1(std::string_view prediction,
                const std::vector<std::string>& gold_answers) {
  require_golds(gold_answers, "token_f1");
  const auto pred_tokens = split_tokens(normalize(prediction));
  double best = 0.0;
  for (const auto& gold : gold_answers) {
    const auto gold_tokens = split_tokens(normalize(gold));
    best = std::max(best, f1_single(pred_tokens, gold_tokens));
  }
  return best;
}

int inclusion(std::string_view prediction,
              const std::vector<std::string>& gold_answers) {
  require_golds(gold_answers, "inclusion");
  const std::string pred = normalize(prediction);
  for (const auto& gold : gold_answers)
    if (pred.find(normalize(gold)) != std::string::npos) return 1;
  return 0;
}

ScoreRecord score_prediction(const std::string& question_id,
                             const std::string& condition,
                             std::string_view prediction,
                             const std::vector<std::string>& gold_answers,
                             long prompt_tokens) {
  ScoreRecord rec;
  rec.question_id = question_id;
  rec.condition = condition;
  rec.em = exact_match(prediction, gold_answers);
  rec.f1 = token_f1(prediction, gold_answers);
  rec.inclusion = inclusion(prediction, gold_answers);
  rec.prompt_tokens = prompt_tokens;
  return rec;
}

AggregateScores aggregate(const std::vector<ScoreRecord>& records) {
  if (records.empty())
    fail(ErrorKind::Contract, "aggregate: empty record list");
  AggregateScores agg;
  agg.n = records.size();
  double em_sum = 0, f1_sum = 0, incl_sum = 0, tok_sum = 0;
  for (const auto& rec : records) {
    if (rec.condition != records.front().condition)
      fail(ErrorKind::Contract,
           "aggregate: mixed conditions (" + records.front().condition +
               " vs " + rec.condition + ")");
    em_sum += rec.em;
    f1_sum += rec.f1;
    incl_sum += rec.inclusion;
    tok_sum += static_cast<double>(rec.prompt_tokens);
  }
  const double n = static_cast<double>(agg.n);
  agg.em_pct = 100.0 * em_sum / n;
  agg.f1_mean = f1_sum / n;
  agg.inclusion_pct = 100.0 * incl_sum / n;
  agg.avg_tokens = tok_sum / n;
  return agg;
}

}  // namespace ragcomp::metrics
