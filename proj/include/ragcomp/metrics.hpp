#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ragcomp::metrics {

// SQuAD v1.1 answer normalization: lowercase, strip ASCII punctuation,
// drop the English articles a/an/the, collapse whitespace. Matches the
// official evaluation script; see normalize() in metrics.cpp for the
// non-ASCII details of the reimplementation.
std::string normalize(std::string_view text);

// 1 iff normalize(prediction) equals normalize(g) for some gold g.
int exact_match(std::string_view prediction,
                const std::vector<std::string>& gold_answers);

// SQuAD token F1, maximized over golds. Tokens are whitespace splits of the
// normalized strings; overlap is multiset intersection.
double token_f1(std::string_view prediction,
                const std::vector<std::string>& gold_answers);

// 1 iff some normalized gold occurs as a substring of the normalized
// prediction.
int inclusion(std::string_view prediction,
              const std::vector<std::string>& gold_answers);

struct ScoreRecord {
  std::string question_id;
  std::string condition;  // condition name, e.g. "hard_19"
  int em = 0;
  double f1 = 0.0;
  int inclusion = 0;
  long prompt_tokens = 0;
};

struct AggregateScores {
  double em_pct = 0.0;         // mean EM x 100
  double f1_mean = 0.0;        // mean F1 on [0,1]
  double inclusion_pct = 0.0;  // mean inclusion x 100
  double avg_tokens = 0.0;
  size_t n = 0;
};

// Scores one prediction against its golds; em = 1 forces f1 = 1 and
// inclusion = 1 by construction of the metrics.
ScoreRecord score_prediction(const std::string& question_id,
                             const std::string& condition,
                             std::string_view prediction,
                             const std::vector<std::string>& gold_answers,
                             long prompt_tokens);

// Means over records; all records must share one condition.
AggregateScores aggregate(const std::vector<ScoreRecord>& records);

}  // namespace ragcomp::metrics
