#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ragcomp {

struct Passage {
  std::string id;     // "<article title>#<paragraph ordinal>"
  std::string title;
  std::string text;
};

struct Question {
  std::string id;
  std::string text;
  std::string gold_passage_id;
  std::vector<std::string> gold_answers;  // distinct answer texts, first-seen order
  size_t answer_char_start = 0;           // code-point offset of the first gold answer
};

// Immutable after construction; safe to share across threads.
class Corpus {
 public:
  Corpus() = default;

  // Validates all invariants: unique ids, non-empty passage text, gold
  // passages present, and each question's first gold answer occurring
  // verbatim at answer_char_start.
  static Corpus from_parts(std::vector<Passage> passages,
                           std::vector<Question> questions);

  const std::vector<Passage>& passages() const { return passages_; }
  const std::vector<Question>& questions() const { return questions_; }

  bool has_passage(const std::string& id) const {
    return passage_by_id_.count(id) > 0;
  }
  const Passage& passage(const std::string& id) const;
  const Question& question(const std::string& id) const;

 private:
  std::vector<Passage> passages_;
  std::vector<Question> questions_;
  std::unordered_map<std::string, size_t> passage_by_id_;
  std::unordered_map<std::string, size_t> question_by_id_;
};

// Loads a SQuAD v1.1 JSON file (data -> paragraphs -> qas). Parse problems
// raise Parse errors naming the offending JSON path; answer offsets that do
// not match the passage text raise DataIntegrity errors naming the question.
Corpus load_squad(const std::string& path);

// Deterministic uniform sample of n questions without replacement; identical
// output for identical (corpus, n, seed).
std::vector<Question> sample_questions(const Corpus& corpus, size_t n,
                                       uint64_t seed);

// Normalized corpus dump as JSON Lines: one object per passage, then one per
// question.
void dump_corpus_jsonl(const Corpus& corpus, const std::string& path);

// Reads a dump produced by dump_corpus_jsonl and revalidates all corpus
// invariants.
Corpus load_corpus_jsonl(const std::string& path);

}  // namespace ragcomp
