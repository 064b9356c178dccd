#include "ragcomp/corpus.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "ragcomp/error.hpp"
#include "ragcomp/rng.hpp"
#include "ragcomp/unicode.hpp"

namespace ragcomp {

namespace {

using nlohmann::json;

const json& expect(const json& node, const char* key, const std::string& path,
                   json::value_t type, const char* type_name) {
  auto it = node.find(key);
  if (it == node.end())
    fail(ErrorKind::Parse, "missing \"" + std::string(key) + "\" at " + path);
  if (it->type() != type &&
      !(type == json::value_t::number_unsigned && it->is_number_integer()))
    fail(ErrorKind::Parse, "expected " + std::string(type_name) + " for \"" +
                               key + "\" at " + path);
  return *it;
}

const json& expect_string(const json& n, const char* k, const std::string& p) {
  return expect(n, k, p, json::value_t::string, "string");
}
const json& expect_array(const json& n, const char* k, const std::string& p) {
  return expect(n, k, p, json::value_t::array, "array");
}

std::string passage_ordinal_id(const std::string& title, size_t ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%04zu", ordinal);
  return title + buf;
}

// The gold answer must occur verbatim at the recorded code-point offset.
void check_answer_offset(const Passage& passage, const std::string& answer,
                         size_t char_start, const std::string& question_id) {
  const size_t byte_start = utf8_byte_offset(passage.text, char_start);
  if (byte_start + answer.size() > passage.text.size() ||
      passage.text.compare(byte_start, answer.size(), answer) != 0)
    fail(ErrorKind::DataIntegrity,
         "question " + question_id + ": answer_start " +
             std::to_string(char_start) + " does not match answer text \"" +
             answer + "\" in gold passage " + passage.id);
}

}  // namespace

Corpus Corpus::from_parts(std::vector<Passage> passages,
                          std::vector<Question> questions) {
  Corpus corpus;
  corpus.passages_ = std::move(passages);
  corpus.questions_ = std::move(questions);
  for (size_t i = 0; i < corpus.passages_.size(); ++i) {
    const Passage& p = corpus.passages_[i];
    if (p.text.empty())
      fail(ErrorKind::DataIntegrity, "passage " + p.id + ": empty text");
    if (!corpus.passage_by_id_.emplace(p.id, i).second)
      fail(ErrorKind::DataIntegrity, "duplicate passage id " + p.id);
  }
  for (size_t i = 0; i < corpus.questions_.size(); ++i) {
    const Question& q = corpus.questions_[i];
    if (q.gold_answers.empty())
      fail(ErrorKind::DataIntegrity, "question " + q.id + ": no gold answers");
    auto it = corpus.passage_by_id_.find(q.gold_passage_id);
    if (it == corpus.passage_by_id_.end())
      fail(ErrorKind::DataIntegrity, "question " + q.id +
                                         ": unknown gold passage " +
                                         q.gold_passage_id);
    check_answer_offset(corpus.passages_[it->second], q.gold_answers.front(),
                        q.answer_char_start, q.id);
    if (!corpus.question_by_id_.emplace(q.id, i).second)
      fail(ErrorKind::DataIntegrity, "duplicate question id " + q.id);
  }
  return corpus;
}

const Passage& Corpus::passage(const std::string& id) const {
  auto it = passage_by_id_.find(id);
  if (it == passage_by_id_.end())
    fail(ErrorKind::Lookup, "unknown passage id " + id);
  return passages_[it->second];
}

const Question& Corpus::question(const std::string& id) const {
  auto it = question_by_id_.find(id);
  if (it == question_by_id_.end())
    fail(ErrorKind::Lookup, "unknown question id " + id);
  return questions_[it->second];
}

Corpus load_squad(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, path + ": " + e.what());
  }

  const json& data = expect_array(root, "data", "$");
  std::vector<Passage> passages;
  std::vector<Question> questions;

  for (size_t ai = 0; ai < data.size(); ++ai) {
    const std::string apath = "$.data[" + std::to_string(ai) + "]";
    const json& article = data[ai];
    if (!article.is_object())
      fail(ErrorKind::Parse, "expected object at " + apath);
    const std::string title =
        expect_string(article, "title", apath).get<std::string>();
    const json& paragraphs = expect_array(article, "paragraphs", apath);

    for (size_t pi = 0; pi < paragraphs.size(); ++pi) {
      const std::string ppath = apath + ".paragraphs[" + std::to_string(pi) + "]";
      const json& para = paragraphs[pi];
      if (!para.is_object()) fail(ErrorKind::Parse, "expected object at " + ppath);

      Passage passage;
      passage.id = passage_ordinal_id(title, pi);
      passage.title = title;
      passage.text = expect_string(para, "context", ppath).get<std::string>();
      const json& qas = expect_array(para, "qas", ppath);

      for (size_t qi = 0; qi < qas.size(); ++qi) {
        const std::string qpath = ppath + ".qas[" + std::to_string(qi) + "]";
        const json& qa = qas[qi];
        if (!qa.is_object()) fail(ErrorKind::Parse, "expected object at " + qpath);

        Question question;
        question.id = expect_string(qa, "id", qpath).get<std::string>();
        question.text = expect_string(qa, "question", qpath).get<std::string>();
        question.gold_passage_id = passage.id;

        const json& answers = expect_array(qa, "answers", qpath);
        if (answers.empty())
          fail(ErrorKind::Parse, "empty \"answers\" at " + qpath);
        for (size_t xi = 0; xi < answers.size(); ++xi) {
          const std::string xpath = qpath + ".answers[" + std::to_string(xi) + "]";
          const json& ans = answers[xi];
          if (!ans.is_object())
            fail(ErrorKind::Parse, "expected object at " + xpath);
          const std::string text =
              expect_string(ans, "text", xpath).get<std::string>();
          auto it = ans.find("answer_start");
          if (it == ans.end() || !it->is_number_integer())
            fail(ErrorKind::Parse,
                 "missing integer \"answer_start\" at " + xpath);
          const long long start = it->get<long long>();
          if (start < 0)
            fail(ErrorKind::Parse, "negative answer_start at " + xpath);
          // validate every annotated span against the context
          check_answer_offset(passage, text, static_cast<size_t>(start),
                              question.id);
          if (xi == 0) question.answer_char_start = static_cast<size_t>(start);
          bool seen = false;
          for (const auto& g : question.gold_answers) seen = seen || g == text;
          if (!seen) question.gold_answers.push_back(text);
        }
        questions.push_back(std::move(question));
      }
      passages.push_back(std::move(passage));
    }
  }
  return Corpus::from_parts(std::move(passages), std::move(questions));
}

std::vector<Question> sample_questions(const Corpus& corpus, size_t n,
                                       uint64_t seed) {
  const auto& population = corpus.questions();
  if (n > population.size())
    fail(ErrorKind::Bounds, "sample_questions: n=" + std::to_string(n) +
                                " exceeds population " +
                                std::to_string(population.size()));
  Rng rng(seed);
  std::vector<Question> out;
  out.reserve(n);
  for (size_t idx : rng.sample_indices(population.size(), n))
    out.push_back(population[idx]);
  return out;
}

void dump_corpus_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  for (const auto& p : corpus.passages()) {
    json row{{"id", p.id}, {"title", p.title}, {"text", p.text}};
    out << row.dump() << "\n";
  }
  for (const auto& q : corpus.questions()) {
    json row{{"id", q.id},
             {"text", q.text},
             {"gold_passage_id", q.gold_passage_id},
             {"gold_answers", q.gold_answers},
             {"answer_char_start", q.answer_char_start}};
    out << row.dump() << "\n";
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

Corpus load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::vector<Passage> passages;
  std::vector<Question> questions;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Parse, where + ": " + e.what());
    }
    if (!row.is_object()) fail(ErrorKind::Parse, where + ": expected object");
    if (row.contains("gold_passage_id")) {
      Question q;
      q.id = expect_string(row, "id", where).get<std::string>();
      q.text = expect_string(row, "text", where).get<std::string>();
      q.gold_passage_id =
          expect_string(row, "gold_passage_id", where).get<std::string>();
      for (const auto& ans : expect_array(row, "gold_answers", where)) {
        if (!ans.is_string())
          fail(ErrorKind::Parse, where + ": gold_answers must be strings");
        q.gold_answers.push_back(ans.get<std::string>());
      }
      auto it = row.find("answer_char_start");
      if (it == row.end() || !it->is_number_integer())
        fail(ErrorKind::Parse, where + ": missing integer answer_char_start");
      q.answer_char_start = it->get<size_t>();
      questions.push_back(std::move(q));
    } else {
      Passage p;
      p.id = expect_string(row, "id", where).get<std::string>();
      p.title = expect_string(row, "title", where).get<std::string>();
      p.text = expect_string(row, "text", where).get<std::string>();
      passages.push_back(std::move(p));
    }
  }
  return Corpus::from_parts(std::move(passages), std::move(questions));
}

}  // namespace ragcomp
