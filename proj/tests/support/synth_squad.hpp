#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragcomp/corpus.hpp"
#include "ragcomp/rng.hpp"

namespace testsupport {

// Deterministic SQuAD-format corpus for retrieval/context tests. Every
// passage has at least 60 words (so a 50-word distractor snippet is always
// full size), every question's answer is a token that occurs only in its
// gold passage (so answer-string filtering never starves a condition), and
// question text shares an article tag with the gold passage's siblings (so
// top-ranked negatives behave like hard negatives).
struct SynthOptions {
  size_t articles = 120;
  size_t paragraphs_per_article = 6;
  size_t question_every = 3;  // one question per k-th passage
  uint64_t seed = 2024;
};

namespace detail {

inline const std::vector<std::string>& filler_pool() {
  static const std::vector<std::string> pool = {
      "archive",  "ballast",  "beacon",   "border",   "bridge",   "cargo",
      "channel",  "charter",  "cistern",  "climate",  "colony",   "column",
      "compass",  "council",  "course",   "current",  "depot",    "district",
      "dockyard", "drainage", "economy",  "estuary",  "ferry",    "fieldwork",
      "fleet",    "forge",    "fortress", "foundry",  "freight",  "frontier",
      "garrison", "granary",  "harbor",   "heritage", "highway",  "hillside",
      "imports",  "industry", "inland",   "invoice",  "island",   "journal",
      "junction", "kiln",     "lagoon",   "landing",  "ledger",   "lighthouse",
      "lowland",  "lumber",   "mainland", "manifest", "market",   "meadow",
      "merchant", "midland",  "mill",     "mineral",  "monsoon",  "moorland",
      "network",  "northern", "orchard",  "outpost",  "parish",   "passage",
      "pasture",  "pier",     "pilot",    "plateau",  "port",     "prairie",
      "province", "quarry",   "quay",     "railway",  "rampart",  "record",
      "reef",     "region",   "register", "reservoir", "ridge",   "riverbank",
      "roadstead", "salvage", "seaboard", "season",   "settlement", "shipyard",
      "shoreline", "signal",  "smelter",  "southern", "station",  "steamer",
      "storehouse", "strait", "summit",   "survey",   "tariff",   "terrace",
      "textile",  "timber",   "tonnage",  "trade",    "tramway",  "transit",
      "treaty",   "tribunal", "tunnel",   "upland",   "valley",   "viaduct",
      "village",  "vineyard", "voyage",   "warehouse", "waterway", "western",
      "wharf",    "windmill", "winter",   "workshop",
  };
  return pool;
}

struct SynthData {
  std::vector<ragcomp::Passage> passages;
  std::vector<ragcomp::Question> questions;
};

inline SynthData synth_data(const SynthOptions& opt) {
  const auto& pool = filler_pool();
  ragcomp::Rng rng(opt.seed);
  SynthData data;
  size_t question_index = 0;
  size_t passage_index = 0;

  for (size_t a = 0; a < opt.articles; ++a) {
    const std::string title = "Survey " + std::to_string(a);
    const std::string article_tag = "district" + std::to_string(a);
    const std::string topic = pool[a % pool.size()];

    for (size_t p = 0; p < opt.paragraphs_per_article; ++p, ++passage_index) {
      const bool has_question = passage_index % opt.question_every == 0;
      std::string answer_token;
      if (has_question) {
        answer_token = "code" + std::to_string(question_index) + "x";
      }

      std::vector<std::string> words;
      words.reserve(70);
      words.push_back("Entry");
      words.push_back(article_tag);
      words.push_back("section");
      words.push_back(std::to_string(p));
      words.push_back("covers");
      words.push_back("the");
      words.push_back(topic);
      while (words.size() < 66) {
        // repeat the article tag sporadically so tag queries rank siblings high
        if (words.size() % 13 == 0) {
          words.push_back(article_tag);
        } else {
          words.push_back(pool[rng.below(pool.size())]);
        }
        if (has_question && words.size() == 31) {
          words.push_back(answer_token);
        }
      }

      ragcomp::Passage passage;
      char ord[16];
      std::snprintf(ord, sizeof(ord), "#%04zu", p);
      passage.id = title + ord;
      passage.title = title;
      for (size_t w = 0; w < words.size(); ++w) {
        if (w > 0) passage.text += ' ';
        passage.text += words[w];
      }

      if (has_question) {
        ragcomp::Question question;
        question.id = "synth-" + std::to_string(question_index);
        question.text = "What code is filed under " + article_tag +
                        " section " + std::to_string(p) + " about the " +
                        topic + " " + pool[rng.below(pool.size())] + " " +
                        pool[rng.below(pool.size())] + "?";
        question.gold_passage_id = passage.id;
        question.gold_answers = {answer_token};
        // all-ASCII text: code-point offset == byte offset
        question.answer_char_start = passage.text.find(answer_token);
        data.questions.push_back(std::move(question));
        ++question_index;
      }
      data.passages.push_back(std::move(passage));
    }
  }
  return data;
}

}  // namespace detail

inline ragcomp::Corpus synth_corpus(const SynthOptions& opt = {}) {
  auto data = detail::synth_data(opt);
  return ragcomp::Corpus::from_parts(std::move(data.passages),
                                     std::move(data.questions));
}

// The same corpus in SQuAD v1.1 JSON, for exercising the load path.
inline void write_synth_squad_json(const std::string& path,
                                   const SynthOptions& opt = {}) {
  using nlohmann::json;
  const auto data = detail::synth_data(opt);
  json articles = json::array();
  json* current = nullptr;
  std::string current_title;
  std::vector<const ragcomp::Question*> by_passage(data.passages.size());
  for (const auto& question : data.questions) {
    for (size_t i = 0; i < data.passages.size(); ++i) {
      if (data.passages[i].id == question.gold_passage_id) {
        by_passage[i] = &question;
      }
    }
  }
  for (size_t i = 0; i < data.passages.size(); ++i) {
    const auto& passage = data.passages[i];
    if (current == nullptr || passage.title != current_title) {
      articles.push_back({{"title", passage.title}, {"paragraphs", json::array()}});
      current = &articles.back();
      current_title = passage.title;
    }
    json qas = json::array();
    if (by_passage[i] != nullptr) {
      const auto& question = *by_passage[i];
      qas.push_back(
          {{"id", question.id},
           {"question", question.text},
           {"answers", json::array({json{
                           {"text", question.gold_answers.front()},
                           {"answer_start", question.answer_char_start}}})}});
    }
    (*current)["paragraphs"].push_back(
        {{"context", passage.text}, {"qas", std::move(qas)}});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << json{{"version", "1.1"}, {"data", std::move(articles)}}.dump() << "\n";
}

}  // namespace testsupport
