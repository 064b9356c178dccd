#include "ragcomp.h"

#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragcomp/corpus.hpp"
#include "ragcomp/error.hpp"
#include "ragcomp/experiment.hpp"
#include "ragcomp/metrics.hpp"
#include "ragcomp/retrieval.hpp"

using nlohmann::json;

struct ragc_corpus {
  ragcomp::Corpus corpus;
};

struct ragc_index {
  ragcomp::retrieval::InvertedIndex index;
};

namespace {

thread_local std::string g_last_error;

ragc_status status_of(ragcomp::ErrorKind kind) {
  switch (kind) {
    case ragcomp::ErrorKind::Io: return RAGC_ERR_IO;
    case ragcomp::ErrorKind::Parse: return RAGC_ERR_PARSE;
    case ragcomp::ErrorKind::Config: return RAGC_ERR_CONFIG;
    case ragcomp::ErrorKind::DataIntegrity: return RAGC_ERR_DATA_INTEGRITY;
    case ragcomp::ErrorKind::Bounds: return RAGC_ERR_BOUNDS;
    case ragcomp::ErrorKind::Lookup: return RAGC_ERR_LOOKUP;
    case ragcomp::ErrorKind::InsufficientCandidates:
      return RAGC_ERR_INSUFFICIENT_CANDIDATES;
    case ragcomp::ErrorKind::Transport: return RAGC_ERR_TRANSPORT;
    case ragcomp::ErrorKind::Protocol: return RAGC_ERR_PROTOCOL;
    case ragcomp::ErrorKind::Contract: return RAGC_ERR_CONTRACT;
    case ragcomp::ErrorKind::State: return RAGC_ERR_STATE;
    case ragcomp::ErrorKind::Internal: return RAGC_ERR_INTERNAL;
  }
  return RAGC_ERR_INTERNAL;
}

// Runs fn, translating the library's exceptions into status codes and the
// thread-local error message.
template <typename Fn>
ragc_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return RAGC_OK;
  } catch (const ragcomp::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RAGC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return RAGC_ERR_INTERNAL;
  }
}

void require_arg(const void* p, const char* name) {
  if (p == nullptr) {
    ragcomp::fail(ragcomp::ErrorKind::Contract,
                  std::string(name) + " must not be NULL");
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> parse_golds(const char* golds_json) {
  json parsed;
  try {
    parsed = json::parse(golds_json);
  } catch (const json::parse_error& e) {
    ragcomp::fail(ragcomp::ErrorKind::Parse,
                  std::string("golds_json: ") + e.what());
  }
  if (!parsed.is_array()) {
    ragcomp::fail(ragcomp::ErrorKind::Parse,
                  "golds_json must be a JSON array of strings");
  }
  std::vector<std::string> golds;
  for (const auto& item : parsed) {
    if (!item.is_string()) {
      ragcomp::fail(ragcomp::ErrorKind::Parse,
                    "golds_json must contain only strings");
    }
    golds.push_back(item.get<std::string>());
  }
  return golds;
}

ragc_status run_stage(const char* config_path, const char* out_dir,
                      void (*stage)(const ragcomp::experiment::RunConfig&,
                                    const std::string&)) {
  return guarded([&] {
    require_arg(config_path, "config_path");
    require_arg(out_dir, "out_dir");
    const auto config = ragcomp::experiment::load_config(config_path);
    stage(config, out_dir);
  });
}

}  // namespace

extern "C" {

const char* ragc_version(void) { return ragcomp::experiment::version(); }

const char* ragc_status_name(ragc_status status) {
  switch (status) {
    case RAGC_OK: return "ok";
    case RAGC_ERR_IO: return "io";
    case RAGC_ERR_PARSE: return "parse";
    case RAGC_ERR_CONFIG: return "config";
    case RAGC_ERR_DATA_INTEGRITY: return "data-integrity";
    case RAGC_ERR_BOUNDS: return "bounds";
    case RAGC_ERR_LOOKUP: return "lookup";
    case RAGC_ERR_INSUFFICIENT_CANDIDATES: return "insufficient-candidates";
    case RAGC_ERR_TRANSPORT: return "transport";
    case RAGC_ERR_PROTOCOL: return "protocol";
    case RAGC_ERR_CONTRACT: return "contract";
    case RAGC_ERR_STATE: return "state";
    case RAGC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ragc_last_error(void) { return g_last_error.c_str(); }

void ragc_string_free(char* s) { delete[] s; }

ragc_status ragc_corpus_open_squad(const char* path, ragc_corpus** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    auto handle = std::make_unique<ragc_corpus>();
    handle->corpus = ragcomp::load_squad(path);
    *out = handle.release();
  });
}

ragc_status ragc_corpus_open_jsonl(const char* path, ragc_corpus** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    auto handle = std::make_unique<ragc_corpus>();
    handle->corpus = ragcomp::load_corpus_jsonl(path);
    *out = handle.release();
  });
}

void ragc_corpus_free(ragc_corpus* corpus) { delete corpus; }

size_t ragc_corpus_passage_count(const ragc_corpus* corpus) {
  return corpus == nullptr ? 0 : corpus->corpus.passages().size();
}

size_t ragc_corpus_question_count(const ragc_corpus* corpus) {
  return corpus == nullptr ? 0 : corpus->corpus.questions().size();
}

ragc_status ragc_index_build(const ragc_corpus* corpus, const char* params_json,
                             ragc_index** out) {
  return guarded([&] {
    require_arg(corpus, "corpus");
    require_arg(out, "out");
    ragcomp::retrieval::TokenizerConfig tokenizer;
    ragcomp::retrieval::Bm25Params params;
    if (params_json != nullptr && *params_json != '\0') {
      json parsed;
      try {
        parsed = json::parse(params_json);
      } catch (const json::parse_error& e) {
        ragcomp::fail(ragcomp::ErrorKind::Parse,
                      std::string("params_json: ") + e.what());
      }
      if (!parsed.is_object()) {
        ragcomp::fail(ragcomp::ErrorKind::Parse,
                      "params_json must be a JSON object");
      }
      tokenizer.lowercase = parsed.value("lowercase", tokenizer.lowercase);
      params.k1 = parsed.value("k1", params.k1);
      params.b = parsed.value("b", params.b);
    }
    auto handle = std::make_unique<ragc_index>();
    handle->index =
        ragcomp::retrieval::build_index(corpus->corpus, tokenizer, params);
    *out = handle.release();
  });
}

ragc_status ragc_index_save(const ragc_index* index, const char* path) {
  return guarded([&] {
    require_arg(index, "index");
    require_arg(path, "path");
    ragcomp::retrieval::save_index(index->index, path);
  });
}

ragc_status ragc_index_load(const char* path, ragc_index** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    auto handle = std::make_unique<ragc_index>();
    handle->index = ragcomp::retrieval::load_index(path);
    *out = handle.release();
  });
}

void ragc_index_free(ragc_index* index) { delete index; }

size_t ragc_index_doc_count(const ragc_index* index) {
  return index == nullptr ? 0 : index->index.doc_count();
}

ragc_status ragc_index_search_json(const ragc_index* index, const char* query,
                                   size_t k, char** out_json) {
  return guarded([&] {
    require_arg(index, "index");
    require_arg(query, "query");
    require_arg(out_json, "out_json");
    const auto hits = ragcomp::retrieval::search(index->index, query, k, {});
    json rows = json::array();
    for (const auto& hit : hits) {
      rows.push_back({{"passage_id", hit.passage_id},
                      {"score", hit.score},
                      {"rank", hit.rank}});
    }
    *out_json = dup_string(rows.dump());
  });
}

ragc_status ragc_normalize_answer(const char* text, char** out) {
  return guarded([&] {
    require_arg(text, "text");
    require_arg(out, "out");
    *out = dup_string(ragcomp::metrics::normalize(text));
  });
}

ragc_status ragc_exact_match(const char* prediction, const char* golds_json,
                             int* out) {
  return guarded([&] {
    require_arg(prediction, "prediction");
    require_arg(golds_json, "golds_json");
    require_arg(out, "out");
    *out = ragcomp::metrics::exact_match(prediction, parse_golds(golds_json));
  });
}

ragc_status ragc_token_f1(const char* prediction, const char* golds_json,
                          double* out) {
  return guarded([&] {
    require_arg(prediction, "prediction");
    require_arg(golds_json, "golds_json");
    require_arg(out, "out");
    *out = ragcomp::metrics::token_f1(prediction, parse_golds(golds_json));
  });
}

ragc_status ragc_answer_inclusion(const char* prediction,
                                  const char* golds_json, int* out) {
  return guarded([&] {
    require_arg(prediction, "prediction");
    require_arg(golds_json, "golds_json");
    require_arg(out, "out");
    *out = ragcomp::metrics::inclusion(prediction, parse_golds(golds_json));
  });
}

ragc_status ragc_stage_ingest(const char* config_path, const char* out_dir) {
  return run_stage(config_path, out_dir, ragcomp::experiment::stage_ingest);
}

ragc_status ragc_stage_index(const char* config_path, const char* out_dir) {
  return run_stage(config_path, out_dir, ragcomp::experiment::stage_index);
}

ragc_status ragc_stage_build(const char* config_path, const char* out_dir) {
  return run_stage(config_path, out_dir, ragcomp::experiment::stage_build);
}

ragc_status ragc_stage_run(const char* config_path, const char* out_dir) {
  return run_stage(config_path, out_dir, ragcomp::experiment::stage_run);
}

ragc_status ragc_stage_analyze(const char* config_path, const char* out_dir) {
  return run_stage(config_path, out_dir, ragcomp::experiment::stage_analyze);
}

ragc_status ragc_stage_report(const char* config_path, const char* out_dir) {
  return run_stage(config_path, out_dir, ragcomp::experiment::stage_report);
}

}  // extern "C"
