#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ragcomp/context.hpp"
#include "ragcomp/reader.hpp"
#include "ragcomp/retrieval.hpp"

namespace ragcomp::experiment {

struct AnalysisConfig {
  size_t bootstrap_resamples = 10000;
  size_t mc_draws = 10000;
  size_t exact_n_max = 20;
};

struct RunConfig {
  std::string config_dir;  // directory of the config file; relative paths
                           // in the config resolve against it
  std::string raw;         // verbatim config file bytes, copied into the run

  std::string corpus_path;
  retrieval::TokenizerConfig tokenizer;
  retrieval::Bm25Params bm25;
  size_t far_rank_threshold = 500;

  size_t n_questions = 200;
  uint64_t seed = 13;

  size_t snippet_words = 50;
  std::vector<context::ConditionSpec> conditions;
  context::PromptTemplate prompt;

  std::string reader_kind = "oracle";  // "oracle" or "http"
  std::string reader_label;            // row label in aggregates.csv
  reader::ReaderConfig reader_config;

  AnalysisConfig analysis;
};

// Parses and validates a run config. Unknown keys are rejected so typos
// cannot silently fall back to defaults.
RunConfig load_config(const std::string& path);

// Pipeline stages. Each stage locks the run directory, reads its inputs
// from there (raising State errors that name the stage to re-run when an
// upstream artifact is missing), writes its outputs, and refreshes
// manifest.json.
//
//   ingest  — corpus.jsonl
//   index   — index.json
//   build   — contexts.jsonl
//   run     — predictions.jsonl, scores.jsonl, aggregates.csv
//   analyze — retention.csv, half_life.csv, deltas.csv, analysis_notes.txt
//   report  — report.md, retention.svg
void stage_ingest(const RunConfig& config, const std::string& out_dir);
void stage_index(const RunConfig& config, const std::string& out_dir);
void stage_build(const RunConfig& config, const std::string& out_dir);
void stage_run(const RunConfig& config, const std::string& out_dir);
void stage_analyze(const RunConfig& config, const std::string& out_dir);
void stage_report(const RunConfig& config, const std::string& out_dir);

const char* version();

}  // namespace ragcomp::experiment
