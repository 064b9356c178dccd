// Command-line front end for the evaluation pipeline. Deliberately links only
// the C API so the shared library surface stays exercised end to end.
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "ragcomp.h"

namespace {

using StageFn = ragc_status (*)(const char*, const char*);

int run_stage(const char* name, StageFn stage, const std::string& config,
              const std::string& out) {
  const ragc_status status = stage(config.c_str(), out.c_str());
  if (status != RAGC_OK) {
    std::fprintf(stderr, "[%s] %s error: %s\n", name, ragc_status_name(status),
                 ragc_last_error());
    return static_cast<int>(status);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matched-control context evaluation for retrieval-augmented "
               "readers"};
  app.set_version_flag("--version", ragc_version());
  app.require_subcommand(1);

  struct Stage {
    const char* name;
    StageFn fn;
    const char* help;
  };
  const Stage stages[] = {
      {"ingest", ragc_stage_ingest,
       "Validate the source corpus and write corpus.jsonl"},
      {"index", ragc_stage_index, "Build the BM25 index (index.json)"},
      {"build", ragc_stage_build,
       "Assemble per-question contexts (contexts.jsonl)"},
      {"run", ragc_stage_run,
       "Query the reader and score predictions (predictions.jsonl, "
       "scores.jsonl, aggregates.csv)"},
      {"analyze", ragc_stage_analyze,
       "Compute retention, half-life and paired deltas"},
      {"report", ragc_stage_report, "Render report.md and retention.svg"},
  };

  std::string config, out;
  int exit_code = 0;
  for (const auto& stage : stages) {
    auto* cmd = app.add_subcommand(stage.name, stage.help);
    cmd->add_option("--config", config, "Run config JSON file")->required();
    cmd->add_option("--out", out, "Run output directory")->required();
    cmd->callback([&exit_code, &config, &out, stage] {
      exit_code = run_stage(stage.name, stage.fn, config, out);
    });
  }

  CLI11_PARSE(app, argc, argv);
  return exit_code;
}
