#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ragcomp/context.hpp"
#include "ragcomp/corpus.hpp"

namespace ragcomp::reader {

struct ReaderConfig {
  std::string endpoint;  // OpenAI-compatible base URL, e.g. http://host:8000/v1
  std::string model;
  double temperature = 0.0;
  int max_output_tokens = 64;
  int timeout_s = 60;
  int max_concurrency = 4;
  int retry_budget = 3;        // attempts beyond the first
  int retry_backoff_ms = 250;  // doubles per retry
  std::string cache_dir;       // empty disables the on-disk cache
  std::string api_key_env = "RAGCOMP_API_KEY";
};

enum class TokenProvenance { Endpoint, Proxy };

const char* token_provenance_name(TokenProvenance p);
TokenProvenance token_provenance_from_name(const std::string& name);

struct Prediction {
  std::string question_id;
  std::string condition;
  std::string output;
  int64_t prompt_tokens = 0;
  TokenProvenance token_provenance = TokenProvenance::Proxy;
  double latency_ms = 0.0;
  bool cache_hit = false;
  bool ok = true;
  std::string error;  // failure detail when !ok
};

class Reader {
 public:
  virtual ~Reader() = default;
  // Fills output/prompt_tokens/provenance/latency/cache fields; identity
  // fields (question_id, condition) are set by the caller. Throws on failure.
  virtual Prediction answer(const std::string& prompt) = 0;
};

// Answers with the first gold answer whose normalized form appears in the
// prompt, else "unknown". A deterministic ceiling reader: it scores EM = 1
// exactly when some gold answer survived snippet windowing.
class OracleReader : public Reader {
 public:
  explicit OracleReader(const Corpus& corpus);
  Prediction answer(const std::string& prompt) override;

  // The batch driver hands per-item question context through here because
  // Reader::answer is prompt-only.
  void set_current(const Question* question);

 private:
  const Corpus* corpus_;
  const Question* current_ = nullptr;
};

// POSTs {model, messages, temperature, max_tokens} to
// <endpoint>/chat/completions and extracts choices[0].message.content.
// Transient transport failures and 429/5xx responses are retried with
// exponential backoff; exhausting the budget raises a Transport error and a
// malformed response body raises a Protocol error. Responses are cached on
// disk keyed by SHA-256 of (model, prompt, temperature, max_tokens).
class HttpReader : public Reader {
 public:
  explicit HttpReader(ReaderConfig config);
  ~HttpReader() override;
  Prediction answer(const std::string& prompt) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Reader> make_reader(const std::string& kind,
                                    const ReaderConfig& config,
                                    const Corpus& corpus);

// Runs every context through the reader with at most max_concurrency
// in-flight requests. Output order matches input order and per-item failures
// are recorded on the prediction (ok = false) without aborting the batch.
// The oracle reader is driven sequentially since it needs per-item state.
std::vector<Prediction> run_batch(const std::vector<context::BuiltContext>& contexts,
                                  const Corpus& corpus, Reader& reader,
                                  int max_concurrency);

}  // namespace ragcomp::reader
