#include "ragcomp/reader.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <openssl/evp.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "httplib.h"
#include <json.hpp>

#include "ragcomp/error.hpp"
#include "ragcomp/metrics.hpp"

namespace ragcomp::reader {

using nlohmann::json;

const char* token_provenance_name(TokenProvenance p) {
  return p == TokenProvenance::Endpoint ? "endpoint" : "proxy";
}

TokenProvenance token_provenance_from_name(const std::string& name) {
  if (name == "endpoint") return TokenProvenance::Endpoint;
  if (name == "proxy") return TokenProvenance::Proxy;
  fail(ErrorKind::Parse, "unknown token provenance: " + name);
}

OracleReader::OracleReader(const Corpus& corpus) : corpus_(&corpus) {}

void OracleReader::set_current(const Question* question) { current_ = question; }

Prediction OracleReader::answer(const std::string& prompt) {
  if (current_ == nullptr) {
    fail(ErrorKind::State, "oracle reader: no current question set");
  }
  Prediction pred;
  pred.output = "unknown";
  const std::string haystack = metrics::normalize(prompt);
  for (const auto& gold : current_->gold_answers) {
    const std::string needle = metrics::normalize(gold);
    if (needle.empty()) continue;
    if (haystack.find(needle) != std::string::npos) {
      pred.output = gold;
      break;
    }
  }
  pred.prompt_tokens = static_cast<int64_t>(context::count_words(prompt));
  pred.token_provenance = TokenProvenance::Proxy;
  return pred;
}

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    fail(ErrorKind::Internal, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

struct ParsedEndpoint {
  std::string base;         // scheme://host[:port]
  std::string path_prefix;  // leading path, no trailing slash
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    fail(ErrorKind::Config, "reader endpoint must include a scheme: " + endpoint);
  }
  const std::string scheme = endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    fail(ErrorKind::Config, "unsupported endpoint scheme: " + scheme);
  }
  ParsedEndpoint parsed;
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    parsed.base = endpoint;
  } else {
    parsed.base = endpoint.substr(0, path_start);
    parsed.path_prefix = endpoint.substr(path_start);
    while (!parsed.path_prefix.empty() && parsed.path_prefix.back() == '/') {
      parsed.path_prefix.pop_back();
    }
  }
  if (parsed.base == scheme + "://") {
    fail(ErrorKind::Config, "reader endpoint has no host: " + endpoint);
  }
  return parsed;
}

// Cache files are written to a temp name then renamed so that concurrent
// readers only ever see complete entries.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  static std::atomic<uint64_t> counter{0};
  const auto tmp = path.string() + ".tmp." + std::to_string(::getpid()) + "." +
                   std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + tmp);
    out << content;
    if (!out.flush()) fail(ErrorKind::Io, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::Io, "cannot rename cache entry into " + path.string());
  }
}

std::string body_snippet(const std::string& body) {
  constexpr size_t kMax = 200;
  if (body.size() <= kMax) return body;
  return body.substr(0, kMax) + "...";
}

}  // namespace

struct HttpReader::Impl {
  ReaderConfig config;
  ParsedEndpoint endpoint;
  std::string api_key;

  Prediction fetch(const std::string& prompt);
  std::filesystem::path cache_path(const std::string& key) const {
    return std::filesystem::path(config.cache_dir) / (key + ".json");
  }
};

Prediction HttpReader::Impl::fetch(const std::string& prompt) {
  json body_json = {
      {"model", config.model},
      {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
      {"temperature", config.temperature},
      {"max_tokens", config.max_output_tokens},
  };
  const std::string body = body_json.dump();

  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  std::string last_failure = "no attempt made";
  const int attempts = 1 + std::max(0, config.retry_budget);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      const auto delay = std::chrono::milliseconds(
          static_cast<int64_t>(config.retry_backoff_ms) << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(endpoint.base);
    client.set_connection_timeout(config.timeout_s, 0);
    client.set_read_timeout(config.timeout_s, 0);
    client.set_write_timeout(config.timeout_s, 0);

    auto res = client.Post(endpoint.path_prefix + "/chat/completions", headers,
                           body, "application/json");
    if (!res) {
      last_failure = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status) + ": " +
                     body_snippet(res->body);
      continue;
    }
    if (res->status != 200) {
      fail(ErrorKind::Transport, "reader endpoint returned HTTP " +
                                     std::to_string(res->status) + ": " +
                                     body_snippet(res->body));
    }

    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::exception& e) {
      fail(ErrorKind::Protocol,
           std::string("unparseable endpoint response: ") + e.what());
    }
    if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty() ||
        !parsed["choices"][0].contains("message") ||
        !parsed["choices"][0]["message"].contains("content") ||
        !parsed["choices"][0]["message"]["content"].is_string()) {
      fail(ErrorKind::Protocol, "endpoint response missing choices[0].message.content: " +
                                    body_snippet(res->body));
    }

    Prediction pred;
    pred.output = parsed["choices"][0]["message"]["content"].get<std::string>();
    if (parsed.contains("usage") && parsed["usage"].contains("prompt_tokens") &&
        parsed["usage"]["prompt_tokens"].is_number_integer()) {
      pred.prompt_tokens = parsed["usage"]["prompt_tokens"].get<int64_t>();
      pred.token_provenance = TokenProvenance::Endpoint;
    } else {
      pred.prompt_tokens = static_cast<int64_t>(context::count_words(prompt));
      pred.token_provenance = TokenProvenance::Proxy;
    }
    return pred;
  }
  fail(ErrorKind::Transport, "reader request failed after " +
                                 std::to_string(attempts) +
                                 " attempts; last failure: " + last_failure);
}

HttpReader::HttpReader(ReaderConfig config) : impl_(new Impl) {
  impl_->endpoint = parse_endpoint(config.endpoint);
  if (config.model.empty()) {
    fail(ErrorKind::Config, "http reader requires a model name");
  }
  if (!config.api_key_env.empty()) {
    if (const char* key = std::getenv(config.api_key_env.c_str())) {
      impl_->api_key = key;
    }
  }
  if (!config.cache_dir.empty()) {
    std::filesystem::create_directories(config.cache_dir);
  }
  impl_->config = std::move(config);
}

HttpReader::~HttpReader() = default;

Prediction HttpReader::answer(const std::string& prompt) {
  const auto start = std::chrono::steady_clock::now();
  std::string key;
  if (!impl_->config.cache_dir.empty()) {
    json key_json = {{"model", impl_->config.model},
                     {"temperature", impl_->config.temperature},
                     {"max_tokens", impl_->config.max_output_tokens},
                     {"prompt", prompt}};
    key = sha256_hex(key_json.dump());
    std::ifstream in(impl_->cache_path(key), std::ios::binary);
    if (in) {
      std::string raw((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
      json entry = json::parse(raw, nullptr, /*allow_exceptions=*/false);
      if (entry.is_object() && entry.contains("output") &&
          entry["output"].is_string()) {
        Prediction pred;
        pred.output = entry["output"].get<std::string>();
        pred.prompt_tokens = entry.value("prompt_tokens", int64_t{0});
        pred.token_provenance =
            token_provenance_from_name(entry.value("token_provenance", "proxy"));
        pred.cache_hit = true;
        pred.latency_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
        return pred;
      }
      // A corrupt entry falls through to a fresh fetch that rewrites it.
    }
  }

  Prediction pred = impl_->fetch(prompt);
  pred.latency_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  if (!key.empty()) {
    json entry = {{"model", impl_->config.model},
                  {"temperature", impl_->config.temperature},
                  {"max_tokens", impl_->config.max_output_tokens},
                  {"output", pred.output},
                  {"prompt_tokens", pred.prompt_tokens},
                  {"token_provenance",
                   token_provenance_name(pred.token_provenance)}};
    write_file_atomic(impl_->cache_path(key), entry.dump());
  }
  return pred;
}

std::unique_ptr<Reader> make_reader(const std::string& kind,
                                    const ReaderConfig& config,
                                    const Corpus& corpus) {
  if (kind == "oracle") return std::make_unique<OracleReader>(corpus);
  if (kind == "http") return std::make_unique<HttpReader>(config);
  fail(ErrorKind::Config, "unknown reader kind: " + kind);
}

std::vector<Prediction> run_batch(const std::vector<context::BuiltContext>& contexts,
                                  const Corpus& corpus, Reader& reader,
                                  int max_concurrency) {
  std::vector<Prediction> out(contexts.size());
  auto run_one = [&](size_t i) {
    const auto& ctx = contexts[i];
    Prediction pred;
    try {
      if (auto* oracle = dynamic_cast<OracleReader*>(&reader)) {
        oracle->set_current(&corpus.question(ctx.question_id));
      }
      pred = reader.answer(ctx.prompt);
    } catch (const std::exception& e) {
      pred = Prediction{};
      pred.ok = false;
      pred.error = e.what();
    }
    pred.question_id = ctx.question_id;
    pred.condition = ctx.condition.name();
    out[i] = std::move(pred);
  };

  // The oracle reader carries per-item state, so it always runs sequentially.
  const bool parallel = max_concurrency > 1 &&
                        dynamic_cast<OracleReader*>(&reader) == nullptr;
  if (!parallel) {
    for (size_t i = 0; i < contexts.size(); ++i) run_one(i);
    return out;
  }

  std::atomic<size_t> next{0};
  const size_t workers =
      std::min<size_t>(static_cast<size_t>(max_concurrency), contexts.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < contexts.size();
           i = next.fetch_add(1)) {
        run_one(i);
      }
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace ragcomp::reader
