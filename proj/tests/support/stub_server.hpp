#pragma once

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <atomic>
#include <functional>
#include <string>
#include <thread>

#include <json.hpp>

#include "ragcomp/rng.hpp"

namespace testsupport {

// Local OpenAI-compatible chat-completions endpoint with a deterministic
// reply function and failure injection, for reader and pipeline tests.
class StubServer {
 public:
  using Reply = std::function<std::string(const std::string& prompt)>;

  // Deterministic default: a short tag derived from the prompt bytes.
  static Reply default_reply() {
    return [](const std::string& prompt) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "stub-%016llx",
                    static_cast<unsigned long long>(
                        ragcomp::stable_hash({prompt})));
      return std::string(buf);
    };
  }

  explicit StubServer(Reply reply = default_reply())
      : reply_(std::move(reply)) {
    server_.Post(
        "/v1/chat/completions",
        [this](const httplib::Request& req, httplib::Response& res) {
          requests_.fetch_add(1);
          int remaining = fail_remaining_.load();
          while (remaining > 0 &&
                 !fail_remaining_.compare_exchange_weak(remaining,
                                                        remaining - 1)) {
          }
          if (remaining > 0) {
            res.status = fail_status_;
            res.set_content("injected failure", "text/plain");
            return;
          }
          const auto body =
              nlohmann::json::parse(req.body, nullptr, /*allow_exceptions=*/false);
          std::string prompt;
          if (body.is_object() && body.contains("messages") &&
              body["messages"].is_array() && !body["messages"].empty()) {
            prompt = body["messages"][0].value("content", "");
          }
          if (omit_usage_.load()) {
            nlohmann::json out{
                {"choices",
                 nlohmann::json::array(
                     {nlohmann::json{{"index", 0},
                                     {"message",
                                      {{"role", "assistant"},
                                       {"content", reply_(prompt)}}},
                                     {"finish_reason", "stop"}}})}};
            res.set_content(out.dump(), "application/json");
            return;
          }
          const long prompt_tokens = count_words(prompt);
          nlohmann::json out{
              {"id", "stub-completion"},
              {"object", "chat.completion"},
              {"choices",
               nlohmann::json::array(
                   {nlohmann::json{{"index", 0},
                                   {"message",
                                    {{"role", "assistant"},
                                     {"content", reply_(prompt)}}},
                                   {"finish_reason", "stop"}}})},
              {"usage",
               {{"prompt_tokens", prompt_tokens},
                {"completion_tokens", 3},
                {"total_tokens", prompt_tokens + 3}}}};
          res.set_content(out.dump(), "application/json");
        });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
  }
  int requests() const { return requests_.load(); }

  // The next n requests answer with the given HTTP status.
  void fail_next(int n, int status) {
    fail_status_ = status;
    fail_remaining_.store(n);
  }
  // Drop the usage object from replies (forces proxy token counting).
  void omit_usage(bool on) { omit_usage_.store(on); }

 private:
  static long count_words(const std::string& text) {
    long n = 0;
    bool in_word = false;
    for (char c : text) {
      const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
                      c == '\f' || c == '\v';
      if (ws) {
        in_word = false;
      } else if (!in_word) {
        in_word = true;
        ++n;
      }
    }
    return n;
  }

  Reply reply_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> requests_{0};
  std::atomic<int> fail_remaining_{0};
  std::atomic<int> fail_status_{500};
  std::atomic<bool> omit_usage_{false};
};

}  // namespace testsupport
