#pragma once

#include "talkdep/common.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace talkdep {

enum class ChatRole { system, user, assistant };

std::string_view to_string(ChatRole role);
ChatRole chat_role_from_string(std::string_view s);

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

Json to_json(const ChatMessage& m);
ChatMessage chat_message_from_json(const Json& j);

struct CompletionParams {
  std::string model_id = "oracle";
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;

  Json to_json() const;
};

// A chat-completion provider. Implementations throw Error with code
// transport or timeout for retryable failures, backend_rejected or
// malformed_payload otherwise.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatMessage complete(const std::vector<ChatMessage>& messages,
                               const CompletionParams& params) = 0;
  // Scripted backends are deterministic and need no retry pacing.
  virtual bool scripted() const { return false; }
};

// Wraps a callable; handy for tests and manual stand-ins.
class FunctionBackend final : public Backend {
 public:
  using Fn = std::function<ChatMessage(const std::vector<ChatMessage>&, const CompletionParams&)>;
  explicit FunctionBackend(Fn fn, bool scripted = true) : fn_(std::move(fn)), scripted_(scripted) {}
  ChatMessage complete(const std::vector<ChatMessage>& messages,
                       const CompletionParams& params) override {
    return fn_(messages, params);
  }
  bool scripted() const override { return scripted_; }

 private:
  Fn fn_;
  bool scripted_;
};

bool is_retryable(ErrorCode code);

// JSONL audit trail: one {run_id, request, response|error} object per line.
class AuditLog {
 public:
  explicit AuditLog(std::filesystem::path path) : path_(std::move(path)) {}
  void record(std::string_view run_id, const std::vector<ChatMessage>& request,
              const CompletionParams& params, const ChatMessage* response,
              const Error* error, int attempt);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

struct GatewayConfig {
  int max_parallel = 4;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_factor = 2.0;
};

// Shareable front door to a backend: bounded parallelism, retry with
// exponential backoff on retryable errors, and audit logging.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, GatewayConfig config = {},
          std::shared_ptr<AuditLog> audit = nullptr);

  // Throws Error(precondition) for an empty message list or a user/assistant
  // message with empty content.
  ChatMessage complete(const std::vector<ChatMessage>& messages, const CompletionParams& params,
                       std::string_view run_id = {});

  const GatewayConfig& config() const { return config_; }
  Backend& backend() { return *backend_; }

  // Observed high-water mark of concurrent backend calls.
  int peak_in_flight() const;

  // Replaceable for tests.
  std::function<void(std::chrono::milliseconds)> sleep;

 private:
  std::shared_ptr<Backend> backend_;
  GatewayConfig config_;
  std::shared_ptr<AuditLog> audit_;
  std::counting_semaphore<1024> slots_;
  mutable std::mutex stats_mutex_;
  int in_flight_ = 0;
  int peak_ = 0;
};

// Speaks the chat-completions JSON protocol: POST {base}/chat/completions.
struct HttpBackendConfig {
  std::string base_url = "http://localhost:11434/v1";
  std::string api_token;
  int timeout_seconds = 120;
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ChatMessage complete(const std::vector<ChatMessage>& messages,
                       const CompletionParams& params) override;

  static Json build_request(const std::vector<ChatMessage>& messages,
                            const CompletionParams& params);
  // Throws Error(malformed_payload) when choices[0].message is absent.
  static ChatMessage parse_response(std::string_view body);

 private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace talkdep
