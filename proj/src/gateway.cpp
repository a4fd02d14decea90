#include "talkdep/gateway.hpp"

#include "talkdep/store.hpp"

#include <httplib.h>

#include <cmath>
#include <thread>

namespace talkdep {

std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "user";
}

ChatRole chat_role_from_string(std::string_view s) {
  if (s == "system") return ChatRole::system;
  if (s == "user") return ChatRole::user;
  if (s == "assistant") return ChatRole::assistant;
  throw Error(ErrorCode::parse_error, "unknown chat role '" + std::string(s) + "'");
}

Json to_json(const ChatMessage& m) { return Json{{"role", to_string(m.role)}, {"content", m.content}}; }

ChatMessage chat_message_from_json(const Json& j) {
  try {
    return {chat_role_from_string(j.at("role").get<std::string>()), j.at("content").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("bad chat message: ") + e.what());
  }
}

Json CompletionParams::to_json() const {
  Json j{{"model_id", model_id}, {"temperature", temperature}, {"max_tokens", max_tokens}};
  j["seed"] = seed ? Json(*seed) : Json(nullptr);
  return j;
}

bool is_retryable(ErrorCode code) { return code == ErrorCode::transport || code == ErrorCode::timeout; }

void AuditLog::record(std::string_view run_id, const std::vector<ChatMessage>& request,
                      const CompletionParams& params, const ChatMessage* response,
                      const Error* error, int attempt) {
  Json req = HttpBackend::build_request(request, params);
  Json line{{"run_id", run_id}, {"attempt", attempt}, {"request", req}};
  if (response) line["response"] = to_json(*response);
  if (error) line["error"] = {{"code", to_string(error->code())}, {"message", error->what()}};
  std::lock_guard lock(mutex_);
  append_line(path_, line.dump());
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayConfig config, std::shared_ptr<AuditLog> audit)
    : sleep([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      backend_(std::move(backend)),
      config_(config),
      audit_(std::move(audit)),
      slots_(std::clamp(config.max_parallel, 1, 1024)) {
  if (!backend_) throw Error(ErrorCode::invalid_argument, "gateway needs a backend");
  if (config_.max_attempts < 1) throw Error(ErrorCode::invalid_argument, "max_attempts must be >= 1");
}

int Gateway::peak_in_flight() const {
  std::lock_guard lock(stats_mutex_);
  return peak_;
}

ChatMessage Gateway::complete(const std::vector<ChatMessage>& messages, const CompletionParams& params,
                              std::string_view run_id) {
  if (messages.empty()) throw Error(ErrorCode::precondition, "completion request has no messages");
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const auto& m = messages[i];
    if (m.role == ChatRole::system && i != 0) {
      throw Error(ErrorCode::precondition, "only the first message may be a system message");
    }
    if (m.role != ChatRole::system && m.content.empty()) {
      throw Error(ErrorCode::precondition, "user/assistant message with empty content");
    }
  }
  if (params.temperature < 0) throw Error(ErrorCode::precondition, "temperature must be >= 0");
  if (params.max_tokens <= 0) throw Error(ErrorCode::precondition, "max_tokens must be positive");

  slots_.acquire();
  struct Release {
    Gateway* g;
    ~Release() {
      {
        std::lock_guard lock(g->stats_mutex_);
        --g->in_flight_;
      }
      g->slots_.release();
    }
  } release{this};
  {
    std::lock_guard lock(stats_mutex_);
    peak_ = std::max(peak_, ++in_flight_);
  }

  auto backoff = config_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      ChatMessage reply;
      try {
        reply = backend_->complete(messages, params);
      } catch (const Error&) {
        throw;
      } catch (const std::exception& e) {
        throw Error(ErrorCode::backend_rejected, e.what());
      }
      if (reply.role != ChatRole::assistant || reply.content.empty()) {
        throw Error(ErrorCode::malformed_payload, "backend returned an empty or non-assistant message");
      }
      if (audit_) audit_->record(run_id, messages, params, &reply, nullptr, attempt);
      return reply;
    } catch (const Error& e) {
      if (audit_) audit_->record(run_id, messages, params, nullptr, &e, attempt);
      if (!is_retryable(e.code()) || attempt >= config_.max_attempts) throw;
      if (!backend_->scripted()) sleep(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(std::llround(backoff.count() * config_.backoff_factor)));
    }
  }
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const std::string& url = config_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "base URL needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

Json HttpBackend::build_request(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
  Json msgs = Json::array();
  for (const auto& m : messages) msgs.push_back(to_json(m));
  Json req{{"model", params.model_id},
           {"messages", msgs},
           {"temperature", params.temperature},
           {"max_tokens", params.max_tokens}};
  if (params.seed) req["seed"] = *params.seed;
  return req;
}

ChatMessage HttpBackend::parse_response(std::string_view body) {
  try {
    const Json j = Json::parse(body);
    const auto& msg = j.at("choices").at(0).at("message");
    ChatMessage out;
    out.role = msg.contains("role") ? chat_role_from_string(msg.at("role").get<std::string>())
                                    : ChatRole::assistant;
    out.content = msg.at("content").get<std::string>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_payload, std::string("unexpected completion payload: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::malformed_payload, e.what());
  }
}

ChatMessage HttpBackend::complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(std::chrono::seconds(config_.timeout_seconds));
  client.set_read_timeout(std::chrono::seconds(config_.timeout_seconds));
  client.set_write_timeout(std::chrono::seconds(config_.timeout_seconds));
  httplib::Headers headers;
  if (!config_.api_token.empty()) headers.emplace("Authorization", "Bearer " + config_.api_token);

  const auto res = client.Post(path_prefix_ + "/chat/completions", headers,
                               build_request(messages, params).dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const ErrorCode code = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout
                               ? ErrorCode::timeout
                               : ErrorCode::transport;
    throw Error(code, "request to " + scheme_host_port_ + " failed: " + httplib::to_string(err));
  }
  if (res->status == 429 || res->status >= 500) {
    throw Error(ErrorCode::transport, "backend returned HTTP " + std::to_string(res->status));
  }
  if (res->status >= 400) {
    throw Error(ErrorCode::backend_rejected,
                "backend rejected request (HTTP " + std::to_string(res->status) + "): " + res->body);
  }
  return parse_response(res->body);
}

}  // namespace talkdep
