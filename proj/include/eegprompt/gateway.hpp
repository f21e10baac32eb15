#pragma once

#include "eegprompt/prompt.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace eegprompt {

struct GatewayConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o-2024-05-13";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  int max_tokens = 512;
  double timeout_s = 60.0;
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  double backoff_base_s = 2.0;
  // Send role-play text as a system message instead of packing every part
  // into one user message.
  bool system_message = false;

  void validate() const;
};

struct Verdict {
  std::optional<int> label;  // nullopt is Invalid
  std::string raw_text;
  std::string explanation;
  std::string error;  // transport failure reason, empty otherwise
  double latency_ms = 0.0;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
  int attempts = 0;

  bool valid() const { return label.has_value(); }
};

// Total and deterministic; Invalid is a value, never an error.
Verdict parse_label(const std::string& raw, const TaskSpec& task);

struct GatewayRequest {
  std::string sample_id;
  const AssembledPrompt* prompt = nullptr;
  const TaskSpec* task = nullptr;
  // Known to the harness; only mock gateways may look at it.
  int true_label = -1;
};

struct GatewayReply {
  std::string text;
  std::optional<int> prompt_tokens;
  std::optional<int> completion_tokens;
  int attempts = 1;
};

inline GatewayReply text_reply(std::string text) {
  GatewayReply r;
  r.text = std::move(text);
  return r;
}

class Gateway {
 public:
  virtual ~Gateway() = default;
  // Throws TransportError for sample-level failures and ConfigError for
  // failures that should abort the run.
  virtual GatewayReply complete(const GatewayRequest& request) = 0;
  // True when replies depend on call order, which forces one worker.
  virtual bool sequential() const { return false; }
  virtual std::size_t network_calls() const { return 0; }
};

// complete() + parse_label(), timing the call. Transport failures become an
// Invalid verdict carrying the reason.
Verdict query(Gateway& gateway, const GatewayRequest& request);

// ---------------------------------------------------------------------------
// HTTP transport

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Throws TransportError on connection failure or timeout.
  virtual HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                            double timeout_s) = 0;
};

// cpp-httplib client; https endpoints use OpenSSL.
std::unique_ptr<HttpTransport> make_http_transport();

// Writes one JSON object per line; safe to share between threads.
class JsonlLog {
 public:
  explicit JsonlLog(const std::filesystem::path& path);
  void write(const nlohmann::json& record);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

// Blocks while `limit` holders are active.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit) : limit_(limit) {}
  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t active_ = 0;
};

inline constexpr std::size_t kMaxAttachmentBytes = 20u * 1024u * 1024u;

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

// OpenAI-compatible chat-completion body. Each prompt part becomes one
// content part, in order.
nlohmann::json build_chat_request(const AssembledPrompt& prompt, const GatewayConfig& config);
// First choice's message text and usage counts.
GatewayReply parse_chat_response(const std::string& body);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class ChatCompletionGateway : public Gateway {
 public:
  // The API key is read from config.api_key_env; a missing variable is a
  // ConfigError.
  ChatCompletionGateway(GatewayConfig config, std::unique_ptr<HttpTransport> transport,
                        std::shared_ptr<JsonlLog> log = nullptr, Sleeper sleeper = {});

  GatewayReply complete(const GatewayRequest& request) override;
  std::size_t network_calls() const override;

  const GatewayConfig& config() const { return config_; }

 private:
  GatewayConfig config_;
  std::unique_ptr<HttpTransport> transport_;
  std::shared_ptr<JsonlLog> log_;
  Sleeper sleeper_;
  std::string api_key_;
  InFlightLimiter limiter_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
  std::uint64_t jitter_state_;
};

// ---------------------------------------------------------------------------
// Mock gateways

// Answers the true label.
class OracleGateway : public Gateway {
 public:
  GatewayReply complete(const GatewayRequest& request) override;
};

// Seeded uniform labels. Each reply is a pure function of the seed, the
// sample id and the prompt bytes, so results do not depend on call order.
class UniformGateway : public Gateway {
 public:
  explicit UniformGateway(std::uint64_t seed) : seed_(seed) {}
  GatewayReply complete(const GatewayRequest& request) override;

 private:
  std::uint64_t seed_;
};

// Replays a fixed list of replies in call order; running past the end is an
// error.
class ScriptedGateway : public Gateway {
 public:
  explicit ScriptedGateway(std::vector<std::string> replies);
  GatewayReply complete(const GatewayRequest& request) override;
  bool sequential() const override { return true; }

 private:
  std::vector<std::string> replies_;
  std::mutex mutex_;
  std::size_t next_ = 0;
};

// Delegates to a callable; for test doubles that inspect the prompt.
class FunctionGateway : public Gateway {
 public:
  using Fn = std::function<std::string(const GatewayRequest&)>;
  explicit FunctionGateway(Fn fn) : fn_(std::move(fn)) {}
  GatewayReply complete(const GatewayRequest& request) override { return text_reply(fn_(request)); }

 private:
  Fn fn_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace eegprompt
