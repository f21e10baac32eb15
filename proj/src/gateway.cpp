#include "eegprompt/gateway.hpp"

#include "eegprompt/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <thread>

namespace eegprompt {

void GatewayConfig::validate() const {
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (!(timeout_s > 0.0)) throw ConfigError("timeout must be positive");
  if (endpoint.empty()) throw ConfigError("endpoint URL is empty");
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string trim(const std::string& s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  auto b = std::find_if(s.begin(), s.end(), not_space);
  auto e = std::find_if(s.rbegin(), s.rend(), not_space).base();
  return b < e ? std::string(b, e) : std::string();
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string without(const std::string& raw, std::size_t pos, std::size_t len) {
  return trim(raw.substr(0, pos) + raw.substr(pos + len));
}

std::optional<int> in_range(const std::string& digits, const TaskSpec& task) {
  if (digits.empty() || digits.size() > 6) return std::nullopt;
  const int v = std::stoi(digits);
  if (v >= 0 && static_cast<std::size_t>(v) < task.size()) return v;
  return std::nullopt;
}

}  // namespace

Verdict parse_label(const std::string& raw, const TaskSpec& task) {
  Verdict v;
  v.raw_text = raw;
  const std::string t = trim(raw);

  // 1. bare integer
  if (!t.empty() && std::all_of(t.begin(), t.end(), is_digit)) {
    if (auto label = in_range(t, task)) {
      v.label = label;
      return v;
    }
  }

  // 2. first standalone integer token in range; digits attached to letters
  // or forming part of a decimal number do not count.
  for (std::size_t i = 0; i < raw.size();) {
    if (!is_digit(raw[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < raw.size() && is_digit(raw[j])) ++j;
    const bool left_ok = i == 0 || (!is_word_char(raw[i - 1]) && !(raw[i - 1] == '.' && i >= 2 && is_digit(raw[i - 2])));
    const bool right_ok =
        j == raw.size() || (!is_word_char(raw[j]) && !(raw[j] == '.' && j + 1 < raw.size() && is_digit(raw[j + 1])));
    if (left_ok && right_ok) {
      if (auto label = in_range(raw.substr(i, j - i), task)) {
        v.label = label;
        v.explanation = without(raw, i, j - i);
        return v;
      }
    }
    i = j;
  }

  // 3. exactly one class name as a whole word, case-insensitive
  const std::string hay = lower(raw);
  std::optional<int> found;
  std::size_t found_pos = 0, found_len = 0;
  for (const auto& c : task.classes) {
    const std::string needle = lower(c.name);
    if (needle.empty()) continue;
    for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
      const bool left = pos == 0 || !is_word_char(hay[pos - 1]);
      const bool right = pos + needle.size() == hay.size() || !is_word_char(hay[pos + needle.size()]);
      if (!left || !right) continue;
      if (found && *found != c.index) return v;  // ambiguous: Invalid
      found = c.index;
      found_pos = pos;
      found_len = needle.size();
      break;
    }
  }
  if (found) {
    v.label = found;
    v.explanation = without(raw, found_pos, found_len);
    return v;
  }
  v.explanation = t;
  return v;
}

Verdict query(Gateway& gateway, const GatewayRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    GatewayReply reply = gateway.complete(request);
    v = parse_label(reply.text, *request.task);
    v.prompt_tokens = reply.prompt_tokens;
    v.completion_tokens = reply.completion_tokens;
    v.attempts = reply.attempts;
  } catch (const TransportError& e) {
    v = Verdict{};
    v.error = e.what();
  }
  v.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return v;
}

JsonlLog::JsonlLog(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::app) {
  if (!out_) throw IoError("cannot open log " + path.string());
}

void JsonlLog::write(const nlohmann::json& record) {
  const std::string line = record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  out_.flush();
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return active_ < limit_; });
  ++active_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --active_;
  }
  cv_.notify_one();
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

nlohmann::json build_chat_request(const AssembledPrompt& prompt, const GatewayConfig& config) {
  using nlohmann::json;
  json system_content = json::array();
  json user_content = json::array();
  for (const auto& part : prompt.parts) {
    json& target = config.system_message && part.section == Section::RolePlay ? system_content : user_content;
    if (part.kind == PartKind::Text) {
      target.push_back({{"type", "text"}, {"text", part.text}});
    } else {
      std::string encoded = base64_encode(part.image);
      if (encoded.size() > kMaxAttachmentBytes)
        throw TransportError("image attachment is " + std::to_string(encoded.size()) +
                             " bytes after base64 encoding; the limit is 20 MB");
      target.push_back({{"type", "image_url"},
                        {"image_url", {{"url", "data:" + part.mime_type + ";base64," + std::move(encoded)}}}});
    }
  }
  json messages = json::array();
  if (!system_content.empty()) messages.push_back({{"role", "system"}, {"content", system_content}});
  messages.push_back({{"role", "user"}, {"content", user_content}});
  return {{"model", config.model},
          {"messages", messages},
          {"temperature", config.temperature},
          {"max_tokens", config.max_tokens}};
}

GatewayReply parse_chat_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed completion response: ") + e.what());
  }
  GatewayReply reply;
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) {
      reply.text = content.get<std::string>();
    } else if (content.is_array()) {
      for (const auto& p : content)
        if (p.value("type", "") == "text") reply.text += p.value("text", "");
    } else if (!content.is_null()) {
      throw TransportError("completion content has an unexpected type");
    }
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("completion response lacks choices[0].message: ") + e.what());
  }
  if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
    if (it->contains("prompt_tokens")) reply.prompt_tokens = it->at("prompt_tokens").get<int>();
    if (it->contains("completion_tokens")) reply.completion_tokens = it->at("completion_tokens").get<int>();
  }
  return reply;
}

ChatCompletionGateway::ChatCompletionGateway(GatewayConfig config, std::unique_ptr<HttpTransport> transport,
                                             std::shared_ptr<JsonlLog> log, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      log_(std::move(log)),
      sleeper_(std::move(sleeper)),
      limiter_(config_.max_in_flight),
      jitter_state_(0x5eed) {
  config_.validate();
  if (!transport_) throw ConfigError("no HTTP transport configured");
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (!key || !*key) throw ConfigError("environment variable " + config_.api_key_env + " holding the API key is not set");
  api_key_ = key;
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::size_t ChatCompletionGateway::network_calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

GatewayReply ChatCompletionGateway::complete(const GatewayRequest& request) {
  const nlohmann::json body_json = build_chat_request(*request.prompt, config_);
  const std::string body = body_json.dump();
  const HttpHeaders headers = {{"Authorization", "Bearer " + api_key_}, {"api-key", api_key_}};
  const std::uint64_t checksum = request.prompt->checksum();

  std::string last_failure;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    HttpResponse response;
    bool transport_ok = true;
    limiter_.acquire();
    {
      std::lock_guard lock(mutex_);
      ++calls_;
    }
    try {
      response = transport_->post(config_.endpoint, headers, body, config_.timeout_s);
    } catch (const TransportError& e) {
      transport_ok = false;
      last_failure = e.what();
    }
    limiter_.release();

    if (log_) {
      nlohmann::json record = {{"sample_id", request.sample_id},
                               {"attempt", attempt},
                               {"prompt_checksum", checksum},
                               {"request", body_json}};
      if (transport_ok)
        record["response"] = {{"status", response.status}, {"body", response.body}};
      else
        record["transport_error"] = last_failure;
      log_->write(record);
    }

    if (transport_ok) {
      if (response.status == 200) {
        GatewayReply reply = parse_chat_response(response.body);
        reply.attempts = attempt;
        return reply;
      }
      if (response.status == 401 || response.status == 403)
        throw ConfigError("endpoint rejected the API key (HTTP " + std::to_string(response.status) + ")");
      last_failure = "HTTP " + std::to_string(response.status);
      const bool retryable = response.status == 429 || response.status >= 500;
      if (!retryable) throw TransportError(last_failure + ": " + response.body.substr(0, 200));
    }

    if (attempt < config_.max_attempts) {
      std::uint64_t jitter_bits;
      {
        std::lock_guard lock(mutex_);
        jitter_state_ = splitmix64(jitter_state_);
        jitter_bits = jitter_state_;
      }
      const double jitter = 1.0 + 0.25 * static_cast<double>(jitter_bits >> 11) / 9007199254740992.0;
      const double delay_s = config_.backoff_base_s * static_cast<double>(1u << (attempt - 1)) * jitter;
      sleeper_(std::chrono::milliseconds(static_cast<long long>(delay_s * 1000.0)));
    }
  }
  throw TransportError("request failed after " + std::to_string(config_.max_attempts) + " attempts: " + last_failure);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

GatewayReply OracleGateway::complete(const GatewayRequest& request) { return text_reply(std::to_string(request.true_label)); }

GatewayReply UniformGateway::complete(const GatewayRequest& request) {
  std::uint64_t h = splitmix64(seed_);
  h = fnv1a64(request.sample_id.data(), request.sample_id.size(), h);
  h = splitmix64(h ^ request.prompt->checksum());
  return text_reply(std::to_string(h % request.task->size()));
}

ScriptedGateway::ScriptedGateway(std::vector<std::string> replies) : replies_(std::move(replies)) {
  if (replies_.empty()) throw ParameterError("scripted gateway needs at least one reply");
}

GatewayReply ScriptedGateway::complete(const GatewayRequest&) {
  std::lock_guard lock(mutex_);
  if (next_ >= replies_.size())
    throw Error("scripted gateway exhausted after " + std::to_string(replies_.size()) + " replies");
  return text_reply(replies_[next_++]);
}

}  // namespace eegprompt
