#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "eegprompt/error.hpp"
#include "eegprompt/gateway.hpp"

#include <cmath>

namespace eegprompt {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint '" + url + "' lacks a scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                    double timeout_s) override {
    const SplitUrl parts = split_url(url);
    httplib::Client client(parts.origin);
    const auto sec = static_cast<time_t>(timeout_s);
    const auto usec = static_cast<time_t>((timeout_s - std::floor(timeout_s)) * 1e6);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto result = client.Post(parts.path, h, body, "application/json");
    if (!result) throw TransportError("HTTP request to " + parts.origin + " failed: " + httplib::to_string(result.error()));
    return {result->status, result->body};
  }
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport() { return std::make_unique<HttplibTransport>(); }

}  // namespace eegprompt
