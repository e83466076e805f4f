#pragma once
// Internal: JSON-over-HTTP POST with bounded exponential-backoff retries.

#include <chrono>
#include <string>

namespace skbqa::detail {

struct HttpRequest {
  std::string url;  // scheme://host[:port]/path
  std::string api_key;
  std::string body;
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::seconds timeout{60};
};

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

ParsedUrl parse_url(const std::string& url);

// Returns the response body of a 2xx reply. Connection failures, 429 and 5xx
// are retried max_retries times (waiting backoff, 2*backoff, ...); anything
// else, or exhaustion, throws TransportError.
std::string post_with_retry(const HttpRequest& req);

}  // namespace skbqa::detail
