#include "http_util.hpp"

#include <thread>

#include <httplib.h>

#include "skbqa/error.hpp"

namespace skbqa::detail {

ParsedUrl parse_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint \"" + url + "\" lacks a scheme");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string post_with_retry(const HttpRequest& req) {
  auto target = parse_url(req.url);
  httplib::Client client(target.scheme_host_port);
  client.set_connection_timeout(req.timeout);
  client.set_read_timeout(req.timeout);
  client.set_write_timeout(req.timeout);
  httplib::Headers headers;
  if (!req.api_key.empty()) headers.emplace("Authorization", "Bearer " + req.api_key);

  std::string last_error;
  auto wait = req.backoff;
  for (int attempt = 0; attempt <= req.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(wait);
      wait *= 2;
    }
    auto res = client.Post(target.path, headers, req.body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    last_error = "HTTP " + std::to_string(res->status);
    if (res->status != 429 && res->status < 500) break;
  }
  throw TransportError("POST " + req.url + " failed after " + std::to_string(req.max_retries) +
                       " retries: " + last_error);
}

}  // namespace skbqa::detail
