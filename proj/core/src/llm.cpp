#include "skbqa/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "skbqa/error.hpp"

namespace skbqa {

using nlohmann::json;

std::string_view to_string(ChatRole r) {
  switch (r) {
    case ChatRole::system:
      return "system";
    case ChatRole::user:
      return "user";
    case ChatRole::assistant:
      return "assistant";
  }
  return "user";
}

std::string_view to_string(AgentRole r) {
  switch (r) {
    case AgentRole::router:
      return "router";
    case AgentRole::validator:
      return "validator";
    case AgentRole::commenter:
      return "commenter";
  }
  return "router";
}

void Transcript::add(ChatRole role, std::string content) {
  if (role != ChatRole::system && content.empty()) {
    throw InvalidArgument("transcript " + tag() + ": empty " + std::string(to_string(role)) +
                          " message");
  }
  if (role == ChatRole::assistant && !messages_.empty() &&
      messages_.back().role == ChatRole::assistant) {
    throw InvalidArgument("transcript " + tag() + ": two consecutive assistant messages");
  }
  messages_.push_back({role, std::move(content)});
}

std::string Transcript::tag() const {
  return question_id_ + "/" + std::string(to_string(agent_));
}

std::string_view Transcript::last_user() const {
  for (auto it = messages_.rbegin(); it != messages_.rend(); ++it) {
    if (it->role == ChatRole::user) return it->content;
  }
  return {};
}

std::size_t Transcript::assistant_turns() const {
  return static_cast<std::size_t>(std::count_if(messages_.begin(), messages_.end(), [](const auto& m) {
    return m.role == ChatRole::assistant;
  }));
}

std::string ChatBackend::complete(const Transcript& transcript, const CompletionParams& params) {
  if (transcript.empty()) throw InvalidArgument("complete: empty transcript");
  calls_.fetch_add(1);
  return do_complete(transcript, params);
}

// ---------------------------------------------------------------------------
// Scripted backend

std::vector<ScriptEntry> load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open script " + path.string());
  std::vector<ScriptEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      ScriptEntry e;
      const auto& m = j.at("match");
      if (m.is_string()) {
        e.substring = m.get<std::string>();
      } else if (m.is_object() && m.contains("ordinal")) {
        e.ordinal = m["ordinal"].get<int>();
        if (*e.ordinal < 1) throw ParseError(path.string(), line_no, "ordinal must be >= 1");
      } else {
        throw ParseError(path.string(), line_no, "\"match\" must be a string or {\"ordinal\": n}");
      }
      e.response = j.at("response").get<std::string>();
      out.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

void write_script(const std::vector<ScriptEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LookupError("cannot write " + path.string());
  for (const auto& e : entries) {
    json j;
    if (e.substring) {
      j["match"] = *e.substring;
    } else {
      j["match"] = {{"ordinal", e.ordinal.value_or(1)}};
    }
    j["response"] = e.response;
    out << j.dump() << '\n';
  }
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries) {
  std::map<std::string, std::string> by_text;
  for (auto& e : entries) {
    if (e.substring) {
      auto [it, inserted] = by_text.emplace(*e.substring, e.response);
      if (!inserted && it->second != e.response) {
        throw ScriptError("script has conflicting responses for match \"" + *e.substring + "\"");
      }
    } else if (e.ordinal) {
      auto [it, inserted] = ordinal_.emplace(*e.ordinal, e.response);
      if (!inserted && it->second != e.response) {
        throw ScriptError("script has conflicting responses for ordinal " +
                          std::to_string(*e.ordinal));
      }
    } else {
      throw ScriptError("script entry without a matcher");
    }
  }
  substring_.assign(by_text.begin(), by_text.end());
  std::stable_sort(substring_.begin(), substring_.end(), [](const auto& a, const auto& b) {
    return a.first.size() > b.first.size();
  });
}

std::string ScriptedBackend::do_complete(const Transcript& transcript, const CompletionParams&) {
  std::string_view prompt = transcript.last_user();
  const std::pair<std::string, std::string>* best = nullptr;
  for (const auto& entry : substring_) {
    if (best != nullptr && entry.first.size() < best->first.size()) break;
    if (prompt.find(entry.first) == std::string_view::npos) continue;
    if (best != nullptr && best->second != entry.second) {
      throw ScriptError("ambiguous script: \"" + best->first + "\" and \"" + entry.first +
                        "\" both match with different responses (" + transcript.tag() + ")");
    }
    best = &entry;
  }
  if (best != nullptr) return best->second;
  auto ord = static_cast<int>(transcript.assistant_turns()) + 1;
  if (auto it = ordinal_.find(ord); it != ordinal_.end()) return it->second;
  std::string head(prompt.substr(0, 160));
  throw ScriptError("script miss for " + transcript.tag() + " (call " + std::to_string(ord) +
                    "): \"" + head + "\"");
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpChatOptions HttpChatOptions::from_env() {
  HttpChatOptions o;
  const char* ep = std::getenv("LLM_ENDPOINT");
  if (ep == nullptr || *ep == '\0') throw ConfigError("LLM_ENDPOINT is not set");
  o.endpoint = ep;
  if (const char* m = std::getenv("LLM_MODEL")) o.model = m;
  if (const char* k = std::getenv("LLM_API_KEY")) o.api_key = k;
  return o;
}

HttpChatBackend::HttpChatBackend(HttpChatOptions opts)
    : opts_(std::move(opts)),
      in_flight_(std::clamp<std::ptrdiff_t>(opts_.max_in_flight, 1, 1024)) {}

std::string HttpChatBackend::request_body(const std::string& model, const Transcript& transcript,
                                          const CompletionParams& params) {
  json messages = json::array();
  for (const auto& m : transcript.messages()) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body = {{"model", model},
               {"messages", messages},
               {"temperature", params.temperature},
               {"max_tokens", params.max_tokens}};
  return body.dump();
}

std::string HttpChatBackend::parse_response(const std::string& body) {
  try {
    auto j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat completion response: ") + e.what());
  }
}

std::string HttpChatBackend::do_complete(const Transcript& transcript,
                                         const CompletionParams& params) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};
  detail::HttpRequest req{opts_.endpoint, opts_.api_key,
                          request_body(opts_.model, transcript, params), opts_.max_retries,
                          opts_.backoff, opts_.timeout};
  return parse_response(detail::post_with_retry(req));
}

// ---------------------------------------------------------------------------
// Prompt templates

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars) {
  static constexpr std::string_view open = "<<<{";
  static constexpr std::string_view close = "}>>>";
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (true) {
    auto start = text.find(open, pos);
    if (start == std::string_view::npos) break;
    auto end = text.find(close, start + open.size());
    if (end == std::string_view::npos) break;
    std::string name(text.substr(start + open.size(), end - start - open.size()));
    auto it = vars.find(name);
    if (it == vars.end()) throw InvalidArgument("unbound placeholder \"" + name + "\"");
    out.append(text.substr(pos, start - pos));
    out.append(it->second);
    pos = end + close.size();
  }
  out.append(text.substr(pos));
  return out;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw LookupError("prompt directory " + dir.string() + " does not exist");
  }
  PromptLibrary lib;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    lib.add(entry.path().stem().string(), ss.str());
  }
  return lib;
}

void PromptLibrary::add(std::string name, std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  templates_[std::move(name)] = std::move(text);
}

bool PromptLibrary::contains(std::string_view name) const { return templates_.contains(name); }

const std::string& PromptLibrary::text(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw LookupError("missing prompt template \"" + std::string(name) + "\"");
  return it->second;
}

std::string PromptLibrary::render(std::string_view name,
                                  const std::map<std::string, std::string>& vars) const {
  return render_template(text(name), vars);
}

}  // namespace skbqa
