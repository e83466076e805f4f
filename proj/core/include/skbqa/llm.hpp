#pragma once
// Chat LLM seam: transcripts, prompt templates and two backends (HTTP chat
// completions for real runs, a scripted replay backend for tests).

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace skbqa {

enum class ChatRole { system, user, assistant };
enum class AgentRole { router, validator, commenter };

std::string_view to_string(ChatRole r);
std::string_view to_string(AgentRole r);

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;
};

class Transcript {
 public:
  Transcript(std::string question_id, AgentRole agent)
      : question_id_(std::move(question_id)), agent_(agent) {}

  // Throws InvalidArgument on empty user/assistant content or on two
  // consecutive assistant messages.
  void add(ChatRole role, std::string content);
  void add_user(std::string content) { add(ChatRole::user, std::move(content)); }
  void add_assistant(std::string content) { add(ChatRole::assistant, std::move(content)); }

  const std::vector<ChatMessage>& messages() const { return messages_; }
  bool empty() const { return messages_.empty(); }
  const std::string& question_id() const { return question_id_; }
  AgentRole agent() const { return agent_; }
  std::string tag() const;

  // Content of the last user message; empty if there is none.
  std::string_view last_user() const;
  std::size_t assistant_turns() const;

 private:
  std::string question_id_;
  AgentRole agent_;
  std::vector<ChatMessage> messages_;
};

struct CompletionParams {
  double temperature = 0.0;
  int max_tokens = 512;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  // Counts the call, then delegates. The caller appends the reply.
  std::string complete(const Transcript& transcript, const CompletionParams& params = {});

  std::uint64_t calls() const { return calls_.load(); }

 protected:
  virtual std::string do_complete(const Transcript& transcript, const CompletionParams& params) = 0;

 private:
  std::atomic<std::uint64_t> calls_{0};
};

// Scripted responses keyed on the last user message.
//
// A substring entry matches when its text occurs in the last user message;
// among matching substring entries the longest wins, and two different
// responses at the same length are an ambiguity error. An ordinal entry
// matches the n-th completion (1-based) of a transcript and is consulted only
// when no substring entry matches.
struct ScriptEntry {
  std::optional<std::string> substring;
  std::optional<int> ordinal;
  std::string response;
};

std::vector<ScriptEntry> load_script(const std::filesystem::path& path);
void write_script(const std::vector<ScriptEntry>& entries, const std::filesystem::path& path);

class ScriptedBackend final : public ChatBackend {
 public:
  // Throws ScriptError when two entries share a matcher but differ in
  // response. Exact duplicates are folded.
  explicit ScriptedBackend(std::vector<ScriptEntry> entries);

  std::size_t size() const { return substring_.size() + ordinal_.size(); }

 protected:
  std::string do_complete(const Transcript& transcript, const CompletionParams& params) override;

 private:
  std::vector<std::pair<std::string, std::string>> substring_;  // longest first
  std::map<int, std::string> ordinal_;
};

struct HttpChatOptions {
  std::string endpoint;  // full URL of a chat-completions route
  std::string model;
  std::string api_key;
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::seconds timeout{120};
  std::ptrdiff_t max_in_flight = 8;

  // LLM_ENDPOINT / LLM_MODEL / LLM_API_KEY; throws ConfigError if the
  // endpoint is unset.
  static HttpChatOptions from_env();
};

// POST {"model", "messages": [{"role","content"}...], "temperature",
// "max_tokens"}; reads choices[0].message.content.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpChatOptions opts);

  static std::string request_body(const std::string& model, const Transcript& transcript,
                                  const CompletionParams& params);
  static std::string parse_response(const std::string& body);

 protected:
  std::string do_complete(const Transcript& transcript, const CompletionParams& params) override;

 private:
  HttpChatOptions opts_;
  std::counting_semaphore<1024> in_flight_;
};

// Templates with <<<{name}>>> placeholders, one file per role/phase.
class PromptLibrary {
 public:
  static constexpr const char* kRouterExtract = "router_extract";
  static constexpr const char* kRouterSelect = "router_select";
  static constexpr const char* kRouterReflect = "router_reflect";
  static constexpr const char* kValidator = "validator";
  static constexpr const char* kCommenter = "commenter";

  PromptLibrary() = default;
  // Loads every *.txt in dir; the template name is the file stem.
  static PromptLibrary load(const std::filesystem::path& dir);

  void add(std::string name, std::string text);
  bool contains(std::string_view name) const;
  const std::string& text(std::string_view name) const;

  // Throws LookupError for a missing template, InvalidArgument naming the
  // first unbound placeholder.
  std::string render(std::string_view name, const std::map<std::string, std::string>& vars) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars);

}  // namespace skbqa
