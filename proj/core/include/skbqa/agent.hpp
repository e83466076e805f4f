#pragma once
// The self-reflective answer loop: route, retrieve with the selected module,
// validate, and on rejection turn the critic's comment into the router's next
// feedback, for at most max_iterations rounds.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skbqa/critic.hpp"
#include "skbqa/llm.hpp"
#include "skbqa/retriever.hpp"
#include "skbqa/router.hpp"
#include "skbqa/skb.hpp"
#include "skbqa/vector_index.hpp"

namespace skbqa {

// corrective: commenter feedback (default). simple: a fixed "redo" message,
// no commenter. none: a single iteration.
enum class FeedbackMode { none, simple, corrective };

std::string_view to_string(FeedbackMode m);
std::optional<FeedbackMode> feedback_mode_from_string(std::string_view s);

inline constexpr const char* kSimpleFeedback =
    "Please extract the topic entities and useful relations from the question again.";

struct AgentConfig {
  int max_iterations = 4;
  std::size_t top_k = 20;
  int radius = 2;
  std::size_t validate_n = 1;
  FeedbackMode feedback_mode = FeedbackMode::corrective;

  // Throws InvalidArgument naming the offending field.
  void validate() const;
};

struct LlmCall {
  AgentRole role = AgentRole::router;
  std::string prompt;
  std::string response;
};

struct IterationRecord {
  RoutingDecision decision;
  RetrievalResult result;
  Verdict verdict;
  std::optional<Feedback> feedback;  // f_{t+1} in corrective mode
  std::string feedback_text;         // what the router sees next; empty on the last iteration
  bool commenter_used_llm = false;
};

struct AnswerTrace {
  std::string question_id;
  std::string question;
  std::vector<IterationRecord> iterations;
  RetrievalResult final;
  bool accepted = false;
  bool failed = false;
  std::string error;
  std::map<AgentRole, std::size_t> llm_calls;
  std::vector<LlmCall> calls;  // every prompt/response pair in call order

  std::size_t total_llm_calls() const;
};

struct AgentResources {
  const Skb& skb;
  const DocIndex& index;
  EmbeddingProvider& embedder;
  const PromptLibrary& prompts;
  const std::vector<FewShotExample>& fewshot;
  const std::vector<Experience>& experiences;
  std::string validator_examples;
  CriticOptions critic;
  CompletionParams completion;
};

// Runs the loop for one question. Backend transport failures end the run with
// failed=true and the partial trace.
AnswerTrace answer(const std::string& question_id, const std::string& question,
                   const AgentResources& res, const AgentConfig& cfg, ChatBackend& backend);

// Script entries that replay every recorded call of a trace.
std::vector<ScriptEntry> replay_script(const AnswerTrace& trace);

// Writes traces/{question_id}.json style canonical records.
void write_trace(const AnswerTrace& trace, const Skb& skb, const std::filesystem::path& path);

}  // namespace skbqa
