#pragma once
// Critic: an LLM validator that accepts or rejects a retrieval given its
// documents and verbalized reasoning paths, and a commenter that turns a
// rejection into typed corrective feedback for the router.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skbqa/llm.hpp"
#include "skbqa/retriever.hpp"
#include "skbqa/skb.hpp"

namespace skbqa {

enum class ErrorSource { identification, selection };

enum class ErrorType {
  IncorrectEntityRelation,
  MissingEntity,
  NoEntity,
  NoIntersection,
  IncorrectIntersection,
  IncorrectRetrievalModule,
};

inline constexpr ErrorType kAllErrorTypes[] = {
    ErrorType::IncorrectEntityRelation, ErrorType::MissingEntity,
    ErrorType::NoEntity,                ErrorType::NoIntersection,
    ErrorType::IncorrectIntersection,   ErrorType::IncorrectRetrievalModule,
};

std::string_view to_string(ErrorType t);
std::string_view to_string(ErrorSource s);
std::optional<ErrorType> error_type_from_string(std::string_view s);
ErrorSource source_of(ErrorType t);

// Which kind of item an IncorrectEntityRelation feedback names. `either`
// renders the combined "Entity/relation" wording.
enum class TargetKind { entity, relation, either };

struct FeedbackTarget {
  TargetKind kind = TargetKind::either;
  std::string name;
  friend bool operator==(const FeedbackTarget&, const FeedbackTarget&) = default;
};

struct Feedback {
  ErrorSource error_source = ErrorSource::selection;
  ErrorType error_type = ErrorType::IncorrectRetrievalModule;
  std::optional<FeedbackTarget> target;
  std::string rendered;

  friend bool operator==(const Feedback&, const Feedback&) = default;
};

// The corrective-feedback sentence for an error type. Only
// IncorrectEntityRelation uses the target; it requires one.
std::string render_feedback(ErrorType type, const std::optional<FeedbackTarget>& target = {});
Feedback make_feedback(ErrorType type, std::optional<FeedbackTarget> target = {});
// Source/type consistency and rendered text match the template.
bool feedback_is_valid(const Feedback& f);

struct Experience {
  Selection selection = Selection::hybrid;
  std::vector<std::pair<std::string, std::string>> entities;  // (mention, type)
  std::vector<std::string> relations;
  Feedback feedback;

  friend bool operator==(const Experience&, const Experience&) = default;
};

Experience experience_from(const RoutingDecision& decision, const Feedback& feedback);

// JSONL; every record validated on load (line numbers reported).
std::vector<Experience> load_experiences(const std::filesystem::path& path);

// Append-only writer; appends are serialized.
class ExperienceLog {
 public:
  explicit ExperienceLog(std::filesystem::path path, bool truncate = false);
  void record(const Experience& e);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

void record_experience(const std::filesystem::path& path, const Experience& e);

struct Verdict {
  bool accepted = false;
  std::size_t validated_count = 0;
  std::string raw;
};

struct CriticOptions {
  std::size_t validate_n = 1;
  std::size_t doc_budget = 2000;  // characters of document text per candidate
  std::uint64_t shuffle_seed = 17;
  std::size_t max_experiences = 30;
};

// Document text (truncated to doc_budget) of each of the top-n candidates,
// followed for hybrid results by every stored reasoning path. Empty when the
// result is empty.
std::string build_validation_context(const Skb& skb, const RoutingDecision& decision,
                                     const RetrievalResult& result, std::size_t n,
                                     std::size_t doc_budget = 2000);

// "yes" prefix (case-insensitive, after leading whitespace) accepts.
bool parse_verdict(std::string_view text);

// Mechanically detectable errors after a rejection, in precedence order:
// no grounded entity; several grounded mentions with an empty hybrid pool;
// a single mention with a non-empty hybrid pool. nullopt defers to the LLM.
std::optional<Feedback> classify_structural_error(const RoutingDecision& decision,
                                                  const RetrievalResult& result);

// Maps commenter output to a Feedback; nullopt when nothing recognisable.
std::optional<Feedback> parse_commenter_output(std::string_view text,
                                               const RoutingDecision& decision);

std::string render_experiences(const std::vector<Experience>& experiences);
std::string format_mentions(const RoutingDecision& decision);

class Critic {
 public:
  Critic(const Skb& skb, const PromptLibrary& prompts, ChatBackend& backend,
         std::vector<Experience> experiences, CriticOptions options = {},
         std::string validator_examples = {}, CompletionParams params = {});

  // One backend call on a fresh validator transcript. The context must not be
  // empty.
  Verdict validate(std::string_view question, const std::string& context,
                   Transcript& transcript, std::size_t candidates = 1);

  struct Comment {
    Feedback feedback;
    bool used_llm = false;
    std::string raw;
  };

  // Structural classification first; otherwise one backend call on a fresh
  // commenter transcript with the in-context experiences.
  Comment comment(std::string_view question, const RoutingDecision& decision,
                  const RetrievalResult& result, Transcript& transcript);

  const CriticOptions& options() const { return options_; }
  const std::string& experiences_text() const { return experiences_text_; }

 private:
  const Skb& skb_;
  const PromptLibrary& prompts_;
  ChatBackend& backend_;
  CriticOptions options_;
  std::string experiences_text_;
  std::string validator_examples_;
  CompletionParams params_;
};

}  // namespace skbqa
