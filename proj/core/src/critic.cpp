#include "skbqa/critic.hpp"

#include <algorithm>
#include <fstream>
#include <regex>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "skbqa/error.hpp"
#include "skbqa/rng.hpp"
#include "skbqa/serialize.hpp"

namespace skbqa {

using nlohmann::json;

std::string_view to_string(ErrorType t) {
  switch (t) {
    case ErrorType::IncorrectEntityRelation:
      return "IncorrectEntityRelation";
    case ErrorType::MissingEntity:
      return "MissingEntity";
    case ErrorType::NoEntity:
      return "NoEntity";
    case ErrorType::NoIntersection:
      return "NoIntersection";
    case ErrorType::IncorrectIntersection:
      return "IncorrectIntersection";
    case ErrorType::IncorrectRetrievalModule:
      return "IncorrectRetrievalModule";
  }
  return "IncorrectRetrievalModule";
}

std::string_view to_string(ErrorSource s) {
  return s == ErrorSource::identification ? "identification" : "selection";
}

std::optional<ErrorType> error_type_from_string(std::string_view s) {
  for (auto t : kAllErrorTypes) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

ErrorSource source_of(ErrorType t) {
  return t == ErrorType::IncorrectRetrievalModule ? ErrorSource::selection
                                                  : ErrorSource::identification;
}

std::string render_feedback(ErrorType type, const std::optional<FeedbackTarget>& target) {
  switch (type) {
    case ErrorType::IncorrectEntityRelation: {
      if (!target || target->name.empty()) {
        throw InvalidArgument("IncorrectEntityRelation feedback needs a target name");
      }
      switch (target->kind) {
        case TargetKind::entity:
          return "Entity " + target->name + " is incorrect. Please remove or substitute this entity.";
        case TargetKind::relation:
          return "Relation " + target->name +
                 " is incorrect. Please remove or substitute this relation.";
        case TargetKind::either:
          return "Entity/relation " + target->name +
                 " is incorrect. Please remove or substitute this entity/relation.";
      }
      break;
    }
    case ErrorType::MissingEntity:
      return "There is only one entity but there may be more. Please extract one more entity and "
             "relation.";
    case ErrorType::NoEntity:
      return "There is no entity extracted. Please extract at least one entity and one relation.";
    case ErrorType::NoIntersection:
      return "There is no intersection between the entities. Please remove or substitute one "
             "entity and relation.";
    case ErrorType::IncorrectIntersection:
      return "There is an intersection between the entities, but the answer is not within it. "
             "Please remove or substitute one entity and relation.";
    case ErrorType::IncorrectRetrievalModule:
      return "The retrieved document is incorrect. The current retrieval module may not be "
             "helpful to narrow down the search space.";
  }
  return {};
}

Feedback make_feedback(ErrorType type, std::optional<FeedbackTarget> target) {
  if (type != ErrorType::IncorrectEntityRelation) target.reset();
  Feedback f;
  f.error_type = type;
  f.error_source = source_of(type);
  f.rendered = render_feedback(type, target);
  f.target = std::move(target);
  return f;
}

bool feedback_is_valid(const Feedback& f) {
  if (f.error_source != source_of(f.error_type)) return false;
  if (f.error_type == ErrorType::IncorrectEntityRelation) {
    if (!f.target || f.target->name.empty()) return false;
  } else if (f.target) {
    return false;
  }
  return f.rendered == render_feedback(f.error_type, f.target);
}

// ---------------------------------------------------------------------------
// Experiences

Experience experience_from(const RoutingDecision& decision, const Feedback& feedback) {
  Experience e;
  e.selection = decision.selection;
  for (const auto& m : decision.topic_entities) e.entities.emplace_back(m.text, m.etype);
  e.relations = decision.useful_relations;
  e.feedback = feedback;
  return e;
}

std::vector<Experience> load_experiences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open experiences " + path.string());
  std::vector<Experience> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(experience_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

ExperienceLog::ExperienceLog(std::filesystem::path path, bool truncate) : path_(std::move(path)) {
  std::ofstream out(path_, truncate ? std::ios::trunc : std::ios::app);
  if (!out) throw LookupError("cannot open " + path_.string() + " for writing");
}

void ExperienceLog::record(const Experience& e) {
  std::lock_guard lock(mu_);
  record_experience(path_, e);
}

void record_experience(const std::filesystem::path& path, const Experience& e) {
  if (!feedback_is_valid(e.feedback)) throw InvalidArgument("record_experience: invalid feedback");
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw LookupError("cannot append to " + path.string());
  out << to_json(e).dump() << '\n';
}

std::string format_mentions(const RoutingDecision& decision) {
  std::string out;
  for (const auto& m : decision.topic_entities) {
    if (!out.empty()) out += ", ";
    out += m.text + " (" + m.etype + ")";
  }
  return out.empty() ? "None" : out;
}

namespace {

std::string join_relations(const std::vector<std::string>& rels) {
  std::string out;
  for (const auto& r : rels) {
    if (!out.empty()) out += ", ";
    out += r;
  }
  return out.empty() ? "None" : out;
}

std::string selection_words(Selection s) {
  return s == Selection::hybrid ? "knowledge graph" : "text documents";
}

}  // namespace

std::string render_experiences(const std::vector<Experience>& experiences) {
  std::string out;
  for (const auto& e : experiences) {
    if (!out.empty()) out += "\n\n";
    std::string ents;
    for (const auto& [mention, etype] : e.entities) {
      if (!ents.empty()) ents += ", ";
      ents += mention + " (" + etype + ")";
    }
    out += "Selection: " + selection_words(e.selection) + "\n";
    out += "Topic Entities: " + (ents.empty() ? std::string("None") : ents) + "\n";
    out += "Useful Relations: " + join_relations(e.relations) + "\n";
    out += "Feedback: " + e.feedback.rendered;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

std::string build_validation_context(const Skb& skb, const RoutingDecision&,
                                     const RetrievalResult& result, std::size_t n,
                                     std::size_t doc_budget) {
  std::string out;
  std::size_t count = std::min(n, result.ranked.size());
  for (std::size_t i = 0; i < count; ++i) {
    const auto& id = result.ranked[i].id;
    std::string doc;
    if (auto e = skb.find(id); e && skb.entity(*e).doc) doc = *skb.entity(*e).doc;
    if (doc.size() > doc_budget) doc.resize(doc_budget);
    if (!out.empty()) out += "\n\n";
    out += doc;
    if (result.module != ModuleKind::hybrid) continue;
    auto it = result.per_candidate_paths.find(id);
    if (it == result.per_candidate_paths.end() || it->second.paths.empty()) continue;
    out += "\nReasoning paths:";
    for (const auto& p : it->second.paths) out += "\n" + skb.verbalize(p);
  }
  return out;
}

bool parse_verdict(std::string_view text) {
  auto b = text.find_first_not_of(" \t\r\n\"'*");
  if (b == std::string_view::npos) return false;
  return to_lower_ascii(text.substr(b, 3)) == "yes";
}

std::optional<Feedback> classify_structural_error(const RoutingDecision& decision,
                                                  const RetrievalResult& result) {
  if (decision.grounded_entity_count() == 0) return make_feedback(ErrorType::NoEntity);
  if (result.module != ModuleKind::hybrid) return std::nullopt;
  if (decision.grounded_mention_count() >= 2 && result.diagnostics.empty_intersection) {
    return make_feedback(ErrorType::NoIntersection);
  }
  if (decision.topic_entities.size() == 1 && !result.candidate_pool.empty()) {
    return make_feedback(ErrorType::MissingEntity);
  }
  return std::nullopt;
}

std::optional<Feedback> parse_commenter_output(std::string_view text,
                                               const RoutingDecision& decision) {
  const std::string s(text);
  static const std::regex named(R"((entity/relation|entity|relation)\s+([^\n]+?)\s+is\s+incorrect)",
                                std::regex::icase);
  std::smatch m;
  if (std::regex_search(s, m, named)) {
    auto keyword = to_lower_ascii(m[1].str());
    std::string name = m[2].str();
    while (!name.empty() && (name.front() == '"' || name.front() == '\'' || name.front() == '{')) {
      name.erase(name.begin());
    }
    while (!name.empty() && (name.back() == '"' || name.back() == '\'' || name.back() == '}')) {
      name.pop_back();
    }
    if (!name.empty() && name.find(". ") == std::string::npos) {
      TargetKind kind = keyword == "entity"     ? TargetKind::entity
                        : keyword == "relation" ? TargetKind::relation
                                                : TargetKind::either;
      if (kind == TargetKind::either) {
        auto lower = to_lower_ascii(name);
        bool is_entity = std::any_of(decision.topic_entities.begin(), decision.topic_entities.end(),
                                     [&](const auto& t) { return to_lower_ascii(t.text) == lower; });
        bool is_relation =
            std::any_of(decision.useful_relations.begin(), decision.useful_relations.end(),
                        [&](const auto& r) { return to_lower_ascii(r) == lower; });
        if (is_entity != is_relation) kind = is_entity ? TargetKind::entity : TargetKind::relation;
      }
      return make_feedback(ErrorType::IncorrectEntityRelation, FeedbackTarget{kind, name});
    }
  }
  auto lower = to_lower_ascii(text);
  auto has = [&](std::string_view needle) { return lower.find(needle) != std::string::npos; };
  if (has("answer is not within") || has("intersection between the entities, but")) {
    return make_feedback(ErrorType::IncorrectIntersection);
  }
  if (has("no intersection")) return make_feedback(ErrorType::NoIntersection);
  if (has("no entity extracted") || has("no entity")) return make_feedback(ErrorType::NoEntity);
  if (has("only one entity") || has("missing entity")) return make_feedback(ErrorType::MissingEntity);
  if (has("retrieval module") || has("retrieved document is incorrect")) {
    return make_feedback(ErrorType::IncorrectRetrievalModule);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

Critic::Critic(const Skb& skb, const PromptLibrary& prompts, ChatBackend& backend,
               std::vector<Experience> experiences, CriticOptions options,
               std::string validator_examples, CompletionParams params)
    : skb_(skb),
      prompts_(prompts),
      backend_(backend),
      options_(options),
      validator_examples_(std::move(validator_examples)),
      params_(params) {
  if (experiences.empty()) {
    spdlog::debug("commenter has no in-context experiences; running zero-shot");
  }
  Rng rng(options_.shuffle_seed);
  rng.shuffle(experiences);
  if (experiences.size() > options_.max_experiences) experiences.resize(options_.max_experiences);
  experiences_text_ = render_experiences(experiences);
}

Verdict Critic::validate(std::string_view question, const std::string& context,
                         Transcript& transcript, std::size_t candidates) {
  if (context.empty()) throw InvalidArgument("validate: empty validation context");
  transcript.add_user(prompts_.render(PromptLibrary::kValidator,
                                      {{"examples", validator_examples_},
                                       {"question", std::string(question)},
                                       {"context", context}}));
  Verdict v;
  v.raw = backend_.complete(transcript, params_);
  transcript.add_assistant(v.raw);
  v.accepted = parse_verdict(v.raw);
  v.validated_count = std::max<std::size_t>(candidates, 1);
  return v;
}

Critic::Comment Critic::comment(std::string_view question, const RoutingDecision& decision,
                                const RetrievalResult& result, Transcript& transcript) {
  if (auto structural = classify_structural_error(decision, result)) {
    return {*structural, false, {}};
  }
  transcript.add_user(prompts_.render(PromptLibrary::kCommenter,
                                      {{"examples", experiences_text_},
                                       {"question", std::string(question)},
                                       {"entities", format_mentions(decision)},
                                       {"relations", join_relations(decision.useful_relations)}}));
  Comment c;
  c.used_llm = true;
  c.raw = backend_.complete(transcript, params_);
  transcript.add_assistant(c.raw);
  if (auto parsed = parse_commenter_output(c.raw, decision)) {
    c.feedback = *parsed;
  } else {
    spdlog::warn("unparseable commenter output for {}: falling back to module feedback",
                 transcript.question_id());
    c.feedback = make_feedback(ErrorType::IncorrectRetrievalModule);
  }
  return c;
}

}  // namespace skbqa
