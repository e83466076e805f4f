#include "skbqa/agent.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>

#include <spdlog/spdlog.h>

#include "skbqa/error.hpp"
#include "skbqa/serialize.hpp"

namespace skbqa {

std::string_view to_string(FeedbackMode m) {
  switch (m) {
    case FeedbackMode::none:
      return "none";
    case FeedbackMode::simple:
      return "simple";
    case FeedbackMode::corrective:
      return "corrective";
  }
  return "corrective";
}

std::optional<FeedbackMode> feedback_mode_from_string(std::string_view s) {
  for (auto m : {FeedbackMode::none, FeedbackMode::simple, FeedbackMode::corrective}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

void AgentConfig::validate() const {
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
  if (radius < 1 || radius > kDefaultRadiusCap) throw InvalidArgument("radius must be 1 or 2");
  if (validate_n < 1) throw InvalidArgument("validate_n must be >= 1");
}

std::size_t AnswerTrace::total_llm_calls() const {
  std::size_t n = 0;
  for (const auto& [role, count] : llm_calls) n += count;
  return n;
}

namespace {

// Forwards to the real backend and keeps every exchange for the trace.
class RecordingBackend final : public ChatBackend {
 public:
  RecordingBackend(ChatBackend& inner, AnswerTrace& trace) : inner_(inner), trace_(trace) {}

 protected:
  std::string do_complete(const Transcript& transcript, const CompletionParams& params) override {
    std::string response = inner_.complete(transcript, params);
    trace_.llm_calls[transcript.agent()] += 1;
    trace_.calls.push_back({transcript.agent(), std::string(transcript.last_user()), response});
    return response;
  }

 private:
  ChatBackend& inner_;
  AnswerTrace& trace_;
};

}  // namespace

AnswerTrace answer(const std::string& question_id, const std::string& question,
                   const AgentResources& res, const AgentConfig& cfg, ChatBackend& backend) {
  cfg.validate();
  AnswerTrace trace;
  trace.question_id = question_id;
  trace.question = question;
  for (auto role : {AgentRole::router, AgentRole::validator, AgentRole::commenter}) {
    trace.llm_calls[role] = 0;
  }

  RecordingBackend recorder(backend, trace);
  Router router(res.skb, res.prompts, res.fewshot, recorder, res.completion);
  CriticOptions critic_opts = res.critic;
  critic_opts.validate_n = cfg.validate_n;
  Critic critic(res.skb, res.prompts, recorder, res.experiences, critic_opts,
                res.validator_examples, res.completion);

  RetrievalParams rparams;
  rparams.k = cfg.top_k;
  rparams.radius = cfg.radius;
  rparams.max_paths = kDefaultPathCap;

  const int max_t = cfg.feedback_mode == FeedbackMode::none ? 1 : cfg.max_iterations;
  Transcript router_transcript(question_id, AgentRole::router);
  std::string feedback;

  try {
    for (int t = 1; t <= max_t; ++t) {
      IterationRecord it;
      it.decision = router.route(question, t == 1 ? nullptr : &feedback, router_transcript);

      if (it.decision.selection == Selection::hybrid) {
        it.result = hybrid_retrieve(question, res.skb, res.index, res.embedder, it.decision, rparams);
      } else {
        it.result = text_retrieve(question, res.index, res.embedder, cfg.top_k);
      }

      auto context = build_validation_context(res.skb, it.decision, it.result, cfg.validate_n,
                                              critic_opts.doc_budget);
      if (!context.empty()) {
        Transcript vt(question_id, AgentRole::validator);
        it.verdict = critic.validate(question, context, vt,
                                     std::min(cfg.validate_n, it.result.ranked.size()));
      }

      trace.iterations.push_back(std::move(it));
      auto& cur = trace.iterations.back();
      if (cur.verdict.accepted) {
        trace.accepted = true;
        break;
      }
      if (t == max_t) break;

      if (cfg.feedback_mode == FeedbackMode::simple) {
        cur.feedback_text = kSimpleFeedback;
      } else {
        Transcript ct(question_id, AgentRole::commenter);
        auto c = critic.comment(question, cur.decision, cur.result, ct);
        cur.feedback = c.feedback;
        cur.commenter_used_llm = c.used_llm;
        cur.feedback_text = c.feedback.rendered;
      }
      if (trace.iterations.size() >= 2) {
        const auto& prev = trace.iterations[trace.iterations.size() - 2];
        if (prev.decision.same_action(cur.decision)) {
          spdlog::warn("{}: router repeated the previous action despite feedback", question_id);
        }
      }
      feedback = cur.feedback_text;
    }
  } catch (const TransportError& e) {
    trace.failed = true;
    trace.error = e.what();
    spdlog::error("{}: {}", question_id, e.what());
  }
  if (!trace.iterations.empty()) trace.final = trace.iterations.back().result;
  return trace;
}

std::vector<ScriptEntry> replay_script(const AnswerTrace& trace) {
  std::vector<ScriptEntry> out;
  for (const auto& c : trace.calls) {
    ScriptEntry e;
    e.substring = c.prompt;
    e.response = c.response;
    out.push_back(std::move(e));
  }
  return out;
}

void write_trace(const AnswerTrace& trace, const Skb& skb, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LookupError("cannot write trace " + path.string());
  out << to_json(trace, skb).dump(2) << '\n';
}

}  // namespace skbqa
