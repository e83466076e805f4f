#pragma once
// Ranking metrics, dataset evaluation and the routing / feedback experiments.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "skbqa/agent.hpp"
#include "skbqa/skb.hpp"

namespace skbqa {

struct QaExample {
  std::string id;
  std::string text;
  std::vector<std::string> answers;  // entity ids, non-empty
};

// questions.jsonl: {"id", "text", "answers": [...]}, one per line.
std::vector<QaExample> load_questions(const std::filesystem::path& path);
void write_questions(const std::vector<QaExample>& questions, const std::filesystem::path& path);
// Throws InvalidArgument naming the first question whose answers are empty or
// not entities of the SKB.
void check_questions(const std::vector<QaExample>& questions, const Skb& skb);

// 1 iff any answer is among the first k ranked ids. k >= 1.
int hit_at_k(const std::vector<std::string>& ranked, const std::vector<std::string>& answers,
             std::size_t k);
// |answers in top k| / |answers|. Answers must be non-empty.
double recall_at_k(const std::vector<std::string>& ranked, const std::vector<std::string>& answers,
                   std::size_t k);
// Reciprocal of the best answer rank; 0 when no answer is ranked.
double mrr(const std::vector<std::string>& ranked, const std::vector<std::string>& answers);

struct QuestionScore {
  std::string id;
  int hit1 = 0;
  int hit5 = 0;
  double recall20 = 0.0;
  double rr = 0.0;
};

struct MetricsReport {
  double hit1 = 0.0;
  double hit5 = 0.0;
  double recall20 = 0.0;
  double mrr = 0.0;
  std::vector<QuestionScore> rows;

  // {"hit1", "hit5", "mrr", "recall20"}
  nlohmann::json machine_record() const;
  std::string table(const std::string& title = {}) const;
};

QuestionScore score_question(const QaExample& q, const std::vector<std::string>& ranked);
// Means over rows in dataset order.
MetricsReport aggregate(std::vector<QuestionScore> rows);
MetricsReport score_all(const std::vector<QaExample>& dataset,
                        const std::vector<std::vector<std::string>>& ranked);

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// thrown is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

using RankingSystem = std::function<std::vector<std::string>(const QaExample&)>;

MetricsReport evaluate(const std::vector<QaExample>& dataset, const RankingSystem& system,
                       std::size_t workers = 1);

// Per question, the list with the better (hit@1, then reciprocal rank)
// outcome; the text list on ties.
MetricsReport optimal_routing(const std::vector<std::vector<std::string>>& results_text,
                              const std::vector<std::vector<std::string>>& results_graph,
                              const std::vector<QaExample>& dataset);

struct RoutingInsight {
  MetricsReport text;
  MetricsReport graph;
  MetricsReport optimal;
  std::vector<std::vector<std::string>> text_lists;
  std::vector<std::vector<std::string>> graph_lists;
};

// Routes each question once, then ranks it with text search and with
// personalized PageRank seeded by the grounded topic entities (keeping only
// entities with indexed documents), and scores both lists and their
// per-question optimum.
RoutingInsight routing_insight(const std::vector<QaExample>& dataset, const AgentResources& res,
                               ChatBackend& backend, std::size_t k = 20, std::size_t workers = 1);

std::vector<AnswerTrace> run_agent(const std::vector<QaExample>& dataset, const AgentResources& res,
                                   const AgentConfig& cfg, ChatBackend& backend,
                                   std::size_t workers = 1);

// Metrics of each trace's final result.
MetricsReport report_from_traces(const std::vector<QaExample>& dataset,
                                 const std::vector<AnswerTrace>& traces);

// Hit@1 when the loop is cut after t iterations, t = 1..max_t.
std::vector<double> iteration_curve(const std::vector<QaExample>& dataset,
                                    const std::vector<AnswerTrace>& traces, int max_t);

struct AblationResult {
  FeedbackMode mode = FeedbackMode::corrective;
  MetricsReport report;
};

std::vector<AblationResult> feedback_ablation(const std::vector<QaExample>& dataset,
                                              const AgentResources& res, AgentConfig cfg,
                                              ChatBackend& backend,
                                              const std::vector<FeedbackMode>& modes,
                                              std::size_t workers = 1);

}  // namespace skbqa
