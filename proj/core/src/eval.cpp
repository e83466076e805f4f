#include "skbqa/eval.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "skbqa/error.hpp"

namespace skbqa {

using json = nlohmann::json;

std::vector<QaExample> load_questions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open questions " + path.string());
  std::vector<QaExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      QaExample q{j.at("id").get<std::string>(), j.at("text").get<std::string>(),
                  j.at("answers").get<std::vector<std::string>>()};
      if (q.answers.empty()) throw ParseError(path.string(), line_no, "answers must be non-empty");
      out.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

void write_questions(const std::vector<QaExample>& questions, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LookupError("cannot write " + path.string());
  for (const auto& q : questions) {
    out << json{{"id", q.id}, {"text", q.text}, {"answers", q.answers}}.dump() << '\n';
  }
}

void check_questions(const std::vector<QaExample>& questions, const Skb& skb) {
  for (const auto& q : questions) {
    if (q.answers.empty()) throw InvalidArgument("question " + q.id + " has no answers");
    for (const auto& a : q.answers) {
      if (!skb.find(a)) throw InvalidArgument("question " + q.id + ": unknown answer " + a);
    }
  }
}

namespace {

bool is_answer(const std::string& id, const std::vector<std::string>& answers) {
  return std::find(answers.begin(), answers.end(), id) != answers.end();
}

}  // namespace

int hit_at_k(const std::vector<std::string>& ranked, const std::vector<std::string>& answers,
             std::size_t k) {
  if (k < 1) throw InvalidArgument("hit_at_k: k must be >= 1");
  auto n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (is_answer(ranked[i], answers)) return 1;
  }
  return 0;
}

double recall_at_k(const std::vector<std::string>& ranked, const std::vector<std::string>& answers,
                   std::size_t k) {
  if (k < 1) throw InvalidArgument("recall_at_k: k must be >= 1");
  std::vector<std::string> unique = answers;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (unique.empty()) throw InvalidArgument("recall_at_k: empty answer set");
  auto n = std::min(k, ranked.size());
  std::vector<std::string> top(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(top.begin(), top.end());
  top.erase(std::unique(top.begin(), top.end()), top.end());
  std::size_t found = 0;
  for (const auto& a : unique) found += std::binary_search(top.begin(), top.end(), a) ? 1 : 0;
  return static_cast<double>(found) / static_cast<double>(unique.size());
}

double mrr(const std::vector<std::string>& ranked, const std::vector<std::string>& answers) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (is_answer(ranked[i], answers)) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

json MetricsReport::machine_record() const {
  return {{"hit1", hit1}, {"hit5", hit5}, {"recall20", recall20}, {"mrr", mrr}};
}

std::string MetricsReport::table(const std::string& title) const {
  std::string out;
  if (!title.empty()) out += title + "\n";
  out += fmt::format("{:<10} {:>8}\n", "metric", "value");
  out += fmt::format("{:<10} {:>8.4f}\n", "Hit@1", hit1);
  out += fmt::format("{:<10} {:>8.4f}\n", "Hit@5", hit5);
  out += fmt::format("{:<10} {:>8.4f}\n", "Recall@20", recall20);
  out += fmt::format("{:<10} {:>8.4f}\n", "MRR", mrr);
  out += fmt::format("{:<10} {:>8}\n", "questions", rows.size());
  return out;
}

QuestionScore score_question(const QaExample& q, const std::vector<std::string>& ranked) {
  return {q.id, hit_at_k(ranked, q.answers, 1), hit_at_k(ranked, q.answers, 5),
          recall_at_k(ranked, q.answers, 20), mrr(ranked, q.answers)};
}

MetricsReport aggregate(std::vector<QuestionScore> rows) {
  MetricsReport r;
  for (const auto& row : rows) {
    r.hit1 += row.hit1;
    r.hit5 += row.hit5;
    r.recall20 += row.recall20;
    r.mrr += row.rr;
  }
  if (!rows.empty()) {
    auto n = static_cast<double>(rows.size());
    r.hit1 /= n;
    r.hit5 /= n;
    r.recall20 /= n;
    r.mrr /= n;
  }
  r.rows = std::move(rows);
  return r;
}

MetricsReport score_all(const std::vector<QaExample>& dataset,
                        const std::vector<std::vector<std::string>>& ranked) {
  if (ranked.size() != dataset.size()) throw InvalidArgument("score_all: size mismatch");
  std::vector<QuestionScore> rows;
  rows.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) rows.push_back(score_question(dataset[i], ranked[i]));
  return aggregate(std::move(rows));
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        auto i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          next.store(n);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

MetricsReport evaluate(const std::vector<QaExample>& dataset, const RankingSystem& system,
                       std::size_t workers) {
  std::vector<std::vector<std::string>> ranked(dataset.size());
  parallel_for(dataset.size(), workers, [&](std::size_t i) { ranked[i] = system(dataset[i]); });
  return score_all(dataset, ranked);
}

MetricsReport optimal_routing(const std::vector<std::vector<std::string>>& results_text,
                              const std::vector<std::vector<std::string>>& results_graph,
                              const std::vector<QaExample>& dataset) {
  if (results_text.size() != dataset.size() || results_graph.size() != dataset.size()) {
    throw InvalidArgument("optimal_routing: size mismatch");
  }
  std::vector<QuestionScore> rows;
  rows.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto t = score_question(dataset[i], results_text[i]);
    auto g = score_question(dataset[i], results_graph[i]);
    bool graph_better = g.hit1 > t.hit1 || (g.hit1 == t.hit1 && g.rr > t.rr);
    rows.push_back(graph_better ? g : t);
  }
  return aggregate(std::move(rows));
}

RoutingInsight routing_insight(const std::vector<QaExample>& dataset, const AgentResources& res,
                               ChatBackend& backend, std::size_t k, std::size_t workers) {
  RoutingInsight out;
  out.text_lists.resize(dataset.size());
  out.graph_lists.resize(dataset.size());
  parallel_for(dataset.size(), workers, [&](std::size_t i) {
    const auto& q = dataset[i];
    Router router(res.skb, res.prompts, res.fewshot, backend, res.completion);
    Transcript transcript(q.id, AgentRole::router);
    auto decision = router.route(q.text, nullptr, transcript);
    out.text_lists[i] = text_retrieve(q.text, res.index, res.embedder, k).ranked_ids();
    EntitySet seeds;
    for (const auto& m : decision.topic_entities) {
      for (const auto& id : m.ids) seeds.push_back(res.skb.require(id));
    }
    if (seeds.empty()) return;
    auto scored = ppr_retrieve(res.skb, seeds, res.skb.entity_count()).ranked;
    for (const auto& s : scored) {
      if (out.graph_lists[i].size() == k) break;
      if (res.index.find(s.id) != nullptr) out.graph_lists[i].push_back(s.id);
    }
  });
  out.text = score_all(dataset, out.text_lists);
  out.graph = score_all(dataset, out.graph_lists);
  out.optimal = optimal_routing(out.text_lists, out.graph_lists, dataset);
  return out;
}

std::vector<AnswerTrace> run_agent(const std::vector<QaExample>& dataset, const AgentResources& res,
                                   const AgentConfig& cfg, ChatBackend& backend,
                                   std::size_t workers) {
  cfg.validate();
  std::vector<AnswerTrace> traces(dataset.size());
  parallel_for(dataset.size(), workers, [&](std::size_t i) {
    traces[i] = answer(dataset[i].id, dataset[i].text, res, cfg, backend);
  });
  return traces;
}

MetricsReport report_from_traces(const std::vector<QaExample>& dataset,
                                 const std::vector<AnswerTrace>& traces) {
  if (traces.size() != dataset.size()) throw InvalidArgument("report_from_traces: size mismatch");
  std::vector<std::vector<std::string>> ranked;
  ranked.reserve(traces.size());
  for (const auto& t : traces) ranked.push_back(t.final.ranked_ids());
  return score_all(dataset, ranked);
}

std::vector<double> iteration_curve(const std::vector<QaExample>& dataset,
                                    const std::vector<AnswerTrace>& traces, int max_t) {
  if (traces.size() != dataset.size()) throw InvalidArgument("iteration_curve: size mismatch");
  if (max_t < 1) throw InvalidArgument("iteration_curve: max_t must be >= 1");
  std::vector<double> curve;
  for (int t = 1; t <= max_t; ++t) {
    std::vector<std::vector<std::string>> ranked;
    for (const auto& tr : traces) {
      if (tr.iterations.empty()) {
        ranked.emplace_back();
        continue;
      }
      auto idx = std::min<std::size_t>(static_cast<std::size_t>(t), tr.iterations.size()) - 1;
      ranked.push_back(tr.iterations[idx].result.ranked_ids());
    }
    curve.push_back(score_all(dataset, ranked).hit1);
  }
  return curve;
}

std::vector<AblationResult> feedback_ablation(const std::vector<QaExample>& dataset,
                                              const AgentResources& res, AgentConfig cfg,
                                              ChatBackend& backend,
                                              const std::vector<FeedbackMode>& modes,
                                              std::size_t workers) {
  std::vector<AblationResult> out;
  for (auto mode : modes) {
    cfg.feedback_mode = mode;
    auto traces = run_agent(dataset, res, cfg, backend, workers);
    out.push_back({mode, report_from_traces(dataset, traces)});
  }
  return out;
}

}  // namespace skbqa
