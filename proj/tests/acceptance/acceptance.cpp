// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "skbqa/agent.hpp"
#include "skbqa/critic.hpp"
#include "skbqa/eval.hpp"
#include "skbqa/retriever.hpp"
#include "skbqa/rng.hpp"
#include "skbqa/synth.hpp"
#include "support.hpp"

namespace skbqa {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Ego-graphs at radii 1 and 2 over every non-empty relation subset, and
// intersections of random ego-graph groups, against the edge-sweep oracle.
Outcome graph_oracle() {
  auto start = Clock::now();
  Rng rng(101);
  std::size_t ego_checks = 0;
  std::size_t ego_bad = 0;
  std::size_t inter_checks = 0;
  std::size_t inter_bad = 0;
  for (std::uint64_t g_idx = 0; g_idx < 100; ++g_idx) {
    std::size_t n = 20 + rng.below(181);
    std::size_t nrel = 1 + rng.below(4);
    auto g = testing::random_graph(1000 + g_idx, n, nrel, n * 2);
    auto skb = Skb::build(g.entities, g.edges, {}, g.relation_types);
    auto name = [&](EntityId e) { return skb.entity(e).id; };
    for (int s = 0; s < 5; ++s) {
      auto seed = EntityId{static_cast<std::uint32_t>(rng.below(n))};
      for (unsigned mask = 1; mask < (1u << nrel); ++mask) {
        RelationSet rels;
        std::set<std::string> labels;
        for (std::size_t r = 0; r < nrel; ++r) {
          if (!(mask & (1u << r))) continue;
          rels.push_back(skb.require_relation(g.relation_types[r]));
          labels.insert(g.relation_types[r]);
        }
        std::vector<EntitySet> groups;
        for (int radius = 1; radius <= 2; ++radius) {
          auto got = skb.ego_graph(seed, rels, radius);
          std::set<std::string> got_ids;
          for (auto e : got) got_ids.insert(name(e));
          ++ego_checks;
          if (got_ids != testing::oracle_ego(g.edges, name(seed), labels, radius)) ++ego_bad;
          groups.push_back(got);
        }
        // A third group from another seed, same relations.
        groups.push_back(skb.ego_graph(EntityId{static_cast<std::uint32_t>(rng.below(n))}, rels, 2));
        std::vector<EntityId> naive = groups[0];
        for (std::size_t i = 1; i < groups.size(); ++i) {
          std::vector<EntityId> next;
          for (auto e : naive) {
            if (std::any_of(groups[i].begin(), groups[i].end(),
                            [&](EntityId x) { return x.value == e.value; })) {
              next.push_back(e);
            }
          }
          naive = next;
        }
        auto got = intersect_candidates(groups);
        ++inter_checks;
        bool same = got.size() == naive.size() &&
                    std::equal(got.begin(), got.end(), naive.begin(),
                               [](EntityId a, EntityId b) { return a.value == b.value; });
        if (!same) ++inter_bad;
      }
    }
  }
  double secs = seconds_since(start);
  Outcome o;
  o.pass = ego_bad == 0 && inter_bad == 0 && secs < 30.0;
  o.detail = fmt::format("{} ego mismatches of {}, {} intersection mismatches of {}, {:.1f}s (< 30s)",
                         ego_bad, ego_checks, inter_bad, inter_checks, secs);
  return o;
}

// Dense power iteration on the undirected walk matrix with dangling restart.
std::vector<double> power_iteration_ppr(std::size_t n,
                                        const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                        const std::set<std::size_t>& seeds, double alpha) {
  std::vector<std::vector<double>> t(n, std::vector<double>(n, 0.0));  // t[to][from]
  std::vector<double> deg(n, 0.0);
  for (auto [u, v] : edges) {
    deg[u] += 1.0;
    deg[v] += 1.0;
  }
  std::vector<double> r(n, 0.0);
  for (auto s : seeds) r[s] = 1.0 / static_cast<double>(seeds.size());
  for (auto [u, v] : edges) {
    t[v][u] += 1.0 / deg[u];
    t[u][v] += 1.0 / deg[v];
  }
  for (std::size_t u = 0; u < n; ++u) {
    if (deg[u] == 0) {
      for (std::size_t v = 0; v < n; ++v) t[v][u] = r[v];
    }
  }
  std::vector<double> p = r;
  for (int it = 0; it < 100000; ++it) {
    std::vector<double> next(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      double acc = 0.0;
      for (std::size_t u = 0; u < n; ++u) acc += t[v][u] * p[u];
      next[v] = alpha * r[v] + (1.0 - alpha) * acc;
    }
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff += std::abs(next[i] - p[i]);
    p = std::move(next);
    if (diff < 1e-15) break;
  }
  return p;
}

Outcome ppr_oracle() {
  Rng rng(202);
  double worst_l1 = 0.0;
  double worst_sum = 0.0;
  for (std::uint64_t g_idx = 0; g_idx < 50; ++g_idx) {
    std::size_t n = 10 + rng.below(51);
    auto g = testing::random_graph(2000 + g_idx, n, 1 + rng.below(4), n + rng.below(2 * n));
    auto skb = Skb::build(g.entities, g.edges, {}, g.relation_types);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& e : g.edges) pairs.emplace_back(skb.require(e.src).value, skb.require(e.dst).value);
    std::set<std::size_t> seed_ids;
    std::size_t want = 1 + rng.below(3);
    while (seed_ids.size() < want) seed_ids.insert(rng.below(n));
    EntitySet seeds;
    for (auto s : seed_ids) seeds.push_back(EntityId{static_cast<std::uint32_t>(s)});
    PprParams params;
    auto got = personalized_pagerank(skb, seeds, params);
    auto expected = power_iteration_ppr(n, pairs, seed_ids, params.alpha);
    double l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) l1 += std::abs(got[i] - expected[i]);
    worst_l1 = std::max(worst_l1, l1);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(got.begin(), got.end(), 0.0) - 1.0));
  }
  Outcome o;
  o.pass = worst_l1 < 1e-8 && worst_sum < 1e-8;
  o.detail = fmt::format("50 graphs, worst L1 {:.2e} (< 1e-8), worst |sum - 1| {:.2e} (< 1e-8)",
                         worst_l1, worst_sum);
  return o;
}

Outcome metrics_fixture() {
  std::vector<std::string> far;
  for (int i = 0; i < 20; ++i) far.push_back("x" + std::to_string(i));
  far.push_back("a");
  std::vector<QaExample> ds;
  std::vector<std::vector<std::string>> ranked{
      {"a", "b"},
      {"b", "a"},
      {"b", "c", "d", "e", "f", "a"},
      {},
      {"b", "x", "a"},
      {"x", "a"},
      far,
      {"c", "x", "y", "z", "w", "d"},
      {"x", "y", "z", "a"},
      {"x", "y", "z", "w", "v"},
  };
  std::vector<std::vector<std::string>> answers{{"a"}, {"a"}, {"a"}, {"a"}, {"a", "b"},
                                                {"a", "b"}, {"a"}, {"a", "b", "c", "d"}, {"a"}, {"a"}};
  for (std::size_t i = 0; i < answers.size(); ++i) ds.push_back({"q" + std::to_string(i), "", answers[i]});
  auto r = score_all(ds, ranked);
  const double tol = 1e-12;
  bool exact = std::abs(r.hit1 - 0.3) < tol && std::abs(r.hit5 - 0.6) < tol &&
               std::abs(r.recall20 - 0.6) < tol && std::abs(r.mrr - 25.0 / 56.0) < tol;

  Rng rng(303);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> list;
    std::size_t len = rng.below(40);
    for (std::size_t i = 0; i < len; ++i) list.push_back("e" + std::to_string(rng.below(60)));
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    rng.shuffle(list);
    std::vector<std::string> ans{"e" + std::to_string(rng.below(60))};
    if (rng.below(2)) ans.push_back("e" + std::to_string(rng.below(60)));
    for (std::size_t k = 1; k < 50; ++k) {
      if (hit_at_k(list, ans, k) > hit_at_k(list, ans, k + 1)) ++violations;
      if (recall_at_k(list, ans, k) > recall_at_k(list, ans, k + 1)) ++violations;
    }
  }
  Outcome o;
  o.pass = exact && violations == 0;
  o.detail = fmt::format("fixture hit1 {:.4f} hit5 {:.4f} recall20 {:.4f} mrr {:.6f} ({}), "
                         "{} monotonicity violations over 1000 lists",
                         r.hit1, r.hit5, r.recall20, r.mrr, exact ? "exact" : "mismatch", violations);
  return o;
}

Outcome loop_control() {
  testing::MiniWorld world;
  auto immediate_script = testing::mini_refinement_script();
  immediate_script.push_back(testing::match(
      "Entity Type: author, paper, venue",
      "Entity: Ada Lovelace (author)\nEntity: ACM (venue)\nRelation: writes\nRelation: published_in"));
  ScriptedBackend immediate(immediate_script);
  auto a = answer("q1", testing::kMiniQuestion, world.resources(), {}, immediate);
  bool pass_a = a.accepted && a.iterations.size() == 1 && a.total_llm_calls() == 3;

  ScriptedBackend refine(testing::mini_refinement_script());
  auto b = answer("q1", testing::kMiniQuestion, world.resources(), {}, refine);
  std::vector<AgentRole> roles;
  for (const auto& c : b.calls) roles.push_back(c.role);
  using R = AgentRole;
  bool pass_b = b.accepted && b.iterations.size() == 2 && b.total_llm_calls() == 7 &&
                refine.calls() == 7 &&
                roles == std::vector<AgentRole>{R::router, R::router, R::validator, R::commenter,
                                                R::router, R::router, R::validator} &&
                b.final.ranked_ids().front() == testing::kMiniAnswer;

  ScriptedBackend reject(testing::mini_rejecting_script());
  AgentConfig cfg;
  cfg.max_iterations = 4;
  auto c = answer("q1", testing::kMiniQuestion, world.resources(), cfg, reject);
  bool pass_c = !c.accepted && c.iterations.size() == 4 && c.total_llm_calls() == 15 &&
                c.final.ranked_ids() == c.iterations.back().result.ranked_ids();

  Outcome o;
  o.pass = pass_a && pass_b && pass_c;
  o.detail = fmt::format(
      "accept-first {} calls ({}), reject-then-accept {} calls = 2+1+1 then 2+1 ({}), "
      "exhaustion at T=4 {} iterations {} calls ({})",
      a.total_llm_calls(), pass_a ? "ok" : "bad", b.total_llm_calls(), pass_b ? "ok" : "bad",
      c.iterations.size(), c.total_llm_calls(), pass_c ? "ok" : "bad");
  return o;
}

std::map<std::string, std::string> golden_feedback_table() {
  std::ifstream in(testing::golden_dir() / "feedback_table.tsv");
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

bool matches_template(const std::string& rendered, const std::string& tmpl) {
  auto slot = tmpl.find("{name}");
  if (slot == std::string::npos) return rendered == tmpl;
  auto head = tmpl.substr(0, slot);
  auto tail = tmpl.substr(slot + 6);
  return rendered.size() > head.size() + tail.size() && rendered.starts_with(head) &&
         rendered.ends_with(tail);
}

// Feedback sentences, checked against the golden table for every type and
// for every feedback the agent produced on the synthetic suite.
Outcome feedback_table(const std::vector<AnswerTrace>& traces) {
  auto table = golden_feedback_table();
  std::size_t bad = 0;
  for (auto type : kAllErrorTypes) {
    auto key = std::string(to_string(type));
    if (!table.count(key)) {
      ++bad;
      continue;
    }
    std::optional<FeedbackTarget> target;
    std::string expected = table[key];
    if (type == ErrorType::IncorrectEntityRelation) {
      target = FeedbackTarget{TargetKind::either, "graph theory"};
      expected.replace(expected.find("{name}"), 6, "graph theory");
    }
    auto f = make_feedback(type, target);
    if (f.rendered != expected || !feedback_is_valid(f)) ++bad;
  }
  std::size_t seen = 0;
  std::size_t seen_bad = 0;
  for (const auto& t : traces) {
    for (const auto& it : t.iterations) {
      if (!it.feedback) continue;
      ++seen;
      const auto& f = *it.feedback;
      auto key = std::string(to_string(f.error_type));
      bool entity_or_relation_variant = f.error_type == ErrorType::IncorrectEntityRelation &&
                                        f.target && f.target->kind != TargetKind::either;
      bool ok = feedback_is_valid(f) && it.feedback_text == f.rendered &&
                (entity_or_relation_variant || matches_template(f.rendered, table[key]));
      if (!ok) ++seen_bad;
    }
  }
  Outcome o;
  o.pass = table.size() == 6 && bad == 0 && seen_bad == 0;
  o.detail = fmt::format("{} of 6 types match the golden table; {} of {} agent feedbacks valid",
                         6 - bad, seen - seen_bad, seen);
  return o;
}

struct SynthWorld {
  SynthSuite suite = generate_synthetic_skb({});
  HashEmbedder embedder;
  DocIndex index = build_index(suite.skb, embedder);
  PromptLibrary prompts = PromptLibrary::load(testing::prompts_dir());
  std::vector<FewShotExample> fewshot = synth_fewshot();
  std::vector<Experience> experiences;
  SynthScript script = make_synthetic_script(suite, {});

  AgentResources resources() {
    return AgentResources{suite.skb, index, embedder, prompts, fewshot, experiences, {}, {}, {}};
  }
};

Outcome routing_gain(SynthWorld& w) {
  ScriptedBackend backend(w.script.entries);
  auto ds = w.suite.dataset();
  auto ri = routing_insight(ds, w.resources(), backend, 20, 4);
  std::size_t below = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& o = ri.optimal.rows[i];
    const auto& t = ri.text.rows[i];
    const auto& g = ri.graph.rows[i];
    if (o.hit1 < std::max(t.hit1, g.hit1) || o.rr < std::max(t.rr, g.rr)) ++below;
  }
  double best = std::max(ri.text.hit1, ri.graph.hit1);
  Outcome o;
  o.pass = ds.size() == 200 && below == 0 && ri.optimal.hit1 > best;
  o.detail = fmt::format("{} questions, Hit@1 text {:.3f} PPR {:.3f} optimal {:.3f}, "
                         "{} questions below the per-question max",
                         ds.size(), ri.text.hit1, ri.graph.hit1, ri.optimal.hit1, below);
  return o;
}

struct ModeRun {
  std::vector<AnswerTrace> traces;
  MetricsReport all;
  MetricsReport hybrid;
  double seconds = 0.0;
};

ModeRun run_mode(SynthWorld& w, FeedbackMode mode) {
  ScriptedBackend backend(w.script.entries);
  AgentConfig cfg;
  cfg.feedback_mode = mode;
  auto ds = w.suite.dataset();
  auto start = Clock::now();
  ModeRun r;
  r.traces = run_agent(ds, w.resources(), cfg, backend, 4);
  r.seconds = seconds_since(start);
  r.all = report_from_traces(ds, r.traces);
  std::vector<QaExample> hybrid_ds;
  std::vector<AnswerTrace> hybrid_traces;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!w.suite.questions[i].hybrid) continue;
    hybrid_ds.push_back(ds[i]);
    hybrid_traces.push_back(r.traces[i]);
  }
  r.hybrid = report_from_traces(hybrid_ds, hybrid_traces);
  return r;
}

Outcome feedback_ordering(const ModeRun& none, const ModeRun& simple, const ModeRun& corrective) {
  double g1 = corrective.all.hit1 - simple.all.hit1;
  double g2 = simple.all.hit1 - none.all.hit1;
  Outcome o;
  o.pass = g1 >= 0.05 && g2 >= 0.05;
  o.detail = fmt::format("Hit@1 none {:.3f} < simple {:.3f} < corrective {:.3f}, gaps {:.3f} and "
                         "{:.3f} (>= 0.05)",
                         none.all.hit1, simple.all.hit1, corrective.all.hit1, g2, g1);
  return o;
}

Outcome iteration_gain(SynthWorld& w, const ModeRun& corrective) {
  auto curve = iteration_curve(w.suite.dataset(), corrective.traces, AgentConfig{}.max_iterations);
  bool monotone = std::is_sorted(curve.begin(), curve.end());
  double gain = curve.size() >= 2 ? curve[1] - curve[0] : 0.0;
  std::string text;
  for (std::size_t t = 0; t < curve.size(); ++t) {
    text += fmt::format("{}{:.3f}", t ? " " : "", curve[t]);
  }
  Outcome o;
  o.pass = monotone && gain >= 0.05;
  o.detail = fmt::format("Hit@1 by t = [{}], {}, t1 -> t2 gain {:.3f} (>= 0.05)", text,
                         monotone ? "non-decreasing" : "decreasing", gain);
  return o;
}

Outcome end_to_end(SynthWorld& w, const ModeRun& none, const ModeRun& corrective) {
  std::size_t hybrid = 0;
  for (const auto& q : w.suite.questions) hybrid += q.hybrid ? 1 : 0;
  double rate = static_cast<double>(w.script.corrupted.size()) / static_cast<double>(hybrid);
  double bound = 1.0 - rate + 0.05;
  Outcome o;
  o.pass = corrective.hybrid.hit1 == 1.0 && none.hybrid.hit1 <= bound && corrective.seconds < 120.0;
  o.detail = fmt::format("{} hybrid questions, corrective Hit@1 {:.3f} (= 1), no-feedback Hit@1 "
                         "{:.3f} (<= {:.3f}), {:.1f}s (< 120s)",
                         hybrid, corrective.hybrid.hit1, none.hybrid.hit1, bound,
                         corrective.seconds);
  return o;
}

// Runs the command line twice per worker count over a synthetic suite.
Outcome determinism() {
  testing::TempDir dir;
  auto getenv = [](const char*) -> const char* { return nullptr; };
  auto run = [&](const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    int code = cli::run(args, out, err, getenv);
    return std::make_pair(code, out.str() + err.str());
  };
  auto suite = (dir / "suite").string();
  auto conf = (dir / "suite" / "run.conf").string();
  if (run({"synth", "--out", suite}).first != cli::kExitOk ||
      run({"--config", conf, "build-index"}).first != cli::kExitOk) {
    return {false, "could not prepare the synthetic suite"};
  }
  std::vector<std::string> reports;
  std::vector<std::string> stdouts;
  int failures = 0;
  for (const char* workers : {"1", "8", "1", "8"}) {
    auto out = (dir / ("rep" + std::to_string(reports.size()))).string();
    auto r = run({"--config", conf, "--workers", workers, "eval", "--out", out});
    if (r.first != cli::kExitOk) ++failures;
    reports.push_back(testing::read_text(std::filesystem::path(out) / "report.json"));
    stdouts.push_back(r.second);
  }
  bool same = failures == 0;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    same = same && reports[i] == reports[0] && stdouts[i] == stdouts[0];
  }
  Outcome o;
  o.pass = same;
  o.detail = fmt::format("4 eval runs (workers 1, 8, 1, 8): reports {}",
                         same ? "byte-identical" : "differ");
  return o;
}

int run_all() {
  std::vector<std::pair<std::string, Outcome>> results;
  auto record = [&](std::string name, Outcome o) {
    std::printf("%s  %-22s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(std::move(name), std::move(o));
  };
  record("1 graph oracle", graph_oracle());
  record("2 ppr oracle", ppr_oracle());
  record("3 metrics", metrics_fixture());
  record("4 loop control", loop_control());

  SynthWorld w;
  auto none = run_mode(w, FeedbackMode::none);
  auto simple = run_mode(w, FeedbackMode::simple);
  auto corrective = run_mode(w, FeedbackMode::corrective);
  record("5 feedback table", feedback_table(corrective.traces));
  record("6 routing gain", routing_gain(w));
  record("7 feedback ordering", feedback_ordering(none, simple, corrective));
  record("8 iteration gain", iteration_gain(w, corrective));
  record("9 end to end", end_to_end(w, none, corrective));
  record("10 determinism", determinism());

  auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.second.pass; });
  std::printf("%zu of %zu criteria passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace skbqa

int main() {
  spdlog::set_level(spdlog::level::err);
  try {
    return skbqa::run_all();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 1;
  }
}
