#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "skbqa/critic.hpp"
#include "skbqa/error.hpp"
#include "skbqa/eval.hpp"
#include "skbqa/serialize.hpp"
#include "skbqa/synth.hpp"

#ifndef SKBQA_DEFAULT_PROMPTS_DIR
#define SKBQA_DEFAULT_PROMPTS_DIR "prompts"
#endif

namespace skbqa::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::vector<std::string> kPathKeys = {
    "entities", "edges",   "index",     "prompts",  "fewshot", "experiences",
    "validator_examples", "script", "traces", "questions", "out"};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool is_known_key(const std::string& key) {
  const auto& keys = config_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

bool is_path_key(const std::string& key) {
  return std::find(kPathKeys.begin(), kPathKeys.end(), key) != kPathKeys.end();
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw ConfigError(fmt::format("config key \"{}\": expected a non-negative integer, got \"{}\"",
                                  key, value));
  }
  return v;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k = kPathKeys;
    for (const char* s : {"max_iterations", "top_k", "radius", "validate_n", "feedback", "backend",
                          "embedder", "workers"}) {
      k.emplace_back(s);
    }
    return k;
  }();
  return keys;
}

KeyValues read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  KeyValues out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto text = trim(line);
    if (text.empty()) continue;
    auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key = value", path.string(), line_no));
    }
    auto key = trim(text.substr(0, eq));
    auto value = trim(text.substr(eq + 1));
    if (!is_known_key(key)) {
      throw ConfigError(fmt::format("{}:{}: unknown config key \"{}\"", path.string(), line_no, key));
    }
    if (is_path_key(key) && !value.empty() && fs::path(value).is_relative()) {
      value = (path.parent_path() / value).lexically_normal().string();
    }
    out[key] = value;
  }
  return out;
}

KeyValues read_env(const std::function<const char*(const char*)>& getenv) {
  KeyValues out;
  for (const auto& key : config_keys()) {
    std::string name = "SKBQA_" + key;
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (const char* v = getenv(name.c_str()); v != nullptr && *v != '\0') out[key] = v;
  }
  return out;
}

RunConfig RunConfig::resolve(const std::vector<KeyValues>& layers) {
  KeyValues merged;
  for (const auto& layer : layers) {
    for (const auto& [k, v] : layer) {
      if (!is_known_key(k)) throw ConfigError("unknown config key \"" + k + "\"");
      merged[k] = v;
    }
  }
  RunConfig c;
  c.prompts = SKBQA_DEFAULT_PROMPTS_DIR;
  c.traces = "traces";
  c.out = ".";
  for (const auto& [k, v] : merged) {
    if (k == "entities") c.entities = v;
    else if (k == "edges") c.edges = v;
    else if (k == "index") c.index = v;
    else if (k == "prompts") c.prompts = v;
    else if (k == "fewshot") c.fewshot = v;
    else if (k == "experiences") c.experiences = v;
    else if (k == "validator_examples") c.validator_examples = v;
    else if (k == "script") c.script = v;
    else if (k == "traces") c.traces = v;
    else if (k == "questions") c.questions = v;
    else if (k == "out") c.out = v;
    else if (k == "max_iterations") c.agent.max_iterations = static_cast<int>(parse_count(k, v));
    else if (k == "top_k") c.agent.top_k = parse_count(k, v);
    else if (k == "radius") c.agent.radius = static_cast<int>(parse_count(k, v));
    else if (k == "validate_n") c.agent.validate_n = parse_count(k, v);
    else if (k == "workers") c.workers = parse_count(k, v);
    else if (k == "feedback") {
      auto mode = feedback_mode_from_string(v);
      if (!mode) {
        throw ConfigError("config key \"feedback\": expected none, simple or corrective, got \"" +
                          v + "\"");
      }
      c.agent.feedback_mode = *mode;
    } else if (k == "backend") {
      if (v != "scripted" && v != "http") {
        throw ConfigError("config key \"backend\": expected scripted or http, got \"" + v + "\"");
      }
      c.backend = v;
    } else if (k == "embedder") {
      if (v != "deterministic" && v != "http") {
        throw ConfigError("config key \"embedder\": expected deterministic or http, got \"" + v +
                          "\"");
      }
      c.embedder = v;
    }
  }
  try {
    c.agent.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("invalid agent settings: ") + e.what());
  }
  if (c.workers < 1) throw ConfigError("config key \"workers\": must be >= 1");
  return c;
}

void RunConfig::require_paths(const std::vector<std::string>& keys) const {
  for (const auto& key : keys) {
    const fs::path* p = nullptr;
    if (key == "entities") p = &entities;
    else if (key == "edges") p = &edges;
    else if (key == "index") p = &index;
    else if (key == "prompts") p = &prompts;
    else if (key == "fewshot") p = &fewshot;
    else if (key == "experiences") p = &experiences;
    else if (key == "validator_examples") p = &validator_examples;
    else if (key == "script") p = &script;
    else if (key == "questions") p = &questions;
    else throw ConfigError("config key \"" + key + "\" is not an input path");
    if (p->empty()) throw ConfigError("config key \"" + key + "\" is required");
    if (!fs::exists(*p)) {
      throw ConfigError("config key \"" + key + "\": path does not exist: " + p->string());
    }
  }
}

void RunConfig::check_services(const std::function<const char*(const char*)>& getenv) const {
  auto set = [&](const char* name) {
    const char* v = getenv(name);
    return v != nullptr && *v != '\0';
  };
  if (backend == "http" && !set("LLM_ENDPOINT")) {
    throw ConfigError("config key \"backend\": http needs LLM_ENDPOINT");
  }
  if (backend == "scripted") require_paths({"script"});
  if (embedder == "http" && !set("EMB_ENDPOINT")) {
    throw ConfigError("config key \"embedder\": http needs EMB_ENDPOINT");
  }
}

namespace {

std::unique_ptr<EmbeddingProvider> make_embedder(const RunConfig& cfg) {
  if (cfg.embedder == "http") return std::make_unique<HttpEmbedder>(HttpEmbedderOptions::from_env());
  return std::make_unique<HashEmbedder>();
}

std::unique_ptr<ChatBackend> make_backend(const RunConfig& cfg) {
  if (cfg.backend == "http") return std::make_unique<HttpChatBackend>(HttpChatOptions::from_env());
  return std::make_unique<ScriptedBackend>(load_script(cfg.script));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw LookupError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw LookupError("cannot write " + p.string());
  out << text;
}

// Everything a question run needs, loaded once per command.
struct Workspace {
  std::optional<Skb> skb;
  std::unique_ptr<EmbeddingProvider> embedder;
  std::optional<DocIndex> index;
  PromptLibrary prompts;
  std::vector<FewShotExample> fewshot;
  std::vector<Experience> experiences;
  std::string validator_examples;
  std::unique_ptr<ChatBackend> backend;

  AgentResources resources() const {
    return AgentResources{*skb, *index, *embedder, prompts, fewshot, experiences,
                          validator_examples, CriticOptions{}, CompletionParams{}};
  }
};

Workspace load_workspace(const RunConfig& cfg,
                         const std::function<const char*(const char*)>& getenv) {
  cfg.require_paths({"entities", "edges", "index", "prompts"});
  cfg.check_services(getenv);
  Workspace w;
  w.skb = load_skb(cfg.entities, cfg.edges);
  w.embedder = make_embedder(cfg);
  w.index = DocIndex::load(cfg.index);
  if (w.index->fingerprint() != w.embedder->fingerprint()) {
    throw ConfigError("config key \"index\": built with " + w.index->fingerprint() +
                      " but the embedder is " + w.embedder->fingerprint());
  }
  w.prompts = PromptLibrary::load(cfg.prompts);
  if (!cfg.fewshot.empty()) {
    cfg.require_paths({"fewshot"});
    w.fewshot = load_fewshot(cfg.fewshot);
  }
  if (!cfg.experiences.empty()) {
    cfg.require_paths({"experiences"});
    w.experiences = load_experiences(cfg.experiences);
  }
  if (w.experiences.empty()) spdlog::warn("no commenter experiences loaded; running zero-shot");
  if (!cfg.validator_examples.empty()) {
    cfg.require_paths({"validator_examples"});
    w.validator_examples = read_file(cfg.validator_examples);
    while (!w.validator_examples.empty() && w.validator_examples.back() == '\n') {
      w.validator_examples.pop_back();
    }
  }
  w.backend = make_backend(cfg);
  return w;
}

std::string describe_mentions(const RoutingDecision& d) {
  if (d.topic_entities.empty()) return "none";
  std::string out;
  for (const auto& m : d.topic_entities) {
    if (!out.empty()) out += "; ";
    out += m.text + " (" + m.etype + ") -> ";
    if (m.ids.empty()) {
      out += "not found";
    } else {
      for (std::size_t i = 0; i < m.ids.size(); ++i) out += (i ? "," : "") + m.ids[i];
    }
  }
  return out;
}

void print_trace(const AnswerTrace& trace, const Skb& skb, std::ostream& out) {
  out << "Question: " << trace.question << "\n";
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto& it = trace.iterations[i];
    out << "\nIteration " << i + 1 << "\n";
    out << "  Route: "
        << (it.decision.selection == Selection::hybrid ? "hybrid retrieval" : "text retrieval")
        << "\n";
    out << "  Topic entities: " << describe_mentions(it.decision) << "\n";
    std::string rels;
    for (const auto& r : it.decision.useful_relations) rels += (rels.empty() ? "" : ", ") + r;
    out << "  Useful relations: " << (rels.empty() ? "none" : rels) << "\n";
    if (it.result.module == ModuleKind::hybrid) {
      out << "  Candidate pool: " << it.result.diagnostics.pool_size << "\n";
    }
    out << "  Top candidates:\n";
    auto n = std::min<std::size_t>(5, it.result.ranked.size());
    if (n == 0) out << "    (none)\n";
    for (std::size_t r = 0; r < n; ++r) {
      const auto& s = it.result.ranked[r];
      std::string name;
      if (auto e = skb.find(s.id)) name = skb.entity(*e).name;
      out << fmt::format("    {}. {:<8} {:.4f}  {}\n", r + 1, s.id, s.score, name);
    }
    out << "  Validator: " << (it.verdict.accepted ? "accepted" : "rejected") << "\n";
    if (!it.feedback_text.empty()) {
      out << "  Feedback";
      if (it.feedback) out << " (" << to_string(it.feedback->error_type) << ")";
      out << ": " << it.feedback_text << "\n";
    }
  }
  out << "\n";
  if (trace.failed) {
    out << "Result: failed (" << trace.error << ")\n";
  } else if (trace.accepted) {
    out << "Result: accepted at iteration " << trace.iterations.size() << "\n";
  } else {
    out << "Result: exhausted after " << trace.iterations.size()
        << " iterations; returning the last retrieval\n";
  }
}

int cmd_build_index(const RunConfig& cfg, std::ostream& out,
                    const std::function<const char*(const char*)>& getenv) {
  cfg.require_paths({"entities", "edges"});
  if (cfg.index.empty()) throw ConfigError("config key \"index\" is required");
  if (cfg.embedder == "http") cfg.check_services(getenv);
  auto skb = load_skb(cfg.entities, cfg.edges);
  auto embedder = make_embedder(cfg);
  auto index = build_index(skb, *embedder);
  if (cfg.index.has_parent_path()) fs::create_directories(cfg.index.parent_path());
  index.save(cfg.index);
  out << "indexed " << index.size() << " documents (" << index.fingerprint() << ") -> "
      << cfg.index.string() << "\n";
  return kExitOk;
}

int cmd_ask(const RunConfig& cfg, const std::string& question, const std::string& id,
            bool as_json, std::ostream& out,
            const std::function<const char*(const char*)>& getenv) {
  auto w = load_workspace(cfg, getenv);
  auto trace = answer(id, question, w.resources(), cfg.agent, *w.backend);
  write_trace(trace, *w.skb, cfg.traces / (id + ".json"));
  if (as_json) {
    out << to_json(trace, *w.skb).dump(2) << "\n";
  } else {
    print_trace(trace, *w.skb, out);
  }
  if (trace.failed) return kExitError;
  return trace.accepted ? kExitOk : kExitExhausted;
}

void write_report(const MetricsReport& report, const fs::path& dir) {
  write_file(dir / "report.json", report.machine_record().dump() + "\n");
  write_file(dir / "report.txt", report.table());
  std::string rows;
  for (const auto& r : report.rows) {
    rows += json{{"id", r.id}, {"hit1", r.hit1}, {"hit5", r.hit5}, {"recall20", r.recall20},
                 {"rr", r.rr}}
                .dump() +
            "\n";
  }
  write_file(dir / "rows.jsonl", rows);
}

int cmd_eval(const RunConfig& cfg, bool as_json, std::ostream& out,
             const std::function<const char*(const char*)>& getenv) {
  cfg.require_paths({"questions"});
  auto w = load_workspace(cfg, getenv);
  auto dataset = load_questions(cfg.questions);
  check_questions(dataset, *w.skb);
  auto traces = run_agent(dataset, w.resources(), cfg.agent, *w.backend, cfg.workers);
  for (const auto& t : traces) {
    if (t.failed) spdlog::warn("{} failed: {}", t.question_id, t.error);
  }
  auto report = report_from_traces(dataset, traces);
  write_report(report, cfg.out);
  if (as_json) {
    out << report.machine_record().dump() << "\n";
  } else {
    out << report.table("Evaluation over " + cfg.questions.string());
  }
  return kExitOk;
}

int cmd_insights(const RunConfig& cfg, bool as_json, std::ostream& out,
                 const std::function<const char*(const char*)>& getenv) {
  cfg.require_paths({"questions"});
  auto w = load_workspace(cfg, getenv);
  auto dataset = load_questions(cfg.questions);
  check_questions(dataset, *w.skb);
  auto res = w.resources();

  auto routing = routing_insight(dataset, res, *w.backend, cfg.agent.top_k, cfg.workers);
  auto ablation = feedback_ablation(
      dataset, res, cfg.agent, *w.backend,
      {FeedbackMode::none, FeedbackMode::simple, FeedbackMode::corrective}, cfg.workers);
  AgentConfig curve_cfg = cfg.agent;
  curve_cfg.feedback_mode = FeedbackMode::corrective;
  auto traces = run_agent(dataset, res, curve_cfg, *w.backend, cfg.workers);
  auto curve = iteration_curve(dataset, traces, curve_cfg.max_iterations);

  json record;
  record["routing"] = {{"text", routing.text.machine_record()},
                       {"graph", routing.graph.machine_record()},
                       {"optimal", routing.optimal.machine_record()}};
  for (const auto& a : ablation) {
    record["feedback"][std::string(to_string(a.mode))] = a.report.machine_record();
  }
  record["iterations"] = curve;
  write_file(cfg.out / "insights.json", record.dump(2) + "\n");

  if (as_json) {
    out << record.dump() << "\n";
    return kExitOk;
  }
  out << "Routing (" << dataset.size() << " questions)\n";
  out << fmt::format("{:<14} {:>8} {:>8}\n", "retriever", "Hit@1", "MRR");
  out << fmt::format("{:<14} {:>8.4f} {:>8.4f}\n", "text (VSS)", routing.text.hit1, routing.text.mrr);
  out << fmt::format("{:<14} {:>8.4f} {:>8.4f}\n", "graph (PPR)", routing.graph.hit1,
                     routing.graph.mrr);
  out << fmt::format("{:<14} {:>8.4f} {:>8.4f}\n", "optimal", routing.optimal.hit1,
                     routing.optimal.mrr);
  out << "\nFeedback type\n";
  out << fmt::format("{:<14} {:>8}\n", "feedback", "Hit@1");
  for (const auto& a : ablation) {
    out << fmt::format("{:<14} {:>8.4f}\n", to_string(a.mode), a.report.hit1);
  }
  out << "\nIterations\n";
  out << fmt::format("{:<14} {:>8}\n", "t", "Hit@1");
  for (std::size_t t = 0; t < curve.size(); ++t) {
    out << fmt::format("{:<14} {:>8.4f}\n", t + 1, curve[t]);
  }
  return kExitOk;
}

int cmd_synth(const SynthParams& params, const ScriptModel& model, const fs::path& dir,
              std::ostream& out) {
  auto suite = generate_synthetic_skb(params);
  auto script = make_synthetic_script(suite, model);
  fs::create_directories(dir);
  write_skb(suite.skb, dir / "entities.jsonl", dir / "edges.jsonl");
  write_questions(suite.dataset(), dir / "questions.jsonl");
  write_script(script.entries, dir / "script.jsonl");
  write_fewshot(synth_fewshot(), dir / "fewshot.jsonl");
  write_file(dir / "run.conf",
             "# generated by skbqa synth\n"
             "entities = entities.jsonl\n"
             "edges = edges.jsonl\n"
             "index = index.jsonl\n"
             "questions = questions.jsonl\n"
             "script = script.jsonl\n"
             "fewshot = fewshot.jsonl\n"
             "backend = scripted\n"
             "embedder = deterministic\n");
  std::size_t hybrid = 0;
  for (const auto& q : suite.questions) hybrid += q.hybrid ? 1 : 0;
  out << fmt::format(
      "wrote {} entities, {} edges, {} questions ({} hybrid, {} text-only), {} script entries "
      "({} corrupted) to {}\n",
      suite.skb.entity_count(), suite.skb.edge_count(), suite.questions.size(), hybrid,
      suite.questions.size() - hybrid, script.entries.size(), script.corrupted.size(),
      dir.string());
  return kExitOk;
}

int cmd_collect(const RunConfig& cfg, const fs::path& dest, std::size_t cap, std::ostream& out,
                const std::function<const char*(const char*)>& getenv) {
  cfg.require_paths({"questions"});
  auto w = load_workspace(cfg, getenv);
  auto dataset = load_questions(cfg.questions);
  check_questions(dataset, *w.skb);
  AgentConfig agent = cfg.agent;
  agent.feedback_mode = FeedbackMode::corrective;
  auto traces = run_agent(dataset, w.resources(), agent, *w.backend, cfg.workers);

  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  ExperienceLog log(dest, true);
  std::size_t recorded = 0;
  for (std::size_t q = 0; q < traces.size() && recorded < cap; ++q) {
    const auto& its = traces[q].iterations;
    const auto& answers = dataset[q].answers;
    for (std::size_t t = 0; t + 1 < its.size() && recorded < cap; ++t) {
      if (its[t].verdict.accepted || !its[t].feedback) continue;
      auto before = its[t].result.ranked_ids();
      auto after = its[t + 1].result.ranked_ids();
      if (hit_at_k(before, answers, 1) == 1 || hit_at_k(after, answers, 1) == 0) continue;
      log.record(experience_from(its[t].decision, *its[t].feedback));
      ++recorded;
    }
  }
  if (recorded == 0) spdlog::warn("no corrected iteration matched the labels; nothing recorded");
  out << "recorded " << recorded << " experiences -> " << dest.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::function<const char*(const char*)>& getenv) {
  CLI::App app{"Hybrid question answering over semi-structured knowledge bases"};
  app.require_subcommand(1);

  std::string config_path;
  std::string backend;
  std::string embedder;
  std::size_t workers = 0;
  bool as_json = false;
  std::vector<std::string> sets;
  std::string verbosity = "warn";
  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--backend", backend, "scripted or http");
  app.add_option("--embedder", embedder, "deterministic or http");
  app.add_option("--workers", workers, "questions evaluated concurrently");
  app.add_flag("--json", as_json, "machine-readable output only");
  app.add_option("--set", sets, "override a config key (key=value)");
  app.add_option("--log-level", verbosity, "trace, debug, info, warn, error or off");

  auto* build = app.add_subcommand("build-index", "embed every entity document into an index");

  auto* ask = app.add_subcommand("ask", "answer one question and show the refinement path");
  std::string question;
  std::string question_id = "ask";
  ask->add_option("question", question, "question text")->required();
  ask->add_option("--id", question_id, "question id used for the trace file");

  auto* eval = app.add_subcommand("eval", "evaluate the agent over a question set");
  std::string questions_flag;
  std::string out_flag;
  eval->add_option("--questions", questions_flag, "questions.jsonl");
  eval->add_option("--out", out_flag, "report directory");

  auto* insights = app.add_subcommand("insights", "routing, feedback and iteration experiments");
  insights->add_option("--questions", questions_flag, "questions.jsonl");
  insights->add_option("--out", out_flag, "report directory");

  auto* synth = app.add_subcommand("synth", "generate a synthetic SKB, questions and script");
  SynthParams sp;
  ScriptModel sm;
  std::string synth_dir = "synthetic";
  synth->add_option("--seed", sp.seed);
  synth->add_option("--authors", sp.authors);
  synth->add_option("--venues", sp.venues);
  synth->add_option("--fields", sp.fields);
  synth->add_option("--base-papers", sp.base_papers);
  synth->add_option("--questions", sp.questions);
  synth->add_option("--text-only-fraction", sp.text_only_fraction);
  synth->add_option("--radius", sp.radius);
  synth->add_option("--corruption-rate", sm.corruption_rate);
  synth->add_option("--redo-fix-rate", sm.redo_fix_rate);
  synth->add_option("--script-seed", sm.seed);
  synth->add_option("--out", synth_dir, "output directory");

  auto* collect = app.add_subcommand("collect-experiences",
                                     "record verified corrective feedback for the commenter");
  std::string collect_out = "experiences.jsonl";
  std::size_t cap = 30;
  collect->add_option("--questions", questions_flag, "labeled questions.jsonl");
  collect->add_option("--out", collect_out, "experiences.jsonl to write");
  collect->add_option("--cap", cap, "maximum experiences recorded");

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("skbqa");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  spdlog::set_level(spdlog::level::from_str(verbosity));

  try {
    if (synth->parsed()) return cmd_synth(sp, sm, synth_dir, out);

    std::vector<KeyValues> layers;
    if (!config_path.empty()) layers.push_back(read_config_file(config_path));
    layers.push_back(read_env(getenv));
    KeyValues flags;
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got \"" + s + "\"");
      flags[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }
    if (!backend.empty()) flags["backend"] = backend;
    if (!embedder.empty()) flags["embedder"] = embedder;
    if (workers > 0) flags["workers"] = std::to_string(workers);
    if (!questions_flag.empty()) flags["questions"] = questions_flag;
    if (!out_flag.empty()) flags["out"] = out_flag;
    layers.push_back(flags);
    auto cfg = RunConfig::resolve(layers);

    if (build->parsed()) return cmd_build_index(cfg, out, getenv);
    if (ask->parsed()) return cmd_ask(cfg, question, question_id, as_json, out, getenv);
    if (eval->parsed()) return cmd_eval(cfg, as_json, out, getenv);
    if (insights->parsed()) return cmd_insights(cfg, as_json, out, getenv);
    if (collect->parsed()) return cmd_collect(cfg, collect_out, cap, out, getenv);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace skbqa::cli
