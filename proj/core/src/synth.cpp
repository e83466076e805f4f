#include "skbqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include <fmt/format.h>

#include "skbqa/agent.hpp"
#include "skbqa/critic.hpp"
#include "skbqa/error.hpp"
#include "skbqa/rng.hpp"
#include "skbqa/vector_index.hpp"

namespace skbqa {

namespace {

constexpr const char* kFirstNames[] = {
    "Ada",   "Boris", "Chen",  "Dana",  "Emil",  "Farah", "Goran", "Hana",  "Ivo",   "Jun",
    "Kira",  "Luis",  "Mira",  "Nils",  "Olga",  "Pavel", "Quinn", "Rosa",  "Sven",  "Tara"};
constexpr const char* kLastNames[] = {
    "Abbott", "Brandt", "Castro", "Dietz",  "Eriksen", "Fischer", "Grimm",  "Holm",
    "Ito",    "Jensen", "Kowal",  "Lindqvist", "Moreau", "Novak",  "Okafor", "Petrov",
    "Quist",  "Rossi",  "Sato",   "Tanaka"};
constexpr const char* kVenueNames[] = {
    "Aster Conference", "Birch Symposium", "Cedar Workshop",  "Dahlia Forum",
    "Elm Conference",   "Fern Symposium",  "Ginkgo Workshop", "Hazel Forum",
    "Iris Conference",  "Juniper Symposium", "Kelp Workshop", "Laurel Forum",
    "Maple Conference", "Nettle Symposium", "Oak Workshop",   "Poppy Forum"};
constexpr const char* kFieldNames[] = {
    "algebra",   "botany",   "chemistry", "demography", "ecology",  "finance",  "geology",
    "histology", "immunology", "linguistics", "mechanics", "neurology", "optics", "pedagogy"};
constexpr const char* kTopicWords[] = {
    "sparse",      "kernel",     "attention",  "bayesian",     "contrastive", "diffusion",
    "federated",   "quantum",    "robust",     "causal",       "temporal",    "spectral",
    "adversarial", "hierarchical", "recurrent", "convolutional", "variational", "probabilistic",
    "symbolic",    "stochastic", "distributed", "multimodal",  "lexical",     "semantic",
    "geometric",   "evolutionary", "incremental", "relational", "streaming",  "topological"};
constexpr const char* kFillerWords[] = {
    "we",      "propose", "method",     "results",   "experiments", "show",      "approach",
    "model",   "data",    "evaluation", "benchmark", "framework",   "analysis",  "performance"};

constexpr std::size_t kTopicCount = std::size(kTopicWords);
constexpr std::size_t kTripleCount = kTopicCount * (kTopicCount - 1) * (kTopicCount - 2) / 6;

std::size_t target_text_only(const SynthParams& p) {
  return static_cast<std::size_t>(std::llround(p.text_only_fraction * static_cast<double>(p.questions)));
}

std::size_t margin(std::size_t n) { return n == 0 ? 0 : n / 3 + 8; }

struct Builder {
  std::vector<Entity> entities;
  std::vector<EdgeRecord> edges;
  std::set<std::vector<std::size_t>> used_triples;
  Rng& rng;
  std::size_t paper_count = 0;

  explicit Builder(Rng& r) : rng(r) {}

  std::vector<std::size_t> fresh_triple() {
    for (;;) {
      std::vector<std::size_t> t;
      while (t.size() < 3) {
        auto w = rng.below(kTopicCount);
        if (std::find(t.begin(), t.end(), w) == t.end()) t.push_back(w);
      }
      std::sort(t.begin(), t.end());
      if (used_triples.insert(t).second) return t;
    }
  }

  std::string fillers(std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      out += ' ';
      out += kFillerWords[rng.below(std::size(kFillerWords))];
    }
    return out;
  }

  std::string add_paper(const std::string& aspect, std::size_t filler_count) {
    ++paper_count;
    auto id = fmt::format("P{:04}", paper_count);
    auto name = fmt::format("Paper {}", paper_count);
    auto doc = fmt::format("{}. It studies {}.{}", name, aspect, fillers(filler_count));
    entities.push_back({id, "paper", name, doc});
    return id;
  }

  void link(const std::string& src, const char* rel, const std::string& dst) {
    edges.push_back({src, rel, dst});
  }
};

std::string phrase(const std::vector<std::size_t>& triple) {
  return fmt::format("{} {} {}", kTopicWords[triple[0]], kTopicWords[triple[1]],
                     kTopicWords[triple[2]]);
}

// Independent check of a generated suite: plain adjacency lists, BFS and
// exhaustive cosine ranking.
class Oracle {
 public:
  Oracle(const std::vector<Entity>& entities, const std::vector<EdgeRecord>& edges, int radius)
      : radius_(radius) {
    HashEmbedder emb;
    for (const auto& e : entities) {
      if (e.doc) docs_[e.id] = emb.embed_one(*e.doc);
    }
    for (const auto& e : edges) {
      if (e.rel != kSynthWrites && e.rel != kSynthPublishedIn) continue;
      adj_[e.src].push_back(e.dst);
      adj_[e.dst].push_back(e.src);
    }
  }

  std::set<std::string> ego(const std::string& seed) const {
    std::map<std::string, int> dist{{seed, 0}};
    std::deque<std::string> queue{seed};
    while (!queue.empty()) {
      auto cur = queue.front();
      queue.pop_front();
      if (dist[cur] == radius_) continue;
      auto it = adj_.find(cur);
      if (it == adj_.end()) continue;
      for (const auto& n : it->second) {
        if (dist.emplace(n, dist[cur] + 1).second) queue.push_back(n);
      }
    }
    std::set<std::string> out;
    for (const auto& [id, d] : dist) {
      if (id != seed) out.insert(id);
    }
    return out;
  }

  // Highest cosine among candidates with documents; ties to the smaller id.
  std::string top(const std::string& question, const std::set<std::string>& candidates) const {
    HashEmbedder emb;
    auto q = emb.embed_one(question);
    std::string best;
    double best_score = -2.0;
    for (const auto& id : candidates) {
      auto it = docs_.find(id);
      if (it == docs_.end()) continue;
      double s = cosine(q, it->second);
      if (s > best_score) {
        best_score = s;
        best = id;
      }
    }
    return best;
  }

  std::set<std::string> all_docs() const {
    std::set<std::string> out;
    for (const auto& [id, v] : docs_) out.insert(id);
    return out;
  }

 private:
  int radius_;
  std::map<std::string, Vector> docs_;
  std::map<std::string, std::vector<std::string>> adj_;
};

}  // namespace

void SynthParams::validate() const {
  if (authors < 2 || authors > std::size(kFirstNames) * std::size(kLastNames)) {
    throw InvalidArgument(fmt::format("authors must be in [2, {}]",
                                      std::size(kFirstNames) * std::size(kLastNames)));
  }
  if (venues < 2 || venues > std::size(kVenueNames)) {
    throw InvalidArgument(fmt::format("venues must be in [2, {}]", std::size(kVenueNames)));
  }
  if (fields < 1 || fields > std::size(kFieldNames)) {
    throw InvalidArgument(fmt::format("fields must be in [1, {}]", std::size(kFieldNames)));
  }
  if (questions < 1) throw InvalidArgument("questions must be >= 1");
  if (!(text_only_fraction >= 0.0 && text_only_fraction <= 1.0)) {
    throw InvalidArgument("text_only_fraction must be in [0, 1]");
  }
  if (radius < 1 || radius > kDefaultRadiusCap) throw InvalidArgument("radius must be 1 or 2");
  auto text_only = target_text_only(*this);
  auto hybrid = questions - text_only;
  auto triples = base_papers + margin(hybrid) + hybrid + margin(text_only) + text_only;
  if (triples > kTripleCount) {
    throw InvalidArgument(fmt::format(
        "infeasible: {} base papers and {} questions need more than {} distinct topics",
        base_papers, questions, kTripleCount));
  }
}

std::vector<QaExample> SynthSuite::dataset() const {
  std::vector<QaExample> out;
  out.reserve(questions.size());
  for (const auto& q : questions) out.push_back(q.qa);
  return out;
}

SynthSuite generate_synthetic_skb(const SynthParams& params) {
  params.validate();
  Rng rng(params.seed);
  Builder b(rng);

  std::vector<std::string> author_ids;
  std::vector<std::string> author_names;
  {
    std::vector<std::size_t> combos(std::size(kFirstNames) * std::size(kLastNames));
    for (std::size_t i = 0; i < combos.size(); ++i) combos[i] = i;
    rng.shuffle(combos);
    for (std::size_t i = 0; i < params.authors; ++i) {
      auto c = combos[i];
      auto name = fmt::format("{} {}", kFirstNames[c / std::size(kLastNames)],
                              kLastNames[c % std::size(kLastNames)]);
      auto id = fmt::format("A{:04}", i + 1);
      b.entities.push_back({id, "author", name, std::nullopt});
      author_ids.push_back(id);
      author_names.push_back(name);
    }
  }
  std::vector<std::string> venue_ids;
  for (std::size_t i = 0; i < params.venues; ++i) {
    auto id = fmt::format("V{:03}", i + 1);
    b.entities.push_back({id, "venue", kVenueNames[i], std::nullopt});
    venue_ids.push_back(id);
  }
  std::vector<std::string> field_ids;
  for (std::size_t i = 0; i < params.fields; ++i) {
    auto id = fmt::format("F{:03}", i + 1);
    b.entities.push_back({id, "field", kFieldNames[i], std::nullopt});
    field_ids.push_back(id);
  }

  auto decorate = [&](const std::string& paper, std::vector<std::string>& papers) {
    b.link(paper, "has_topic", field_ids[rng.below(field_ids.size())]);
    if (!papers.empty()) b.link(paper, "cites", papers[rng.below(papers.size())]);
    papers.push_back(paper);
  };

  std::vector<std::string> papers;
  for (std::size_t i = 0; i < params.base_papers; ++i) {
    auto pid = b.add_paper(phrase(b.fresh_triple()), 2 + rng.below(5));
    auto n_authors = 1 + rng.below(3);
    std::set<std::size_t> chosen;
    while (chosen.size() < n_authors) chosen.insert(rng.below(author_ids.size()));
    for (auto a : chosen) b.link(author_ids[a], kSynthWrites, pid);
    b.link(pid, kSynthPublishedIn, venue_ids[rng.below(venue_ids.size())]);
    decorate(pid, papers);
  }

  const auto text_only = target_text_only(params);
  const auto hybrid = params.questions - text_only;

  std::vector<SynthQuestion> hybrid_candidates;
  for (std::size_t i = 0; i < hybrid + margin(hybrid); ++i) {
    SynthQuestion q;
    auto a = rng.below(author_ids.size());
    auto v = rng.below(venue_ids.size());
    auto v_other = (v + 1 + rng.below(venue_ids.size() - 1)) % venue_ids.size();
    q.aspect = phrase(b.fresh_triple());
    q.author = author_ids[a];
    q.author_name = author_names[a];
    q.venue = venue_ids[v];
    q.venue_name = kVenueNames[v];

    auto target = b.add_paper(q.aspect, 6 + rng.below(4));
    b.link(q.author, kSynthWrites, target);
    if (rng.chance(0.5)) {
      auto co = rng.below(author_ids.size());
      if (co != a) b.link(author_ids[co], kSynthWrites, target);
    }
    b.link(target, kSynthPublishedIn, q.venue);
    decorate(target, papers);

    q.distractor = b.add_paper(q.aspect, 0);
    b.link(q.author, kSynthWrites, q.distractor);
    b.link(q.distractor, kSynthPublishedIn, venue_ids[v_other]);
    decorate(q.distractor, papers);

    q.qa.text = fmt::format("Which paper by {} published in {} is about {}?", q.author_name,
                            q.venue_name, q.aspect);
    q.qa.answers = {target};
    hybrid_candidates.push_back(std::move(q));
  }

  std::vector<SynthQuestion> text_candidates;
  for (std::size_t i = 0; i < text_only + margin(text_only); ++i) {
    SynthQuestion q;
    q.hybrid = false;
    q.aspect = phrase(b.fresh_triple());
    auto target = b.add_paper(q.aspect, 1 + rng.below(3));
    b.link(author_ids[rng.below(author_ids.size())], kSynthWrites, target);
    b.link(target, kSynthPublishedIn, venue_ids[rng.below(venue_ids.size())]);
    decorate(target, papers);
    q.qa.text = fmt::format("Which paper is about {}?", q.aspect);
    q.qa.answers = {target};
    text_candidates.push_back(std::move(q));
  }

  Oracle oracle(b.entities, b.edges, params.radius);
  const auto corpus = oracle.all_docs();
  std::vector<SynthQuestion> accepted_hybrid;
  for (auto& q : hybrid_candidates) {
    if (accepted_hybrid.size() == hybrid) break;
    const auto& answer = q.qa.answers.front();
    auto author_ego = oracle.ego(q.author);
    auto venue_ego = oracle.ego(q.venue);
    std::set<std::string> pool;
    std::set_intersection(author_ego.begin(), author_ego.end(), venue_ego.begin(), venue_ego.end(),
                          std::inserter(pool, pool.end()));
    if (oracle.top(q.qa.text, pool) != answer) continue;
    if (oracle.top(q.qa.text, corpus) == answer) continue;
    if (oracle.top(q.qa.text, author_ego) == answer) continue;
    accepted_hybrid.push_back(std::move(q));
  }
  std::vector<SynthQuestion> accepted_text;
  for (auto& q : text_candidates) {
    if (accepted_text.size() == text_only) break;
    if (oracle.top(q.qa.text, corpus) != q.qa.answers.front()) continue;
    accepted_text.push_back(std::move(q));
  }
  if (accepted_hybrid.size() < hybrid || accepted_text.size() < text_only) {
    throw InvalidArgument(fmt::format(
        "infeasible: certified {} of {} hybrid and {} of {} text-only questions",
        accepted_hybrid.size(), hybrid, accepted_text.size(), text_only));
  }

  std::vector<SynthQuestion> questions;
  for (auto& q : accepted_hybrid) questions.push_back(std::move(q));
  for (auto& q : accepted_text) questions.push_back(std::move(q));
  rng.shuffle(questions);
  for (std::size_t i = 0; i < questions.size(); ++i) {
    questions[i].qa.id = fmt::format("q{:04}", i + 1);
  }

  auto skb = Skb::build(std::move(b.entities), std::move(b.edges),
                        {"author", "paper", "venue", "field"},
                        {kSynthWrites, kSynthPublishedIn, "cites", "has_topic"});
  return SynthSuite{std::move(skb), std::move(questions)};
}

std::string synth_extraction(const SynthQuestion& q, bool corrupted) {
  if (!q.hybrid) return format_extraction({}, {"has_topic"});
  std::vector<Mention> mentions{{q.author_name, "author"}};
  mentions.push_back(corrupted ? Mention{q.aspect, "venue"} : Mention{q.venue_name, "venue"});
  return format_extraction(mentions, {kSynthWrites, kSynthPublishedIn});
}

std::vector<FewShotExample> synth_fewshot() {
  return {
      {"Find the papers that Ada Abbott wrote for Birch Symposium on sparse attention.",
       {{"Ada Abbott", "author"}, {"Birch Symposium", "venue"}},
       {kSynthWrites, kSynthPublishedIn}},
      {"List work about causal streaming models.", {}, {"has_topic"}},
      {"Show publications by Boris Brandt at Cedar Workshop studying robust kernels.",
       {{"Boris Brandt", "author"}, {"Cedar Workshop", "venue"}},
       {kSynthWrites, kSynthPublishedIn}},
      {"Find geology papers that cite work on lexical semantics.",
       {{"geology", "field"}},
       {"has_topic", "cites"}},
      {"List every paper Chen Castro published in Elm Conference.",
       {{"Chen Castro", "author"}, {"Elm Conference", "venue"}},
       {kSynthWrites, kSynthPublishedIn}},
  };
}

SynthScript make_synthetic_script(const SynthSuite& suite, const ScriptModel& model) {
  if (!(model.corruption_rate >= 0.0 && model.corruption_rate <= 1.0) ||
      !(model.redo_fix_rate >= 0.0 && model.redo_fix_rate <= 1.0)) {
    throw InvalidArgument("script model rates must be in [0, 1]");
  }
  Rng rng(model.seed);
  std::vector<std::string> hybrid_ids;
  for (const auto& q : suite.questions) {
    if (q.hybrid) hybrid_ids.push_back(q.qa.id);
  }
  rng.shuffle(hybrid_ids);
  auto n_corrupt = static_cast<std::size_t>(
      std::llround(model.corruption_rate * static_cast<double>(hybrid_ids.size())));
  std::vector<std::string> corrupted(hybrid_ids.begin(),
                                     hybrid_ids.begin() + static_cast<std::ptrdiff_t>(n_corrupt));
  rng.shuffle(corrupted);
  auto n_fix = static_cast<std::size_t>(
      std::llround(model.redo_fix_rate * static_cast<double>(corrupted.size())));

  SynthScript out;
  out.corrupted.insert(corrupted.begin(), corrupted.end());
  out.redo_fixed.insert(corrupted.begin(), corrupted.begin() + static_cast<std::ptrdiff_t>(n_fix));

  auto add = [&](std::string match, std::string response) {
    ScriptEntry e;
    e.substring = std::move(match);
    e.response = std::move(response);
    out.entries.push_back(std::move(e));
  };
  for (const auto& q : suite.questions) {
    const auto& text = q.qa.text;
    bool bad = out.corrupted.count(q.qa.id) > 0;
    auto correct = synth_extraction(q, false);
    add("Question: " + text, bad ? synth_extraction(q, true) : correct);
    add("Question: " + text + "\nBased on the extracted",
        q.hybrid ? "knowledge graph" : "text documents");
    const auto& doc = suite.skb.entity(suite.skb.require(q.qa.answers.front())).doc.value();
    add("### Question: " + text + "\n### Document: " + doc, "yes");
    add("### Question: " + text + "\n### Document:", "no");
    if (!bad) continue;
    add("Question: " + text + "\nTopic Entities: " + q.author_name + " (author), " + q.aspect +
            " (venue)",
        "Entity " + q.aspect + " is incorrect.");
    auto corrective =
        render_feedback(ErrorType::IncorrectEntityRelation, FeedbackTarget{TargetKind::entity, q.aspect});
    add("Feedback: " + corrective + "\nQuestion: " + text, correct);
    if (out.redo_fixed.count(q.qa.id) > 0) {
      add(std::string("Feedback: ") + kSimpleFeedback + "\nQuestion: " + text, correct);
    }
  }
  return out;
}

}  // namespace skbqa
