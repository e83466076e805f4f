#include "skbqa/serialize.hpp"

#include "skbqa/error.hpp"

namespace skbqa {

using json = nlohmann::json;

json to_json(const Feedback& f) {
  json j;
  j["error_source"] = std::string(to_string(f.error_source));
  j["error_type"] = std::string(to_string(f.error_type));
  j["rendered"] = f.rendered;
  if (f.target) {
    std::string kind = f.target->kind == TargetKind::entity     ? "entity"
                       : f.target->kind == TargetKind::relation ? "relation"
                                                                : "either";
    j["target"] = {{"kind", kind}, {"name", f.target->name}};
  } else {
    j["target"] = nullptr;
  }
  return j;
}

Feedback feedback_from_json(const json& j) {
  auto type = error_type_from_string(j.at("error_type").get<std::string>());
  if (!type) throw InvalidArgument("unknown error_type " + j.at("error_type").dump());
  std::optional<FeedbackTarget> target;
  if (j.contains("target") && !j["target"].is_null()) {
    const auto& t = j["target"];
    auto kind = t.at("kind").get<std::string>();
    FeedbackTarget ft;
    if (kind == "entity") {
      ft.kind = TargetKind::entity;
    } else if (kind == "relation") {
      ft.kind = TargetKind::relation;
    } else if (kind == "either") {
      ft.kind = TargetKind::either;
    } else {
      throw InvalidArgument("unknown target kind \"" + kind + "\"");
    }
    ft.name = t.at("name").get<std::string>();
    target = ft;
  }
  Feedback f;
  f.error_type = *type;
  f.error_source = source_of(*type);
  f.target = target;
  f.rendered = j.at("rendered").get<std::string>();
  if (j.contains("error_source") &&
      j["error_source"].get<std::string>() != to_string(f.error_source)) {
    throw InvalidArgument("error_source does not match error_type");
  }
  if (!feedback_is_valid(f)) throw InvalidArgument("feedback text does not match its template");
  return f;
}

json to_json(const Experience& e) {
  json ents = json::array();
  for (const auto& [mention, etype] : e.entities) ents.push_back({{"text", mention}, {"type", etype}});
  return {{"selection", std::string(to_string(e.selection))},
          {"entities", ents},
          {"relations", e.relations},
          {"feedback", to_json(e.feedback)}};
}

Experience experience_from_json(const json& j) {
  Experience e;
  auto sel = j.at("selection").get<std::string>();
  if (sel == "hybrid") {
    e.selection = Selection::hybrid;
  } else if (sel == "text") {
    e.selection = Selection::text;
  } else {
    throw InvalidArgument("unknown selection \"" + sel + "\"");
  }
  for (const auto& ent : j.at("entities")) {
    e.entities.emplace_back(ent.at("text").get<std::string>(), ent.at("type").get<std::string>());
  }
  e.relations = j.at("relations").get<std::vector<std::string>>();
  e.feedback = feedback_from_json(j.at("feedback"));
  return e;
}

json to_json(const RoutingDecision& d) {
  json mentions = json::array();
  for (const auto& m : d.topic_entities) {
    mentions.push_back({{"text", m.text}, {"type", m.etype}, {"ids", m.ids}});
  }
  return {{"selection", std::string(to_string(d.selection))},
          {"topic_entities", mentions},
          {"useful_relations", d.useful_relations},
          {"raw_llm_text", d.raw_llm_text}};
}

json to_json(const ReasoningPath& p, const Skb& skb) {
  json nodes = json::array();
  for (auto n : p.nodes) nodes.push_back(skb.entity(n).id);
  json rels = json::array();
  for (auto r : p.rels) rels.push_back(skb.relation_label(r));
  return {{"nodes", nodes}, {"relations", rels}, {"text", skb.verbalize(p)}};
}

json to_json(const RetrievalResult& r, const Skb& skb) {
  json ranked = json::array();
  for (const auto& s : r.ranked) ranked.push_back({{"id", s.id}, {"score", s.score}});
  json paths = json::object();
  for (const auto& [id, ps] : r.per_candidate_paths) {
    json list = json::array();
    for (const auto& p : ps.paths) list.push_back(to_json(p, skb));
    paths[id] = {{"paths", list}, {"truncated", ps.truncated}};
  }
  return {{"module", std::string(to_string(r.module))},
          {"ranked", ranked},
          {"candidate_pool", r.candidate_pool},
          {"paths", paths},
          {"diagnostics",
           {{"empty_extraction", r.diagnostics.empty_extraction},
            {"empty_intersection", r.diagnostics.empty_intersection},
            {"pool_size", r.diagnostics.pool_size},
            {"truncated_paths", r.diagnostics.truncated_paths}}}};
}

json to_json(const Verdict& v) {
  return {{"accepted", v.accepted}, {"validated_count", v.validated_count}, {"raw", v.raw}};
}

json to_json(const AnswerTrace& t, const Skb& skb) {
  json iterations = json::array();
  for (std::size_t i = 0; i < t.iterations.size(); ++i) {
    const auto& it = t.iterations[i];
    iterations.push_back({{"t", i + 1},
                          {"decision", to_json(it.decision)},
                          {"result", to_json(it.result, skb)},
                          {"verdict", to_json(it.verdict)},
                          {"feedback", it.feedback ? to_json(*it.feedback) : json(nullptr)},
                          {"feedback_text", it.feedback_text},
                          {"commenter_used_llm", it.commenter_used_llm}});
  }
  json calls = json::object();
  for (const auto& [role, n] : t.llm_calls) calls[std::string(to_string(role))] = n;
  json exchanges = json::array();
  for (const auto& c : t.calls) {
    exchanges.push_back(
        {{"role", std::string(to_string(c.role))}, {"prompt", c.prompt}, {"response", c.response}});
  }
  return {{"question_id", t.question_id},
          {"question", t.question},
          {"iterations", iterations},
          {"final", to_json(t.final, skb)},
          {"accepted", t.accepted},
          {"failed", t.failed},
          {"error", t.error},
          {"llm_calls", calls},
          {"exchanges", exchanges}};
}

}  // namespace skbqa
