#include "skbqa/router.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "skbqa/error.hpp"

namespace skbqa {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Returns the remainder after "<keyword>:" when line starts with it.
std::optional<std::string_view> after_keyword(std::string_view line, std::string_view keyword) {
  if (line.size() <= keyword.size()) return std::nullopt;
  if (to_lower_ascii(line.substr(0, keyword.size())) != keyword) return std::nullopt;
  auto rest = trim(line.substr(keyword.size()));
  if (rest.empty() || rest.front() != ':') return std::nullopt;
  return trim(rest.substr(1));
}

std::optional<std::string> match_label(std::string_view label,
                                       const std::vector<std::string>& labels) {
  auto want = to_lower_ascii(label);
  for (const auto& l : labels) {
    if (to_lower_ascii(l) == want) return l;
  }
  return std::nullopt;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

ExtractionParse parse_extraction(std::string_view text, const Skb& skb) {
  ExtractionParse out;
  auto reject = [&](std::string_view line) {
    out.rejected_lines.emplace_back(line);
    out.parse_ok = false;
  };
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    auto line = trim(raw);
    if (line.empty()) continue;

    if (auto body = after_keyword(line, "entity")) {
      auto open = body->rfind('(');
      if (body->empty() || body->back() != ')' || open == std::string_view::npos || open == 0) {
        reject(line);
        continue;
      }
      auto mention = trim(body->substr(0, open));
      auto etype = trim(body->substr(open + 1, body->size() - open - 2));
      auto canonical = match_label(etype, skb.entity_types());
      if (mention.empty() || !canonical) {
        reject(line);
        continue;
      }
      Mention m{std::string(mention), *canonical};
      bool dup = std::any_of(out.mentions.begin(), out.mentions.end(), [&](const Mention& o) {
        return o.etype == m.etype && to_lower_ascii(o.text) == to_lower_ascii(m.text);
      });
      if (!dup) out.mentions.push_back(std::move(m));
    } else if (auto body = after_keyword(line, "relation")) {
      auto canonical = match_label(*body, skb.relation_types());
      if (!canonical) {
        reject(line);
        continue;
      }
      if (std::find(out.relations.begin(), out.relations.end(), *canonical) == out.relations.end()) {
        out.relations.push_back(*canonical);
      }
    } else {
      reject(line);
    }
  }
  return out;
}

Selection parse_selection(std::string_view text, bool have_entities) {
  auto lower = to_lower_ascii(text);
  if (lower.find("knowledge graph") != std::string::npos) return Selection::hybrid;
  if (lower.find("text") != std::string::npos) return Selection::text;
  return have_entities ? Selection::hybrid : Selection::text;
}

std::vector<FewShotExample> load_fewshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot open few-shot file " + path.string());
  std::vector<FewShotExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      FewShotExample ex;
      ex.question = j.at("question").get<std::string>();
      for (const auto& e : j.at("entities")) {
        ex.entities.push_back({e.at("mention").get<std::string>(), e.at("type").get<std::string>()});
      }
      ex.relations = j.at("relations").get<std::vector<std::string>>();
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

void write_fewshot(const std::vector<FewShotExample>& examples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LookupError("cannot write " + path.string());
  for (const auto& ex : examples) {
    json ents = json::array();
    for (const auto& m : ex.entities) ents.push_back({{"mention", m.text}, {"type", m.etype}});
    out << json{{"question", ex.question}, {"entities", ents}, {"relations", ex.relations}}.dump()
        << '\n';
  }
}

std::string format_extraction(const std::vector<Mention>& mentions,
                              const std::vector<std::string>& relations) {
  std::string out;
  for (const auto& m : mentions) out += "Entity: " + m.text + " (" + m.etype + ")\n";
  for (const auto& r : relations) out += "Relation: " + r + "\n";
  if (!out.empty()) out.pop_back();
  return out;
}

std::string render_fewshot(const std::vector<FewShotExample>& examples) {
  std::string out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += "Question: " + examples[i].question + "\n";
    out += format_extraction(examples[i].entities, examples[i].relations);
  }
  return out;
}

Router::Router(const Skb& skb, const PromptLibrary& prompts, std::vector<FewShotExample> examples,
               ChatBackend& backend, CompletionParams params)
    : skb_(skb),
      prompts_(prompts),
      examples_text_(render_fewshot(examples)),
      backend_(backend),
      params_(params) {}

RoutingDecision Router::ground(const ExtractionParse& parse) const {
  RoutingDecision d;
  for (const auto& m : parse.mentions) {
    GroundedMention g{m.text, m.etype, {}};
    for (auto e : skb_.resolve_by_name(m.text)) g.ids.push_back(skb_.entity(e).id);
    d.topic_entities.push_back(std::move(g));
  }
  d.useful_relations = parse.relations;
  return d;
}

RoutingDecision Router::route(std::string_view question, const std::string* feedback,
                              Transcript& transcript) {
  std::map<std::string, std::string> vars{{"question", std::string(question)}};
  std::string prompt;
  if (transcript.empty()) {
    vars["examples"] = examples_text_;
    vars["entity_types"] = join(skb_.entity_types(), ", ");
    vars["relation_types"] = join(skb_.relation_types(), ", ");
    prompt = prompts_.render(PromptLibrary::kRouterExtract, vars);
  } else {
    if (feedback == nullptr || feedback->empty()) {
      throw InvalidArgument("route: a continued router transcript needs feedback");
    }
    vars["feedback"] = *feedback;
    prompt = prompts_.render(PromptLibrary::kRouterReflect, vars);
  }
  transcript.add_user(std::move(prompt));
  std::string extraction = backend_.complete(transcript, params_);
  transcript.add_assistant(extraction);

  auto parse = parse_extraction(extraction, skb_);
  RoutingDecision decision = ground(parse);

  transcript.add_user(prompts_.render(PromptLibrary::kRouterSelect, vars));
  std::string selection = backend_.complete(transcript, params_);
  transcript.add_assistant(selection);

  decision.selection = parse_selection(selection, !decision.topic_entities.empty());
  decision.raw_llm_text = extraction + "\n\n" + selection;
  return decision;
}

}  // namespace skbqa
