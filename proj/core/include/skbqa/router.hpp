#pragma once
// Question routing: extract topic entities and useful relations with a
// few-shot prompt, then ask which retrieval module narrows the search. Later
// iterations re-extract from the critic's feedback in the same transcript.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "skbqa/llm.hpp"
#include "skbqa/retriever.hpp"
#include "skbqa/skb.hpp"

namespace skbqa {

struct Mention {
  std::string text;
  std::string etype;
  friend bool operator==(const Mention&, const Mention&) = default;
};

struct ExtractionParse {
  std::vector<Mention> mentions;
  std::vector<std::string> relations;
  std::vector<std::string> rejected_lines;
  bool parse_ok = true;
};

// Grammar, one item per line, keywords case-insensitive:
//   Entity: <mention> (<entity type>)
//   Relation: <relation type>
// Types and relations are matched case-insensitively against the schema and
// stored in schema spelling. Blank lines are ignored; any other line is
// rejected and clears parse_ok.
ExtractionParse parse_extraction(std::string_view text, const Skb& skb);

// "knowledge graph" -> hybrid, "text" -> text, both -> hybrid; otherwise
// hybrid when entities were extracted, else text.
Selection parse_selection(std::string_view text, bool have_entities);

struct FewShotExample {
  std::string question;
  std::vector<Mention> entities;
  std::vector<std::string> relations;
};

std::vector<FewShotExample> load_fewshot(const std::filesystem::path& path);
void write_fewshot(const std::vector<FewShotExample>& examples, const std::filesystem::path& path);
std::string render_fewshot(const std::vector<FewShotExample>& examples);
// Extraction answer in the parse_extraction grammar.
std::string format_extraction(const std::vector<Mention>& mentions,
                              const std::vector<std::string>& relations);

class Router {
 public:
  Router(const Skb& skb, const PromptLibrary& prompts, std::vector<FewShotExample> examples,
         ChatBackend& backend, CompletionParams params = {});

  // Two backend calls: extraction (router_extract on a fresh transcript,
  // router_reflect when feedback is given) then selection (router_select).
  RoutingDecision route(std::string_view question, const std::string* feedback,
                        Transcript& transcript);

  RoutingDecision ground(const ExtractionParse& parse) const;

 private:
  const Skb& skb_;
  const PromptLibrary& prompts_;
  std::string examples_text_;
  ChatBackend& backend_;
  CompletionParams params_;
};

}  // namespace skbqa
