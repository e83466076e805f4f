#pragma once
// Canonical JSON forms of the pipeline's records. Object keys are sorted, so
// dump() output is byte-stable for equal values.

#include <nlohmann/json.hpp>

#include "skbqa/agent.hpp"
#include "skbqa/critic.hpp"
#include "skbqa/retriever.hpp"
#include "skbqa/skb.hpp"

namespace skbqa {

nlohmann::json to_json(const Feedback& f);
Feedback feedback_from_json(const nlohmann::json& j);  // validates

nlohmann::json to_json(const Experience& e);
Experience experience_from_json(const nlohmann::json& j);  // validates

nlohmann::json to_json(const RoutingDecision& d);
nlohmann::json to_json(const ReasoningPath& p, const Skb& skb);
nlohmann::json to_json(const RetrievalResult& r, const Skb& skb);
nlohmann::json to_json(const Verdict& v);
nlohmann::json to_json(const AnswerTrace& t, const Skb& skb);

}  // namespace skbqa
