#pragma once
// Synthetic author/paper/venue SKBs with certified hybrid and text-only
// questions, plus scripted router/critic responses implementing an
// extraction-corruption error model.

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "skbqa/eval.hpp"
#include "skbqa/llm.hpp"
#include "skbqa/router.hpp"
#include "skbqa/skb.hpp"

namespace skbqa {

struct SynthParams {
  std::uint64_t seed = 7;
  std::size_t authors = 40;
  std::size_t venues = 8;
  std::size_t fields = 10;
  std::size_t base_papers = 120;
  std::size_t questions = 200;
  double text_only_fraction = 0.25;
  int radius = 2;

  // Throws InvalidArgument for infeasible combinations.
  void validate() const;
};

// Hybrid questions ask for the paper by `author` in `venue` about `aspect`;
// text-only questions ask only about `aspect`.
struct SynthQuestion {
  QaExample qa;
  bool hybrid = true;
  std::string author;  // entity ids, empty for text-only
  std::string venue;
  std::string author_name;
  std::string venue_name;
  std::string aspect;
  std::string distractor;  // same aspect, same author, other venue
};

struct SynthSuite {
  Skb skb;
  std::vector<SynthQuestion> questions;

  std::vector<QaExample> dataset() const;
};

inline constexpr const char* kSynthWrites = "writes";
inline constexpr const char* kSynthPublishedIn = "published_in";

// Deterministic in params. Every emitted hybrid question is checked with an
// independent brute-force pipeline (BFS ego-graphs, intersection, exhaustive
// cosine ranking): the answer must rank first in the hybrid pool, must not
// rank first under whole-corpus text search, and must not rank first when the
// venue is dropped. Text-only answers must rank first under text search.
SynthSuite generate_synthetic_skb(const SynthParams& params);

// Router extraction for a question: the correct one, or the corrupted one
// that swaps the venue mention for the textual aspect.
std::string synth_extraction(const SynthQuestion& q, bool corrupted);
std::vector<FewShotExample> synth_fewshot();

struct ScriptModel {
  double corruption_rate = 0.5;  // fraction of hybrid questions corrupted on iteration 1
  double redo_fix_rate = 0.5;    // fraction of corrupted questions a generic redo fixes
  std::uint64_t seed = 11;
};

struct SynthScript {
  std::vector<ScriptEntry> entries;
  std::set<std::string> corrupted;   // question ids
  std::set<std::string> redo_fixed;  // subset of corrupted
};

// Exactly round(rate * n) questions are picked for each set. Corrected
// extractions are scripted only behind the matching corrective feedback
// sentence, or behind the generic redo message for redo_fixed questions. The
// validator accepts exactly when the answer document leads the context.
SynthScript make_synthetic_script(const SynthSuite& suite, const ScriptModel& model);

}  // namespace skbqa
