#pragma once

#include <cstdint>
#include <vector>

#include "gecor/corpus.hpp"

namespace gecor {

// Restaurant KB with records for every food × price-range combination.
KnowledgeBase synthetic_kb(std::uint64_t seed);

// Three-turn restaurant dialogues shaped like the running example: a food
// request, a price range given elliptically or anaphorically ("i want cheap
// ones ."), then a bare confirmation that requests a slot ("yes , please .").
// Every turn carries complete/ellipsis/co-reference versions, the belief span
// and the delexicalizable system response built from `kb`.
Corpus synthetic_dialogues(std::size_t count, std::uint64_t seed, const KnowledgeBase& kb);

// Copy task: the context holds one entity fragment of 1–3 tokens among filler
// turns and ends with the current utterance, which mentions "it"; the target
// replaces "it" with the fragment.
std::vector<ResolutionInstance> synthetic_copy_task(std::size_t count, std::uint64_t seed);

}  // namespace gecor
