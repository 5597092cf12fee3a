#include "gecor/synthetic.hpp"

#include <set>
#include <string>

namespace gecor {

namespace {

const std::vector<std::string> kFoods = {"italian", "chinese", "indian",  "british",
                                         "french",  "thai",    "spanish", "korean"};
const std::vector<std::string> kPrices = {"cheap", "moderate", "expensive"};
const std::vector<std::string> kAreas = {"north", "south", "east", "west", "centre"};
const std::vector<std::string> kNameFirst = {"golden", "royal",  "little", "red",    "blue",
                                             "old",    "silver", "lucky",  "green",  "grand",
                                             "happy",  "jade",   "copper", "velvet", "bright"};
const std::vector<std::string> kNameSecond = {"house",  "kitchen", "garden", "table", "lantern",
                                              "dragon", "oak",     "bistro", "spoon", "palace"};
const std::vector<std::string> kStreets = {"mill",   "regent", "castle", "bridge",
                                           "market", "hills",  "king's", "station"};
const std::vector<std::string> kRequestable = {"phone", "address", "postcode"};

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

template <typename T>
const T& choose(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[pick(rng, v.size())];
}

std::string slot_phrase(const std::string& slot) {
  if (slot == "phone") return "phone number";
  return slot;
}

std::string digits(std::mt19937_64& rng, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += char('0' + pick(rng, 10));
  return s;
}

AnnotatedUtterance utterance(const std::string& complete, const std::string& ellipsis,
                             const std::string& coreference, std::mt19937_64& rng) {
  AnnotatedUtterance u;
  u.complete = tokenize(complete);
  if (!ellipsis.empty()) u.ellipsis = tokenize(ellipsis);
  if (!coreference.empty()) u.coreference = tokenize(coreference);
  if (!u.ellipsis && !u.coreference) {
    u.original = u.complete;
    u.label = Label::kComplete;
  } else if (u.ellipsis && (!u.coreference || pick(rng, 2) == 0)) {
    u.original = *u.ellipsis;
    u.label = Label::kEllipsis;
  } else {
    u.original = *u.coreference;
    u.label = Label::kCoreference;
  }
  return u;
}

}  // namespace

KnowledgeBase synthetic_kb(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  KnowledgeBase kb;
  std::set<std::string> names;
  for (const auto& food : kFoods)
    for (const auto& price : kPrices) {
      const std::size_t n = 1 + pick(rng, 3);
      for (std::size_t k = 0; k < n; ++k) {
        KBRecord r;
        do {
          r.name = "the " + choose(rng, kNameFirst) + " " + choose(rng, kNameSecond);
        } while (!names.insert(r.name).second);
        r.food = food;
        r.pricerange = price;
        r.area = choose(rng, kAreas);
        r.phone = "01223 " + digits(rng, 6);
        r.address = std::to_string(1 + pick(rng, 98)) + " " + choose(rng, kStreets) + " road";
        r.postcode = "cb" + std::to_string(1 + pick(rng, 5)) + " " + digits(rng, 1) +
                     char('a' + pick(rng, 26)) + char('a' + pick(rng, 26));
        kb.push_back(std::move(r));
      }
    }
  return kb;
}

Corpus synthetic_dialogues(std::size_t count, std::uint64_t seed, const KnowledgeBase& kb) {
  std::mt19937_64 rng(seed);
  Corpus corpus;
  for (std::size_t d = 0; d < count; ++d) {
    AnnotatedDialogue dia;
    dia.id = "syn-" + std::to_string(d);
    const std::string food = choose(rng, kFoods);
    const bool dontcare = pick(rng, 4) == 0;
    const std::string price = dontcare ? "don't care" : choose(rng, kPrices);
    const std::string slot = choose(rng, kRequestable);
    std::vector<const KBRecord*> matches;
    for (const auto& r : kb)
      if (r.food == food && (dontcare || r.pricerange == price)) matches.push_back(&r);
    if (matches.empty()) throw ContractError("synthetic KB has no " + food + " restaurant");
    const KBRecord& top = *matches.front();

    dia.goal.informable["food"] = food;
    dia.goal.informable["pricerange"] = dontcare ? "dontcare" : price;
    dia.goal.requested = {slot};

    const std::string article = food == "italian" || food == "indian" ? "an" : "a";
    AnnotatedTurn t1;
    t1.user = utterance("i would like " + article + " " + food + " restaurant .", "", "", rng);
    t1.bspan.informable = {food};
    t1.system = tokenize("what price range do you have in mind ?");
    dia.turns.push_back(std::move(t1));

    AnnotatedTurn t2;
    if (dontcare)
      t2.user = utterance("i don't care about the price range .", "i don't care .",
                          "i don't care about it .", rng);
    else
      t2.user = utterance("i want " + price + " " + food + " restaurants .", "i want " + price + " .",
                          "i want " + price + " ones .", rng);
    t2.bspan.informable = {food, price};
    t2.system = tokenize(top.name + " serves " + food + " food in the " + top.area +
                         " part of town . would you like their " + slot_phrase(slot) + " ?");
    dia.turns.push_back(std::move(t2));

    AnnotatedTurn t3;
    t3.user = utterance("yes , i would like the " + slot_phrase(slot) + " please .", "yes , please .",
                        "yes , i would like that please .", rng);
    t3.requested = {slot};
    t3.bspan.informable = {food, price};
    t3.bspan.requestable = {slot};
    t3.system = tokenize("the " + slot_phrase(slot) + " of " + top.name + " is " +
                         *top.attribute(slot) + " .");
    dia.turns.push_back(std::move(t3));
    corpus.push_back(std::move(dia));
  }
  return corpus;
}

std::vector<ResolutionInstance> synthetic_copy_task(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  static const std::vector<std::string> filler = {
      "i",     "you",   "we",    "they",  "want",  "need",   "like",  "see",   "find", "get",
      "the",   "a",     "some",  "this",  "that",  "please", "now",   "today", "here", "there",
      "good",  "nice",  "big",   "small", "new",   "old",    "place", "thing", "one",  "time",
      "can",   "could", "would", "will",  "do",    "does",   "is",    "are",   "was",  "be",
      "about", "for",   "with",  "from",  "to",    "of",     "in",    "on",    "at",   "and",
      "maybe", "sure",  "okay",  "yes",   "no",    "very",   "much",  "more",  "less", "also"};
  std::vector<std::string> entities;
  static const std::vector<std::string> onset = {"b", "d", "f", "g", "k", "l", "m", "n",
                                                 "p", "r", "s", "t", "v", "z"};
  static const std::vector<std::string> vowel = {"a", "e", "i", "o", "u"};
  std::set<std::string> seen;
  std::mt19937_64 name_rng(0x9e3779b9ULL);
  while (entities.size() < 400) {
    std::string w = choose(name_rng, onset) + choose(name_rng, vowel) + choose(name_rng, onset) +
                    choose(name_rng, vowel) + choose(name_rng, onset);
    if (seen.insert(w).second) entities.push_back(w);
  }
  auto sentence = [&](std::size_t lo, std::size_t hi) {
    Tokens s;
    const std::size_t n = lo + pick(rng, hi - lo + 1);
    for (std::size_t i = 0; i < n; ++i) s.push_back(choose(rng, filler));
    return s;
  };

  std::vector<ResolutionInstance> out;
  for (std::size_t k = 0; k < count; ++k) {
    Tokens fragment;
    const std::size_t len = 1 + pick(rng, 3);
    for (std::size_t i = 0; i < len; ++i) fragment.push_back(choose(rng, entities));

    std::vector<Tokens> history;
    const std::size_t turns = 1 + pick(rng, 3);
    const std::size_t holder = pick(rng, turns);
    for (std::size_t t = 0; t < turns; ++t) {
      Tokens seg = sentence(3, 7);
      if (t == holder) seg.insert(seg.begin() + long(pick(rng, seg.size() + 1)), fragment.begin(),
                                  fragment.end());
      history.push_back(std::move(seg));
    }
    Tokens input = sentence(3, 7);
    const std::size_t at = pick(rng, input.size() + 1);
    input.insert(input.begin() + long(at), "it");
    Tokens target(input.begin(), input.begin() + long(at));
    target.insert(target.end(), fragment.begin(), fragment.end());
    target.insert(target.end(), input.begin() + long(at) + 1, input.end());

    ResolutionInstance inst;
    inst.dialogue_id = "copy-" + std::to_string(k);
    inst.turn_index = history.size();
    inst.context = build_context(history, input);
    inst.input = std::move(input);
    inst.target = std::move(target);
    inst.input_complete = false;
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace gecor
