#include <gtest/gtest.h>

#include <cmath>

#include "gecor/dialogue_model.hpp"
#include "gecor/synthetic.hpp"
#include "support/oracles.hpp"

using namespace gecor;
using gecor::testing::italian_dialogue;
using gecor::testing::italian_kb;
using gecor::testing::toy_vocab;

namespace {

const ModelDims kTiny{4, 3};

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

DialogueTurnInstance toy_turn() {
  DialogueTurnInstance turn;
  turn.input = {"the", "it"};
  turn.context = {"a", "b", kSep, "c", kSep, "the", "it"};
  turn.complete = {"the", "a", "b"};
  turn.input_complete = false;
  turn.previous_bspan.informable = {"a"};
  turn.bspan.informable = {"a", "b"};
  turn.bspan.requestable = {"phone"};
  turn.response = {"name_SLOT", "c"};
  turn.kb = KBVector::from_count(2);
  return turn;
}

// A vocabulary covering the Italian-restaurant dialogue and its delexicalized responses.
Vocabulary italian_vocab() {
  const Corpus c = {italian_dialogue()};
  return build_vocab(dialogue_vocabulary_sequences(c, italian_kb()), 800);
}

std::vector<std::vector<double>> grads(const ParameterSet& ps) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : ps.items())
    out.emplace_back(t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                  : std::vector<double>(t.size(), 0.0));
  return out;
}

}  // namespace

// ---- belief span --------------------------------------------------------------

TEST(BeliefSpan, WireFormat) {
  BeliefSpan s;
  s.informable = {"italian", "cheap"};
  s.requestable = {"phone"};
  EXPECT_EQ(s.str(), "⟨inf⟩ italian , cheap ⟨/inf⟩ ; ⟨req⟩ phone ⟨/req⟩");
  EXPECT_EQ(BeliefSpan{}.str(), "⟨inf⟩ ⟨/inf⟩ ; ⟨req⟩ ⟨/req⟩");
}

TEST(BeliefSpan, RoundTripsIncludingMultiWordValues) {
  BeliefSpan s;
  s.informable = {"modern european", "don't care"};
  s.requestable = {"address", "postcode"};
  EXPECT_EQ(BeliefSpan::parse(s.str()), s);
  EXPECT_EQ(BeliefSpan::from_tokens(s.tokens()), s);
}

TEST(BeliefSpan, ToleratesMissingSectionsAndNoise) {
  EXPECT_EQ(BeliefSpan::parse("⟨inf⟩ thai ⟨/inf⟩").informable, (std::vector<std::string>{"thai"}));
  EXPECT_TRUE(BeliefSpan::parse("⟨req⟩ phone ⟨/req⟩").informable.empty());
  EXPECT_EQ(BeliefSpan::parse("⟨req⟩ phone ⟨/req⟩").requestable, (std::vector<std::string>{"phone"}));
  EXPECT_TRUE(BeliefSpan::parse("garbage words").empty());
  EXPECT_TRUE(BeliefSpan::parse("").empty());
}

// ---- KB ------------------------------------------------------------------------

TEST(KBVector, BucketsAreOneHot) {
  const std::size_t expected[] = {0, 1, 2, 3, 4, 4, 4};
  for (std::size_t n = 0; n < 7; ++n) {
    auto k = KBVector::from_count(n == 6 ? 1000 : n);
    EXPECT_EQ(k.bucket, expected[n]);
    double total = 0.0;
    for (double v : k.onehot) total += v;
    EXPECT_EQ(total, 1.0);
    EXPECT_EQ(k.onehot[k.bucket], 1.0);
    EXPECT_EQ(k.tensor().size(), 5u);
  }
}

TEST(KBMatch, EmptyConstraintsMatchEverything) {
  auto m = kb_match(BeliefSpan{}, italian_kb());
  EXPECT_EQ(m.records.size(), 5u);
  EXPECT_EQ(m.vector.bucket, 4u);
}

TEST(KBMatch, MatchesBruteForceFilter) {
  const auto kb = italian_kb();
  for (const auto& constraints : std::vector<std::vector<std::string>>{
           {"italian", "cheap"}, {"chinese"}, {"south"}, {"italian", "north"}, {"cheap", "centre"}}) {
    BeliefSpan span;
    span.informable = constraints;
    std::vector<std::size_t> expect;
    for (std::size_t r = 0; r < kb.size(); ++r) {
      bool all = true;
      for (const auto& v : constraints)
        all = all && (kb[r].food == v || kb[r].pricerange == v || kb[r].area == v);
      if (all) expect.push_back(r);
    }
    auto m = kb_match(span, kb);
    EXPECT_EQ(m.records, expect);
    EXPECT_EQ(m.vector.bucket, std::min<std::size_t>(expect.size(), 4));
  }
}

TEST(KBMatch, UniqueRecordGivesBucketOne) {
  KnowledgeBase kb = italian_kb();
  kb.pop_back();  // leaves one cheap italian place
  BeliefSpan span;
  span.informable = {"italian", "cheap"};
  auto m = kb_match(span, kb);
  EXPECT_EQ(m.records, (std::vector<std::size_t>{0}));
  EXPECT_EQ(m.vector.bucket, 1u);
}

TEST(KBMatch, UnknownValueGivesBucketZero) {
  BeliefSpan span;
  span.informable = {"italian", "martian"};
  EXPECT_EQ(kb_match(span, italian_kb()).vector.bucket, 0u);
}

TEST(KBMatch, DontCareMatchesAnything) {
  for (const char* v : {"dontcare", "don't care", "dont care", "any"}) {
    BeliefSpan span;
    span.informable = {"chinese", v};
    EXPECT_EQ(kb_match(span, italian_kb()).records.size(), 2u) << v;
  }
}

TEST(Delexicalize, ReplacesKbValuesLongestFirst) {
  const auto kb = italian_kb();
  const Tokens sys = tokenize(
      "Pizza Hut Cherry Hinton serves Italian food in the south part of town. Their phone is 01223 323737.");
  EXPECT_EQ(detokenize(delexicalize(sys, kb)),
            "name_SLOT serves food_SLOT food in the area_SLOT part of town . their phone is phone_SLOT .");
}

TEST(Delexicalize, LeavesOtherWordsAlone) {
  const Tokens sys = tokenize("what price range do you have in mind ?");
  EXPECT_EQ(delexicalize(sys, italian_kb()), sys);
}

TEST(Relexicalize, FillsFromTopRecord) {
  const auto kb = italian_kb();
  auto r = relexicalize({"name_SLOT", "is", "on", "phone_SLOT"}, &kb[0]);
  EXPECT_FALSE(r.unresolved);
  EXPECT_EQ(detokenize(r.tokens), "pizza hut cherry hinton is on 01223 323737");
}

TEST(Relexicalize, NoMatchLeavesPlaceholdersAndFlags) {
  auto r = relexicalize({"name_SLOT", "is", "nice"}, nullptr);
  EXPECT_TRUE(r.unresolved);
  EXPECT_EQ(r.tokens, (Tokens{"name_SLOT", "is", "nice"}));
  EXPECT_FALSE(relexicalize({"hello"}, nullptr).unresolved);
}

// ---- instances -------------------------------------------------------------------

TEST(DialogueTurns, ItalianExampleGoldSpansAndPreviousSpans) {
  const Corpus c = {italian_dialogue()};
  const auto turns = assemble_dialogue_turns(c, Condition::kCoreference, 0, italian_kb());
  ASSERT_EQ(turns.size(), 3u);
  EXPECT_TRUE(turns[0].previous_bspan.empty());
  EXPECT_EQ(turns[1].bspan.str(), "⟨inf⟩ italian , cheap ⟨/inf⟩ ; ⟨req⟩ ⟨/req⟩");
  EXPECT_EQ(turns[1].previous_bspan, c[0].turns[0].bspan);
  EXPECT_EQ(turns[1].kb.bucket, 2u);
  EXPECT_EQ(turns[1].response[0], "name_SLOT");
  EXPECT_EQ(turns[2].complete, tokenize("Yes, I would like the phone number please."));
}

TEST(DialogueState, ContextTokensJoinWithSeparators) {
  DialogueState s;
  EXPECT_TRUE(s.context_tokens().empty());
  s.history = {{"a"}, {"b", "c"}};
  EXPECT_EQ(s.context_tokens(), (Tokens{"a", kSep, "b", "c"}));
}

// ---- encoders and decoders ---------------------------------------------------------

TEST(EncodeTurn, FirstTurnAppendsEmptySpan) {
  DialogueModel m(toy_vocab(), 1, kTiny);
  Tape tape(false);
  auto enc = m.encode_turn(tape, {"the", "it"}, BeliefSpan{}, {"the", "it"});
  Tokens expect = {"the", "it", kSep};
  for (const auto& t : BeliefSpan{}.tokens()) expect.push_back(t);
  EXPECT_EQ(enc.encoder_input, expect);
  EXPECT_EQ(enc.utterance_states.shape(), (Shape{expect.size(), 6}));
  EXPECT_EQ(enc.context_states.shape(), (Shape{2, 6}));
}

TEST(EncodeTurn, PriorSpanValuesReachTheEncoder) {
  const auto d = italian_dialogue();
  DialogueModel m(italian_vocab(), 1, kTiny);
  Tape tape(false);
  auto enc = m.encode_turn(tape, d.turns[1].user.original, d.turns[0].bspan,
                           build_context(d, 1, Condition::kCoreference));
  EXPECT_NE(std::find(enc.encoder_input.begin(), enc.encoder_input.end(), "italian"), enc.encoder_input.end());
}

TEST(DecodeBspan, FinalStateWidthAndEosMemoryRow) {
  DialogueModel m(toy_vocab(), 2, kTiny);
  Tape tape(false);
  auto turn = toy_turn();
  auto enc = m.encode_turn(tape, turn.input, turn.previous_bspan, turn.context);
  const Tokens gold = turn.bspan.tokens();
  auto t1 = m.decode_bspan(tape, enc, &gold);
  EXPECT_EQ(t1.final_state.size(), 3u);
  EXPECT_EQ(t1.tokens.back(), kEos);
  EXPECT_EQ(t1.steps, gold.size() + 1);
  EXPECT_EQ(t1.memory.shape(), (Shape{gold.size() + 1, 3 + 4}));
  auto greedy = m.decode_bspan(tape, enc, nullptr, {}, 5);
  EXPECT_LE(greedy.tokens.size(), 6u);
  EXPECT_EQ(greedy.tokens.back(), kEos);
}

TEST(DecodeComplete, ThreeWayDistributionIsNormalized) {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    DialogueModel m(toy_vocab(), seed, kTiny);
    Tape tape(false);
    auto turn = toy_turn();
    auto enc = m.encode_turn(tape, turn.input, turn.previous_bspan, turn.context);
    const Tokens gold = turn.bspan.tokens();
    auto t1 = m.decode_bspan(tape, enc, &gold);
    auto d = m.complete_distribution(tape, enc, t1, kGo, t1.final_state);
    EXPECT_NEAR(d.total_mass(), 1.0, 1e-9);
    ASSERT_EQ(d.sources.size(), 2u);
  }
}

TEST(DecodeComplete, SharedTokenCollectsAllThreeMasses) {
  DialogueModel m(toy_vocab(), 4, kTiny);
  Tape tape(false);
  auto turn = toy_turn();
  auto enc = m.encode_turn(tape, turn.input, turn.previous_bspan, turn.context);
  const Tokens gold = turn.bspan.tokens();  // contains "a", as does the context
  auto t1 = m.decode_bspan(tape, enc, &gold);
  auto d = m.complete_distribution(tape, enc, t1, kGo, t1.final_state);
  double c1 = 0.0, c2 = 0.0;
  for (std::size_t i = 0; i < t1.tokens.size(); ++i)
    if (t1.tokens[i] == "a") c1 += d.copy[0][i];
  for (std::size_t i = 0; i < enc.context.size(); ++i)
    if (enc.context[i] == "a") c2 += d.copy[1][i];
  EXPECT_GT(c1, 0.0);
  EXPECT_GT(c2, 0.0);
  EXPECT_NEAR(d.prob("a"), d.generation[m.vocab().lookup("a")] + c1 + c2, 1e-15);
}

TEST(DecodeResponse, FeatureWidthAndNormalization) {
  DialogueModel m(toy_vocab(), 5, {50, 50});
  const Tensor w = m.params().get("dialogue.response_decoder.generation.w");
  EXPECT_EQ(w.dim(1), 50u + 3 * 100 + 5);
  Tape tape(false);
  auto turn = toy_turn();
  auto enc = m.encode_turn(tape, turn.input, turn.previous_bspan, turn.context);
  const Tokens g1 = turn.bspan.tokens();
  auto t1 = m.decode_bspan(tape, enc, &g1);
  auto t2 = m.decode_complete(tape, enc, t1, &turn.complete);
  for (std::size_t bucket = 0; bucket < 5; ++bucket) {
    auto d = m.response_distribution(tape, enc, t1, t2, KBVector::from_count(bucket), kGo, t2.final_state);
    EXPECT_NEAR(d.total_mass(), 1.0, 1e-9);
  }
}

// ---- losses ----------------------------------------------------------------------------

TEST(TurnLoss, TotalIsSumAndBoundsEachPart) {
  DialogueModel m(toy_vocab(), 6, kTiny);
  Tape tape(false);
  auto l = m.turn_loss(tape, toy_turn());
  const double l1 = l.l1.item(), l2 = l.l2.item(), l3 = l.l3.item();
  EXPECT_GT(l1, 0.0);
  EXPECT_GT(l2, 0.0);
  EXPECT_GT(l3, 0.0);
  EXPECT_GE(l.total.item(), std::max({l1, l2, l3}));
  EXPECT_NEAR(l.total.item(), l1 + l2 + l3, 1e-12);
  EXPECT_NEAR(l.total.item(), l3 + l2 + l1, 1e-12);
}

TEST(TurnLoss, SharedParameterGradientIsSumOfTaskGradients) {
  DialogueModel m(toy_vocab(), 7, kTiny);
  const auto turn = toy_turn();
  auto run = [&](int which) {
    m.params().zero_grad();
    Tape tape;
    auto l = m.turn_loss(tape, turn);
    tape.backward(which == 0 ? l.total : which == 1 ? l.l1 : which == 2 ? l.l2 : l.l3);
    return grads(m.params());
  };
  auto total = run(0), g1 = run(1), g2 = run(2), g3 = run(3);
  const auto& items = m.params().items();
  for (std::size_t p = 0; p < items.size(); ++p) {
    if (items[p].first.rfind("dialogue.utterance_encoder", 0) != 0 &&
        items[p].first.rfind("dialogue.embedding", 0) != 0)
      continue;
    for (std::size_t i = 0; i < total[p].size(); ++i)
      EXPECT_NEAR(total[p][i], g1[p][i] + g2[p][i] + g3[p][i], 1e-10) << items[p].first;
  }
}

TEST(TurnLoss, GradientsMatchFiniteDifferences) {
  for (const auto& check : gecor::testing::model_gradient_suite(5))
    if (check.name.rfind("dialogue.", 0) == 0)
      EXPECT_TRUE(check.report.passed()) << check.name << " " << check.report.max_rel_error();
}

TEST(TurnLoss, AblationDropsResolutionLoss) {
  DialogueModel full(toy_vocab(), 8, kTiny, true), ablated(toy_vocab(), 8, kTiny, false);
  Tape tape(false);
  auto a = ablated.turn_loss(tape, toy_turn());
  EXPECT_FALSE(a.l2.defined());
  EXPECT_NEAR(a.total.item(), a.l1.item() + a.l3.item(), 1e-12);
  auto f = full.turn_loss(tape, toy_turn());
  EXPECT_DOUBLE_EQ(f.l1.item(), a.l1.item());  // same seed, same span decoder
}

// ---- inference -----------------------------------------------------------------------------

TEST(RunTurn, ContextGrowsAndStateIsNotMutated) {
  const auto kb = italian_kb();
  DialogueModel m(italian_vocab(), 9, kTiny);
  DialogueState state;
  state.session_id = "s";
  std::size_t last = 0;
  for (const auto& u : {tokenize("i would like an italian restaurant ."), tokenize("i want cheap ones ."),
                        tokenize("yes , please .")}) {
    const DialogueState before = state;
    DialogueState next;
    auto r = m.run_turn(state, u, kb, &next, 12);
    EXPECT_EQ(state.history, before.history);
    EXPECT_EQ(r.turn_index, state.turn);
    EXPECT_EQ(next.turn, state.turn + 1);
    const std::size_t len = build_context(next.history, {}).size();
    EXPECT_GT(len, last);
    last = len;
    EXPECT_LE(r.response_delex.size(), 12u);
    EXPECT_EQ(r.kb.records.size() > 0 ? r.kb.vector.bucket > 0 : r.kb.vector.bucket == 0, true);
    state = next;
  }
}

TEST(RunTurn, DeterministicForSameStateAndUtterance) {
  const auto kb = italian_kb();
  DialogueModel m(italian_vocab(), 10, kTiny);
  DialogueState state;
  state.history = {tokenize("i would like an italian restaurant ."), tokenize("what price range ?")};
  const Tokens u = tokenize("i want cheap ones .");
  auto a = m.run_turn(state, u, kb, nullptr, 10), b = m.run_turn(state, u, kb, nullptr, 10);
  EXPECT_EQ(a.resolved, b.resolved);
  EXPECT_EQ(a.bspan, b.bspan);
  EXPECT_EQ(a.response, b.response);
  EXPECT_EQ(a.kb.records, b.kb.records);
}

TEST(RunTurn, AblatedModelEchoesInput) {
  DialogueModel m(italian_vocab(), 11, kTiny, false);
  const Tokens u = tokenize("i want cheap ones .");
  auto r = m.run_turn(DialogueState{}, u, italian_kb(), nullptr, 10);
  EXPECT_EQ(r.resolved, u);
}

TEST(RunTurn, EmptyKnowledgeBaseFlagsPlaceholders) {
  DialogueModel m(italian_vocab(), 12, kTiny);
  auto r = m.run_turn(DialogueState{}, tokenize("i want cheap ones ."), {}, nullptr, 10);
  EXPECT_TRUE(r.kb.records.empty());
  bool has_placeholder = false;
  for (const auto& t : r.response)
    if (t.size() > 5 && t.substr(t.size() - 5) == "_SLOT") has_placeholder = true;
  EXPECT_EQ(r.unresolved_placeholders, has_placeholder);
}
