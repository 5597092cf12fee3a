#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gecor/corpus.hpp"
#include "gecor/nn.hpp"
#include "gecor/synthetic.hpp"
#include "support/oracles.hpp"

using namespace gecor;
using gecor::testing::italian_dialogue;

namespace {

Tokens toks(const std::string& s) { return tokenize(s); }

AnnotatedDialogue numbered_dialogue(std::size_t i) {
  AnnotatedDialogue d;
  d.id = "d" + std::to_string(i);
  AnnotatedTurn t;
  t.user.original = t.user.complete = {"hello"};
  t.system = {"hi"};
  d.turns.push_back(t);
  return d;
}

Corpus numbered_corpus(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(numbered_dialogue(i));
  return c;
}

std::string one_turn_json(const std::string& user_fields) {
  return R"([{"id": "x", "turns": [{"user": {)" + user_fields +
         R"(}, "system": "ok .", "bspan": "", "requested": []}]}])";
}

}  // namespace

// ---- tokenizer ---------------------------------------------------------------

TEST(Tokenize, SplitsPunctuationAndLowercases) {
  EXPECT_EQ(tokenize("Yes, please."), (Tokens{"yes", ",", "please", "."}));
  EXPECT_EQ(tokenize("I want cheap ones."), (Tokens{"i", "want", "cheap", "ones", "."}));
}

TEST(Tokenize, EmptyStringGivesNoTokens) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("   \t ").empty());
}

TEST(Tokenize, KeepsApostrophesAndPlaceholdersInsideWords) {
  EXPECT_EQ(tokenize("I don't care."), (Tokens{"i", "don't", "care", "."}));
  EXPECT_EQ(tokenize("call name_SLOT now"), (Tokens{"call", "name_slot", "now"}));
}

TEST(Tokenize, IsIdempotentThroughDetokenize) {
  for (const char* s : {"Yes, I would like the phone number please.", "what about it ?"}) {
    const Tokens once = tokenize(s);
    EXPECT_EQ(tokenize(detokenize(once)), once);
  }
}

// ---- vocabulary ---------------------------------------------------------------

TEST(Vocabulary, ReservedEntriesThenFrequency) {
  Vocabulary v = build_vocab({{"a", "b", "a"}}, 6);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{kPad, kUnk, kGo, kEos, "a", "b"}));
}

TEST(Vocabulary, UnknownTokenMapsToUnk) {
  Vocabulary v = build_vocab({{"a"}}, 10);
  EXPECT_EQ(v.lookup("never-seen"), Vocabulary::kUnkId);
  EXPECT_EQ(v.encode({"a", "zzz"}), (std::vector<std::size_t>{v.lookup("a"), Vocabulary::kUnkId}));
}

TEST(Vocabulary, TiesAtCapAdmitLexicographicallySmaller) {
  Vocabulary v = build_vocab({{"z", "y", "x", "x"}}, 6);
  EXPECT_TRUE(v.contains("x"));
  EXPECT_TRUE(v.contains("y"));
  EXPECT_FALSE(v.contains("z"));
}

TEST(Vocabulary, CapBelowReservedIsConfigError) {
  EXPECT_THROW(build_vocab({{"a"}}, 3), ConfigError);
}

TEST(Vocabulary, ExplicitListMustStartWithReserved) {
  EXPECT_THROW(Vocabulary({"a", "b"}), ConfigError);
}

// ---- corpus schema -------------------------------------------------------------

TEST(Corpus, ParsesItalianExampleDialogue) {
  const auto d = italian_dialogue();
  ASSERT_EQ(d.turns.size(), 3u);
  EXPECT_EQ(d.turns[1].user.label, Label::kCoreference);
  EXPECT_EQ(d.turns[1].user.complete, toks("I want cheap Italian restaurants."));
  EXPECT_EQ(d.turns[2].bspan.requestable, (std::vector<std::string>{"phone"}));
  EXPECT_EQ(d.turns[1].bspan.informable, (std::vector<std::string>{"italian", "cheap"}));
}

TEST(Corpus, EmptyListGivesZeroStatistics) {
  const Corpus c = parse_corpus("[]");
  EXPECT_TRUE(c.empty());
  const auto s = corpus_stats(c);
  EXPECT_EQ(s.dialogues, 0u);
  EXPECT_EQ(s.utterances, 0u);
}

TEST(Corpus, StatisticsCountLabelsAndVersions) {
  const auto s = corpus_stats({italian_dialogue()});
  EXPECT_EQ(s.dialogues, 1u);
  EXPECT_EQ(s.utterances, 3u);
  EXPECT_EQ(s.labeled_complete, 1u);
  EXPECT_EQ(s.labeled_ellipsis, 1u);
  EXPECT_EQ(s.labeled_coreference, 1u);
  EXPECT_EQ(s.ellipsis_versions, 2u);
  EXPECT_EQ(s.coreference_versions, 1u);
  EXPECT_EQ(s.complete_without_versions, 1u);
}

TEST(Corpus, SchemaErrorNamesDialogueTurnAndField) {
  try {
    parse_corpus(one_turn_json(R"("original": "hi", "label": "complete")"));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'x'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("turn 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("user.complete"), std::string::npos) << msg;
  }
}

TEST(Corpus, RejectsUnknownLabel) {
  EXPECT_THROW(parse_corpus(one_turn_json(R"("original": "hi", "complete": "hi", "label": "odd")")),
               ValidationError);
}

TEST(Corpus, RejectsNonListTopLevel) {
  EXPECT_THROW(parse_corpus("{}"), ValidationError);
  EXPECT_THROW(parse_corpus("not json"), ValidationError);
}

TEST(Corpus, RejectsDuplicateIds) {
  Corpus c = numbered_corpus(2);
  c[1].id = c[0].id;
  EXPECT_THROW(parse_corpus(serialize_corpus(c)), ValidationError);
}

TEST(Corpus, SerializeRoundTrips) {
  Corpus c = {italian_dialogue()};
  auto more = synthetic_dialogues(5, 3, synthetic_kb(3));
  c.insert(c.end(), more.begin(), more.end());
  EXPECT_EQ(parse_corpus(serialize_corpus(c)), c);
}

TEST(Corpus, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "gecor_corpus_roundtrip.json";
  const Corpus c = {italian_dialogue()};
  save_corpus(c, path);
  EXPECT_EQ(load_corpus(path), c);
  std::filesystem::remove(path);
}

TEST(Corpus, ImportsReleaseLayout) {
  const std::string release = R"([{
    "dialogue_id": 7,
    "goal": {"constraints": [["food", "italian"]], "request-slots": ["phone"]},
    "dial": [{
      "turn": 0,
      "usr": {"transcript": "i want cheap ones .",
              "transcript_complete": "i want cheap italian restaurants .",
              "transcript_with_ellipsis": "i want cheap .",
              "transcript_with_coreference": "i want cheap ones .",
              "slu": [{"act": "inform", "slots": [["pricerange", "cheap"]]},
                      {"act": "inform", "slots": [["food", "italian"]]},
                      {"act": "request", "slots": [["slot", "phone"]]}]},
      "sys": {"sent": "pizza hut cherry hinton is nice ."}
    }]
  }])";
  const Corpus c = import_camrest_release(release);
  ASSERT_EQ(c.size(), 1u);
  const auto& t = c[0].turns.at(0);
  EXPECT_EQ(t.user.complete, toks("i want cheap italian restaurants ."));
  ASSERT_TRUE(t.user.ellipsis.has_value());
  EXPECT_EQ(*t.user.ellipsis, toks("i want cheap ."));
  EXPECT_EQ(t.requested, (std::vector<std::string>{"phone"}));
  EXPECT_FALSE(t.bspan.informable.empty());
  EXPECT_EQ(parse_corpus(serialize_corpus(c)), c);
}

// ---- context and conditions -----------------------------------------------------

TEST(Context, FirstTurnIsJustTheUtterance) {
  const auto d = italian_dialogue();
  EXPECT_EQ(build_context(d, 0, Condition::kCoreference), d.turns[0].user.original);
}

TEST(Context, SecondTurnInterleavesHistoryWithSeparators) {
  const auto d = italian_dialogue();
  Tokens expected = toks("I would like an Italian restaurant.");
  expected.push_back(kSep);
  for (const auto& t : toks("What price range do you have in mind?")) expected.push_back(t);
  expected.push_back(kSep);
  for (const auto& t : toks("I want cheap ones.")) expected.push_back(t);
  EXPECT_EQ(build_context(d, 1, Condition::kCoreference), expected);
}

TEST(Context, ThirdTurnEndsWithCurrentUtterance) {
  const auto d = italian_dialogue();
  const Tokens ctx = build_context(d, 2, Condition::kEllipsis);
  const Tokens tail = toks("Yes, please.");
  ASSERT_GE(ctx.size(), tail.size());
  EXPECT_TRUE(std::equal(tail.begin(), tail.end(), ctx.end() - long(tail.size())));
}

TEST(Context, IsPrefixConsistentAcrossTurns) {
  for (const auto& d : synthetic_dialogues(10, 5, synthetic_kb(5)))
    for (auto cond : {Condition::kEllipsis, Condition::kCoreference, Condition::kMixed})
      for (std::size_t t = 0; t + 1 < d.turns.size(); ++t) {
        const Tokens now = build_context(d, t, cond, 9);
        const Tokens next = build_context(d, t + 1, cond, 9);
        ASSERT_LT(now.size(), next.size());
        EXPECT_TRUE(std::equal(now.begin(), now.end(), next.begin()));
      }
}

TEST(Context, OutOfRangeTurnIsContractError) {
  EXPECT_THROW(build_context(italian_dialogue(), 3, Condition::kMixed), ContractError);
}

TEST(Conditions, CompleteTurnUsesTargetAsInputEverywhere) {
  const Corpus c = {italian_dialogue()};
  for (auto cond : {Condition::kEllipsis, Condition::kCoreference, Condition::kMixed}) {
    const auto inst = assemble_condition(c, cond, 1);
    EXPECT_EQ(inst[0].input, inst[0].target);
    EXPECT_TRUE(inst[0].input_complete);
  }
}

TEST(Conditions, EllipsisFallsBackToOriginal) {
  const Corpus c = {italian_dialogue()};
  const auto inst = assemble_condition(c, Condition::kCoreference, 1);
  // Turn 3 has no co-reference version.
  EXPECT_EQ(inst[2].input, toks("Yes, please."));
  const auto ell = assemble_condition(c, Condition::kEllipsis, 1);
  EXPECT_EQ(ell[1].input, toks("I want cheap."));
}

TEST(Conditions, EllipsisExampleFromAnnotationGuide) {
  const std::string json = one_turn_json(
      R"("original": "I don't care.", "complete": "I don't care about the price range.",
         "ellipsis": "I don't care.", "coreference": "I don't care about it.", "label": "ellipsis")");
  const auto inst = assemble_condition(parse_corpus(json), Condition::kEllipsis, 0);
  EXPECT_EQ(detokenize(inst[0].input), "i don't care .");
  EXPECT_EQ(detokenize(inst[0].target), "i don't care about the price range .");
}

TEST(Conditions, MixedIsSeededAndDrawsOnlyCreatedVersions) {
  const auto kb = synthetic_kb(2);
  const auto corpus = synthetic_dialogues(40, 2, kb);
  ConditionSummary s1, s2;
  const auto a = assemble_condition(corpus, Condition::kMixed, 3, &s1);
  const auto b = assemble_condition(corpus, Condition::kMixed, 3, &s2);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].input, b[i].input);
  EXPECT_GT(s1.ellipsis, 0u);
  EXPECT_GT(s1.coreference, 0u);
  EXPECT_EQ(s1.ellipsis + s1.coreference + s1.complete, a.size());
  std::size_t k = 0;
  for (const auto& d : corpus)
    for (const auto& t : d.turns) {
      const auto& in = a[k++].input;
      const bool from_versions = (t.user.ellipsis && in == *t.user.ellipsis) ||
                                 (t.user.coreference && in == *t.user.coreference);
      EXPECT_TRUE(from_versions || (!t.user.ellipsis && !t.user.coreference && in == t.user.complete));
    }
}

TEST(Conditions, TargetsAreCoveredByVocabularyContextOrUnk) {
  const auto corpus = synthetic_dialogues(20, 4, synthetic_kb(4));
  const Vocabulary v = build_vocab(vocabulary_sequences(corpus), 800);
  for (const auto& inst : assemble_condition(corpus, Condition::kMixed, 4)) {
    ASSERT_FALSE(inst.target.empty());
    for (const auto& tok : inst.target) {
      const bool in_context = std::find(inst.context.begin(), inst.context.end(), tok) != inst.context.end();
      EXPECT_TRUE(v.contains(tok) || in_context) << tok;
    }
  }
}

// ---- split ---------------------------------------------------------------------

TEST(Split, FullSizedCorpus) {
  const auto s = split(numbered_corpus(676), 0.8, 1);
  EXPECT_EQ(s.train.size(), 541u);
  EXPECT_EQ(s.validation.size(), 135u);
}

TEST(Split, TenDialogues) {
  const auto s = split(numbered_corpus(10), 0.8, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.validation.size(), 2u);
}

TEST(Split, DeterministicAndDisjoint) {
  const auto c = numbered_corpus(50);
  const auto a = split(c, 0.8, 7), b = split(c, 0.8, 7);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  std::set<std::string> ids;
  for (const auto& d : a.train) ids.insert(d.id);
  for (const auto& d : a.validation) EXPECT_EQ(ids.count(d.id), 0u);
  EXPECT_EQ(ids.size() + a.validation.size(), 50u);
}

TEST(Split, RatioOutsideOpenIntervalIsConfigError) {
  EXPECT_THROW(split(numbered_corpus(3), 1.0, 0), ConfigError);
  EXPECT_THROW(split(numbered_corpus(3), 0.0, 0), ConfigError);
}

// ---- knowledge base --------------------------------------------------------------

TEST(KnowledgeBase, RoundTripsAndRejectsDuplicateNames) {
  const auto kb = gecor::testing::italian_kb();
  EXPECT_EQ(parse_kb(serialize_kb(kb)), kb);
  EXPECT_THROW(parse_kb(R"([{"name": "a"}, {"name": "a"}])"), ValidationError);
  EXPECT_THROW(parse_kb(R"([{"food": "thai"}])"), ValidationError);
}

// ---- embeddings -------------------------------------------------------------------

TEST(Embeddings, FileRowsAreCopied) {
  const Vocabulary v = build_vocab({{"the", "cat"}}, 10);
  std::stringstream in;
  in << "the";
  for (int i = 0; i < 50; ++i) in << " 0";
  in << "\n";
  const auto e = parse_embeddings(in, v, 1, 50);
  EXPECT_EQ(e.found, 1u);
  const std::size_t row = v.lookup("the");
  for (std::size_t j = 0; j < 50; ++j) EXPECT_EQ(e.matrix[row * 50 + j], 0.0);
  EXPECT_TRUE(e.matrix.requires_grad());
}

TEST(Embeddings, MissingRowsAreSeeded) {
  const Vocabulary v = build_vocab({{"the", "cat"}}, 10);
  std::stringstream a, b;
  const auto ea = parse_embeddings(a, v, 5, 50), eb = parse_embeddings(b, v, 5, 50);
  EXPECT_EQ(to_vector(ea.matrix), to_vector(eb.matrix));
  EXPECT_EQ(ea.coverage(), 0.0);
}

TEST(Embeddings, MalformedLineReportsLineNumber) {
  const Vocabulary v = build_vocab({{"the"}}, 10);
  std::stringstream in("the 1 2\ncat 1 x\n");
  try {
    parse_embeddings(in, v, 1, 2);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Embeddings, WrongDimensionIsConfigError) {
  const Vocabulary v = build_vocab({{"the"}}, 10);
  std::stringstream in("the 1 2 3\n");
  EXPECT_THROW(parse_embeddings(in, v, 1, 50), ConfigError);
}

TEST(Embeddings, EmptyPathBehavesLikeEmptyFile) {
  const Vocabulary v = build_vocab({{"the"}}, 10);
  const auto e = load_embeddings("", v, 3, 50);
  EXPECT_EQ(e.found, 0u);
  EXPECT_EQ(e.matrix.shape(), (Shape{v.size(), 50}));
}
