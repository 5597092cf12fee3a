#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gecor/belief_span.hpp"
#include "gecor/tensor.hpp"

namespace gecor {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lowercases, splits on whitespace and emits punctuation as separate tokens.
// Apostrophes, hyphens and underscores stay inside words ("don't", "name_slot").
Tokens tokenize(const std::string& text);
std::string detokenize(const Tokens& tokens);

inline constexpr const char* kPad = "<pad>";
inline constexpr const char* kUnk = "<unk>";
inline constexpr const char* kGo = "<go>";
inline constexpr const char* kEos = "<eos>";
inline constexpr const char* kSep = "<sep>";

class Vocabulary {
 public:
  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kUnkId = 1;
  static constexpr std::size_t kGoId = 2;
  static constexpr std::size_t kEosId = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);  // must start with reserved

  std::size_t size() const { return tokens_.size(); }
  std::size_t lookup(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<std::size_t> encode(const Tokens& tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Reserved entries first, then the most frequent tokens (ties lexicographic).
Vocabulary build_vocab(const std::vector<Tokens>& sequences, std::size_t cap = 800);

enum class Label { kEllipsis, kCoreference, kComplete };
std::string to_string(Label label);
Label label_from_string(const std::string& s);

struct AnnotatedUtterance {
  Tokens original;
  Tokens complete;
  std::optional<Tokens> ellipsis;
  std::optional<Tokens> coreference;
  Label label = Label::kComplete;
  friend bool operator==(const AnnotatedUtterance&, const AnnotatedUtterance&) = default;
};

struct AnnotatedTurn {
  AnnotatedUtterance user;
  Tokens system;
  BeliefSpan bspan;
  std::vector<std::string> requested;
  friend bool operator==(const AnnotatedTurn&, const AnnotatedTurn&) = default;
};

struct Goal {
  std::map<std::string, std::string> informable;
  std::vector<std::string> requested;
  friend bool operator==(const Goal&, const Goal&) = default;
};

struct AnnotatedDialogue {
  std::string id;
  Goal goal;
  std::vector<AnnotatedTurn> turns;
  friend bool operator==(const AnnotatedDialogue&, const AnnotatedDialogue&) = default;
};

using Corpus = std::vector<AnnotatedDialogue>;

struct CorpusStats {
  std::size_t dialogues = 0;
  std::size_t utterances = 0;
  std::size_t labeled_ellipsis = 0;
  std::size_t labeled_coreference = 0;
  std::size_t labeled_complete = 0;
  std::size_t ellipsis_versions = 0;
  std::size_t coreference_versions = 0;
  std::size_t incomplete_utterances = 0;      // at least one created version
  std::size_t complete_without_versions = 0;  // labeled complete, nothing created
};

CorpusStats corpus_stats(const Corpus& corpus);

Corpus parse_corpus(const std::string& json_text);
Corpus load_corpus(const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Maps the public CamRest676 layout carrying the GECOR annotations
// (dial[].usr.transcript / transcript_complete / transcript_with_ellipsis /
// transcript_with_coreference, sys.sent, slu acts) into the canonical schema.
Corpus import_camrest_release(const std::string& json_text);

// Token sequences the vocabulary is counted over: every utterance version,
// system responses, belief spans and context separators.
std::vector<Tokens> vocabulary_sequences(const Corpus& corpus);

// ---- experimental conditions ----------------------------------------------

enum class Condition { kEllipsis, kCoreference, kMixed, kComplete };
std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);

// The utterance a model receives for one turn under a condition. Mixed picks
// uniformly among the created incomplete versions (complete when none exist),
// keyed on (seed, dialogue id, turn) so every caller agrees.
const Tokens& select_input(const AnnotatedDialogue& dialogue, std::size_t turn_index,
                           Condition condition, std::uint64_t seed = 0);

// Earlier user inputs and system responses, then the current user input,
// separated by <sep>.
Tokens build_context(const AnnotatedDialogue& dialogue, std::size_t turn_index,
                     Condition condition, std::uint64_t seed = 0);
Tokens build_context(const std::vector<Tokens>& history, const Tokens& current);

struct ResolutionInstance {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  Tokens input;
  Tokens context;
  Tokens target;
  bool input_complete = true;
};

struct ConditionSummary {
  std::size_t ellipsis = 0;
  std::size_t coreference = 0;
  std::size_t complete = 0;
};

std::vector<ResolutionInstance> assemble_condition(const Corpus& corpus, Condition condition,
                                                   std::uint64_t seed,
                                                   ConditionSummary* summary = nullptr);

struct Split {
  Corpus train;
  Corpus validation;
};

Split split(const Corpus& corpus, double ratio = 0.8, std::uint64_t seed = 0);

// ---- knowledge base --------------------------------------------------------

struct KBRecord {
  std::string name, food, pricerange, area, phone, address, postcode;
  const std::string* attribute(const std::string& slot) const;
  friend bool operator==(const KBRecord&, const KBRecord&) = default;
};

inline const std::vector<std::string> kKbSlots = {"name",    "food",    "pricerange", "area",
                                                   "phone",   "address", "postcode"};

using KnowledgeBase = std::vector<KBRecord>;
KnowledgeBase parse_kb(const std::string& json_text);
KnowledgeBase load_kb(const std::filesystem::path& path);
std::string serialize_kb(const KnowledgeBase& kb);

// ---- embeddings -------------------------------------------------------------

struct EmbeddingLoad {
  Tensor matrix;  // [|V| × dim], trainable
  std::size_t found = 0;
  double coverage() const;
};

// Rows default to the seeded uniform scheme; words present in the file are
// overwritten with their vectors. An empty path behaves like an empty file.
EmbeddingLoad load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                              std::uint64_t seed, std::size_t dim = 50);
EmbeddingLoad parse_embeddings(std::istream& in, const Vocabulary& vocab, std::uint64_t seed,
                               std::size_t dim = 50);

std::string read_file(const std::filesystem::path& path);

}  // namespace gecor
