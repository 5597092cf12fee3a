#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gecor/corpus.hpp"
#include "gecor/gecor_model.hpp"
#include "gecor/nn.hpp"

namespace gecor {

// ---- knowledge-base lookup -------------------------------------------------

// One-hot summary of how many records satisfy the current constraints,
// bucketed as {0, 1, 2, 3, ≥4}.
struct KBVector {
  static constexpr std::size_t kBuckets = 5;
  std::array<double, kBuckets> onehot{};
  std::size_t bucket = 0;

  static KBVector from_count(std::size_t matches);
  Tensor tensor() const;
};

struct KBMatch {
  std::vector<std::size_t> records;  // indices into the KB, in file order
  KBVector vector;
};

// Every informable value must equal the food, pricerange or area of a record
// ("dontcare"/"don't care" matches anything).
KBMatch kb_match(const BeliefSpan& span, const KnowledgeBase& kb);

// Replaces KB values in a response with slot placeholders (name_SLOT, ...),
// longest value first.
Tokens delexicalize(const Tokens& response, const KnowledgeBase& kb);
std::string placeholder(const std::string& slot);

struct Relexicalized {
  Tokens tokens;
  bool unresolved = false;  // placeholders left because nothing matched
};
Relexicalized relexicalize(const Tokens& response, const KBRecord* top);

// ---- training instances ------------------------------------------------------

struct DialogueTurnInstance {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  Tokens input;    // user utterance under the data condition
  Tokens context;  // history plus the current input
  Tokens complete;
  bool input_complete = true;
  BeliefSpan previous_bspan;
  BeliefSpan bspan;
  Tokens response;  // delexicalized
  KBVector kb;      // from the gold span
};

std::vector<DialogueTurnInstance> assemble_dialogue_turns(const Corpus& corpus, Condition condition,
                                                          std::uint64_t seed,
                                                          const KnowledgeBase& kb);

// Vocabulary sequences for the dialogue task: the resolution sequences plus
// delexicalized responses.
std::vector<Tokens> dialogue_vocabulary_sequences(const Corpus& corpus, const KnowledgeBase& kb);

// ---- model -----------------------------------------------------------------------

struct DialogueState {
  std::string session_id;
  BeliefSpan previous_bspan;
  std::vector<Tokens> history;  // alternating user / system segments
  std::size_t turn = 0;

  Tokens context_tokens() const;  // flattened history with separators
};

struct TurnResult {
  Tokens resolved;
  BeliefSpan bspan;
  Tokens response_delex;
  Tokens response;
  KBMatch kb;
  bool unresolved_placeholders = false;
  std::size_t turn_index = 0;
};

struct TurnLosses {
  Tensor l1, l2, l3;  // l2 undefined when the resolution branch is off
  Tensor total;
};

// A decoder's emitted tokens plus the per-step memory later decoders read:
// row j = [s_j ; emb(y_j)], the last row being the <eos> step.
struct DecoderTrace {
  Tokens tokens;  // emitted tokens followed by <eos>
  Tensor memory;  // [len × (h + e)]
  Tensor final_state;
  Tensor loss_sum;  // Σ −log P(gold) under teacher forcing
  std::size_t steps = 0;
};

struct TurnEncoding {
  Tokens encoder_input;  // utterance, <sep>, previous span tokens
  Tokens context;
  Tensor utterance_states;
  Tensor context_states;
  Tensor initial_state;
};

struct DialogueStepScores {
  Tensor generation;
  std::vector<Tensor> copy;  // one per copy source
  Tensor state;
};

// Three decoders sharing one embedding and encoder pair: the belief span,
// the complete user utterance (copying from the span decoder and the context)
// and the delexicalized system response (reading all three memories and the
// KB vector). Every distribution uses a single shared normalizer.
class DialogueModel {
 public:
  DialogueModel(Vocabulary vocab, std::uint64_t seed, ModelDims dims = {},
                bool gecor_branch = true, std::optional<Tensor> embeddings = std::nullopt);

  const Vocabulary& vocab() const { return vocab_; }
  const ModelDims& dims() const { return dims_; }
  bool gecor_branch() const { return gecor_branch_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  TurnEncoding encode_turn(Tape& tape, const Tokens& utterance, const BeliefSpan& previous,
                           const Tokens& context, const RunMode& mode = {}) const;

  // With `gold` the decoders are teacher-forced and accumulate the loss;
  // without it they decode greedily.
  DecoderTrace decode_bspan(Tape& tape, const TurnEncoding& enc, const Tokens* gold,
                            const RunMode& mode = {}, std::size_t max_len = 50) const;
  DecoderTrace decode_complete(Tape& tape, const TurnEncoding& enc, const DecoderTrace& bspan,
                               const Tokens* gold, const RunMode& mode = {},
                               std::size_t max_len = 50) const;
  DecoderTrace decode_response(Tape& tape, const TurnEncoding& enc, const DecoderTrace& bspan,
                               const DecoderTrace& complete, const KBVector& kb, const Tokens* gold,
                               const RunMode& mode = {}, std::size_t max_len = 50) const;

  // Per-step distributions, exposed for inspection and tests.
  ExtendedVocabDistribution complete_distribution(Tape& tape, const TurnEncoding& enc,
                                                  const DecoderTrace& bspan,
                                                  const std::string& prev_token,
                                                  const Tensor& s_prev,
                                                  Tensor* state_out = nullptr) const;
  ExtendedVocabDistribution response_distribution(Tape& tape, const TurnEncoding& enc,
                                                  const DecoderTrace& bspan,
                                                  const DecoderTrace& complete,
                                                  const KBVector& kb,
                                                  const std::string& prev_token,
                                                  const Tensor& s_prev) const;

  // L = L1 + L2 + L3, each a mean token cross-entropy (target + <eos>).
  TurnLosses turn_loss(Tape& tape, const DialogueTurnInstance& instance,
                       const RunMode& mode = {}) const;

  // Inference for one user turn; `state` is not modified.
  TurnResult run_turn(const DialogueState& state, const Tokens& utterance,
                      const KnowledgeBase& kb, DialogueState* next = nullptr,
                      std::size_t max_len = 50) const;

 private:
  struct Decoder {
    GruParams gru;
    std::vector<Attention> attention;
    Tensor gen_w, gen_bias;  // generation from [s_t ; attention contexts ; extras]
    std::vector<CopyScorer> copy;
  };

  Tensor embed(Tape& tape, const std::string& token) const;
  Tensor memory_row(Tape& tape, const Tensor& state, const std::string& token) const;
  Tokens sources_tokens(const DecoderTrace& t) const;

  // One decoder step: attend each memory with s_prev, update the GRU on
  // [emb(prev); contexts; extra], score generation and copies with s_t.
  DialogueStepScores step(Tape& tape, const Decoder& dec, const std::string& prev,
                          const Tensor& s_prev, const std::vector<Tensor>& memories,
                          const std::vector<Tensor>& keys, const std::vector<Tensor>& copy_proj,
                          const Tensor& extra, const RunMode& mode) const;

  DecoderTrace run_decoder(Tape& tape, const Decoder& dec, const Tensor& s0,
                           const std::vector<Tensor>& memories,
                           const std::vector<Tensor>& copy_memories,
                           const std::vector<const Tokens*>& sources, const Tensor& extra,
                           const Tokens* gold, const RunMode& mode, std::size_t max_len) const;

  Vocabulary vocab_;
  ModelDims dims_;
  bool gecor_branch_;
  ParameterSet params_;

  Tensor embedding_;
  BiGru utterance_encoder_;
  BiGru context_encoder_;
  Linear bridge_;
  Decoder bspan_decoder_;
  Decoder complete_decoder_;
  Decoder response_decoder_;
};

}  // namespace gecor
