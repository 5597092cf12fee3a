#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gecor/corpus.hpp"
#include "gecor/nn.hpp"

namespace gecor {

enum class CopyVariant { kSharedZ, kGated };
std::string to_string(CopyVariant v);
CopyVariant variant_from_string(const std::string& s);

struct ModelDims {
  std::size_t embedding = 50;
  std::size_t hidden = 50;  // per direction in the encoders; decoder state width
};

// Encoder outputs for one (utterance, context) pair plus the per-memory
// projections every decoder step reuses.
struct EncodedPair {
  Tensor utterance_states;  // [m × 2h]
  Tensor utterance_keys;    // attention keys over utterance_states
  Tensor utterance_final;   // [2h]
  Tensor context_states;    // [n × 2h]
  Tensor context_projection;  // tanh(W_c h^c_i + b_c), [n × h]
  Tokens context;
  Tensor initial_state;     // decoder s_0, [h]
};

struct DecoderStepOutput {
  Tensor attention;       // a^t over utterance positions
  Tensor context_vector;  // h_t*
  Tensor state;           // s_t
  Tensor generation_scores;  // ψ_g over V
  Tensor copy_scores;        // ψ_c over context positions
  Tensor p_gen;              // gated variant only
};

// Dual-encoder GRU seq2seq that rewrites a user utterance into its complete
// form, mixing generation over V with copying from the dialogue context.
class GecorModel {
 public:
  GecorModel(Vocabulary vocab, CopyVariant variant, std::uint64_t seed, ModelDims dims = {},
             std::optional<Tensor> embeddings = std::nullopt);

  const Vocabulary& vocab() const { return vocab_; }
  CopyVariant variant() const { return variant_; }
  const ModelDims& dims() const { return dims_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  EncodedPair encode(Tape& tape, const Tokens& utterance, const Tokens& context,
                     const RunMode& mode = {}) const;
  Attention::Result attend(Tape& tape, const Tensor& s_prev, const EncodedPair& enc) const;

  struct Scores {
    Tensor generation;
    Tensor copy;
  };
  Scores scores(Tape& tape, const Tensor& state, const Tensor& context_vector,
                const EncodedPair& enc) const;
  Tensor gate(Tape& tape, const Tensor& context_vector, const Tensor& state,
              const Tensor& prev_embedding) const;

  DecoderStepOutput decode_step(Tape& tape, const std::string& prev_token, const Tensor& s_prev,
                                const EncodedPair& enc, const RunMode& mode = {}) const;
  ExtendedVocabDistribution distribution(const DecoderStepOutput& step,
                                         const EncodedPair& enc) const;
  // log P(target) under the step's extended-vocabulary distribution.
  Tensor step_log_prob(Tape& tape, const DecoderStepOutput& step, const EncodedPair& enc,
                       const std::string& target) const;

  // Mean token cross-entropy under teacher forcing; the target is followed by <eos>.
  Tensor sequence_loss(Tape& tape, const ResolutionInstance& instance,
                       const RunMode& mode = {}) const;

  // Greedy decoding over the extended vocabulary.
  Tokens resolve(const Tokens& utterance, const Tokens& context, std::size_t max_len = 50) const;

  std::size_t embedding_index(const std::string& token) const { return vocab_.lookup(token); }

 private:
  Vocabulary vocab_;
  CopyVariant variant_;
  ModelDims dims_;
  ParameterSet params_;

  Tensor embedding_;
  BiGru utterance_encoder_;
  BiGru context_encoder_;
  Linear bridge_;
  GruParams decoder_;
  Attention attention_;
  Tensor gen_w_context_, gen_w_state_, gen_bias_;
  CopyScorer copy_;
  Tensor gate_w_context_, gate_w_state_, gate_w_input_, gate_bias_;
};

}  // namespace gecor
