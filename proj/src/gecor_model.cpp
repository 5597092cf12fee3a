#include "gecor/gecor_model.hpp"

#include <cmath>

namespace gecor {

std::string to_string(CopyVariant v) { return v == CopyVariant::kSharedZ ? "shared_z" : "gated"; }

CopyVariant variant_from_string(const std::string& s) {
  if (s == "shared_z") return CopyVariant::kSharedZ;
  if (s == "gated") return CopyVariant::kGated;
  throw ConfigError("unknown copy variant '" + s + "' (expected shared_z or gated)");
}

GecorModel::GecorModel(Vocabulary vocab, CopyVariant variant, std::uint64_t seed, ModelDims dims,
                       std::optional<Tensor> embeddings)
    : vocab_(std::move(vocab)), variant_(variant), dims_(dims) {
  std::mt19937_64 rng(seed);
  const std::size_t e = dims_.embedding, h = dims_.hidden, enc = 2 * h;
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  if (embeddings) {
    if (embeddings->shape() != Shape{vocab_.size(), e})
      throw DimensionError("embedding matrix " + shape_str(embeddings->shape()) + " does not match " +
                           shape_str({vocab_.size(), e}));
    embedding_ = params_.add("gecor.embedding", embeddings->clone());
  } else {
    embedding_ = params_.add("gecor.embedding", {vocab_.size(), e}, 1.0 / std::sqrt(double(e)), rng);
  }
  utterance_encoder_ = BiGru::create(params_, "gecor.utterance_encoder", e, h, rng);
  context_encoder_ = BiGru::create(params_, "gecor.context_encoder", e, h, rng);
  bridge_ = Linear::create(params_, "gecor.bridge", enc, h, rng);
  decoder_ = add_gru(params_, "gecor.decoder.gru", e + enc, h, rng);
  attention_ = Attention::create(params_, "gecor.decoder.attention", enc, h, h, rng);
  gen_w_context_ = params_.add("gecor.generation.w_context", {vocab_.size(), enc}, bound, rng);
  gen_w_state_ = params_.add("gecor.generation.w_state", {vocab_.size(), h}, bound, rng);
  gen_bias_ = params_.add("gecor.generation.bias", {vocab_.size()}, bound, rng);
  copy_ = CopyScorer::create(params_, "gecor.copy", enc, h, rng);
  if (variant_ == CopyVariant::kGated) {
    gate_w_context_ = params_.add("gecor.gate.w_context", {enc}, bound, rng);
    gate_w_state_ = params_.add("gecor.gate.w_state", {h}, bound, rng);
    gate_w_input_ = params_.add("gecor.gate.w_input", {e}, bound, rng);
    gate_bias_ = params_.add("gecor.gate.bias", {1}, bound, rng);
  }
}

EncodedPair GecorModel::encode(Tape& tape, const Tokens& utterance, const Tokens& context,
                               const RunMode& mode) const {
  if (utterance.empty()) throw ContractError("encode: empty utterance");
  if (context.empty()) throw ContractError("encode: empty context");
  auto embed_all = [&](const Tokens& toks) {
    std::vector<Tensor> xs;
    xs.reserve(toks.size());
    for (const auto& t : toks) xs.push_back(lookup(tape, embedding_, vocab_.lookup(t)));
    return xs;
  };
  EncodedPair enc;
  auto utt = utterance_encoder_.run(tape, embed_all(utterance));
  auto ctx = context_encoder_.run(tape, embed_all(context));
  enc.utterance_states = mode.apply_dropout(tape, utt.states);
  enc.context_states = mode.apply_dropout(tape, ctx.states);
  enc.utterance_final = utt.final;
  enc.utterance_keys = attention_.keys(tape, enc.utterance_states);
  enc.context_projection = copy_.project(tape, enc.context_states);
  enc.context = context;
  enc.initial_state = tanh(tape, bridge_(tape, utt.final));
  return enc;
}

Attention::Result GecorModel::attend(Tape& tape, const Tensor& s_prev,
                                     const EncodedPair& enc) const {
  return attention_.attend(tape, enc.utterance_keys, enc.utterance_states, s_prev);
}

GecorModel::Scores GecorModel::scores(Tape& tape, const Tensor& state,
                                      const Tensor& context_vector,
                                      const EncodedPair& enc) const {
  Scores s;
  s.generation = add(tape,
                     add(tape, matvec(tape, gen_w_context_, context_vector),
                         matvec(tape, gen_w_state_, state)),
                     gen_bias_);
  s.copy = copy_.score(tape, enc.context_projection, state);
  return s;
}

Tensor GecorModel::gate(Tape& tape, const Tensor& context_vector, const Tensor& state,
                        const Tensor& prev_embedding) const {
  if (variant_ != CopyVariant::kGated) throw ContractError("gate() on a shared_z model");
  Tensor a = add(tape, dot(tape, gate_w_context_, context_vector), dot(tape, gate_w_state_, state));
  a = add(tape, add(tape, a, dot(tape, gate_w_input_, prev_embedding)), gate_bias_);
  return sigmoid(tape, a);
}

DecoderStepOutput GecorModel::decode_step(Tape& tape, const std::string& prev_token,
                                          const Tensor& s_prev, const EncodedPair& enc,
                                          const RunMode& mode) const {
  DecoderStepOutput out;
  auto att = attend(tape, s_prev, enc);
  out.attention = att.weights;
  out.context_vector = att.context;
  Tensor y = mode.apply_dropout(tape, lookup(tape, embedding_, vocab_.lookup(prev_token)));
  Tensor parts[] = {y, att.context};
  out.state = gru_cell(tape, concat(tape, parts), s_prev, decoder_);
  auto sc = scores(tape, out.state, att.context, enc);
  out.generation_scores = sc.generation;
  out.copy_scores = sc.copy;
  if (variant_ == CopyVariant::kGated) out.p_gen = gate(tape, att.context, out.state, y);
  return out;
}

ExtendedVocabDistribution GecorModel::distribution(const DecoderStepOutput& step,
                                                   const EncodedPair& enc) const {
  if (variant_ == CopyVariant::kSharedZ)
    return shared_z_distribution(vocab_, to_vector(step.generation_scores), {&enc.context},
                                 {to_vector(step.copy_scores)});
  return gated_distribution(vocab_, to_vector(step.generation_scores), enc.context,
                            to_vector(step.copy_scores), step.p_gen.item());
}

Tensor GecorModel::step_log_prob(Tape& tape, const DecoderStepOutput& step,
                                 const EncodedPair& enc, const std::string& target) const {
  if (variant_ == CopyVariant::kSharedZ) {
    Tensor parts[] = {step.generation_scores, step.copy_scores};
    Tensor joint = concat(tape, parts);
    auto idx = extended_indices(vocab_, target, {&enc.context});
    return log_softmax_select(tape, joint, idx);
  }
  // p_gen·P^g(y) + (1 − p_gen)·P^c(y)
  std::vector<std::size_t> gen_idx, copy_idx;
  for (std::size_t i = 0; i < enc.context.size(); ++i)
    if (enc.context[i] == target) copy_idx.push_back(i);
  if (vocab_.contains(target))
    gen_idx.push_back(vocab_.lookup(target));
  else if (copy_idx.empty())
    gen_idx.push_back(Vocabulary::kUnkId);
  Tensor total;
  if (!gen_idx.empty()) {
    Tensor pg = select_sum(tape, softmax(tape, step.generation_scores), gen_idx);
    total = mul(tape, step.p_gen, pg);
  }
  if (!copy_idx.empty()) {
    Tensor pc = select_sum(tape, softmax(tape, step.copy_scores), copy_idx);
    Tensor part = mul(tape, one_minus(tape, step.p_gen), pc);
    total = total.defined() ? add(tape, total, part) : part;
  }
  return log(tape, total);
}

Tensor GecorModel::sequence_loss(Tape& tape, const ResolutionInstance& instance,
                                 const RunMode& mode) const {
  if (instance.target.empty()) throw ContractError("sequence_loss: empty target");
  EncodedPair enc = encode(tape, instance.input, instance.context, mode);
  Tensor state = enc.initial_state;
  std::string prev = kGo;
  Tensor total;
  const std::size_t steps = instance.target.size() + 1;
  for (std::size_t t = 0; t < steps; ++t) {
    const std::string& gold = t < instance.target.size() ? instance.target[t] : kEos;
    auto step = decode_step(tape, prev, state, enc, mode);
    Tensor lp = step_log_prob(tape, step, enc, gold);
    total = total.defined() ? add(tape, total, lp) : lp;
    state = step.state;
    prev = gold;
  }
  return scale(tape, total, -1.0 / static_cast<double>(steps));
}

Tokens GecorModel::resolve(const Tokens& utterance, const Tokens& context,
                           std::size_t max_len) const {
  Tape tape(false);
  EncodedPair enc = encode(tape, utterance, context);
  Tensor state = enc.initial_state;
  std::string prev = kGo;
  Tokens out;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto step = decode_step(tape, prev, state, enc);
    std::string next = distribution(step, enc).argmax();
    if (next == kEos) break;
    out.push_back(next);
    state = step.state;
    prev = next;
  }
  return out;
}

}  // namespace gecor
