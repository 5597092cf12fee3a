#include "gecor/dialogue_model.hpp"

#include <algorithm>
#include <cmath>

namespace gecor {

// ---- knowledge base ----------------------------------------------------------

KBVector KBVector::from_count(std::size_t matches) {
  KBVector k;
  k.bucket = std::min<std::size_t>(matches, kBuckets - 1);
  k.onehot[k.bucket] = 1.0;
  return k;
}

Tensor KBVector::tensor() const { return Tensor::vector({onehot.begin(), onehot.end()}); }

namespace {

bool is_dontcare(const std::string& v) {
  return v == "dontcare" || v == "don't care" || v == "dont care" || v == "any";
}

const std::vector<std::string> kConstraintSlots = {"food", "pricerange", "area"};
const std::vector<std::string> kDelexSlots = {"name",  "food",    "pricerange", "area",
                                              "phone", "address", "postcode"};

Tokens strip_eos(const Tokens& tokens) {
  Tokens out(tokens);
  if (!out.empty() && out.back() == kEos) out.pop_back();
  return out;
}

}  // namespace

KBMatch kb_match(const BeliefSpan& span, const KnowledgeBase& kb) {
  KBMatch m;
  for (std::size_t r = 0; r < kb.size(); ++r) {
    bool ok = true;
    for (const auto& value : span.informable) {
      if (is_dontcare(value)) continue;
      bool found = false;
      for (const auto& slot : kConstraintSlots)
        if (*kb[r].attribute(slot) == value) found = true;
      if (!found) {
        ok = false;
        break;
      }
    }
    if (ok) m.records.push_back(r);
  }
  m.vector = KBVector::from_count(m.records.size());
  return m;
}

std::string placeholder(const std::string& slot) { return slot + "_SLOT"; }

Tokens delexicalize(const Tokens& response, const KnowledgeBase& kb) {
  struct Value {
    Tokens tokens;
    std::string slot;
  };
  std::vector<Value> values;
  for (const auto& rec : kb)
    for (const auto& slot : kDelexSlots) {
      Tokens t = tokenize(*rec.attribute(slot));
      if (!t.empty()) values.push_back({std::move(t), slot});
    }
  std::stable_sort(values.begin(), values.end(),
                   [](const Value& a, const Value& b) { return a.tokens.size() > b.tokens.size(); });
  Tokens out;
  for (std::size_t i = 0; i < response.size();) {
    const Value* hit = nullptr;
    for (const auto& v : values) {
      if (i + v.tokens.size() <= response.size() &&
          std::equal(v.tokens.begin(), v.tokens.end(), response.begin() + i)) {
        hit = &v;
        break;
      }
    }
    if (hit) {
      out.push_back(placeholder(hit->slot));
      i += hit->tokens.size();
    } else {
      out.push_back(response[i++]);
    }
  }
  return out;
}

Relexicalized relexicalize(const Tokens& response, const KBRecord* top) {
  Relexicalized r;
  for (const auto& tok : response) {
    bool replaced = false;
    for (const auto& slot : kDelexSlots) {
      if (tok != placeholder(slot)) continue;
      if (top) {
        for (auto& t : tokenize(*top->attribute(slot))) r.tokens.push_back(std::move(t));
      } else {
        r.tokens.push_back(tok);
        r.unresolved = true;
      }
      replaced = true;
      break;
    }
    if (!replaced) r.tokens.push_back(tok);
  }
  return r;
}

// ---- instances -------------------------------------------------------------------

std::vector<DialogueTurnInstance> assemble_dialogue_turns(const Corpus& corpus, Condition condition,
                                                          std::uint64_t seed,
                                                          const KnowledgeBase& kb) {
  std::vector<DialogueTurnInstance> out;
  for (const auto& d : corpus) {
    std::vector<Tokens> history;
    BeliefSpan previous;
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      const auto& turn = d.turns[i];
      DialogueTurnInstance inst;
      inst.dialogue_id = d.id;
      inst.turn_index = i;
      inst.input = select_input(d, i, condition, seed);
      inst.context = build_context(history, inst.input);
      inst.complete = turn.user.complete;
      inst.input_complete = inst.input == inst.complete;
      inst.previous_bspan = previous;
      inst.bspan = turn.bspan;
      inst.response = delexicalize(turn.system, kb);
      inst.kb = kb_match(turn.bspan, kb).vector;
      history.push_back(inst.input);
      history.push_back(turn.system);
      previous = turn.bspan;
      out.push_back(std::move(inst));
    }
  }
  return out;
}

std::vector<Tokens> dialogue_vocabulary_sequences(const Corpus& corpus, const KnowledgeBase& kb) {
  auto seqs = vocabulary_sequences(corpus);
  for (const auto& d : corpus)
    for (const auto& t : d.turns) seqs.push_back(delexicalize(t.system, kb));
  return seqs;
}

Tokens DialogueState::context_tokens() const {
  Tokens ctx;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i) ctx.emplace_back(kSep);
    ctx.insert(ctx.end(), history[i].begin(), history[i].end());
  }
  return ctx;
}

// ---- model -------------------------------------------------------------------------

DialogueModel::DialogueModel(Vocabulary vocab, std::uint64_t seed, ModelDims dims,
                             bool gecor_branch, std::optional<Tensor> embeddings)
    : vocab_(std::move(vocab)), dims_(dims), gecor_branch_(gecor_branch) {
  std::mt19937_64 rng(seed);
  const std::size_t e = dims_.embedding, h = dims_.hidden, enc = 2 * h, mem = h + e;
  const std::size_t V = vocab_.size();
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  if (embeddings) {
    if (embeddings->shape() != Shape{V, e})
      throw DimensionError("embedding matrix " + shape_str(embeddings->shape()) + " does not match " +
                           shape_str({V, e}));
    embedding_ = params_.add("dialogue.embedding", embeddings->clone());
  } else {
    embedding_ = params_.add("dialogue.embedding", {V, e}, 1.0 / std::sqrt(double(e)), rng);
  }
  utterance_encoder_ = BiGru::create(params_, "dialogue.utterance_encoder", e, h, rng);
  context_encoder_ = BiGru::create(params_, "dialogue.context_encoder", e, h, rng);
  bridge_ = Linear::create(params_, "dialogue.bridge", enc, h, rng);

  auto make = [&](const std::string& prefix, const std::vector<std::size_t>& attention_dims,
                  std::size_t extra, const std::vector<std::size_t>& copy_dims) {
    Decoder d;
    std::size_t ctx = 0;
    for (std::size_t k = 0; k < attention_dims.size(); ++k) {
      d.attention.push_back(Attention::create(params_, prefix + ".attention" + std::to_string(k + 1),
                                              attention_dims[k], h, h, rng));
      ctx += attention_dims[k];
    }
    d.gru = add_gru(params_, prefix + ".gru", e + ctx + extra, h, rng);
    d.gen_w = params_.add(prefix + ".generation.w", {V, h + ctx + extra}, bound, rng);
    d.gen_bias = params_.add(prefix + ".generation.bias", {V}, bound, rng);
    for (std::size_t k = 0; k < copy_dims.size(); ++k)
      d.copy.push_back(
          CopyScorer::create(params_, prefix + ".copy" + std::to_string(k + 1), copy_dims[k], h, rng));
    return d;
  };
  bspan_decoder_ = make("dialogue.bspan_decoder", {enc}, 0, {enc});
  complete_decoder_ = make("dialogue.complete_decoder", {enc}, 0, {mem, enc});
  response_decoder_ = make("dialogue.response_decoder", {enc, mem, mem}, KBVector::kBuckets, {mem});
}

Tensor DialogueModel::embed(Tape& tape, const std::string& token) const {
  return lookup(tape, embedding_, vocab_.lookup(token));
}

Tensor DialogueModel::memory_row(Tape& tape, const Tensor& state, const std::string& token) const {
  Tensor parts[] = {state, embed(tape, token)};
  return concat(tape, parts);
}

TurnEncoding DialogueModel::encode_turn(Tape& tape, const Tokens& utterance,
                                        const BeliefSpan& previous, const Tokens& context,
                                        const RunMode& mode) const {
  if (utterance.empty()) throw ContractError("encode_turn: empty utterance");
  if (context.empty()) throw ContractError("encode_turn: empty context");
  TurnEncoding enc;
  enc.encoder_input = utterance;
  enc.encoder_input.emplace_back(kSep);
  for (auto& t : previous.tokens()) enc.encoder_input.push_back(std::move(t));
  enc.context = context;
  auto embed_all = [&](const Tokens& toks) {
    std::vector<Tensor> xs;
    xs.reserve(toks.size());
    for (const auto& t : toks) xs.push_back(embed(tape, t));
    return xs;
  };
  auto utt = utterance_encoder_.run(tape, embed_all(enc.encoder_input));
  auto ctx = context_encoder_.run(tape, embed_all(context));
  enc.utterance_states = mode.apply_dropout(tape, utt.states);
  enc.context_states = mode.apply_dropout(tape, ctx.states);
  enc.initial_state = tanh(tape, bridge_(tape, utt.final));
  return enc;
}

DialogueStepScores DialogueModel::step(Tape& tape, const Decoder& dec, const std::string& prev,
                                       const Tensor& s_prev, const std::vector<Tensor>& memories,
                                       const std::vector<Tensor>& keys,
                                       const std::vector<Tensor>& copy_proj, const Tensor& extra,
                                       const RunMode& mode) const {
  std::vector<Tensor> contexts;
  for (std::size_t k = 0; k < dec.attention.size(); ++k)
    contexts.push_back(dec.attention[k].attend(tape, keys[k], memories[k], s_prev).context);
  std::vector<Tensor> input{mode.apply_dropout(tape, embed(tape, prev))};
  input.insert(input.end(), contexts.begin(), contexts.end());
  if (extra.defined()) input.push_back(extra);
  DialogueStepScores out;
  out.state = gru_cell(tape, concat(tape, input), s_prev, dec.gru);
  std::vector<Tensor> features{out.state};
  features.insert(features.end(), contexts.begin(), contexts.end());
  if (extra.defined()) features.push_back(extra);
  out.generation = add(tape, matvec(tape, dec.gen_w, concat(tape, features)), dec.gen_bias);
  for (std::size_t c = 0; c < dec.copy.size(); ++c)
    out.copy.push_back(dec.copy[c].score(tape, copy_proj[c], out.state));
  return out;
}

DecoderTrace DialogueModel::run_decoder(Tape& tape, const Decoder& dec, const Tensor& s0,
                                        const std::vector<Tensor>& memories,
                                        const std::vector<Tensor>& copy_memories,
                                        const std::vector<const Tokens*>& sources,
                                        const Tensor& extra, const Tokens* gold,
                                        const RunMode& mode, std::size_t max_len) const {
  std::vector<Tensor> keys, proj;
  for (std::size_t k = 0; k < dec.attention.size(); ++k)
    keys.push_back(dec.attention[k].keys(tape, memories[k]));
  for (std::size_t c = 0; c < dec.copy.size(); ++c)
    proj.push_back(dec.copy[c].project(tape, copy_memories[c]));

  DecoderTrace trace;
  std::vector<Tensor> rows;
  Tensor state = s0;
  std::string prev = kGo;
  const std::size_t limit = gold ? gold->size() + 1 : max_len;
  for (std::size_t t = 0; t < limit; ++t) {
    auto sc = step(tape, dec, prev, state, memories, keys, proj, extra, mode);
    std::string next;
    if (gold) {
      next = t < gold->size() ? (*gold)[t] : std::string(kEos);
      std::vector<Tensor> parts{sc.generation};
      parts.insert(parts.end(), sc.copy.begin(), sc.copy.end());
      auto idx = extended_indices(vocab_, next, sources);
      Tensor nlp = scale(tape, log_softmax_select(tape, concat(tape, parts), idx), -1.0);
      trace.loss_sum = trace.loss_sum.defined() ? add(tape, trace.loss_sum, nlp) : nlp;
    } else {
      std::vector<std::vector<double>> copy;
      for (const auto& c : sc.copy) copy.push_back(to_vector(c));
      next = shared_z_distribution(vocab_, to_vector(sc.generation), sources, copy).argmax();
    }
    state = sc.state;
    rows.push_back(memory_row(tape, state, next));
    trace.tokens.push_back(next);
    ++trace.steps;
    if (next == kEos) break;
    prev = next;
  }
  if (trace.tokens.empty() || trace.tokens.back() != kEos) {
    rows.push_back(memory_row(tape, state, kEos));
    trace.tokens.emplace_back(kEos);
  }
  trace.memory = stack_rows(tape, rows);
  trace.final_state = state;
  return trace;
}

DecoderTrace DialogueModel::decode_bspan(Tape& tape, const TurnEncoding& enc, const Tokens* gold,
                                         const RunMode& mode, std::size_t max_len) const {
  return run_decoder(tape, bspan_decoder_, enc.initial_state, {enc.utterance_states},
                     {enc.utterance_states}, {&enc.encoder_input}, Tensor(), gold, mode, max_len);
}

DecoderTrace DialogueModel::decode_complete(Tape& tape, const TurnEncoding& enc,
                                            const DecoderTrace& bspan, const Tokens* gold,
                                            const RunMode& mode, std::size_t max_len) const {
  return run_decoder(tape, complete_decoder_, bspan.final_state, {enc.utterance_states},
                     {bspan.memory, enc.context_states}, {&bspan.tokens, &enc.context}, Tensor(),
                     gold, mode, max_len);
}

DecoderTrace DialogueModel::decode_response(Tape& tape, const TurnEncoding& enc,
                                            const DecoderTrace& bspan,
                                            const DecoderTrace& complete, const KBVector& kb,
                                            const Tokens* gold, const RunMode& mode,
                                            std::size_t max_len) const {
  return run_decoder(tape, response_decoder_, complete.final_state,
                     {enc.utterance_states, bspan.memory, complete.memory}, {complete.memory},
                     {&complete.tokens}, kb.tensor(), gold, mode, max_len);
}

ExtendedVocabDistribution DialogueModel::complete_distribution(Tape& tape, const TurnEncoding& enc,
                                                               const DecoderTrace& bspan,
                                                               const std::string& prev_token,
                                                               const Tensor& s_prev,
                                                               Tensor* state_out) const {
  const auto& dec = complete_decoder_;
  std::vector<Tensor> memories{enc.utterance_states};
  std::vector<Tensor> keys{dec.attention[0].keys(tape, enc.utterance_states)};
  std::vector<Tensor> proj{dec.copy[0].project(tape, bspan.memory),
                           dec.copy[1].project(tape, enc.context_states)};
  auto sc = step(tape, dec, prev_token, s_prev, memories, keys, proj, Tensor(), {});
  if (state_out) *state_out = sc.state;
  return shared_z_distribution(vocab_, to_vector(sc.generation), {&bspan.tokens, &enc.context},
                               {to_vector(sc.copy[0]), to_vector(sc.copy[1])});
}

ExtendedVocabDistribution DialogueModel::response_distribution(
    Tape& tape, const TurnEncoding& enc, const DecoderTrace& bspan, const DecoderTrace& complete,
    const KBVector& kb, const std::string& prev_token, const Tensor& s_prev) const {
  const auto& dec = response_decoder_;
  std::vector<Tensor> memories{enc.utterance_states, bspan.memory, complete.memory};
  std::vector<Tensor> keys;
  for (std::size_t k = 0; k < 3; ++k) keys.push_back(dec.attention[k].keys(tape, memories[k]));
  std::vector<Tensor> proj{dec.copy[0].project(tape, complete.memory)};
  auto sc = step(tape, dec, prev_token, s_prev, memories, keys, proj, kb.tensor(), {});
  return shared_z_distribution(vocab_, to_vector(sc.generation), {&complete.tokens},
                               {to_vector(sc.copy[0])});
}

TurnLosses DialogueModel::turn_loss(Tape& tape, const DialogueTurnInstance& instance,
                                    const RunMode& mode) const {
  TurnEncoding enc = encode_turn(tape, instance.input, instance.previous_bspan, instance.context, mode);
  const Tokens bspan_gold = instance.bspan.tokens();
  DecoderTrace t1 = decode_bspan(tape, enc, &bspan_gold, mode);
  const Tokens& complete_gold = gecor_branch_ ? instance.complete : instance.input;
  DecoderTrace t2 = decode_complete(tape, enc, t1, &complete_gold, mode);
  DecoderTrace t3 = decode_response(tape, enc, t1, t2, instance.kb, &instance.response, mode);
  auto mean = [&](const DecoderTrace& t) {
    return scale(tape, t.loss_sum, 1.0 / static_cast<double>(t.steps));
  };
  TurnLosses out;
  out.l1 = mean(t1);
  out.l3 = mean(t3);
  out.total = add(tape, out.l1, out.l3);
  if (gecor_branch_) {
    out.l2 = mean(t2);
    out.total = add(tape, out.total, out.l2);
  }
  return out;
}

TurnResult DialogueModel::run_turn(const DialogueState& state, const Tokens& utterance,
                                   const KnowledgeBase& kb, DialogueState* next,
                                   std::size_t max_len) const {
  Tape tape(false);
  const Tokens context = build_context(state.history, utterance);
  TurnEncoding enc = encode_turn(tape, utterance, state.previous_bspan, context);
  DecoderTrace t1 = decode_bspan(tape, enc, nullptr, {}, max_len);
  DecoderTrace t2 = gecor_branch_ ? decode_complete(tape, enc, t1, nullptr, {}, max_len)
                                  : decode_complete(tape, enc, t1, &utterance, {}, max_len);
  TurnResult r;
  r.turn_index = state.turn;
  r.bspan = BeliefSpan::from_tokens(strip_eos(t1.tokens));
  r.resolved = strip_eos(t2.tokens);
  r.kb = kb_match(r.bspan, kb);
  DecoderTrace t3 = decode_response(tape, enc, t1, t2, r.kb.vector, nullptr, {}, max_len);
  r.response_delex = strip_eos(t3.tokens);
  auto relex = relexicalize(r.response_delex, r.kb.records.empty() ? nullptr : &kb[r.kb.records[0]]);
  r.response = std::move(relex.tokens);
  r.unresolved_placeholders = relex.unresolved;
  if (next) {
    *next = state;
    next->history.push_back(utterance);
    next->history.push_back(r.response);
    next->previous_bspan = r.bspan;
    next->turn = state.turn + 1;
  }
  return r;
}

}  // namespace gecor
