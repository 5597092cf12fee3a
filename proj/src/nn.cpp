#include "gecor/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace gecor {

Tensor ParameterSet::add(const std::string& name, Shape shape, double bound,
                         std::mt19937_64& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  uniform_init(t, bound, rng);
  return add(name, t);
}

Tensor ParameterSet::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  value.set_requires_grad(true);
  index_[name] = items_.size();
  items_.emplace_back(name, value);
  return value;
}

Tensor ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return items_[it->second].second;
}

std::size_t ParameterSet::count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

void ParameterSet::assign(const ParameterSet& other) {
  if (other.items_.size() != items_.size())
    throw ConfigError("parameter sets differ in size: " + std::to_string(items_.size()) + " vs " +
                      std::to_string(other.items_.size()));
  for (auto& [name, t] : items_) {
    Tensor src = other.get(name);
    if (src.shape() != t.shape())
      throw DimensionError("parameter '" + name + "': shape " + shape_str(t.shape()) + " vs " +
                           shape_str(src.shape()));
    std::copy(src.values().begin(), src.values().end(), t.values().begin());
  }
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& [name, t] : items_) out.add(name, t.clone());
  return out;
}

GruParams add_gru(ParameterSet& ps, const std::string& prefix, std::size_t input,
                  std::size_t hidden, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GruParams p;
  p.w_input = ps.add(prefix + ".w_input", {3 * hidden, input}, bound, rng);
  p.w_hidden = ps.add(prefix + ".w_hidden", {3 * hidden, hidden}, bound, rng);
  p.bias = ps.add(prefix + ".bias", {3 * hidden}, bound, rng);
  return p;
}

BiGru BiGru::create(ParameterSet& ps, const std::string& prefix, std::size_t input,
                    std::size_t hidden, std::mt19937_64& rng) {
  BiGru g;
  g.forward = add_gru(ps, prefix + ".forward", input, hidden, rng);
  g.backward = add_gru(ps, prefix + ".backward", input, hidden, rng);
  return g;
}

BiGruOutput BiGru::run(Tape& tape, const std::vector<Tensor>& inputs) const {
  if (inputs.empty()) throw ContractError("bidirectional encoder: empty input sequence");
  const std::size_t n = inputs.size();
  const std::size_t h = hidden();
  std::vector<Tensor> fwd(n), bwd(n);
  Tensor state = Tensor::zeros({h});
  for (std::size_t i = 0; i < n; ++i) state = fwd[i] = gru_cell(tape, inputs[i], state, forward);
  state = Tensor::zeros({h});
  for (std::size_t i = n; i-- > 0;) state = bwd[i] = gru_cell(tape, inputs[i], state, backward);
  std::vector<Tensor> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor pair[] = {fwd[i], bwd[i]};
    rows[i] = concat(tape, pair);
  }
  BiGruOutput out;
  out.states = stack_rows(tape, rows);
  Tensor last[] = {fwd[n - 1], bwd[0]};
  out.final = concat(tape, last);
  return out;
}

Attention Attention::create(ParameterSet& ps, const std::string& prefix, std::size_t memory_dim,
                            std::size_t query_dim, std::size_t attn_dim, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(attn_dim));
  Attention a;
  a.w_memory = ps.add(prefix + ".w_memory", {memory_dim, attn_dim}, bound, rng);
  a.w_query = ps.add(prefix + ".w_query", {attn_dim, query_dim}, bound, rng);
  a.bias = ps.add(prefix + ".bias", {attn_dim}, bound, rng);
  a.v = ps.add(prefix + ".v", {attn_dim}, bound, rng);
  return a;
}

Tensor Attention::keys(Tape& tape, const Tensor& memory) const {
  return matmul(tape, memory, w_memory);
}

Attention::Result Attention::attend(Tape& tape, const Tensor& k, const Tensor& memory,
                                    const Tensor& query) const {
  Tensor q = add(tape, matvec(tape, w_query, query), bias);
  Tensor e = matvec(tape, tanh(tape, add_rowwise(tape, k, q)), v);
  Result r;
  r.weights = softmax(tape, e);
  r.context = vecmat(tape, r.weights, memory);
  return r;
}

CopyScorer CopyScorer::create(ParameterSet& ps, const std::string& prefix, std::size_t memory_dim,
                              std::size_t state_dim, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(state_dim));
  CopyScorer c;
  c.w = ps.add(prefix + ".w", {memory_dim, state_dim}, bound, rng);
  c.bias = ps.add(prefix + ".bias", {state_dim}, bound, rng);
  return c;
}

Tensor CopyScorer::project(Tape& tape, const Tensor& memory) const {
  return tanh(tape, add_rowwise(tape, matmul(tape, memory, w), bias));
}

Tensor CopyScorer::score(Tape& tape, const Tensor& projected, const Tensor& state) const {
  return matvec(tape, projected, state);
}

Linear Linear::create(ParameterSet& ps, const std::string& prefix, std::size_t in,
                      std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.w = ps.add(prefix + ".w", {out, in}, bound, rng);
  l.bias = ps.add(prefix + ".bias", {out}, bound, rng);
  return l;
}

Tensor Linear::operator()(Tape& tape, const Tensor& x) const {
  return add(tape, matvec(tape, w, x), bias);
}

std::vector<double> to_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// ---- extended vocabulary ----------------------------------------------------

double ExtendedVocabDistribution::generation_prob(const std::string& token) const {
  if (!vocab->contains(token)) return 0.0;
  return generation[vocab->lookup(token)];
}

double ExtendedVocabDistribution::copy_prob(const std::string& token) const {
  double p = 0.0;
  for (std::size_t s = 0; s < sources.size(); ++s)
    for (std::size_t i = 0; i < sources[s]->size(); ++i)
      if ((*sources[s])[i] == token) p += copy[s][i];
  return p;
}

double ExtendedVocabDistribution::prob(const std::string& token) const {
  return generation_prob(token) + copy_prob(token);
}

double ExtendedVocabDistribution::total_mass() const {
  double m = 0.0;
  for (double p : generation) m += p;
  for (const auto& c : copy)
    for (double p : c) m += p;
  return m;
}

std::string ExtendedVocabDistribution::argmax() const {
  // Surface-token masses in first-seen order: vocabulary first, then copied
  // tokens outside V in source order.
  std::vector<double> mass(generation);
  std::vector<std::string> extra;
  std::unordered_map<std::string, std::size_t> extra_index;
  for (std::size_t s = 0; s < sources.size(); ++s)
    for (std::size_t i = 0; i < sources[s]->size(); ++i) {
      const auto& tok = (*sources[s])[i];
      if (vocab->contains(tok)) {
        mass[vocab->lookup(tok)] += copy[s][i];
      } else {
        auto [it, inserted] = extra_index.emplace(tok, vocab->size() + extra.size());
        if (inserted) {
          extra.push_back(tok);
          mass.push_back(0.0);
        }
        mass[it->second] += copy[s][i];
      }
    }
  std::size_t best = Vocabulary::kUnkId;
  double best_mass = -1.0;
  for (std::size_t k = 0; k < mass.size(); ++k) {
    if (k == Vocabulary::kPadId || k == Vocabulary::kGoId) continue;
    if (mass[k] > best_mass) {
      best_mass = mass[k];
      best = k;
    }
  }
  return best < vocab->size() ? vocab->token(best) : extra[best - vocab->size()];
}

std::vector<std::size_t> extended_indices(const Vocabulary& vocab, const std::string& token,
                                          const std::vector<const Tokens*>& sources) {
  std::vector<std::size_t> idx;
  const bool in_vocab = vocab.contains(token);
  if (in_vocab) idx.push_back(vocab.lookup(token));
  std::size_t offset = vocab.size();
  for (const auto* src : sources) {
    for (std::size_t i = 0; i < src->size(); ++i)
      if ((*src)[i] == token) idx.push_back(offset + i);
    offset += src->size();
  }
  if (idx.empty()) idx.push_back(Vocabulary::kUnkId);
  return idx;
}

ExtendedVocabDistribution shared_z_distribution(const Vocabulary& vocab,
                                                const std::vector<double>& gen_scores,
                                                const std::vector<const Tokens*>& sources,
                                                const std::vector<std::vector<double>>& copy_scores) {
  if (gen_scores.size() != vocab.size())
    throw DimensionError("generation scores (" + std::to_string(gen_scores.size()) +
                         ") do not cover the vocabulary (" + std::to_string(vocab.size()) + ")");
  if (copy_scores.size() != sources.size())
    throw DimensionError("copy score sources do not match token sources");
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : gen_scores) mx = std::max(mx, s);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (copy_scores[s].size() != sources[s]->size())
      throw DimensionError("copy scores do not match source length");
    for (double v : copy_scores[s]) mx = std::max(mx, v);
  }
  ExtendedVocabDistribution d;
  d.vocab = &vocab;
  d.sources = sources;
  double z = 0.0;
  d.generation.resize(gen_scores.size());
  for (std::size_t k = 0; k < gen_scores.size(); ++k) z += d.generation[k] = std::exp(gen_scores[k] - mx);
  d.copy.resize(sources.size());
  for (std::size_t s = 0; s < sources.size(); ++s) {
    d.copy[s].resize(copy_scores[s].size());
    for (std::size_t i = 0; i < copy_scores[s].size(); ++i)
      z += d.copy[s][i] = std::exp(copy_scores[s][i] - mx);
  }
  for (double& p : d.generation) p /= z;
  for (auto& c : d.copy)
    for (double& p : c) p /= z;
  return d;
}

namespace {

std::vector<double> softmax_values(const std::vector<double>& x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += out[i] = std::exp(x[i] - mx);
  for (double& p : out) p /= z;
  return out;
}

}  // namespace

ExtendedVocabDistribution gated_distribution(const Vocabulary& vocab,
                                             const std::vector<double>& gen_scores,
                                             const Tokens& context,
                                             const std::vector<double>& copy_scores, double p_gen) {
  if (gen_scores.size() != vocab.size())
    throw DimensionError("generation scores do not cover the vocabulary");
  if (copy_scores.size() != context.size())
    throw DimensionError("copy scores do not match context length");
  ExtendedVocabDistribution d;
  d.vocab = &vocab;
  d.sources = {&context};
  d.generation = softmax_values(gen_scores);
  for (double& p : d.generation) p *= p_gen;
  d.copy = {softmax_values(copy_scores)};
  for (double& p : d.copy[0]) p *= 1.0 - p_gen;
  return d;
}

}  // namespace gecor
