#pragma once

#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gecor/corpus.hpp"
#include "gecor/tensor.hpp"

namespace gecor {

// Named, ordered collection of learnable tensors. Names follow
// module.submodule.matrix and are the checkpoint keys.
class ParameterSet {
 public:
  Tensor add(const std::string& name, Shape shape, double bound, std::mt19937_64& rng);
  Tensor add(const std::string& name, Tensor value);

  Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::size_t count() const;  // scalar parameters

  void zero_grad();

  // Overwrites values from `other`; names and shapes must match exactly.
  void assign(const ParameterSet& other);
  ParameterSet clone() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::map<std::string, std::size_t> index_;
};

struct RunMode {
  bool train = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Tensor apply_dropout(Tape& tape, const Tensor& x) const {
    if (!train || dropout <= 0.0 || rng == nullptr) return x;
    return gecor::dropout(tape, x, dropout, *rng);
  }
};

GruParams add_gru(ParameterSet& ps, const std::string& prefix, std::size_t input,
                  std::size_t hidden, std::mt19937_64& rng);

struct BiGruOutput {
  Tensor states;  // [n × 2h], forward ⊕ backward per position
  Tensor final;   // [2h], last forward ⊕ first backward
};

struct BiGru {
  GruParams forward;
  GruParams backward;

  static BiGru create(ParameterSet& ps, const std::string& prefix, std::size_t input,
                      std::size_t hidden, std::mt19937_64& rng);
  BiGruOutput run(Tape& tape, const std::vector<Tensor>& inputs) const;
  std::size_t hidden() const { return forward.hidden(); }
};

// Additive attention e_i = vᵀ tanh(W_h h_i + W_s s + b). `keys` caches W_h h_i
// for a memory so each decoder step only pays for the query projection.
struct Attention {
  Tensor w_memory;  // [d_mem × d_attn] (stored transposed for a single matmul)
  Tensor w_query;   // [d_attn × d_query]
  Tensor bias;      // [d_attn]
  Tensor v;         // [d_attn]

  static Attention create(ParameterSet& ps, const std::string& prefix, std::size_t memory_dim,
                          std::size_t query_dim, std::size_t attn_dim, std::mt19937_64& rng);
  Tensor keys(Tape& tape, const Tensor& memory) const;

  struct Result {
    Tensor weights;  // [n]
    Tensor context;  // [d_mem]
  };
  Result attend(Tape& tape, const Tensor& keys, const Tensor& memory, const Tensor& query) const;
};

// ψ_c(i) = tanh(W m_i + b) · s. `project` is computed once per memory.
struct CopyScorer {
  Tensor w;     // [d_mem × d_state]
  Tensor bias;  // [d_state]

  static CopyScorer create(ParameterSet& ps, const std::string& prefix, std::size_t memory_dim,
                           std::size_t state_dim, std::mt19937_64& rng);
  Tensor project(Tape& tape, const Tensor& memory) const;
  Tensor score(Tape& tape, const Tensor& projected, const Tensor& state) const;
};

struct Linear {
  Tensor w;     // [out × in]
  Tensor bias;  // [out]
  static Linear create(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t out,
                       std::mt19937_64& rng);
  Tensor operator()(Tape& tape, const Tensor& x) const;
};

// A distribution over V ∪ (tokens of one or more copy sources): generation
// mass per vocabulary entry plus per-position copy mass for each source.
struct ExtendedVocabDistribution {
  const Vocabulary* vocab = nullptr;
  std::vector<double> generation;                 // [|V|]
  std::vector<const Tokens*> sources;             // copy sources in order
  std::vector<std::vector<double>> copy;          // per source, per position

  // P(y) = P^g(y) + Σ_sources Σ_{i: token_i = y} copy_i
  double prob(const std::string& token) const;
  double generation_prob(const std::string& token) const;
  double copy_prob(const std::string& token) const;
  double total_mass() const;
  // Highest-mass surface token; <pad> and <go> are never emitted.
  std::string argmax() const;
};

// Indices into concat(gen scores, source scores...) whose mass makes up P(y).
// Tokens outside V and every source fall back to the <unk> generation entry.
std::vector<std::size_t> extended_indices(const Vocabulary& vocab, const std::string& token,
                                          const std::vector<const Tokens*>& sources);

// One shared normalizer over generation and every copy source.
ExtendedVocabDistribution shared_z_distribution(const Vocabulary& vocab,
                                                const std::vector<double>& gen_scores,
                                                const std::vector<const Tokens*>& sources,
                                                const std::vector<std::vector<double>>& copy_scores);

// Separately normalized generation/copy mixed by p_gen.
ExtendedVocabDistribution gated_distribution(const Vocabulary& vocab,
                                             const std::vector<double>& gen_scores,
                                             const Tokens& context,
                                             const std::vector<double>& copy_scores, double p_gen);

std::vector<double> to_vector(const Tensor& t);

}  // namespace gecor
