#pragma once

#include <set>
#include <string>
#include <vector>

#include "gecor/belief_span.hpp"

namespace gecor {

struct ExactMatch {
  double em = 0.0, em1 = 0.0, em2 = 0.0;
  std::size_t matched_complete = 0, n_complete = 0;
  std::size_t matched_incomplete = 0, n_incomplete = 0;
};

// em1 over pairs whose input was complete, em2 over the rest. Rates over an
// empty subset are 0.
ExactMatch exact_match(const std::vector<Tokens>& predictions, const std::vector<Tokens>& references,
                       const std::vector<bool>& input_complete);

// Corpus BLEU (0–100): clipped n-gram precisions for n ≤ 4, geometric mean,
// brevity penalty. Orders with zero matches use 1/(total+1); no unigram
// match at all scores 0.
double bleu(const std::vector<Tokens>& predictions, const std::vector<Tokens>& references);

struct PRF {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t matched = 0, predicted = 0, gold = 0;
};

PRF prf_from_counts(std::size_t matched, std::size_t predicted, std::size_t gold);

// Micro-averaged multiset token overlap.
PRF word_prf(const std::vector<Tokens>& predictions, const std::vector<Tokens>& references);

// Overlap restricted to what resolution adds: (prediction ∖ input) against
// (reference ∖ input), as multisets.
PRF resolution_prf(const std::vector<Tokens>& inputs, const std::vector<Tokens>& predictions,
                   const std::vector<Tokens>& references);

Tokens multiset_difference(const Tokens& a, const Tokens& b);

inline const std::set<std::string> kDefaultRequestable = {"address", "phone", "postcode"};

// One dialogue's requested slots and the delexicalized responses generated
// for it. A slot counts as answered when its placeholder appears.
struct DialogueOutcome {
  std::set<std::string> requested;
  std::vector<Tokens> responses;
};

std::set<std::string> answered_slots(const std::vector<Tokens>& responses,
                                     const std::set<std::string>& slots = kDefaultRequestable);

PRF success_prf(const std::vector<DialogueOutcome>& dialogues,
                const std::set<std::string>& slots = kDefaultRequestable);

struct MetricReport {
  double em = 0.0, em1 = 0.0, em2 = 0.0;
  std::size_t n_complete = 0, n_incomplete = 0;
  double bleu = 0.0;
  double word_precision = 0.0, word_recall = 0.0, word_f1 = 0.0;
  double resolution_f1 = 0.0;
  bool has_success = false;
  double success_f1 = 0.0, success_precision = 0.0, success_recall = 0.0;
  std::size_t word_matched = 0, word_predicted = 0, word_gold = 0;
  std::size_t resolution_matched = 0, resolution_predicted = 0, resolution_gold = 0;
  std::size_t success_matched = 0, success_predicted = 0, success_gold = 0;

  std::string to_json() const;
  // Fixed-width table: resolution columns EM, EM 1, EM 2, BLEU, F1, Prec.,
  // Rec., Reso.F1; the dialogue task uses EM, BLEU, F1, Prec., Rec.,
  // Succ.F1, Prec., Rec.
  std::string to_table(const std::string& label = "") const;
};

MetricReport resolution_report(const std::vector<Tokens>& inputs,
                               const std::vector<Tokens>& predictions,
                               const std::vector<Tokens>& references,
                               const std::vector<bool>& input_complete);

}  // namespace gecor
