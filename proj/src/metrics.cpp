#include "gecor/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "gecor/tensor.hpp"
#include "json.hpp"

namespace gecor {

namespace {

void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw ContractError(std::string(what) + ": " + std::to_string(a) + " predictions vs " +
                        std::to_string(b) + " references");
}

std::map<std::string, std::size_t> counts(const Tokens& t) {
  std::map<std::string, std::size_t> c;
  for (const auto& w : t) ++c[w];
  return c;
}

std::size_t overlap(const Tokens& a, const Tokens& b) {
  auto ca = counts(a), cb = counts(b);
  std::size_t m = 0;
  for (const auto& [w, n] : ca)
    if (auto it = cb.find(w); it != cb.end()) m += std::min(n, it->second);
  return m;
}

double rate(std::size_t num, std::size_t den) { return den ? double(num) / double(den) : 0.0; }

}  // namespace

ExactMatch exact_match(const std::vector<Tokens>& predictions, const std::vector<Tokens>& references,
                       const std::vector<bool>& input_complete) {
  require_aligned(predictions.size(), references.size(), "exact_match");
  require_aligned(input_complete.size(), references.size(), "exact_match flags");
  ExactMatch r;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool hit = predictions[i] == references[i];
    if (input_complete[i]) {
      ++r.n_complete;
      r.matched_complete += hit;
    } else {
      ++r.n_incomplete;
      r.matched_incomplete += hit;
    }
  }
  r.em1 = rate(r.matched_complete, r.n_complete);
  r.em2 = rate(r.matched_incomplete, r.n_incomplete);
  r.em = rate(r.matched_complete + r.matched_incomplete, r.n_complete + r.n_incomplete);
  return r;
}

double bleu(const std::vector<Tokens>& predictions, const std::vector<Tokens>& references) {
  require_aligned(predictions.size(), references.size(), "bleu");
  if (predictions.empty()) throw ContractError("bleu: empty corpus");
  std::size_t matched[5] = {}, total[5] = {};
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    const auto& h = predictions[s];
    const auto& r = references[s];
    hyp_len += h.size();
    ref_len += r.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<Tokens, std::size_t> hc, rc;
      for (std::size_t i = 0; i + n <= h.size(); ++i) ++hc[Tokens(h.begin() + i, h.begin() + i + n)];
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++rc[Tokens(r.begin() + i, r.begin() + i + n)];
      for (const auto& [gram, c] : hc) {
        total[n] += c;
        if (auto it = rc.find(gram); it != rc.end()) matched[n] += std::min(c, it->second);
      }
    }
  }
  if (matched[1] == 0) return 0.0;
  double log_p = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const double p = matched[n] ? double(matched[n]) / double(total[n]) : 1.0 / double(total[n] + 1);
    log_p += std::log(p) / 4.0;
  }
  const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - double(ref_len) / double(hyp_len));
  return 100.0 * bp * std::exp(log_p);
}

PRF prf_from_counts(std::size_t matched, std::size_t predicted, std::size_t gold) {
  PRF p;
  p.matched = matched;
  p.predicted = predicted;
  p.gold = gold;
  p.precision = rate(matched, predicted);
  p.recall = rate(matched, gold);
  p.f1 = p.precision + p.recall > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
  return p;
}

PRF word_prf(const std::vector<Tokens>& predictions, const std::vector<Tokens>& references) {
  require_aligned(predictions.size(), references.size(), "word_prf");
  std::size_t m = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    m += overlap(predictions[i], references[i]);
    np += predictions[i].size();
    ng += references[i].size();
  }
  return prf_from_counts(m, np, ng);
}

Tokens multiset_difference(const Tokens& a, const Tokens& b) {
  auto cb = counts(b);
  Tokens out;
  for (const auto& w : a) {
    auto it = cb.find(w);
    if (it != cb.end() && it->second > 0)
      --it->second;
    else
      out.push_back(w);
  }
  return out;
}

PRF resolution_prf(const std::vector<Tokens>& inputs, const std::vector<Tokens>& predictions,
                   const std::vector<Tokens>& references) {
  require_aligned(predictions.size(), references.size(), "resolution_f1");
  require_aligned(inputs.size(), references.size(), "resolution_f1 inputs");
  std::vector<Tokens> pred, gold;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    pred.push_back(multiset_difference(predictions[i], inputs[i]));
    gold.push_back(multiset_difference(references[i], inputs[i]));
  }
  return word_prf(pred, gold);
}

std::set<std::string> answered_slots(const std::vector<Tokens>& responses,
                                     const std::set<std::string>& slots) {
  std::set<std::string> out;
  for (const auto& r : responses)
    for (const auto& tok : r)
      for (const auto& s : slots)
        if (tok == s + "_SLOT") out.insert(s);
  return out;
}

PRF success_prf(const std::vector<DialogueOutcome>& dialogues, const std::set<std::string>& slots) {
  std::size_t m = 0, np = 0, ng = 0;
  for (const auto& d : dialogues) {
    auto answered = answered_slots(d.responses, slots);
    std::set<std::string> requested;
    for (const auto& r : d.requested)
      if (slots.count(r)) requested.insert(r);
    for (const auto& a : answered) m += requested.count(a);
    np += answered.size();
    ng += requested.size();
  }
  return prf_from_counts(m, np, ng);
}

MetricReport resolution_report(const std::vector<Tokens>& inputs,
                               const std::vector<Tokens>& predictions,
                               const std::vector<Tokens>& references,
                               const std::vector<bool>& input_complete) {
  MetricReport r;
  auto em = exact_match(predictions, references, input_complete);
  r.em = em.em;
  r.em1 = em.em1;
  r.em2 = em.em2;
  r.n_complete = em.n_complete;
  r.n_incomplete = em.n_incomplete;
  r.bleu = predictions.empty() ? 0.0 : bleu(predictions, references);
  auto w = word_prf(predictions, references);
  r.word_precision = w.precision;
  r.word_recall = w.recall;
  r.word_f1 = w.f1;
  r.word_matched = w.matched;
  r.word_predicted = w.predicted;
  r.word_gold = w.gold;
  auto res = resolution_prf(inputs, predictions, references);
  r.resolution_f1 = res.f1;
  r.resolution_matched = res.matched;
  r.resolution_predicted = res.predicted;
  r.resolution_gold = res.gold;
  return r;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["em"] = em;
  j["em1"] = em1;
  j["em2"] = em2;
  j["bleu"] = bleu;
  j["word_precision"] = word_precision;
  j["word_recall"] = word_recall;
  j["word_f1"] = word_f1;
  j["resolution_f1"] = resolution_f1;
  if (has_success) {
    j["success_f1"] = success_f1;
    j["success_precision"] = success_precision;
    j["success_recall"] = success_recall;
  } else {
    j["success_f1"] = nullptr;
    j["success_precision"] = nullptr;
    j["success_recall"] = nullptr;
  }
  j["counts"] = {{"complete_inputs", n_complete},
                 {"incomplete_inputs", n_incomplete},
                 {"word_matched", word_matched},
                 {"word_predicted", word_predicted},
                 {"word_gold", word_gold},
                 {"resolution_matched", resolution_matched},
                 {"resolution_predicted", resolution_predicted},
                 {"resolution_gold", resolution_gold},
                 {"success_matched", success_matched},
                 {"success_predicted", success_predicted},
                 {"success_gold", success_gold}};
  return j.dump(2);
}

std::string MetricReport::to_table(const std::string& label) const {
  std::vector<std::pair<std::string, double>> cols;
  if (has_success) {
    cols = {{"EM", em},
            {"BLEU", bleu / 100.0},
            {"F1", word_f1},
            {"Prec.", word_precision},
            {"Rec.", word_recall},
            {"Succ.F1", success_f1},
            {"Prec.", success_precision},
            {"Rec.", success_recall}};
  } else {
    cols = {{"EM", em},
            {"EM 1", em1},
            {"EM 2", em2},
            {"BLEU", bleu / 100.0},
            {"F1", word_f1},
            {"Prec.", word_precision},
            {"Rec.", word_recall},
            {"Reso.F1", resolution_f1}};
  }
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-12s", "");
  out << buf;
  for (const auto& [name, v] : cols) {
    std::snprintf(buf, sizeof buf, "%9s", name.c_str());
    out << buf;
  }
  out << '\n';
  std::snprintf(buf, sizeof buf, "%-12s", label.c_str());
  out << buf;
  for (const auto& [name, v] : cols) {
    std::snprintf(buf, sizeof buf, "%9.2f", 100.0 * v);
    out << buf;
  }
  out << '\n';
  return out.str();
}

}  // namespace gecor
