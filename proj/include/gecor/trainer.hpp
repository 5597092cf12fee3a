#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gecor/config.hpp"
#include "gecor/dialogue_model.hpp"
#include "gecor/gecor_model.hpp"
#include "gecor/metrics.hpp"
#include "gecor/nn.hpp"

namespace gecor {

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;
};

// Bias-corrected Adam over every parameter's accumulated gradient. Throws
// TrainingAborted naming the parameter when a gradient is not finite.
void adam_step(ParameterSet& params, AdamState& state, double lr);

// Rescales all gradients so their joint L2 norm is at most `max_norm`;
// returns the norm before clipping.
double clip_gradients(ParameterSet& params, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_metric = 0.0;
  double learning_rate = 0.0;
  double wall_seconds = 0.0;
  bool improved = false;

  std::string to_json() const;  // one JSONL line, no trailing newline
};

struct TrainHooks {
  std::size_t train_size = 0;
  std::function<Tensor(Tape&, std::size_t, const RunMode&)> loss;
  std::function<double()> validation_loss;    // optional
  std::function<double()> validation_metric;  // higher is better
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  double best_metric = 0.0;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

// Mini-batch Adam with per-epoch seeded shuffling (the last batch wraps
// around to stay full), gradient clipping, lr decay on every validation
// non-improvement and early stopping after `patience` of them in a row. An
// epoch improves when the metric rises, or ties with a lower validation loss.
// On return `params` hold the best-validation values.
TrainResult train(const TrainConfig& config, ParameterSet& params, const TrainHooks& hooks);

// ---- task bindings -----------------------------------------------------------

struct ResolutionEval {
  MetricReport report;
  std::vector<Tokens> predictions;
};

ResolutionEval evaluate_resolution(const GecorModel& model,
                                   const std::vector<ResolutionInstance>& instances,
                                   std::size_t max_len = 50);
double mean_loss(const GecorModel& model, const std::vector<ResolutionInstance>& instances);

TrainResult train_resolution(GecorModel& model, const TrainConfig& config,
                             const std::vector<ResolutionInstance>& train_set,
                             const std::vector<ResolutionInstance>& validation_set,
                             std::ostream* log = nullptr);

struct DialogueEval {
  MetricReport report;
  std::vector<std::vector<TurnResult>> turns;  // per dialogue
};

// Replays every dialogue turn by turn through run_turn with the condition's
// user inputs; resolution metrics score the complete-utterance decoder and
// Success F1 the generated responses.
DialogueEval evaluate_dialogue(const DialogueModel& model, const Corpus& dialogues,
                               Condition condition, std::uint64_t seed, const KnowledgeBase& kb,
                               std::size_t max_len = 50);

TrainResult train_dialogue(DialogueModel& model, const TrainConfig& config,
                           const Corpus& train_dialogues, const Corpus& validation_dialogues,
                           const KnowledgeBase& kb, std::ostream* log = nullptr);

}  // namespace gecor
