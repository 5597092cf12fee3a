#include "gecor/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "json.hpp"

namespace gecor {

void adam_step(ParameterSet& params, AdamState& s, double lr) {
  const auto& items = params.items();
  if (s.m.size() != items.size()) {
    s.m.assign(items.size(), {});
    s.v.assign(items.size(), {});
    for (std::size_t k = 0; k < items.size(); ++k) {
      s.m[k].assign(items[k].second.size(), 0.0);
      s.v[k].assign(items[k].second.size(), 0.0);
    }
  }
  for (const auto& [name, t] : items) {
    if (!t.has_grad()) continue;
    for (double g : t.grad())
      if (!std::isfinite(g)) throw TrainingAborted("non-finite gradient in parameter '" + name + "'");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, double(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, double(s.step));
  for (std::size_t k = 0; k < items.size(); ++k) {
    Tensor t = items[k].second;
    if (!t.has_grad()) continue;
    auto g = t.grad();
    auto w = t.values();
    auto& m = s.m[k];
    auto& v = s.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.eps);
    }
  }
}

double clip_gradients(ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : params.items())
    if (t.has_grad())
      for (double g : t.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (const auto& [name, t] : params.items()) {
      Tensor h = t;
      if (h.has_grad())
        for (double& g : h.grad()) g *= k;
    }
  }
  return norm;
}

std::string EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  j["validation_loss"] = validation_loss;
  j["validation_metric"] = validation_metric;
  j["learning_rate"] = learning_rate;
  j["wall_seconds"] = wall_seconds;
  j["improved"] = improved;
  return j.dump();
}

TrainResult train(const TrainConfig& config, ParameterSet& params, const TrainHooks& hooks) {
  config.validate();
  if (hooks.train_size == 0) throw ContractError("train: empty training set");
  std::mt19937_64 shuffle_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x5deece66dULL);
  AdamState adam;
  double lr = config.learning_rate;
  const std::size_t n = hooks.train_size, bsz = config.batch_size;
  const std::size_t batches = (n + bsz - 1) / bsz;

  TrainResult result;
  result.best_metric = -std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();
  ParameterSet best = params.clone();
  std::size_t bad = 0;
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);

    double loss_total = 0.0;
    std::size_t loss_count = 0;
    RunMode mode{true, config.dropout, &dropout_rng};
    for (std::size_t b = 0; b < batches; ++b) {
      params.zero_grad();
      for (std::size_t k = 0; k < bsz; ++k) {
        const std::size_t idx = order[(b * bsz + k) % n];
        Tape tape;
        Tensor loss = hooks.loss(tape, idx, mode);
        const double value = loss.item();
        if (!std::isfinite(value))
          throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch) + ", instance " +
                                std::to_string(idx));
        tape.backward(scale(tape, loss, 1.0 / double(bsz)));
        loss_total += value;
        ++loss_count;
      }
      clip_gradients(params, config.clip_norm);
      adam_step(params, adam, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_total / double(loss_count);
    rec.validation_loss = hooks.validation_loss ? hooks.validation_loss() : 0.0;
    rec.validation_metric = hooks.validation_metric();
    rec.learning_rate = lr;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // Ties on the headline metric (common while EM is still 0) are broken by
    // validation loss.
    rec.improved = rec.validation_metric > result.best_metric ||
                   (rec.validation_metric == result.best_metric && rec.validation_loss < best_loss);
    if (rec.improved) {
      result.best_metric = rec.validation_metric;
      best_loss = rec.validation_loss;
      result.best_epoch = epoch;
      best = params.clone();
      bad = 0;
    } else {
      lr *= config.lr_decay;
      ++bad;
    }
    result.log.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (!rec.improved && bad >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  params.assign(best);
  return result;
}

// ---- task bindings -----------------------------------------------------------------

namespace {

// Runs f(i) for i in [0, n) over a few threads. Inference only reads the
// parameters, so instances are independent.
template <typename F>
void parallel_for(std::size_t n, F f) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 8));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) f(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace

ResolutionEval evaluate_resolution(const GecorModel& model,
                                   const std::vector<ResolutionInstance>& instances,
                                   std::size_t max_len) {
  ResolutionEval out;
  out.predictions.resize(instances.size());
  parallel_for(instances.size(), [&](std::size_t i) {
    out.predictions[i] = model.resolve(instances[i].input, instances[i].context, max_len);
  });
  std::vector<Tokens> inputs, refs;
  std::vector<bool> flags;
  for (const auto& inst : instances) {
    inputs.push_back(inst.input);
    refs.push_back(inst.target);
    flags.push_back(inst.input_complete);
  }
  out.report = resolution_report(inputs, out.predictions, refs, flags);
  return out;
}

double mean_loss(const GecorModel& model, const std::vector<ResolutionInstance>& instances) {
  if (instances.empty()) return 0.0;
  std::vector<double> losses(instances.size());
  parallel_for(instances.size(), [&](std::size_t i) {
    Tape tape(false);
    losses[i] = model.sequence_loss(tape, instances[i]).item();
  });
  double s = 0.0;
  for (double l : losses) s += l;
  return s / double(instances.size());
}

TrainResult train_resolution(GecorModel& model, const TrainConfig& config,
                             const std::vector<ResolutionInstance>& train_set,
                             const std::vector<ResolutionInstance>& validation_set,
                             std::ostream* log) {
  TrainHooks hooks;
  hooks.train_size = train_set.size();
  hooks.loss = [&](Tape& tape, std::size_t i, const RunMode& mode) {
    return model.sequence_loss(tape, train_set[i], mode);
  };
  hooks.validation_loss = [&] { return mean_loss(model, validation_set); };
  hooks.validation_metric = [&] {
    return evaluate_resolution(model, validation_set, config.max_decode_len).report.em;
  };
  hooks.on_epoch = [&](const EpochRecord& r) {
    if (log) *log << r.to_json() << '\n' << std::flush;
  };
  return train(config, model.params(), hooks);
}

DialogueEval evaluate_dialogue(const DialogueModel& model, const Corpus& dialogues,
                               Condition condition, std::uint64_t seed, const KnowledgeBase& kb,
                               std::size_t max_len) {
  DialogueEval out;
  out.turns.resize(dialogues.size());
  parallel_for(dialogues.size(), [&](std::size_t d) {
    DialogueState state;
    state.session_id = dialogues[d].id;
    for (std::size_t t = 0; t < dialogues[d].turns.size(); ++t) {
      DialogueState next;
      out.turns[d].push_back(
          model.run_turn(state, select_input(dialogues[d], t, condition, seed), kb, &next, max_len));
      state = std::move(next);
    }
  });
  std::vector<Tokens> inputs, preds, refs;
  std::vector<bool> flags;
  std::vector<DialogueOutcome> outcomes;
  for (std::size_t d = 0; d < dialogues.size(); ++d) {
    DialogueOutcome o;
    o.requested.insert(dialogues[d].goal.requested.begin(), dialogues[d].goal.requested.end());
    for (std::size_t t = 0; t < dialogues[d].turns.size(); ++t) {
      const auto& turn = dialogues[d].turns[t];
      const Tokens& input = select_input(dialogues[d], t, condition, seed);
      inputs.push_back(input);
      preds.push_back(out.turns[d][t].resolved);
      refs.push_back(turn.user.complete);
      flags.push_back(input == turn.user.complete);
      o.requested.insert(turn.requested.begin(), turn.requested.end());
      o.responses.push_back(out.turns[d][t].response_delex);
    }
    outcomes.push_back(std::move(o));
  }
  out.report = resolution_report(inputs, preds, refs, flags);
  auto s = success_prf(outcomes);
  out.report.has_success = true;
  out.report.success_f1 = s.f1;
  out.report.success_precision = s.precision;
  out.report.success_recall = s.recall;
  out.report.success_matched = s.matched;
  out.report.success_predicted = s.predicted;
  out.report.success_gold = s.gold;
  return out;
}

TrainResult train_dialogue(DialogueModel& model, const TrainConfig& config,
                           const Corpus& train_dialogues, const Corpus& validation_dialogues,
                           const KnowledgeBase& kb, std::ostream* log) {
  const auto turns = assemble_dialogue_turns(train_dialogues, config.condition, config.seed, kb);
  const auto val_turns =
      assemble_dialogue_turns(validation_dialogues, config.condition, config.seed, kb);
  TrainHooks hooks;
  hooks.train_size = turns.size();
  hooks.loss = [&](Tape& tape, std::size_t i, const RunMode& mode) {
    return model.turn_loss(tape, turns[i], mode).total;
  };
  hooks.validation_loss = [&] {
    if (val_turns.empty()) return 0.0;
    std::vector<double> losses(val_turns.size());
    parallel_for(val_turns.size(), [&](std::size_t i) {
      Tape tape(false);
      losses[i] = model.turn_loss(tape, val_turns[i]).total.item();
    });
    double s = 0.0;
    for (double l : losses) s += l;
    return s / double(val_turns.size());
  };
  hooks.validation_metric = [&] {
    return evaluate_dialogue(model, validation_dialogues, config.condition, config.seed, kb,
                             config.max_decode_len)
        .report.success_f1;
  };
  hooks.on_epoch = [&](const EpochRecord& r) {
    if (log) *log << r.to_json() << '\n' << std::flush;
  };
  return train(config, model.params(), hooks);
}

}  // namespace gecor
