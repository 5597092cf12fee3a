#pragma once

#include <cstdint>
#include <string>

#include "gecor/corpus.hpp"
#include "gecor/gecor_model.hpp"

namespace gecor {

enum class Task { kResolution, kDialogue };
std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct TrainConfig {
  std::size_t hidden_size = 50;
  std::size_t embedding_size = 50;
  std::size_t vocab_cap = 800;
  std::size_t batch_size = 32;
  double learning_rate = 0.003;
  double lr_decay = 0.5;
  double dropout = 0.5;
  std::size_t patience = 5;
  std::size_t max_epochs = 40;
  std::uint64_t seed = 1;
  CopyVariant variant = CopyVariant::kSharedZ;
  Task task = Task::kResolution;
  Condition condition = Condition::kMixed;
  double clip_norm = 5.0;
  double split_ratio = 0.8;
  bool gecor_branch = true;
  std::size_t max_decode_len = 50;

  ModelDims dims() const { return {embedding_size, hidden_size}; }

  // Throws ConfigError naming the offending field.
  void validate() const;

  // Flat JSON keyed by the field names above.
  std::string to_json() const;
  // Overlays the fields present in `json_text` onto `base`; unknown keys are
  // configuration errors.
  static TrainConfig from_json(const std::string& json_text, TrainConfig base);
  static TrainConfig from_json(const std::string& json_text);
};

}  // namespace gecor
