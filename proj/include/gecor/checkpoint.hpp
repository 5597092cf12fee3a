#pragma once

#include <filesystem>
#include <string>

#include "gecor/config.hpp"
#include "gecor/dialogue_model.hpp"
#include "gecor/gecor_model.hpp"
#include "gecor/nn.hpp"

namespace gecor {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary archive, native little-endian:
//   "GECORCK1" | u64 metadata length | metadata JSON (task, variant,
//   gecor_branch, dims, vocabulary, config) | u64 tensor count |
//   per tensor: u64 name length, name, u64 rank, u64 dims…, raw doubles.
struct Checkpoint {
  TrainConfig config;
  std::vector<std::string> vocabulary;
  ParameterSet params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const GecorModel& model, const TrainConfig& config);
Checkpoint make_checkpoint(const DialogueModel& model, const TrainConfig& config);

// Rebuilds a model and copies the stored parameters; the task recorded in
// the checkpoint must match.
GecorModel restore_gecor(const Checkpoint& ckpt);
DialogueModel restore_dialogue(const Checkpoint& ckpt);

}  // namespace gecor
