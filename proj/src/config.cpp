#include "gecor/config.hpp"

#include "json.hpp"

namespace gecor {

using json = nlohmann::ordered_json;

std::string to_string(Task t) { return t == Task::kResolution ? "resolution" : "dialogue"; }

Task task_from_string(const std::string& s) {
  if (s == "resolution") return Task::kResolution;
  if (s == "dialogue") return Task::kDialogue;
  throw ConfigError("unknown task '" + s + "' (expected resolution or dialogue)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "': " + why);
  };
  if (hidden_size == 0) fail("hidden_size", "must be positive");
  if (embedding_size == 0) fail("embedding_size", "must be positive");
  if (vocab_cap < Vocabulary::kReserved) fail("vocab_cap", "smaller than the reserved entries");
  if (batch_size == 0) fail("batch_size", "must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay", "must lie in (0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout", "must lie in [0, 1)");
  if (max_epochs == 0) fail("max_epochs", "must be positive");
  if (!(clip_norm > 0.0)) fail("clip_norm", "must be positive");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) fail("split_ratio", "must lie in (0, 1)");
  if (max_decode_len == 0) fail("max_decode_len", "must be positive");
  if (task == Task::kDialogue && variant != CopyVariant::kSharedZ)
    fail("variant", "the dialogue task supports shared_z only");
}

std::string TrainConfig::to_json() const {
  json j;
  j["hidden_size"] = hidden_size;
  j["embedding_size"] = embedding_size;
  j["vocab_cap"] = vocab_cap;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["lr_decay"] = lr_decay;
  j["dropout"] = dropout;
  j["patience"] = patience;
  j["max_epochs"] = max_epochs;
  j["seed"] = seed;
  j["variant"] = to_string(variant);
  j["task"] = to_string(task);
  j["condition"] = to_string(condition);
  j["clip_norm"] = clip_norm;
  j["split_ratio"] = split_ratio;
  j["gecor_branch"] = gecor_branch ? "on" : "off";
  j["max_decode_len"] = max_decode_len;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& json_text) {
  return from_json(json_text, TrainConfig());
}

TrainConfig TrainConfig::from_json(const std::string& json_text, TrainConfig c) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "hidden_size") c.hidden_size = v.get<std::size_t>();
      else if (key == "embedding_size") c.embedding_size = v.get<std::size_t>();
      else if (key == "vocab_cap") c.vocab_cap = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "lr_decay") c.lr_decay = v.get<double>();
      else if (key == "dropout") c.dropout = v.get<double>();
      else if (key == "patience") c.patience = v.get<std::size_t>();
      else if (key == "max_epochs") c.max_epochs = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "variant") c.variant = variant_from_string(v.get<std::string>());
      else if (key == "task") c.task = task_from_string(v.get<std::string>());
      else if (key == "condition") c.condition = condition_from_string(v.get<std::string>());
      else if (key == "clip_norm") c.clip_norm = v.get<double>();
      else if (key == "split_ratio") c.split_ratio = v.get<double>();
      else if (key == "max_decode_len") c.max_decode_len = v.get<std::size_t>();
      else if (key == "gecor_branch") {
        if (v.is_boolean()) {
          c.gecor_branch = v.get<bool>();
        } else {
          const auto s = v.get<std::string>();
          if (s != "on" && s != "off") throw ConfigError("config field 'gecor_branch': expected on or off");
          c.gecor_branch = s == "on";
        }
      } else {
        throw ConfigError("unknown config field '" + key + "'");
      }
    } catch (const json::exception& e) {
      throw ConfigError("config field '" + key + "': " + e.what());
    }
  }
  return c;
}

}  // namespace gecor
