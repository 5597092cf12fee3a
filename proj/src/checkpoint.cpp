#include "gecor/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace gecor {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'C', 'O', 'R', 'C', 'K', '1'};

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint64_t get_u64(std::istream& in, const char* what) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8))
    throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const char* what) {
  if (n > (1ULL << 32)) throw CheckpointError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json meta;
  meta["task"] = to_string(ckpt.config.task);
  meta["variant"] = to_string(ckpt.config.variant);
  meta["gecor_branch"] = ckpt.config.gecor_branch;
  meta["dims"] = {{"embedding", ckpt.config.embedding_size}, {"hidden", ckpt.config.hidden_size}};
  meta["vocabulary"] = ckpt.vocabulary;
  meta["config"] = nlohmann::ordered_json::parse(ckpt.config.to_json());
  const std::string meta_text = meta.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u64(out, meta_text.size());
  out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
  put_u64(out, ckpt.params.items().size());
  for (const auto& [name, t] : ckpt.params.items()) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, t.rank());
    for (std::size_t d : t.shape()) put_u64(out, d);
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError(path.string() + " is not a checkpoint file");
  const std::string meta_text = get_bytes(in, get_u64(in, "metadata length"), "metadata");
  Checkpoint ckpt;
  try {
    auto meta = nlohmann::json::parse(meta_text);
    ckpt.config = TrainConfig::from_json(meta.at("config").dump());
    ckpt.vocabulary = meta.at("vocabulary").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
  }
  const auto count = get_u64(in, "tensor count");
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = get_bytes(in, get_u64(in, "name length"), "tensor name");
    const auto rank = get_u64(in, "rank");
    if (rank == 0 || rank > 4) throw CheckpointError("tensor '" + name + "' has invalid rank");
    Shape shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(get_u64(in, "shape"));
    std::vector<double> values(shape_size(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double))))
      throw CheckpointError("truncated values for tensor '" + name + "'");
    ckpt.params.add(name, Tensor(shape, std::move(values), true));
  }
  return ckpt;
}

Checkpoint make_checkpoint(const GecorModel& model, const TrainConfig& config) {
  Checkpoint c;
  c.config = config;
  c.config.task = Task::kResolution;
  c.config.variant = model.variant();
  c.config.embedding_size = model.dims().embedding;
  c.config.hidden_size = model.dims().hidden;
  c.vocabulary = model.vocab().tokens();
  c.params = model.params().clone();
  return c;
}

Checkpoint make_checkpoint(const DialogueModel& model, const TrainConfig& config) {
  Checkpoint c;
  c.config = config;
  c.config.task = Task::kDialogue;
  c.config.variant = CopyVariant::kSharedZ;
  c.config.gecor_branch = model.gecor_branch();
  c.config.embedding_size = model.dims().embedding;
  c.config.hidden_size = model.dims().hidden;
  c.vocabulary = model.vocab().tokens();
  c.params = model.params().clone();
  return c;
}

GecorModel restore_gecor(const Checkpoint& ckpt) {
  if (ckpt.config.task != Task::kResolution)
    throw CheckpointError("checkpoint holds a " + to_string(ckpt.config.task) +
                          " model, expected resolution");
  GecorModel m(Vocabulary(ckpt.vocabulary), ckpt.config.variant, 0, ckpt.config.dims());
  m.params().assign(ckpt.params);
  return m;
}

DialogueModel restore_dialogue(const Checkpoint& ckpt) {
  if (ckpt.config.task != Task::kDialogue)
    throw CheckpointError("checkpoint holds a " + to_string(ckpt.config.task) +
                          " model, expected dialogue");
  DialogueModel m(Vocabulary(ckpt.vocabulary), 0, ckpt.config.dims(), ckpt.config.gecor_branch);
  m.params().assign(ckpt.params);
  return m;
}

}  // namespace gecor
