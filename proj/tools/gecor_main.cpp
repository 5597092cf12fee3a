// gecor — train, evaluate and serve the resolution and dialogue models.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gecor/checkpoint.hpp"
#include "gecor/config.hpp"
#include "gecor/corpus.hpp"
#include "gecor/metrics.hpp"
#include "gecor/service.hpp"
#include "gecor/synthetic.hpp"
#include "gecor/trainer.hpp"
#include "httplib.h"

namespace fs = std::filesystem;
using namespace gecor;

namespace {

constexpr int kUsage = 2;
constexpr int kFailure = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  std::string task, condition, data, kb, embeddings, config, out, variant;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_epochs;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = TrainConfig::from_json(read_file(a.config));
  if (!a.task.empty()) cfg.task = task_from_string(a.task);
  if (!a.condition.empty()) cfg.condition = condition_from_string(a.condition);
  if (!a.variant.empty()) cfg.variant = variant_from_string(a.variant);
  if (a.seed) cfg.seed = *a.seed;
  if (a.max_epochs) cfg.max_epochs = *a.max_epochs;
  if (cfg.task == Task::kDialogue && a.kb.empty()) throw UsageError("--kb is required for --task dialogue");
  cfg.validate();

  const Corpus corpus = load_corpus(a.data);
  const Split parts = split(corpus, cfg.split_ratio, cfg.seed);
  KnowledgeBase kb;
  if (!a.kb.empty()) kb = load_kb(a.kb);
  const auto seqs = cfg.task == Task::kDialogue ? dialogue_vocabulary_sequences(parts.train, kb)
                                                : vocabulary_sequences(parts.train);
  Vocabulary vocab = build_vocab(seqs, cfg.vocab_cap);
  auto emb = load_embeddings(a.embeddings, vocab, cfg.seed, cfg.embedding_size);
  std::cerr << "corpus: " << corpus.size() << " dialogues (" << parts.train.size() << " train / "
            << parts.validation.size() << " validation), vocabulary " << vocab.size()
            << ", embedding coverage " << 100.0 * emb.coverage() << "%\n";

  fs::create_directories(a.out);
  write_file(fs::path(a.out) / "config.json", cfg.to_json() + "\n");
  std::ofstream log(fs::path(a.out) / "train_log.jsonl", std::ios::trunc);
  TrainResult result;
  Checkpoint ckpt;
  if (cfg.task == Task::kResolution) {
    const auto train_set = assemble_condition(parts.train, cfg.condition, cfg.seed);
    const auto val_set = assemble_condition(parts.validation, cfg.condition, cfg.seed);
    GecorModel model(vocab, cfg.variant, cfg.seed, cfg.dims(), emb.matrix);
    result = train_resolution(model, cfg, train_set, val_set, &log);
    ckpt = make_checkpoint(model, cfg);
  } else {
    DialogueModel model(vocab, cfg.seed, cfg.dims(), cfg.gecor_branch, emb.matrix);
    result = train_dialogue(model, cfg, parts.train, parts.validation, kb, &log);
    ckpt = make_checkpoint(model, cfg);
  }
  save_checkpoint(fs::path(a.out) / "model.ckpt", ckpt);
  std::cerr << "best validation " << (cfg.task == Task::kResolution ? "EM" : "Success F1") << " "
            << result.best_metric << " at epoch " << result.best_epoch << "\n";
  return 0;
}

// ---- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, split = "validation", kb, condition, report;
};

int cmd_eval(const EvalArgs& a) {
  if (a.split != "validation" && a.split != "train" && a.split != "all")
    throw UsageError("--split must be validation, train or all");
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  TrainConfig cfg = ckpt.config;
  if (!a.condition.empty()) cfg.condition = condition_from_string(a.condition);
  const Corpus corpus = load_corpus(a.data);
  Corpus chosen = corpus;
  if (a.split != "all") {
    Split parts = split(corpus, cfg.split_ratio, cfg.seed);
    chosen = a.split == "train" ? parts.train : parts.validation;
  }
  MetricReport report;
  if (cfg.task == Task::kResolution) {
    GecorModel model = restore_gecor(ckpt);
    report = evaluate_resolution(model, assemble_condition(chosen, cfg.condition, cfg.seed),
                                 cfg.max_decode_len)
                 .report;
  } else {
    if (a.kb.empty()) throw UsageError("--kb is required to evaluate a dialogue checkpoint");
    DialogueModel model = restore_dialogue(ckpt);
    report = evaluate_dialogue(model, chosen, cfg.condition, cfg.seed, load_kb(a.kb),
                               cfg.max_decode_len)
                 .report;
  }
  std::cerr << report.to_table(to_string(cfg.condition));
  std::cout << report.to_json() << "\n";
  if (!a.report.empty()) write_file(a.report, report.to_json() + "\n");
  return 0;
}

// ---- resolve -------------------------------------------------------------------

int cmd_resolve(const std::string& checkpoint, const std::string& input, const std::string& output) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  GecorModel model = restore_gecor(ckpt);
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot read " + input);
  std::ostringstream result;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(input + ":" + std::to_string(lineno) +
                       ": expected 'utterance<TAB>context' (no TAB found)");
    const Tokens utterance = tokenize(line.substr(0, tab));
    if (utterance.empty())
      throw ParseError(input + ":" + std::to_string(lineno) + ": empty utterance");
    std::vector<Tokens> history;
    std::istringstream rest(line.substr(tab + 1));
    for (std::string seg; std::getline(rest, seg, '\t');)
      if (auto t = tokenize(seg); !t.empty()) history.push_back(std::move(t));
    result << detokenize(model.resolve(utterance, build_context(history, utterance),
                                       ckpt.config.max_decode_len))
           << '\n';
  }
  if (output.empty() || output == "-")
    std::cout << result.str();
  else
    write_file(output, result.str());
  return 0;
}

// ---- serve ---------------------------------------------------------------------

int cmd_serve(const std::string& checkpoint, const std::string& kb_path, int port,
              const std::string& host, const std::string& static_dir, int idle_minutes) {
  if (const char* env = std::getenv("GECOR_PORT"); env && *env) {
    try {
      port = std::stoi(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("GECOR_PORT is not a port number: ") + env);
    }
  }
  DialogueModel model = restore_dialogue(load_checkpoint(checkpoint));
  ServiceConfig cfg;
  cfg.static_dir = static_dir;
  cfg.idle_timeout = std::chrono::minutes(idle_minutes);
  DialogueService service(model, load_kb(kb_path), cfg);
  httplib::Server server;
  service.install(server);
  std::cerr << "serving on " << host << ":" << port << "\n";
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on port " + std::to_string(port));
  return 0;
}

// ---- data utilities --------------------------------------------------------------

int cmd_import(const std::string& release, const std::string& out) {
  Corpus corpus = import_camrest_release(read_file(release));
  save_corpus(corpus, out);
  const auto s = corpus_stats(corpus);
  std::cout << "dialogues " << s.dialogues << "\nutterances " << s.utterances
            << "\nellipsis_versions " << s.ellipsis_versions << "\ncoreference_versions "
            << s.coreference_versions << "\ncomplete_without_versions " << s.complete_without_versions
            << "\n";
  return 0;
}

int cmd_synth(const std::string& kind, std::size_t count, std::uint64_t seed, const std::string& out,
              const std::string& kb_path) {
  if (kind == "kb") {
    write_file(out, serialize_kb(synthetic_kb(seed)));
  } else if (kind == "dialogues") {
    KnowledgeBase kb = kb_path.empty() ? synthetic_kb(seed) : load_kb(kb_path);
    save_corpus(synthetic_dialogues(count, seed, kb), out);
  } else {
    throw UsageError("--kind must be kb or dialogues");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GECOR: generative ellipsis and co-reference resolution for dialogue"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a resolution or dialogue model");
  train->add_option("--task", ta.task, "resolution|dialogue");
  train->add_option("--condition", ta.condition, "ellipsis|coreference|mixed|complete");
  train->add_option("--data", ta.data, "canonical corpus JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--kb", ta.kb, "knowledge base JSON")->check(CLI::ExistingFile);
  train->add_option("--embeddings", ta.embeddings, "word vectors (text format)")->check(CLI::ExistingFile);
  train->add_option("--config", ta.config, "flat JSON TrainConfig")->check(CLI::ExistingFile);
  train->add_option("--out", ta.out, "output directory")->required();
  train->add_option("--seed", ta.seed, "random seed");
  train->add_option("--variant", ta.variant, "shared_z|gated");
  train->add_option("--max-epochs", ta.max_epochs, "epoch limit");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "compute the metric report for a checkpoint");
  eval->add_option("--checkpoint", ea.checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", ea.data)->required()->check(CLI::ExistingFile);
  eval->add_option("--split", ea.split, "validation|train|all");
  eval->add_option("--kb", ea.kb)->check(CLI::ExistingFile);
  eval->add_option("--condition", ea.condition, "override the trained condition");
  eval->add_option("--report", ea.report, "also write the JSON report here");

  std::string rc, ri, ro;
  auto* resolve = app.add_subcommand("resolve", "rewrite utterances (utterance<TAB>context lines)");
  resolve->add_option("--checkpoint", rc)->required()->check(CLI::ExistingFile);
  resolve->add_option("--input", ri)->required()->check(CLI::ExistingFile);
  resolve->add_option("--output", ro, "output file (default stdout)");

  std::string sc, skb, shost = "0.0.0.0", sstatic;
  int sport = 8080, sidle = 30;
  auto* serve = app.add_subcommand("serve", "HTTP dialogue service");
  serve->add_option("--checkpoint", sc)->required()->check(CLI::ExistingFile);
  serve->add_option("--kb", skb)->required()->check(CLI::ExistingFile);
  serve->add_option("--port", sport, "port (GECOR_PORT overrides)");
  serve->add_option("--host", shost);
  serve->add_option("--static", sstatic, "directory served at /");
  serve->add_option("--idle-minutes", sidle, "session idle timeout")->check(CLI::PositiveNumber);

  std::string irel, iout;
  auto* import = app.add_subcommand("import", "convert the CamRest676 release into the corpus schema");
  import->add_option("--release", irel)->required()->check(CLI::ExistingFile);
  import->add_option("--out", iout)->required();

  std::string skind, sout, skbin;
  std::size_t scount = 100;
  std::uint64_t sseed = 1;
  auto* synth = app.add_subcommand("synth", "write synthetic restaurant data");
  synth->add_option("--kind", skind, "kb|dialogues")->required();
  synth->add_option("--count", scount);
  synth->add_option("--seed", sseed);
  synth->add_option("--kb", skbin, "KB the dialogues refer to")->check(CLI::ExistingFile);
  synth->add_option("--out", sout)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train) return cmd_train(ta);
    if (*eval) return cmd_eval(ea);
    if (*resolve) return cmd_resolve(rc, ri, ro);
    if (*serve) return cmd_serve(sc, skb, sport, shost, sstatic, sidle);
    if (*import) return cmd_import(irel, iout);
    if (*synth) return cmd_synth(skind, scount, sseed, sout, skbin);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
