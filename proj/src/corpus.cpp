#include "gecor/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gecor {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- tokenizer --------------------------------------------------------------

namespace {

bool is_split_punct(unsigned char c) {
  return c < 0x80 && std::ispunct(c) && c != '\'' && c != '-' && c != '_';
}

}  // namespace

Tokens tokenize(const std::string& text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (is_split_punct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
  }
  flush();
  return out;
}

std::string detokenize(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// ---- vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{kPad, kUnk, kGo, kEos}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : tokens_(tokens) {
  if (tokens_.size() < kReserved || tokens_[kPadId] != kPad || tokens_[kUnkId] != kUnk ||
      tokens_[kGoId] != kGo || tokens_[kEosId] != kEos)
    throw ConfigError("vocabulary must begin with the reserved entries <pad> <unk> <go> <eos>");
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (!index_.emplace(tokens_[i], i).second)
      throw ConfigError("duplicate vocabulary entry '" + tokens_[i] + "'");
}

std::size_t Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(lookup(t));
  return ids;
}

Vocabulary build_vocab(const std::vector<Tokens>& sequences, std::size_t cap) {
  if (cap < Vocabulary::kReserved)
    throw ConfigError("vocabulary cap " + std::to_string(cap) + " is smaller than the " +
                      std::to_string(Vocabulary::kReserved) + " reserved entries");
  std::unordered_map<std::string, std::size_t> freq;
  const std::set<std::string> reserved = {kPad, kUnk, kGo, kEos};
  for (const auto& seq : sequences)
    for (const auto& t : seq)
      if (!reserved.count(t)) ++freq[t];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens = {kPad, kUnk, kGo, kEos};
  for (const auto& [tok, n] : ranked) {
    if (tokens.size() >= cap) break;
    tokens.push_back(tok);
  }
  return Vocabulary(tokens);
}

// ---- labels / conditions ----------------------------------------------------

std::string to_string(Label label) {
  switch (label) {
    case Label::kEllipsis: return "ellipsis";
    case Label::kCoreference: return "co-reference";
    case Label::kComplete: return "complete";
  }
  return "complete";
}

Label label_from_string(const std::string& s) {
  if (s == "ellipsis") return Label::kEllipsis;
  if (s == "co-reference" || s == "coreference") return Label::kCoreference;
  if (s == "complete") return Label::kComplete;
  throw ValidationError("unknown label '" + s + "'");
}

std::string to_string(Condition c) {
  switch (c) {
    case Condition::kEllipsis: return "ellipsis";
    case Condition::kCoreference: return "coreference";
    case Condition::kMixed: return "mixed";
    case Condition::kComplete: return "complete";
  }
  return "mixed";
}

Condition condition_from_string(const std::string& s) {
  if (s == "ellipsis") return Condition::kEllipsis;
  if (s == "coreference" || s == "co-reference") return Condition::kCoreference;
  if (s == "mixed") return Condition::kMixed;
  if (s == "complete") return Condition::kComplete;
  throw ConfigError("unknown condition '" + s + "'");
}

// ---- statistics -------------------------------------------------------------

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.dialogues = corpus.size();
  for (const auto& d : corpus)
    for (const auto& t : d.turns) {
      ++s.utterances;
      const auto& u = t.user;
      switch (u.label) {
        case Label::kEllipsis: ++s.labeled_ellipsis; break;
        case Label::kCoreference: ++s.labeled_coreference; break;
        case Label::kComplete: ++s.labeled_complete; break;
      }
      if (u.ellipsis) ++s.ellipsis_versions;
      if (u.coreference) ++s.coreference_versions;
      if (u.ellipsis || u.coreference)
        ++s.incomplete_utterances;
      else if (u.label == Label::kComplete)
        ++s.complete_without_versions;
    }
  return s;
}

// ---- JSON schema ------------------------------------------------------------

namespace {

[[noreturn]] void schema_error(const std::string& dialogue, std::optional<std::size_t> turn,
                               const std::string& field, const std::string& what) {
  std::string msg = "dialogue '" + dialogue + "'";
  if (turn) msg += ", turn " + std::to_string(*turn);
  msg += ", field '" + field + "': " + what;
  throw ValidationError(msg);
}

std::string require_string(const json& obj, const char* key, const std::string& dialogue,
                           std::optional<std::size_t> turn, const std::string& prefix = "") {
  if (!obj.is_object() || !obj.contains(key)) schema_error(dialogue, turn, prefix + key, "missing");
  if (!obj[key].is_string()) schema_error(dialogue, turn, prefix + key, "expected a string");
  return obj[key].get<std::string>();
}

std::optional<Tokens> optional_version(const json& obj, const char* key, const std::string& d,
                                       std::size_t turn) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  if (!obj[key].is_string()) schema_error(d, turn, std::string("user.") + key, "expected string or null");
  auto toks = tokenize(obj[key].get<std::string>());
  if (toks.empty()) return std::nullopt;
  return toks;
}

std::vector<std::string> string_list(const json& obj, const char* key, const std::string& d,
                                     std::optional<std::size_t> turn, const std::string& field) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  if (!obj[key].is_array()) schema_error(d, turn, field, "expected a list of strings");
  for (const auto& v : obj[key]) {
    if (!v.is_string()) schema_error(d, turn, field, "expected a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

AnnotatedDialogue dialogue_from_json(const json& j, std::size_t position) {
  AnnotatedDialogue d;
  std::string where = "#" + std::to_string(position);
  if (!j.is_object()) schema_error(where, std::nullopt, "<dialogue>", "expected an object");
  d.id = require_string(j, "id", where, std::nullopt);
  if (j.contains("goal")) {
    const auto& g = j["goal"];
    if (!g.is_object()) schema_error(d.id, std::nullopt, "goal", "expected an object");
    if (g.contains("informable")) {
      if (!g["informable"].is_object())
        schema_error(d.id, std::nullopt, "goal.informable", "expected an object");
      for (const auto& [k, v] : g["informable"].items()) {
        if (!v.is_string()) schema_error(d.id, std::nullopt, "goal.informable." + k, "expected a string");
        d.goal.informable[k] = v.get<std::string>();
      }
    }
    d.goal.requested = string_list(g, "requested", d.id, std::nullopt, "goal.requested");
  }
  if (!j.contains("turns") || !j["turns"].is_array())
    schema_error(d.id, std::nullopt, "turns", "missing or not a list");
  if (j["turns"].empty()) schema_error(d.id, std::nullopt, "turns", "dialogue has no turns");
  std::size_t ti = 0;
  for (const auto& t : j["turns"]) {
    AnnotatedTurn turn;
    if (!t.is_object()) schema_error(d.id, ti, "<turn>", "expected an object");
    if (!t.contains("user") || !t["user"].is_object()) schema_error(d.id, ti, "user", "missing");
    const auto& u = t["user"];
    turn.user.original = tokenize(require_string(u, "original", d.id, ti, "user."));
    turn.user.complete = tokenize(require_string(u, "complete", d.id, ti, "user."));
    if (turn.user.complete.empty()) schema_error(d.id, ti, "user.complete", "must be non-empty");
    turn.user.ellipsis = optional_version(u, "ellipsis", d.id, ti);
    turn.user.coreference = optional_version(u, "coreference", d.id, ti);
    const auto label = require_string(u, "label", d.id, ti, "user.");
    try {
      turn.user.label = label_from_string(label);
    } catch (const ValidationError&) {
      schema_error(d.id, ti, "user.label", "unknown label '" + label + "'");
    }
    if (turn.user.label == Label::kComplete && turn.user.original != turn.user.complete)
      schema_error(d.id, ti, "user.label", "labeled complete but original differs from complete");
    turn.system = tokenize(require_string(t, "system", d.id, ti));
    turn.bspan = BeliefSpan::parse(require_string(t, "bspan", d.id, ti));
    turn.requested = string_list(t, "requested", d.id, ti, "requested");
    d.turns.push_back(std::move(turn));
    ++ti;
  }
  return d;
}

json dialogue_to_json(const AnnotatedDialogue& d) {
  json j;
  j["id"] = d.id;
  j["goal"]["informable"] = json::object();
  for (const auto& [k, v] : d.goal.informable) j["goal"]["informable"][k] = v;
  j["goal"]["requested"] = d.goal.requested;
  j["turns"] = json::array();
  for (const auto& t : d.turns) {
    json u;
    u["original"] = detokenize(t.user.original);
    u["complete"] = detokenize(t.user.complete);
    u["ellipsis"] = t.user.ellipsis ? json(detokenize(*t.user.ellipsis)) : json(nullptr);
    u["coreference"] = t.user.coreference ? json(detokenize(*t.user.coreference)) : json(nullptr);
    u["label"] = to_string(t.user.label);
    json jt;
    jt["user"] = u;
    jt["system"] = detokenize(t.system);
    jt["bspan"] = t.bspan.str();
    jt["requested"] = t.requested;
    j["turns"].push_back(jt);
  }
  return j;
}

}  // namespace

Corpus parse_corpus(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("corpus is not valid JSON: ") + e.what());
  }
  if (!j.is_array()) throw ValidationError("corpus top level must be a list of dialogues");
  Corpus corpus;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < j.size(); ++i) {
    corpus.push_back(dialogue_from_json(j[i], i));
    if (!ids.insert(corpus.back().id).second)
      schema_error(corpus.back().id, std::nullopt, "id", "duplicate dialogue id");
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

std::string serialize_corpus(const Corpus& corpus) {
  json j = json::array();
  for (const auto& d : corpus) j.push_back(dialogue_to_json(d));
  return j.dump(1);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_corpus(corpus) << '\n';
}

// ---- release importer -------------------------------------------------------

namespace {

std::string str_field(const json& obj, const char* key) {
  if (obj.is_object() && obj.contains(key) && obj[key].is_string()) return obj[key].get<std::string>();
  return {};
}

const json* first_key(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (obj.is_object() && obj.contains(k) && !obj[k].is_null()) return &obj[k];
  return nullptr;
}

}  // namespace

Corpus import_camrest_release(const std::string& json_text) {
  json j = json::parse(json_text);
  if (!j.is_array()) throw ValidationError("release file top level must be a list");
  Corpus corpus;
  for (std::size_t di = 0; di < j.size(); ++di) {
    const auto& src = j[di];
    AnnotatedDialogue d;
    if (auto* id = first_key(src, {"dialogue_id", "id"}))
      d.id = id->is_string() ? id->get<std::string>() : id->dump();
    else
      d.id = std::to_string(di);
    if (auto* goal = first_key(src, {"goal"})) {
      if (auto* cons = first_key(*goal, {"constraints"}))
        for (const auto& c : *cons)
          if (c.is_array() && c.size() == 2) d.goal.informable[c[0].get<std::string>()] = c[1].get<std::string>();
      if (auto* req = first_key(*goal, {"request-slots", "requested"}))
        for (const auto& r : *req)
          if (r.is_string()) d.goal.requested.push_back(r.get<std::string>());
    }
    const json* dial = first_key(src, {"dial", "turns"});
    if (!dial || !dial->is_array())
      throw ValidationError("dialogue '" + d.id + "', field 'dial': missing or not a list");

    // Belief state accumulates informable values across turns.
    std::vector<std::pair<std::string, std::string>> constraints;
    for (std::size_t ti = 0; ti < dial->size(); ++ti) {
      const auto& t = (*dial)[ti];
      const json* usr = first_key(t, {"usr", "user"});
      if (!usr) throw ValidationError("dialogue '" + d.id + "', turn " + std::to_string(ti) + ", field 'usr': missing");
      AnnotatedTurn turn;
      turn.user.original = tokenize(str_field(*usr, "transcript"));
      auto complete = tokenize(str_field(*usr, "transcript_complete"));
      turn.user.complete = complete.empty() ? turn.user.original : complete;
      auto ell = tokenize(str_field(*usr, "transcript_with_ellipsis"));
      auto cor = tokenize(str_field(*usr, "transcript_with_coreference"));
      if (!ell.empty() && ell != turn.user.complete) turn.user.ellipsis = ell;
      if (!cor.empty() && cor != turn.user.complete) turn.user.coreference = cor;
      if (turn.user.original == turn.user.complete)
        turn.user.label = Label::kComplete;
      else if (turn.user.coreference && *turn.user.coreference == turn.user.original)
        turn.user.label = Label::kCoreference;
      else if (turn.user.ellipsis && *turn.user.ellipsis == turn.user.original)
        turn.user.label = Label::kEllipsis;
      else
        turn.user.label = turn.user.coreference && !turn.user.ellipsis ? Label::kCoreference
                                                                        : Label::kEllipsis;
      if (turn.user.complete.empty())
        throw ValidationError("dialogue '" + d.id + "', turn " + std::to_string(ti) +
                              ", field 'usr.transcript_complete': empty utterance");
      if (const json* slu = first_key(*usr, {"slu"}); slu && slu->is_array()) {
        for (const auto& act : *slu) {
          const std::string kind = str_field(act, "act");
          if (!act.contains("slots")) continue;
          for (const auto& sv : act["slots"]) {
            if (!sv.is_array() || sv.size() != 2) continue;
            const auto slot = sv[0].get<std::string>();
            const auto value = sv[1].get<std::string>();
            if (kind == "inform") {
              auto it = std::find_if(constraints.begin(), constraints.end(),
                                     [&](const auto& p) { return p.first == slot; });
              if (it == constraints.end())
                constraints.emplace_back(slot, value);
              else
                it->second = value;
            } else if (kind == "request") {
              turn.requested.push_back(value);
            }
          }
        }
      }
      for (const auto& [slot, value] : constraints)
        turn.bspan.informable.push_back(detokenize(tokenize(value)));
      turn.bspan.requestable = turn.requested;
      if (const json* sys = first_key(t, {"sys", "system"}))
        turn.system = tokenize(sys->is_string() ? sys->get<std::string>() : str_field(*sys, "sent"));
      d.turns.push_back(std::move(turn));
    }
    if (d.turns.empty()) throw ValidationError("dialogue '" + d.id + "', field 'dial': no turns");
    corpus.push_back(std::move(d));
  }
  return corpus;
}

std::vector<Tokens> vocabulary_sequences(const Corpus& corpus) {
  std::vector<Tokens> seqs;
  for (const auto& d : corpus) {
    for (const auto& t : d.turns) {
      seqs.push_back(t.user.original);
      seqs.push_back(t.user.complete);
      if (t.user.ellipsis) seqs.push_back(*t.user.ellipsis);
      if (t.user.coreference) seqs.push_back(*t.user.coreference);
      seqs.push_back(t.system);
      seqs.push_back(t.bspan.tokens());
    }
    // one separator between each pair of adjacent context segments
    if (d.turns.size() > 0)
      seqs.push_back(Tokens(2 * d.turns.size() - 1, kSep));
  }
  return seqs;
}

// ---- conditions / context ---------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const Tokens& select_input(const AnnotatedDialogue& dialogue, std::size_t turn_index,
                           Condition condition, std::uint64_t seed) {
  if (turn_index >= dialogue.turns.size())
    throw ContractError("turn index " + std::to_string(turn_index) + " out of range for dialogue '" +
                        dialogue.id + "' with " + std::to_string(dialogue.turns.size()) + " turns");
  const auto& u = dialogue.turns[turn_index].user;
  switch (condition) {
    case Condition::kEllipsis: return u.ellipsis ? *u.ellipsis : u.original;
    case Condition::kCoreference: return u.coreference ? *u.coreference : u.original;
    case Condition::kComplete: return u.complete;
    case Condition::kMixed: {
      std::vector<const Tokens*> options;
      if (u.ellipsis) options.push_back(&*u.ellipsis);
      if (u.coreference) options.push_back(&*u.coreference);
      if (options.empty()) return u.complete;
      const auto h = splitmix64(seed ^ splitmix64(fnv1a(dialogue.id) + turn_index));
      return *options[h % options.size()];
    }
  }
  return u.original;
}

Tokens build_context(const std::vector<Tokens>& history, const Tokens& current) {
  Tokens ctx;
  for (const auto& seg : history) {
    ctx.insert(ctx.end(), seg.begin(), seg.end());
    ctx.emplace_back(kSep);
  }
  ctx.insert(ctx.end(), current.begin(), current.end());
  return ctx;
}

Tokens build_context(const AnnotatedDialogue& dialogue, std::size_t turn_index, Condition condition,
                     std::uint64_t seed) {
  if (turn_index >= dialogue.turns.size())
    throw ContractError("turn index " + std::to_string(turn_index) + " out of range for dialogue '" +
                        dialogue.id + "' with " + std::to_string(dialogue.turns.size()) + " turns");
  std::vector<Tokens> history;
  for (std::size_t i = 0; i < turn_index; ++i) {
    history.push_back(select_input(dialogue, i, condition, seed));
    history.push_back(dialogue.turns[i].system);
  }
  return build_context(history, select_input(dialogue, turn_index, condition, seed));
}

std::vector<ResolutionInstance> assemble_condition(const Corpus& corpus, Condition condition,
                                                   std::uint64_t seed, ConditionSummary* summary) {
  std::vector<ResolutionInstance> out;
  ConditionSummary local;
  for (const auto& d : corpus) {
    std::vector<Tokens> history;
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      const auto& u = d.turns[i].user;
      const Tokens& input = select_input(d, i, condition, seed);
      ResolutionInstance inst;
      inst.dialogue_id = d.id;
      inst.turn_index = i;
      inst.input = input;
      inst.context = build_context(history, input);
      inst.target = u.complete;
      inst.input_complete = input == u.complete;
      if (inst.input_complete)
        ++local.complete;
      else if (u.ellipsis && &input == &*u.ellipsis)
        ++local.ellipsis;
      else if (u.coreference && &input == &*u.coreference)
        ++local.coreference;
      else if (u.label == Label::kCoreference)
        ++local.coreference;
      else
        ++local.ellipsis;
      out.push_back(std::move(inst));
      history.push_back(input);
      history.push_back(d.turns[i].system);
    }
  }
  if (summary) *summary = local;
  return out;
}

Split split(const Corpus& corpus, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit draws so the permutation is library-independent.
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(corpus.size())));
  Split s;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? s.train : s.validation).push_back(corpus[order[i]]);
  return s;
}

// ---- knowledge base ---------------------------------------------------------

const std::string* KBRecord::attribute(const std::string& slot) const {
  if (slot == "name") return &name;
  if (slot == "food") return &food;
  if (slot == "pricerange") return &pricerange;
  if (slot == "area") return &area;
  if (slot == "phone") return &phone;
  if (slot == "address") return &address;
  if (slot == "postcode") return &postcode;
  return nullptr;
}

KnowledgeBase parse_kb(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("KB is not valid JSON: ") + e.what());
  }
  if (!j.is_array()) throw ValidationError("KB top level must be a list of records");
  KnowledgeBase kb;
  std::set<std::string> names;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& r = j[i];
    if (!r.is_object()) throw ValidationError("KB record " + std::to_string(i) + " is not an object");
    KBRecord rec;
    for (const auto& slot : kKbSlots) {
      std::string* dst = const_cast<std::string*>(rec.attribute(slot));
      if (r.contains(slot) && r[slot].is_string()) *dst = detokenize(tokenize(r[slot].get<std::string>()));
    }
    if (rec.name.empty()) throw ValidationError("KB record " + std::to_string(i) + " has no name");
    if (!names.insert(rec.name).second)
      throw ValidationError("KB record " + std::to_string(i) + ": duplicate name '" + rec.name + "'");
    kb.push_back(std::move(rec));
  }
  return kb;
}

KnowledgeBase load_kb(const std::filesystem::path& path) { return parse_kb(read_file(path)); }

std::string serialize_kb(const KnowledgeBase& kb) {
  json j = json::array();
  for (const auto& r : kb) {
    json o;
    for (const auto& slot : kKbSlots) o[slot] = *r.attribute(slot);
    j.push_back(o);
  }
  return j.dump(1);
}

// ---- embeddings -------------------------------------------------------------

double EmbeddingLoad::coverage() const {
  return matrix.defined() && matrix.dim(0) > 0 ? static_cast<double>(found) / matrix.dim(0) : 0.0;
}

EmbeddingLoad parse_embeddings(std::istream& in, const Vocabulary& vocab, std::uint64_t seed,
                               std::size_t dim) {
  EmbeddingLoad load;
  load.matrix = Tensor::zeros({vocab.size(), dim}, true);
  std::mt19937_64 rng(seed);
  uniform_init(load.matrix, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  std::vector<bool> seen(vocab.size(), false);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<double> vec;
    for (std::string num; ls >> num;) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(num, &used));
        if (used != num.size()) throw std::invalid_argument(num);
      } catch (const std::exception&) {
        throw ParseError("embedding file line " + std::to_string(lineno) + ": bad number '" + num + "'");
      }
    }
    if (vec.empty())
      throw ParseError("embedding file line " + std::to_string(lineno) + ": no vector values");
    if (vec.size() != dim)
      throw ConfigError("embedding file line " + std::to_string(lineno) + ": dimension " +
                        std::to_string(vec.size()) + " != " + std::to_string(dim));
    if (!vocab.contains(word)) continue;
    const auto id = vocab.lookup(word);
    if (id < Vocabulary::kReserved) continue;
    std::copy(vec.begin(), vec.end(), load.matrix.values().begin() + id * dim);
    if (!seen[id]) {
      seen[id] = true;
      ++load.found;
    }
  }
  return load;
}

EmbeddingLoad load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                              std::uint64_t seed, std::size_t dim) {
  if (path.empty()) {
    std::istringstream empty;
    return parse_embeddings(empty, vocab, seed, dim);
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings " + path.string());
  return parse_embeddings(in, vocab, seed, dim);
}

}  // namespace gecor
