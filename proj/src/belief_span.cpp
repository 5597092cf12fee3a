#include "gecor/belief_span.hpp"

#include <sstream>

namespace gecor {

namespace {

std::string join(const Tokens& t, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (!out.empty()) out += ' ';
    out += t[i];
  }
  return out;
}

}  // namespace

Tokens BeliefSpan::tokens() const {
  Tokens out{kInfOpen};
  for (std::size_t i = 0; i < informable.size(); ++i) {
    if (i) out.emplace_back(",");
    std::istringstream words(informable[i]);
    for (std::string w; words >> w;) out.push_back(w);
  }
  out.emplace_back(kInfClose);
  out.emplace_back(";");
  out.emplace_back(kReqOpen);
  for (const auto& r : requestable) out.push_back(r);
  out.emplace_back(kReqClose);
  return out;
}

std::string BeliefSpan::str() const {
  const auto t = tokens();
  return join(t, 0, t.size());
}

BeliefSpan BeliefSpan::from_tokens(const Tokens& tokens) {
  BeliefSpan span;
  enum class Section { kNone, kInf, kReq } section = Section::kNone;
  Tokens value;
  auto flush_value = [&] {
    if (!value.empty()) span.informable.push_back(join(value, 0, value.size()));
    value.clear();
  };
  for (const auto& tok : tokens) {
    if (tok == kInfOpen) {
      section = Section::kInf;
    } else if (tok == kInfClose) {
      flush_value();
      section = Section::kNone;
    } else if (tok == kReqOpen) {
      flush_value();
      section = Section::kReq;
    } else if (tok == kReqClose) {
      section = Section::kNone;
    } else if (section == Section::kInf) {
      if (tok == "," || tok == ";")
        flush_value();
      else
        value.push_back(tok);
    } else if (section == Section::kReq) {
      if (tok != "," && tok != ";") span.requestable.push_back(tok);
    }
  }
  flush_value();
  return span;
}

BeliefSpan BeliefSpan::parse(const std::string& text) {
  std::istringstream in(text);
  Tokens toks;
  for (std::string w; in >> w;) toks.push_back(w);
  return from_tokens(toks);
}

}  // namespace gecor
