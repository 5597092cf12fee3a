#pragma once

#include <string>
#include <vector>

namespace gecor {

using Tokens = std::vector<std::string>;

inline constexpr const char* kInfOpen = "⟨inf⟩";
inline constexpr const char* kInfClose = "⟨/inf⟩";
inline constexpr const char* kReqOpen = "⟨req⟩";
inline constexpr const char* kReqClose = "⟨/req⟩";

// Dialogue state as a text span: informable constraint values (each may span
// several tokens) and requested slot names.
//
//   ⟨inf⟩ italian , cheap ⟨/inf⟩ ; ⟨req⟩ phone ⟨/req⟩
struct BeliefSpan {
  std::vector<std::string> informable;
  std::vector<std::string> requestable;

  Tokens tokens() const;
  std::string str() const;

  // Tolerates missing sections and stray tokens; never throws.
  static BeliefSpan from_tokens(const Tokens& tokens);
  static BeliefSpan parse(const std::string& text);

  bool empty() const { return informable.empty() && requestable.empty(); }
  friend bool operator==(const BeliefSpan&, const BeliefSpan&) = default;
};

}  // namespace gecor
