#pragma once

#include <compare>
#include <functional>
#include <ostream>
#include <string>
#include <utility>

#include <json.hpp>

namespace curator {

using Json = nlohmann::json;

/// Strongly typed string token. Tags keep artefact ids, commit ids and
/// researcher ids from being mixed up at call sites.
template <class Tag>
class Token {
 public:
  Token() = default;
  explicit Token(std::string value) : value_(std::move(value)) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  auto operator<=>(const Token&) const = default;

  friend std::ostream& operator<<(std::ostream& os, const Token& t) { return os << t.value_; }
  friend void to_json(Json& j, const Token& t) { j = t.value_; }
  friend void from_json(const Json& j, Token& t) { t = Token(j.get<std::string>()); }

 private:
  std::string value_;
};

using ArtefactId = Token<struct ArtefactIdTag>;
using NarrativeId = Token<struct NarrativeIdTag>;
using ActionId = Token<struct ActionIdTag>;
using BlobId = Token<struct BlobIdTag>;
using CommitId = Token<struct CommitIdTag>;
using SnapshotId = Token<struct SnapshotIdTag>;
using RoundId = Token<struct RoundIdTag>;
using ResearcherId = Token<struct ResearcherIdTag>;
using PhaseId = Token<struct PhaseIdTag>;
using ProjectId = Token<struct ProjectIdTag>;

}  // namespace curator

template <class Tag>
struct std::hash<curator::Token<Tag>> {
  std::size_t operator()(const curator::Token<Tag>& t) const noexcept {
    return std::hash<std::string>{}(t.str());
  }
};
