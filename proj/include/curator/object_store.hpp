#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curator/ids.hpp"

namespace curator {

/// Content-addressed object directory: `objects/ab/abcdef...`, where the
/// filename is the full SHA-256 of the file bytes. Objects are written once
/// through a temp file and rename, and never rewritten.
class ObjectStore {
 public:
  explicit ObjectStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }

  /// Stores `bytes` and returns their digest. Idempotent.
  std::string put(std::string_view bytes);
  /// Serializes canonically and stores.
  std::string putJson(const Json& value);

  bool contains(std::string_view digest) const;
  std::optional<std::string> tryGet(std::string_view digest) const;
  /// Throws Error(UnresolvedReference) when absent.
  std::string get(std::string_view digest) const;
  /// Parsed JSON object; checks the `type` field when `expectedType` is
  /// non-empty. Throws UnresolvedReference for absent or mistyped objects.
  Json getJson(std::string_view digest, std::string_view expectedType) const;
  /// `type` field of a JSON object, empty for blobs and unknown ids.
  std::string typeOf(std::string_view digest) const;

  /// Re-hashes one object; throws Error(CorruptObject) on mismatch.
  void verify(std::string_view digest) const;
  /// Re-hashes every object; returns the number verified.
  std::size_t verifyAll() const;

  std::vector<std::string> list() const;

 private:
  std::filesystem::path pathFor(std::string_view digest) const;

  std::filesystem::path dir_;
};

/// Writes `bytes` to `target` via a sibling temp file and rename.
void writeFileAtomic(const std::filesystem::path& target, std::string_view bytes);
std::optional<std::string> readFile(const std::filesystem::path& path);

}  // namespace curator
