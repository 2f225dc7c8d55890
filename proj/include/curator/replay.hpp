#pragma once

#include <filesystem>

#include "curator/error.hpp"
#include "curator/repository.hpp"

namespace curator {

/// Failure of one replay event. `index` is the zero-based event position
/// and `cause` the domain error the event raised.
class ScriptFailure : public Error {
 public:
  ScriptFailure(std::size_t index, Errc cause, const std::string& message)
      : Error(Errc::ScriptError, message), index_(index), cause_(cause) {}

  std::size_t index() const noexcept { return index_; }
  Errc cause() const noexcept { return cause_; }

 private:
  std::size_t index_;
  Errc cause_;
};

/// Builds a repository at `dest` from a JSON event script (see
/// docs/replay-format.md). Timestamps come from the script, so the same
/// script always yields the same object store.
Repository replayScript(const Json& script, const std::filesystem::path& dest);
Repository replayFile(const std::filesystem::path& scriptPath, const std::filesystem::path& dest);

}  // namespace curator
