#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace curator {

enum class Errc {
  // artefact model
  UnresolvedReference,
  UnknownPhase,
  KeyNotFound,
  ActionMismatch,
  InvalidArtefact,
  NonMonotonicTimestamp,
  // store
  NotARepository,
  AlreadyInitialized,
  SourceUnavailable,
  CorruptObject,
  PathConflict,
  PathNotFound,
  UnknownCommit,
  NothingToCommit,
  GateNotPassed,
  DuplicateBranch,
  UnresolvedConflict,
  ProtectedBranch,
  UnknownBranch,
  PhaseHasReleases,
  DuplicateTag,
  UnknownRelease,
  LockHeld,
  // consensus
  MissingBallot,
  EmptyGroup,
  GroupTooSmall,
  QuorumNotMet,
  UnknownSubject,
  UnknownRound,
  RoundClosed,
  VoterNotInGroup,
  PrefOutOfRange,
  InvalidGateConfig,
  // workflow
  InvalidPhaseConfig,
  UnknownResearcher,
  WrongSubjectKind,
  LastPhase,
  ScriptError,
  // generic
  InvalidArgument,
  MissingAuthor,
  IoError,
};

std::string_view to_string(Errc code);

/// Domain error carrying a stable code. The CLI prints `error: <Code>: <message>`.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace curator
