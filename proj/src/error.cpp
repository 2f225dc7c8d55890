#include "curator/error.hpp"

namespace curator {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::UnresolvedReference: return "UnresolvedReference";
    case Errc::UnknownPhase: return "UnknownPhase";
    case Errc::KeyNotFound: return "KeyNotFound";
    case Errc::ActionMismatch: return "ActionMismatch";
    case Errc::InvalidArtefact: return "InvalidArtefact";
    case Errc::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case Errc::NotARepository: return "NotARepository";
    case Errc::AlreadyInitialized: return "AlreadyInitialized";
    case Errc::SourceUnavailable: return "SourceUnavailable";
    case Errc::CorruptObject: return "CorruptObject";
    case Errc::PathConflict: return "PathConflict";
    case Errc::PathNotFound: return "PathNotFound";
    case Errc::UnknownCommit: return "UnknownCommit";
    case Errc::NothingToCommit: return "NothingToCommit";
    case Errc::GateNotPassed: return "GateNotPassed";
    case Errc::DuplicateBranch: return "DuplicateBranch";
    case Errc::UnresolvedConflict: return "UnresolvedConflict";
    case Errc::ProtectedBranch: return "ProtectedBranch";
    case Errc::UnknownBranch: return "UnknownBranch";
    case Errc::PhaseHasReleases: return "PhaseHasReleases";
    case Errc::DuplicateTag: return "DuplicateTag";
    case Errc::UnknownRelease: return "UnknownRelease";
    case Errc::LockHeld: return "LockHeld";
    case Errc::MissingBallot: return "MissingBallot";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::GroupTooSmall: return "GroupTooSmall";
    case Errc::QuorumNotMet: return "QuorumNotMet";
    case Errc::UnknownSubject: return "UnknownSubject";
    case Errc::UnknownRound: return "UnknownRound";
    case Errc::RoundClosed: return "RoundClosed";
    case Errc::VoterNotInGroup: return "VoterNotInGroup";
    case Errc::PrefOutOfRange: return "PrefOutOfRange";
    case Errc::InvalidGateConfig: return "InvalidGateConfig";
    case Errc::InvalidPhaseConfig: return "InvalidPhaseConfig";
    case Errc::UnknownResearcher: return "UnknownResearcher";
    case Errc::WrongSubjectKind: return "WrongSubjectKind";
    case Errc::LastPhase: return "LastPhase";
    case Errc::ScriptError: return "ScriptError";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::MissingAuthor: return "MissingAuthor";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace curator
