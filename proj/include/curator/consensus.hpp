#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "curator/ids.hpp"
#include "curator/timestamp.hpp"

namespace curator::consensus {

enum class Strategy { average, plurality, least_misery, quadratic, expert_weighted };
enum class SubjectKind { artefact_validation, cycle_close, phase_advance, release, merge };
enum class Verdict { accept, reject };
enum class RoundState { open, closed };

std::string_view to_string(Strategy s);
std::string_view to_string(SubjectKind k);
std::string_view to_string(Verdict v);
std::string_view to_string(RoundState s);
/// Accept `AVERAGE`, `average`, `least-misery`, ... Throws InvalidArgument.
Strategy parseStrategy(std::string_view text);
SubjectKind parseSubjectKind(std::string_view text);

/// Accept rule: score >= prefThreshold and, unless disabled,
/// disagreement <= disThreshold. Both comparisons are inclusive.
struct GateConfig {
  Strategy strategy = Strategy::average;
  double prefThreshold = 0.6;
  std::optional<double> disThreshold = 0.4;  // nullopt = disabled
  double quorum = 1.0;                       // fraction of the group, in (0, 1]

  bool operator==(const GateConfig&) const = default;
};

/// Throws InvalidGateConfig when a threshold or the quorum is out of range.
void validate(const GateConfig& config);

struct DecisionSubject {
  SubjectKind kind = SubjectKind::artefact_validation;
  std::string target;  // artefact id or commit id

  bool operator==(const DecisionSubject&) const = default;
};

struct Member {
  ResearcherId id;
  int hierarchyLevel = 0;  // 0 = most senior

  bool operator==(const Member&) const = default;
};

struct PreferenceBallot {
  ResearcherId voter;
  double pref = 0.0;                     // in [0, 1]
  std::optional<std::uint64_t> credits;  // quadratic strategy only
  Timestamp timestamp;

  bool operator==(const PreferenceBallot&) const = default;
};

struct VoteRound {
  RoundId id;
  DecisionSubject subject;
  PhaseId phase;
  std::vector<Member> group;
  GateConfig config;
  std::vector<PreferenceBallot> ballots;
  RoundState state = RoundState::open;
  std::optional<Verdict> verdict;
  Timestamp openedAt;
  std::optional<Timestamp> closedAt;

  bool operator==(const VoteRound&) const = default;
};

Json toJson(const GateConfig& c);
GateConfig gateConfigFromJson(const Json& j);
Json toJson(const VoteRound& r);
VoteRound roundFromJson(const Json& j);

/// Mean preference of `group`; every member needs a ballot.
/// Throws EmptyGroup or MissingBallot.
double gpref(std::span<const PreferenceBallot> ballots, std::span<const ResearcherId> group);

/// Mean absolute difference over unordered pairs of `group`:
/// 2 / (|G|(|G|-1)) * sum_{u<v} |pref(u) - pref(v)|.
/// Throws GroupTooSmall for |G| < 2, MissingBallot.
double dis(std::span<const PreferenceBallot> ballots, std::span<const ResearcherId> group);

struct Aggregate {
  double score = 0.0;
  std::optional<double> disagreement;  // absent for a single voter
};

/// Strategy score over the members who voted. Throws QuorumNotMet.
Aggregate aggregate(const VoteRound& round);

/// Verdict recomputed from ballots, config and group alone. Does not
/// consult or change the stored state.
Verdict evaluate(const VoteRound& round);

VoteRound openRound(RoundId id, DecisionSubject subject, PhaseId phase, std::vector<Member> group,
                    GateConfig config, Timestamp now);

/// Validates a ballot's own fields (pref range). Throws PrefOutOfRange.
void validateBallot(const PreferenceBallot& ballot);

/// Adds or replaces the voter's ballot. Throws RoundClosed, VoterNotInGroup,
/// PrefOutOfRange.
VoteRound castVote(VoteRound round, const PreferenceBallot& ballot);

/// Closes an open round with its computed verdict. A closed round is
/// returned unchanged.
VoteRound decide(VoteRound round, Timestamp now);

}  // namespace curator::consensus
