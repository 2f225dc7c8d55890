#include "curator/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>

#include "curator/error.hpp"

namespace curator::consensus {

namespace {

// Threshold comparisons tolerate float rounding in sums such as
// (0.8 + 0.4) / 2, so boundary ties resolve as inclusive.
constexpr double kTieEpsilon = 1e-9;

std::string upper(std::string_view text) {
  std::string out(text);
  for (auto& c : out) {
    if (c == '-') c = '_';
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

const PreferenceBallot* findBallot(std::span<const PreferenceBallot> ballots, const ResearcherId& voter) {
  auto it = std::find_if(ballots.begin(), ballots.end(),
                         [&](const PreferenceBallot& b) { return b.voter == voter; });
  return it == ballots.end() ? nullptr : &*it;
}

std::vector<double> prefsFor(std::span<const PreferenceBallot> ballots, std::span<const ResearcherId> group) {
  std::vector<double> prefs;
  std::string missing;
  for (const auto& member : group) {
    if (const auto* b = findBallot(ballots, member)) {
      prefs.push_back(b->pref);
    } else {
      missing += (missing.empty() ? "" : ", ") + member.str();
    }
  }
  if (!missing.empty()) throw Error(Errc::MissingBallot, "no ballot from: " + missing);
  // Summing in sorted order makes results independent of group order.
  std::sort(prefs.begin(), prefs.end());
  return prefs;
}

double weightedMean(std::vector<std::pair<double, double>> weightedPrefs) {
  std::sort(weightedPrefs.begin(), weightedPrefs.end());
  double num = 0.0;
  double den = 0.0;
  for (const auto& [pref, weight] : weightedPrefs) {
    num += weight * pref;
    den += weight;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::average: return "AVERAGE";
    case Strategy::plurality: return "PLURALITY";
    case Strategy::least_misery: return "LEAST_MISERY";
    case Strategy::quadratic: return "QUADRATIC";
    case Strategy::expert_weighted: return "EXPERT_WEIGHTED";
  }
  return "AVERAGE";
}

std::string_view to_string(SubjectKind k) {
  switch (k) {
    case SubjectKind::artefact_validation: return "ARTEFACT_VALIDATION";
    case SubjectKind::cycle_close: return "CYCLE_CLOSE";
    case SubjectKind::phase_advance: return "PHASE_ADVANCE";
    case SubjectKind::release: return "RELEASE";
    case SubjectKind::merge: return "MERGE";
  }
  return "ARTEFACT_VALIDATION";
}

std::string_view to_string(Verdict v) { return v == Verdict::accept ? "ACCEPT" : "REJECT"; }
std::string_view to_string(RoundState s) { return s == RoundState::open ? "OPEN" : "CLOSED"; }

Strategy parseStrategy(std::string_view text) {
  const std::string u = upper(text);
  for (auto s : {Strategy::average, Strategy::plurality, Strategy::least_misery, Strategy::quadratic,
                 Strategy::expert_weighted}) {
    if (u == to_string(s)) return s;
  }
  throw Error(Errc::InvalidArgument, "unknown strategy '" + std::string(text) + "'");
}

SubjectKind parseSubjectKind(std::string_view text) {
  const std::string u = upper(text);
  for (auto k : {SubjectKind::artefact_validation, SubjectKind::cycle_close, SubjectKind::phase_advance,
                 SubjectKind::release, SubjectKind::merge}) {
    if (u == to_string(k)) return k;
  }
  throw Error(Errc::InvalidArgument, "unknown subject kind '" + std::string(text) + "'");
}

void validate(const GateConfig& config) {
  auto inUnit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!inUnit(config.prefThreshold)) {
    throw Error(Errc::InvalidGateConfig, "preference threshold must lie in [0,1]");
  }
  if (config.disThreshold && !inUnit(*config.disThreshold)) {
    throw Error(Errc::InvalidGateConfig, "disagreement threshold must lie in [0,1]");
  }
  if (!std::isfinite(config.quorum) || config.quorum <= 0.0 || config.quorum > 1.0) {
    throw Error(Errc::InvalidGateConfig, "quorum must lie in (0,1]");
  }
}

Json toJson(const GateConfig& c) {
  return Json{{"strategy", to_string(c.strategy)},
              {"prefThreshold", c.prefThreshold},
              {"disThreshold", c.disThreshold ? Json(*c.disThreshold) : Json(nullptr)},
              {"quorum", c.quorum}};
}

GateConfig gateConfigFromJson(const Json& j) {
  try {
    GateConfig c;
    if (j.contains("strategy")) c.strategy = parseStrategy(j["strategy"].get<std::string>());
    if (j.contains("prefThreshold")) c.prefThreshold = j["prefThreshold"].get<double>();
    if (j.contains("disThreshold")) {
      const Json& d = j["disThreshold"];
      if (d.is_null() || (d.is_string() && (d == "DISABLED" || d == "off"))) {
        c.disThreshold.reset();
      } else {
        c.disThreshold = d.get<double>();
      }
    }
    if (j.contains("quorum")) c.quorum = j["quorum"].get<double>();
    validate(c);
    return c;
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidGateConfig, std::string("malformed gate config: ") + e.what());
  }
}

Json toJson(const VoteRound& r) {
  Json group = Json::array();
  for (const auto& m : r.group) group.push_back({{"id", m.id}, {"level", m.hierarchyLevel}});
  Json ballots = Json::array();
  for (const auto& b : r.ballots) {
    Json jb{{"voter", b.voter}, {"pref", b.pref}, {"timestamp", b.timestamp.str()}};
    if (b.credits) jb["credits"] = *b.credits;
    ballots.push_back(std::move(jb));
  }
  Json j{{"id", r.id},
         {"subject", {{"kind", to_string(r.subject.kind)}, {"target", r.subject.target}}},
         {"phase", r.phase},
         {"group", std::move(group)},
         {"config", toJson(r.config)},
         {"ballots", std::move(ballots)},
         {"state", to_string(r.state)},
         {"openedAt", r.openedAt.str()}};
  if (r.verdict) j["verdict"] = to_string(*r.verdict);
  if (r.closedAt) j["closedAt"] = r.closedAt->str();
  return j;
}

VoteRound roundFromJson(const Json& j) {
  try {
    VoteRound r;
    r.id = j.at("id").get<RoundId>();
    r.subject.kind = parseSubjectKind(j.at("subject").at("kind").get<std::string>());
    r.subject.target = j.at("subject").at("target").get<std::string>();
    r.phase = j.at("phase").get<PhaseId>();
    for (const auto& m : j.at("group")) r.group.push_back({m.at("id").get<ResearcherId>(), m.at("level").get<int>()});
    r.config = gateConfigFromJson(j.at("config"));
    for (const auto& b : j.at("ballots")) {
      PreferenceBallot ballot;
      ballot.voter = b.at("voter").get<ResearcherId>();
      ballot.pref = b.at("pref").get<double>();
      if (b.contains("credits")) ballot.credits = b["credits"].get<std::uint64_t>();
      ballot.timestamp = Timestamp::parse(b.at("timestamp").get<std::string>());
      r.ballots.push_back(std::move(ballot));
    }
    const auto state = j.at("state").get<std::string>();
    if (state != "OPEN" && state != "CLOSED") throw Error(Errc::InvalidArgument, "bad round state " + state);
    r.state = state == "OPEN" ? RoundState::open : RoundState::closed;
    if (j.contains("verdict")) {
      const auto v = j["verdict"].get<std::string>();
      if (v != "ACCEPT" && v != "REJECT") throw Error(Errc::InvalidArgument, "bad verdict " + v);
      r.verdict = v == "ACCEPT" ? Verdict::accept : Verdict::reject;
    }
    r.openedAt = Timestamp::parse(j.at("openedAt").get<std::string>());
    if (j.contains("closedAt")) r.closedAt = Timestamp::parse(j["closedAt"].get<std::string>());
    return r;
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed round record: ") + e.what());
  }
}

double gpref(std::span<const PreferenceBallot> ballots, std::span<const ResearcherId> group) {
  if (group.empty()) throw Error(Errc::EmptyGroup, "group preference of an empty group");
  const auto prefs = prefsFor(ballots, group);
  double sum = 0.0;
  for (double p : prefs) sum += p;
  return sum / static_cast<double>(prefs.size());
}

double dis(std::span<const PreferenceBallot> ballots, std::span<const ResearcherId> group) {
  if (group.size() < 2) throw Error(Errc::GroupTooSmall, "disagreement needs at least two members");
  const auto prefs = prefsFor(ballots, group);
  const double n = static_cast<double>(prefs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    for (std::size_t k = i + 1; k < prefs.size(); ++k) sum += std::abs(prefs[i] - prefs[k]);
  }
  return 2.0 / (n * (n - 1.0)) * sum;
}

Aggregate aggregate(const VoteRound& round) {
  if (round.group.empty()) throw Error(Errc::EmptyGroup, "round " + round.id.str() + " has no group");

  std::vector<ResearcherId> voters;
  std::vector<const Member*> voting;
  for (const auto& m : round.group) {
    if (findBallot(round.ballots, m.id)) {
      voters.push_back(m.id);
      voting.push_back(&m);
    }
  }
  const double turnout = static_cast<double>(voters.size()) / static_cast<double>(round.group.size());
  if (voters.empty() || turnout + kTieEpsilon < round.config.quorum) {
    throw Error(Errc::QuorumNotMet, "round " + round.id.str() + " has " + std::to_string(voters.size()) +
                                        " of " + std::to_string(round.group.size()) + " ballots");
  }

  Aggregate out;
  switch (round.config.strategy) {
    case Strategy::average:
      out.score = gpref(round.ballots, voters);
      break;
    case Strategy::plurality: {
      std::size_t yes = 0;
      for (const auto& v : voters) yes += findBallot(round.ballots, v)->pref >= 0.5 ? 1 : 0;
      out.score = static_cast<double>(yes) / static_cast<double>(voters.size());
      break;
    }
    case Strategy::least_misery: {
      out.score = 1.0;
      for (const auto& v : voters) out.score = std::min(out.score, findBallot(round.ballots, v)->pref);
      break;
    }
    case Strategy::quadratic: {
      std::vector<std::pair<double, double>> wp;
      for (const auto& v : voters) {
        const auto* b = findBallot(round.ballots, v);
        wp.emplace_back(b->pref, std::sqrt(static_cast<double>(b->credits.value_or(1))));
      }
      out.score = weightedMean(std::move(wp));
      break;
    }
    case Strategy::expert_weighted: {
      std::vector<std::pair<double, double>> wp;
      for (const auto* m : voting) {
        wp.emplace_back(findBallot(round.ballots, m->id)->pref, 1.0 / (1.0 + m->hierarchyLevel));
      }
      out.score = weightedMean(std::move(wp));
      break;
    }
  }
  if (voters.size() >= 2) out.disagreement = dis(round.ballots, voters);
  return out;
}

Verdict evaluate(const VoteRound& round) {
  validate(round.config);
  const Aggregate agg = aggregate(round);
  const bool prefOk = agg.score + kTieEpsilon >= round.config.prefThreshold;
  const bool disOk = !round.config.disThreshold || !agg.disagreement ||
                     *agg.disagreement <= *round.config.disThreshold + kTieEpsilon;
  return prefOk && disOk ? Verdict::accept : Verdict::reject;
}

VoteRound openRound(RoundId id, DecisionSubject subject, PhaseId phase, std::vector<Member> group,
                    GateConfig config, Timestamp now) {
  if (group.empty()) throw Error(Errc::EmptyGroup, "a round needs at least one member");
  std::vector<ResearcherId> seen;
  for (const auto& m : group) {
    if (std::find(seen.begin(), seen.end(), m.id) != seen.end()) {
      throw Error(Errc::InvalidArgument, "member " + m.id.str() + " listed twice");
    }
    if (m.hierarchyLevel < 0) throw Error(Errc::InvalidArgument, "hierarchy level must be non-negative");
    seen.push_back(m.id);
  }
  validate(config);
  VoteRound r;
  r.id = std::move(id);
  r.subject = std::move(subject);
  r.phase = std::move(phase);
  r.group = std::move(group);
  r.config = config;
  r.openedAt = now;
  return r;
}

void validateBallot(const PreferenceBallot& ballot) {
  if (!std::isfinite(ballot.pref) || ballot.pref < 0.0 || ballot.pref > 1.0) {
    throw Error(Errc::PrefOutOfRange, "preference " + std::to_string(ballot.pref) + " is outside [0,1]");
  }
}

VoteRound castVote(VoteRound round, const PreferenceBallot& ballot) {
  if (round.state == RoundState::closed) {
    throw Error(Errc::RoundClosed, "round " + round.id.str() + " is closed");
  }
  validateBallot(ballot);
  const bool member = std::any_of(round.group.begin(), round.group.end(),
                                  [&](const Member& m) { return m.id == ballot.voter; });
  if (!member) {
    throw Error(Errc::VoterNotInGroup, ballot.voter.str() + " is not in the group of round " + round.id.str());
  }
  auto it = std::find_if(round.ballots.begin(), round.ballots.end(),
                         [&](const PreferenceBallot& b) { return b.voter == ballot.voter; });
  if (it != round.ballots.end()) {
    *it = ballot;
  } else {
    round.ballots.push_back(ballot);
  }
  return round;
}

VoteRound decide(VoteRound round, Timestamp now) {
  if (round.state == RoundState::closed) return round;
  round.verdict = evaluate(round);
  round.state = RoundState::closed;
  round.closedAt = now;
  return round;
}

}  // namespace curator::consensus
