#include "curator/workflow.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "curator/canonical_json.hpp"
#include "curator/digest.hpp"
#include "curator/error.hpp"

namespace curator::workflow {

namespace fs = std::filesystem;
using consensus::SubjectKind;

namespace {

int stageNumber(std::string_view label) {
  for (std::size_t i = 0; i < std::size(kStageLabels); ++i) {
    if (kStageLabels[i] == label) return static_cast<int>(i) + 1;
  }
  return 0;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

PhaseConfig defaultPhaseConfig() {
  PhaseConfig c;
  for (auto label : kStageLabels) c.phases.push_back({std::string(label)});
  return c;
}

PhaseConfig parsePhaseLayout(std::string_view text) {
  PhaseConfig c;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    std::vector<std::string> labels;
    const std::string_view group = text.substr(start, end - start);
    std::size_t s = 0;
    while (s <= group.size()) {
      const auto e = std::min(group.find('+', s), group.size());
      const std::string token = trim(group.substr(s, e - s));
      if (token.size() == 1 && token[0] >= '1' && token[0] <= '5') {
        labels.emplace_back(kStageLabels[token[0] - '1']);
      } else {
        labels.push_back(token);
      }
      s = e + 1;
    }
    c.phases.push_back(std::move(labels));
    start = end + 1;
  }
  validate(c);
  return c;
}

void validate(const PhaseConfig& config) {
  std::vector<std::string> flat;
  for (const auto& phase : config.phases) {
    if (phase.empty()) throw Error(Errc::InvalidPhaseConfig, "a phase must contain at least one stage");
    for (const auto& label : phase) {
      if (stageNumber(label) == 0) throw Error(Errc::InvalidPhaseConfig, "unknown stage label '" + label + "'");
      flat.push_back(label);
    }
  }
  const std::vector<std::string> canonical(std::begin(kStageLabels), std::end(kStageLabels));
  if (flat != canonical) {
    throw Error(Errc::InvalidPhaseConfig,
                "phases must cover problem_statement, data_acquisition, data_management, analysis and reporting "
                "exactly once, in order, with merged stages contiguous");
  }
}

PhaseId phaseIdFor(const std::vector<std::string>& labels) {
  std::string id = "G";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) id += "-";
    id += std::to_string(stageNumber(labels[i]));
  }
  return PhaseId(id);
}

std::vector<PhaseDef> toPhaseDefs(const PhaseConfig& config) {
  validate(config);
  std::vector<PhaseDef> defs;
  for (const auto& labels : config.phases) defs.push_back({phaseIdFor(labels), labels});
  return defs;
}

ProjectState projectState(const Repository& repo) {
  const RepoConfig c = repo.config();
  return ProjectState{c.project, c.roster, c.phases, c.currentPhase, c.currentCycle, repo.releases(), c.defaults};
}

Json toJson(const ProjectState& s) {
  Json phases = Json::array();
  for (const auto& p : s.phases) phases.push_back({{"id", p.id}, {"labels", p.labels}});
  Json roster = Json::array();
  for (const auto& r : s.roster) {
    roster.push_back({{"id", r.id}, {"displayName", r.displayName}, {"level", r.hierarchyLevel}});
  }
  Json releases = Json::array();
  for (const auto& r : s.releases) releases.push_back(r.toJson());
  return Json{{"project", s.project},
              {"phases", std::move(phases)},
              {"roster", std::move(roster)},
              {"currentPhase", s.phase()},
              {"currentCycle", s.currentCycle},
              {"releases", std::move(releases)},
              {"gateDefaults", consensus::toJson(s.defaults)}};
}

Repository createProject(const PhaseConfig& config, const ProjectId& project, std::vector<Researcher> roster,
                         const consensus::GateConfig& defaults, const fs::path& path, const ResearcherId& author,
                         Timestamp now) {
  RepoConfig rc;
  rc.phases = toPhaseDefs(config);
  if (project.empty()) throw Error(Errc::InvalidArgument, "project id must not be empty");
  if (roster.empty()) throw Error(Errc::InvalidArgument, "roster must not be empty");
  for (std::size_t i = 0; i < roster.size(); ++i) {
    validateRefName(roster[i].id.str(), "researcher");
    if (roster[i].hierarchyLevel < 0) throw Error(Errc::InvalidArgument, "hierarchy level must be non-negative");
    for (std::size_t k = 0; k < i; ++k) {
      if (roster[k].id == roster[i].id) throw Error(Errc::InvalidArgument, "duplicate researcher " + roster[i].id.str());
    }
  }
  rc.project = project;
  rc.roster = std::move(roster);
  rc.defaults = defaults;
  return Repository::init(path, std::move(rc), author, now);
}

CurationResult runCurationStep(Repository& repo, const CurationInput& input, const ResearcherId& author,
                               Timestamp now) {
  auto guard = repo.lock();
  validatePath(input.path);
  repo.member(author);
  ObjectStore& store = repo.objects();

  CurationResult result;
  ArtefactId current = idOf(input.artefact);
  const Snapshot collection = repo.headSnapshot();
  const bool present = std::any_of(collection.entries.begin(), collection.entries.end(),
                                   [&](const auto& e) { return e.second == current; });
  if (!present) {
    storeArtefact(store, input.artefact);
    result.added = true;
  }

  Timestamp clock = std::max(now, input.artefact.timestamp.plusMillis(1));
  for (const auto& m : input.metadata) {
    current = idOf(addMetadata(store, m, current, clock));
    clock = clock.plusMillis(1);
  }
  if (input.ritl) {
    current = idOf(addRITL(store, input.ritl->first, input.ritl->second, current, clock));
    clock = clock.plusMillis(1);
  }
  repo.stageAdd(loadArtefact(store, current), input.path);
  result.commit = repo.commit("curate " + input.path, author, std::nullopt, clock);
  result.version = current;
  result.chainLength = versionChain(store, current).size();
  return result;
}

ProjectState closeCycle(Repository& repo, const RoundId& round, const ResearcherId& author, Timestamp now) {
  auto guard = repo.lock();
  repo.requireAccepted(round, SubjectKind::cycle_close);
  const Head h = repo.head();
  const auto r = repo.loadRound(round);
  if (!h.commit || r.subject.target != h.commit->str()) {
    throw Error(Errc::GateNotPassed, "round " + round.str() + " does not target the current head");
  }
  RepoConfig c = repo.config();
  repo.commitAs(CommitKind::cycle_close, "close cycle " + std::to_string(c.currentCycle) + " of " + c.phase().id.str(),
                author, round, now);
  c.currentCycle += 1;
  repo.saveConfig(c);
  return projectState(repo);
}

ProjectState advancePhase(Repository& repo, const RoundId& round, const std::optional<std::string>& releaseTag,
                          const ResearcherId& author, Timestamp now) {
  auto guard = repo.lock();
  RepoConfig c = repo.config();
  const bool last = c.currentPhase + 1 >= c.phases.size();
  if (last && !releaseTag) throw Error(Errc::LastPhase, "phase " + c.phase().id.str() + " is the last phase");
  repo.member(author);
  repo.requireAccepted(round, releaseTag ? SubjectKind::release : SubjectKind::phase_advance);
  const Head h = repo.head();
  const auto r = repo.loadRound(round);
  if (!h.commit || r.subject.target != h.commit->str()) {
    throw Error(Errc::GateNotPassed, "round " + round.str() + " does not target the current head");
  }
  if (h.branch != Repository::kMainBranch) {
    throw Error(Errc::InvalidArgument, "phases advance from branch 'main', HEAD is on '" + h.branch + "'");
  }

  if (releaseTag) repo.release(*releaseTag, round, now);
  if (last) return projectState(repo);

  const PhaseId from = c.phase().id;
  const PhaseId to = c.phases[c.currentPhase + 1].id;
  repo.commitAs(CommitKind::phase_advance, "advance " + from.str() + " -> " + to.str(), author, round, now);
  c.currentPhase += 1;
  c.currentCycle = 1;
  repo.saveConfig(c);
  repo.beginPhase(author, now);
  return projectState(repo);
}

// ---------------------------------------------------------------------------
// statistics

const PhaseStats& ProjectStats::of(const PhaseId& phase) const {
  for (const auto& p : phases) {
    if (p.phase == phase) return p;
  }
  throw Error(Errc::UnknownPhase, "no statistics for phase " + phase.str());
}

ProjectStats computeStats(const Repository& repo) {
  const RepoConfig c = repo.config();
  const auto commits = repo.allCommits();
  std::map<SnapshotId, Snapshot> snapshots;
  auto snapshot = [&](const SnapshotId& id) -> const Snapshot& {
    auto it = snapshots.find(id);
    if (it == snapshots.end()) it = snapshots.emplace(id, repo.loadSnapshot(id)).first;
    return it->second;
  };
  std::map<CommitId, const Commit*> byId;
  for (const auto& cm : commits) byId.emplace(cm.id, &cm);

  ProjectStats stats;
  const auto rounds = repo.rounds();
  for (const auto& def : c.phases) {
    PhaseStats ps;
    ps.phase = def.id;
    ps.labels = def.labels;
    for (const auto& cm : commits) {
      if (cm.phase != def.id) continue;
      ps.cycleCount = std::max(ps.cycleCount, cm.cycle);
      if (cm.kind != CommitKind::root) ++ps.commitCount;
      if (cm.kind == CommitKind::merge) ++ps.mergeCount;
      const Snapshot& snap = snapshot(cm.snapshot);
      std::size_t added = snap.entries.size();
      if (!cm.parents.empty()) {
        auto parent = byId.find(cm.parents.front());
        if (parent == byId.end()) throw Error(Errc::CorruptObject, "parent of " + cm.id.str() + " is missing");
        const Snapshot& base = snapshot(parent->second->snapshot);
        added = std::count_if(snap.entries.begin(), snap.entries.end(),
                              [&](const auto& e) { return base.entries.count(e.first) == 0; });
      }
      ps.largestAddition = std::max(ps.largestAddition, added);
    }
    for (const auto& b : repo.branches(def.id)) {
      if (b.name != Repository::kMainBranch) ++ps.branchCount;
    }
    if (auto tip = repo.branchHead(def.id, Repository::kMainBranch)) {
      const Snapshot& snap = snapshot(repo.loadCommit(*tip).snapshot);
      ps.artefactCount = snap.entries.size();
      for (const auto& [path, id] : snap.entries) {
        ps.narrativeCount += loadArtefact(repo.objects(), id).listOfTags.size();
        ps.contentVersions = std::max(ps.contentVersions, contentVersionCount(repo.objects(), id));
      }
    }
    for (const auto& r : rounds) {
      if (r.phase != def.id) continue;
      ++ps.roundCount;
      if (r.state != consensus::RoundState::closed) continue;
      consensus::Verdict v = r.verdict.value_or(consensus::Verdict::reject);
      try {
        v = consensus::evaluate(r);
      } catch (const Error&) {
      }
      if (v == consensus::Verdict::reject) ++ps.rejectCount;
    }
    stats.phases.push_back(std::move(ps));
  }
  for (const auto& rel : repo.releases()) {
    stats.releases.push_back(
        {rel.tag, rel.phase, rel.commit, snapshot(repo.loadCommit(rel.commit).snapshot).entries.size()});
  }
  return stats;
}

Json toJson(const ProjectStats& s) {
  Json phases = Json::array();
  for (const auto& p : s.phases) {
    phases.push_back({{"phase", p.phase},
                      {"labels", p.labels},
                      {"cycleCount", p.cycleCount},
                      {"commitCount", p.commitCount},
                      {"branchCount", p.branchCount},
                      {"artefactCount", p.artefactCount},
                      {"narrativeCount", p.narrativeCount},
                      {"roundCount", p.roundCount},
                      {"rejectCount", p.rejectCount},
                      {"mergeCount", p.mergeCount},
                      {"contentVersions", p.contentVersions},
                      {"largestAddition", p.largestAddition}});
  }
  Json releases = Json::array();
  for (const auto& r : s.releases) {
    releases.push_back(
        {{"tag", r.tag}, {"phase", r.phase}, {"commit", r.commit}, {"artefactCount", r.artefactCount}});
  }
  return Json{{"phases", std::move(phases)}, {"releases", std::move(releases)}};
}

std::string renderTable(const ProjectStats& s) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-6s %6s %7s %8s %9s %10s %6s %7s %6s %8s %8s\n", "phase", "cycles", "commits",
                "branches", "artefacts", "narratives", "rounds", "rejects", "merges", "versions", "largest");
  out << line;
  for (const auto& p : s.phases) {
    std::snprintf(line, sizeof line, "%-6s %6d %7zu %8zu %9zu %10zu %6zu %7zu %6zu %8zu %8zu\n", p.phase.str().c_str(),
                  p.cycleCount, p.commitCount, p.branchCount, p.artefactCount, p.narrativeCount, p.roundCount,
                  p.rejectCount, p.mergeCount, p.contentVersions, p.largestAddition);
    out << line;
  }
  if (!s.releases.empty()) {
    out << "\nreleases\n";
    for (const auto& r : s.releases) {
      std::snprintf(line, sizeof line, "  %-24s %-6s %.12s %6zu artefacts\n", r.tag.c_str(), r.phase.str().c_str(),
                    r.commit.str().c_str(), r.artefactCount);
      out << line;
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// gate audit

namespace {

void checkGate(const Repository& repo, const GateRef& gate, std::initializer_list<SubjectKind> allowed,
               const std::string& subject, AuditReport& report) {
  ++report.gatesChecked;
  auto fail = [&](const std::string& problem) { report.findings.push_back({subject, problem}); };
  const auto bytes = readFile(repo.metaDir() / "rounds" / (gate.round.str() + ".json"));
  if (!bytes) return fail("round " + gate.round.str() + " is missing");
  if (sha256Hex(*bytes) != gate.digest) return fail("round " + gate.round.str() + " changed after it gated this");
  consensus::VoteRound r;
  try {
    r = consensus::roundFromJson(parseJson(*bytes, "round"));
  } catch (const Error& e) {
    return fail("round " + gate.round.str() + " unreadable: " + e.what());
  }
  if (std::find(allowed.begin(), allowed.end(), r.subject.kind) == allowed.end()) {
    return fail("round " + gate.round.str() + " decides " + std::string(to_string(r.subject.kind)));
  }
  if (r.state != consensus::RoundState::closed) return fail("round " + gate.round.str() + " is open");
  try {
    if (consensus::evaluate(r) != consensus::Verdict::accept) {
      return fail("round " + gate.round.str() + " recomputes to REJECT");
    }
  } catch (const Error& e) {
    return fail("round " + gate.round.str() + " cannot be recomputed: " + e.what());
  }
  if (r.verdict != consensus::Verdict::accept) fail("round " + gate.round.str() + " stored verdict is not ACCEPT");
}

}  // namespace

AuditReport auditGates(const Repository& repo) {
  AuditReport report;
  for (const auto& c : repo.allCommits()) {
    ++report.commitsChecked;
    const std::string subject = "commit " + c.id.str();
    if (requiresGate(c.kind) && !c.gate) {
      report.findings.push_back({subject, std::string(to_string(c.kind)) + " commit without a consensus round"});
      continue;
    }
    if (!c.gate) continue;
    switch (c.kind) {
      case CommitKind::cycle_close:
        checkGate(repo, *c.gate, {SubjectKind::cycle_close}, subject, report);
        break;
      case CommitKind::merge:
        checkGate(repo, *c.gate, {SubjectKind::merge}, subject, report);
        break;
      case CommitKind::phase_advance:
        checkGate(repo, *c.gate, {SubjectKind::phase_advance, SubjectKind::release}, subject, report);
        break;
      default:
        checkGate(repo, *c.gate,
                  {SubjectKind::artefact_validation, SubjectKind::cycle_close, SubjectKind::phase_advance,
                   SubjectKind::release, SubjectKind::merge},
                  subject, report);
    }
  }
  for (const auto& r : repo.releases()) {
    ++report.releasesChecked;
    checkGate(repo, r.gate, {SubjectKind::release}, "release " + r.tag, report);
  }
  return report;
}

Json toJson(const AuditReport& r) {
  Json findings = Json::array();
  for (const auto& f : r.findings) findings.push_back({{"subject", f.subject}, {"problem", f.problem}});
  return Json{{"ok", r.ok()},
              {"commitsChecked", r.commitsChecked},
              {"releasesChecked", r.releasesChecked},
              {"gatesChecked", r.gatesChecked},
              {"findings", std::move(findings)}};
}

}  // namespace curator::workflow
