#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "curator/artefact.hpp"
#include "curator/consensus.hpp"
#include "curator/repository.hpp"

namespace curator::workflow {

/// Canonical stage labels, in workflow order.
inline constexpr std::string_view kStageLabels[] = {"problem_statement", "data_acquisition", "data_management",
                                                     "analysis", "reporting"};

/// Ordered phases, each a contiguous set of stage labels. Together they
/// must cover all five labels exactly once in canonical order.
struct PhaseConfig {
  std::vector<std::vector<std::string>> phases;
};

PhaseConfig defaultPhaseConfig();
/// Parses "1,2,3+4,5" style layouts (stage numbers or labels).
PhaseConfig parsePhaseLayout(std::string_view text);
/// Throws InvalidPhaseConfig.
void validate(const PhaseConfig& config);
/// "G1", "G3-4", ...
PhaseId phaseIdFor(const std::vector<std::string>& labels);
std::vector<PhaseDef> toPhaseDefs(const PhaseConfig& config);

struct ProjectState {
  ProjectId project;
  std::vector<Researcher> roster;
  std::vector<PhaseDef> phases;
  std::size_t currentPhase = 0;
  int currentCycle = 1;
  std::vector<Release> releases;
  consensus::GateConfig defaults;

  const PhaseId& phase() const { return phases.at(currentPhase).id; }
};

ProjectState projectState(const Repository& repo);
Json toJson(const ProjectState& s);

/// Validates the layout and roster, then initializes the repository.
Repository createProject(const PhaseConfig& config, const ProjectId& project, std::vector<Researcher> roster,
                         const consensus::GateConfig& defaults, const std::filesystem::path& path,
                         const ResearcherId& author, Timestamp now);

/// One pass of the curation loop: add the artefact unless the collection
/// already holds it, attach metadata, attach an optional (narrative, action)
/// pair, stage the resulting version at `path` and commit.
struct CurationInput {
  Artefact artefact;
  std::vector<Metadata> metadata;
  std::optional<std::pair<Narrative, ActionId>> ritl;
  std::string path;
};

struct CurationResult {
  Commit commit;
  ArtefactId version;
  std::size_t chainLength = 0;
  bool added = false;  // false when the artefact was already in the collection
};

CurationResult runCurationStep(Repository& repo, const CurationInput& input, const ResearcherId& author,
                               Timestamp now);

/// Records a cycle-closing commit gated by an accepted CYCLE_CLOSE round on
/// the current head and increments the cycle counter.
ProjectState closeCycle(Repository& repo, const RoundId& round, const ResearcherId& author, Timestamp now);

/// Moves to the next phase under an accepted PHASE_ADVANCE round, or a
/// RELEASE round when `releaseTag` is given (the release is written first).
/// On the last phase only a release is possible. Throws LastPhase.
ProjectState advancePhase(Repository& repo, const RoundId& round, const std::optional<std::string>& releaseTag,
                          const ResearcherId& author, Timestamp now);

struct PhaseStats {
  PhaseId phase;
  std::vector<std::string> labels;
  int cycleCount = 0;
  std::size_t commitCount = 0;  // excluding phase root commits
  std::size_t branchCount = 0;  // excluding main
  std::size_t artefactCount = 0;
  std::size_t narrativeCount = 0;
  std::size_t roundCount = 0;
  std::size_t rejectCount = 0;
  std::size_t mergeCount = 0;
  std::size_t contentVersions = 0;   // longest content revision chain at the phase head
  std::size_t largestAddition = 0;   // most paths added by a single commit
};

struct ReleaseStats {
  std::string tag;
  PhaseId phase;
  CommitId commit;
  std::size_t artefactCount = 0;
};

struct ProjectStats {
  std::vector<PhaseStats> phases;
  std::vector<ReleaseStats> releases;

  const PhaseStats& of(const PhaseId& phase) const;
};

/// Derived from the commit DAG, refs and round files only.
ProjectStats computeStats(const Repository& repo);
Json toJson(const ProjectStats& s);
std::string renderTable(const ProjectStats& s);

struct AuditFinding {
  std::string subject;  // "commit <id>" or "release <tag>"
  std::string problem;
};

struct AuditReport {
  std::size_t commitsChecked = 0;
  std::size_t releasesChecked = 0;
  std::size_t gatesChecked = 0;
  std::vector<AuditFinding> findings;

  bool ok() const { return findings.empty(); }
};

/// Walks every commit and release. Each gated commit and release must pin a
/// round file whose digest still matches and whose verdict, recomputed from
/// its ballots, is ACCEPT.
AuditReport auditGates(const Repository& repo);
Json toJson(const AuditReport& r);

}  // namespace curator::workflow
