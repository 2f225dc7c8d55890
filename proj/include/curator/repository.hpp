#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "curator/artefact.hpp"
#include "curator/consensus.hpp"
#include "curator/ids.hpp"
#include "curator/object_store.hpp"
#include "curator/timestamp.hpp"

namespace curator {

struct Researcher {
  ResearcherId id;
  std::string displayName;
  int hierarchyLevel = 0;  // 0 = most senior

  bool operator==(const Researcher&) const = default;
};

struct PhaseDef {
  PhaseId id;                       // e.g. "G1", "G3-4"
  std::vector<std::string> labels;  // canonical stage labels

  bool operator==(const PhaseDef&) const = default;
};

/// Contents of `.curator/config.json`: project identity, phase layout,
/// roster, gate defaults and the workflow pointer.
struct RepoConfig {
  ProjectId project;
  std::vector<PhaseDef> phases;
  std::vector<Researcher> roster;
  consensus::GateConfig defaults;
  std::size_t currentPhase = 0;
  int currentCycle = 1;

  const PhaseDef& phase() const { return phases.at(currentPhase); }
  std::vector<PhaseId> phaseIds() const;
  const Researcher* find(const ResearcherId& id) const;

  bool operator==(const RepoConfig&) const = default;
};

Json toJson(const RepoConfig& c);
RepoConfig repoConfigFromJson(const Json& j);

/// Sorted path -> artefact map; its id is the hash of its canonical form.
struct Snapshot {
  std::map<std::string, ArtefactId> entries;

  Json toJson() const;
  SnapshotId id() const;
  bool operator==(const Snapshot&) const = default;
};

enum class CommitKind { root, normal, branch, merge, tag, cycle_close, phase_advance };
std::string_view to_string(CommitKind k);

/// A consensus round referenced by a commit or release, pinned by the
/// SHA-256 of the round file at the time the gate was checked.
struct GateRef {
  RoundId round;
  std::string digest;

  bool operator==(const GateRef&) const = default;
};

struct Commit {
  CommitId id;  // hash of the canonical record; not part of it
  std::vector<CommitId> parents;
  SnapshotId snapshot;
  std::string message;
  ResearcherId author;
  Timestamp timestamp;
  PhaseId phase;
  int cycle = 1;
  CommitKind kind = CommitKind::normal;
  std::optional<GateRef> gate;

  Json toJson() const;
  static Commit fromJson(const Json& j, CommitId id);
};

/// Commit kinds that must carry an accepted consensus round.
bool requiresGate(CommitKind k);

struct Branch {
  std::string name;
  PhaseId phase;
  CommitId head;
};

struct Release {
  std::string tag;
  CommitId commit;
  PhaseId phase;
  GateRef gate;
  Timestamp timestamp;

  Json toJson() const;
  static Release fromJson(const Json& j);
};

/// Narrative annotation of an artefact present in the head snapshot.
struct Tag {
  ArtefactId target;
  NarrativeId narrative;
  ResearcherId author;
  Timestamp timestamp;
};

struct StagedState {
  std::map<std::string, ArtefactId> adds;
  std::set<std::string> removes;

  std::size_t size() const { return adds.size() + removes.size(); }
  bool empty() const { return adds.empty() && removes.empty(); }
  bool operator==(const StagedState&) const = default;
};

struct Head {
  PhaseId phase;
  std::string branch;
  std::optional<CommitId> commit;  // absent after dropStage until the next commit
};

/// A repository rooted at a directory containing `.curator/`.
///
/// Single writer, many readers: every mutating call takes an advisory
/// `flock` on `.curator/lock` and fails fast with LockHeld when another
/// process owns it. Objects and refs are written via temp file + rename so
/// readers never see partial files.
class Repository {
 public:
  static constexpr std::string_view kMetaDir = ".curator";
  static constexpr std::string_view kMainBranch = "main";

  /// Creates the layout with a root commit on `main` of the first phase.
  /// Throws AlreadyInitialized.
  static Repository init(const std::filesystem::path& root, RepoConfig config, const ResearcherId& author,
                         Timestamp now);
  /// Throws NotARepository.
  static Repository open(const std::filesystem::path& root);
  /// Copies a repository from a local path or `file://` URL and re-verifies
  /// every object. Throws SourceUnavailable, CorruptObject, AlreadyInitialized.
  static Repository clone(std::string_view source, const std::filesystem::path& dest);
  /// Walks up from `start` looking for `.curator/`.
  static std::optional<std::filesystem::path> discover(const std::filesystem::path& start);

  const std::filesystem::path& root() const;
  std::filesystem::path metaDir() const;
  ObjectStore& objects();
  const ObjectStore& objects() const;

  RepoConfig config() const;

  /// Re-entrant within one Repository; released when the last guard dies.
  class WriteLock {
   public:
    WriteLock(WriteLock&& other) noexcept;
    WriteLock& operator=(WriteLock&&) = delete;
    ~WriteLock();

   private:
    friend class Repository;
    explicit WriteLock(std::shared_ptr<struct RepoState> state);
    std::shared_ptr<struct RepoState> state_;
  };
  WriteLock lock();

  /// Requires the write lock.
  void saveConfig(const RepoConfig& c);

  // ----- history -----
  Head head() const;
  std::optional<CommitId> branchHead(const PhaseId& phase, std::string_view branch) const;
  std::vector<Branch> branches(const PhaseId& phase) const;
  void switchBranch(std::string_view name);
  Commit loadCommit(const CommitId& id) const;
  Snapshot loadSnapshot(const SnapshotId& id) const;
  Snapshot snapshotAt(const CommitId& id) const;
  /// Snapshot at HEAD, empty when the phase has no history.
  Snapshot headSnapshot() const;
  /// Head to root following first parents. Throws UnknownBranch.
  std::vector<Commit> log(const PhaseId& phase, std::string_view branch) const;
  /// Every commit object in the store.
  std::vector<Commit> allCommits() const;
  bool isAncestor(const CommitId& ancestor, const CommitId& descendant) const;

  // ----- staging (HEAD phase) -----
  StagedState staged() const;
  StagedState stageAdd(const Artefact& a, const std::string& path);
  StagedState stageAddAll(const std::vector<std::pair<std::string, Artefact>>& items);
  StagedState stageRemove(const std::string& path);

  // ----- versioning operators -----
  /// Throws UnknownCommit.
  bool contains(const ArtefactId& artefact, const CommitId& at) const;
  /// Plain commit on HEAD. A supplied round must be closed with an ACCEPT
  /// verdict. Throws NothingToCommit, GateNotPassed.
  Commit commit(const std::string& message, const ResearcherId& author, const std::optional<RoundId>& round,
                Timestamp now);
  /// Commit of a specific kind; used by the workflow layer.
  Commit commitAs(CommitKind kind, const std::string& message, const ResearcherId& author,
                  const std::optional<RoundId>& round, Timestamp now);
  Branch branch(const std::string& name, const std::optional<CommitId>& from,
                const std::optional<std::string>& pathPrefix, const ResearcherId& author, Timestamp now);
  /// Union of both branch snapshots. Every path present on both sides with
  /// different ids needs a `resolver` entry (UnresolvedConflict otherwise);
  /// the round must be an accepted MERGE round on either branch head.
  Commit merge(const std::string& into, const std::string& from, const std::map<std::string, ArtefactId>& resolver,
               const ResearcherId& author, const RoundId& round, Timestamp now);
  void dropBranch(const std::string& name);
  void dropStage(const PhaseId& phase);
  Commit tagArtefact(const Tag& tag, const std::optional<ActionId>& action);
  /// Convenience: stores `narrative` and tags whatever `path` maps to at HEAD.
  Commit tagPath(const std::string& path, const Narrative& narrative, const std::optional<ActionId>& action,
                 const ResearcherId& author, Timestamp now);
  Release release(const std::string& tag, const RoundId& round, Timestamp now);
  /// Opens the configured current phase: root commit over an empty snapshot
  /// on its `main` branch, HEAD moved there. Used after a phase advance.
  Commit beginPhase(const ResearcherId& author, Timestamp now);
  std::vector<Release> releases() const;
  Release loadRelease(const std::string& tag) const;

  // ----- consensus rounds -----
  consensus::VoteRound openRound(const consensus::DecisionSubject& subject, const std::vector<ResearcherId>& group,
                                 const std::optional<consensus::GateConfig>& config, Timestamp now);
  consensus::VoteRound castVote(const RoundId& id, const consensus::PreferenceBallot& ballot);
  consensus::VoteRound closeRound(const RoundId& id, Timestamp now);
  consensus::VoteRound loadRound(const RoundId& id) const;
  std::vector<consensus::VoteRound> rounds() const;
  /// Resolves the target of a round: "head" maps to the HEAD commit.
  std::string resolveTarget(std::string_view target) const;
  /// Recomputes the round's verdict from its stored ballots. Returns the
  /// pinned reference for ACCEPT; throws GateNotPassed otherwise, or
  /// WrongSubjectKind when `kind` is given and differs.
  GateRef requireAccepted(const RoundId& id, std::optional<consensus::SubjectKind> kind) const;

  /// Throws UnknownResearcher.
  Researcher member(const ResearcherId& id) const;

 private:
  explicit Repository(std::filesystem::path root);

  Commit recordCommit(CommitKind kind, const std::string& message, const ResearcherId& author,
                      const std::optional<RoundId>& round, Timestamp now);
  CommitId writeCommit(Commit& c);
  void writeBranch(const PhaseId& phase, std::string_view name, const CommitId& head);
  std::filesystem::path branchPath(const PhaseId& phase, std::string_view name) const;
  std::map<std::string, StagedState> loadStage() const;
  void saveStage(const std::map<std::string, StagedState>& stage);
  void requireCurrentPhase(const Head& h, const RepoConfig& c) const;

  std::shared_ptr<RepoState> state_;
};

/// Checks a logical artefact path: non-empty, relative, no `..`/`.` segments.
void validatePath(const std::string& path);
/// Checks a branch or release name usable as a single ref filename.
void validateRefName(const std::string& name, std::string_view what);

}  // namespace curator
