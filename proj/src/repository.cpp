#include "curator/repository.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <mutex>

#include "curator/canonical_json.hpp"
#include "curator/digest.hpp"
#include "curator/error.hpp"

namespace curator {

namespace fs = std::filesystem;
using consensus::SubjectKind;
using consensus::VoteRound;

struct RepoState {
  fs::path root;
  ObjectStore objects;
  std::recursive_mutex mutex;
  int depth = 0;
  int fd = -1;

  explicit RepoState(fs::path r) : root(std::move(r)), objects(root / ".curator" / "objects") {}
};

// ---------------------------------------------------------------------------
// value types

std::vector<PhaseId> RepoConfig::phaseIds() const {
  std::vector<PhaseId> ids;
  for (const auto& p : phases) ids.push_back(p.id);
  return ids;
}

const Researcher* RepoConfig::find(const ResearcherId& id) const {
  auto it = std::find_if(roster.begin(), roster.end(), [&](const Researcher& r) { return r.id == id; });
  return it == roster.end() ? nullptr : &*it;
}

Json toJson(const RepoConfig& c) {
  Json phases = Json::array();
  for (const auto& p : c.phases) phases.push_back({{"id", p.id}, {"labels", p.labels}});
  Json roster = Json::array();
  for (const auto& r : c.roster) {
    roster.push_back({{"id", r.id}, {"displayName", r.displayName}, {"level", r.hierarchyLevel}});
  }
  return Json{{"project", c.project},
              {"phases", std::move(phases)},
              {"roster", std::move(roster)},
              {"gateDefaults", consensus::toJson(c.defaults)},
              {"state", {{"currentPhase", c.currentPhase}, {"currentCycle", c.currentCycle}}}};
}

RepoConfig repoConfigFromJson(const Json& j) {
  try {
    RepoConfig c;
    c.project = j.at("project").get<ProjectId>();
    for (const auto& p : j.at("phases")) {
      c.phases.push_back({p.at("id").get<PhaseId>(), p.at("labels").get<std::vector<std::string>>()});
    }
    for (const auto& r : j.at("roster")) {
      c.roster.push_back(
          {r.at("id").get<ResearcherId>(), r.value("displayName", std::string{}), r.value("level", 0)});
    }
    c.defaults = consensus::gateConfigFromJson(j.at("gateDefaults"));
    c.currentPhase = j.at("state").at("currentPhase").get<std::size_t>();
    c.currentCycle = j.at("state").at("currentCycle").get<int>();
    if (c.phases.empty() || c.currentPhase >= c.phases.size() || c.currentCycle < 1) {
      throw Error(Errc::InvalidArgument, "config.json has an invalid workflow state");
    }
    return c;
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed config.json: ") + e.what());
  }
}

Json Snapshot::toJson() const {
  Json e = Json::object();
  for (const auto& [path, id] : entries) e[path] = id;
  return Json{{"type", "snapshot"}, {"entries", std::move(e)}};
}

SnapshotId Snapshot::id() const { return SnapshotId(sha256Hex(canonicalDump(toJson()))); }

std::string_view to_string(CommitKind k) {
  switch (k) {
    case CommitKind::root: return "root";
    case CommitKind::normal: return "normal";
    case CommitKind::branch: return "branch";
    case CommitKind::merge: return "merge";
    case CommitKind::tag: return "tag";
    case CommitKind::cycle_close: return "cycle-close";
    case CommitKind::phase_advance: return "phase-advance";
  }
  return "normal";
}

namespace {

CommitKind parseCommitKind(const std::string& s) {
  for (auto k : {CommitKind::root, CommitKind::normal, CommitKind::branch, CommitKind::merge, CommitKind::tag,
                 CommitKind::cycle_close, CommitKind::phase_advance}) {
    if (s == to_string(k)) return k;
  }
  throw Error(Errc::CorruptObject, "unknown commit kind '" + s + "'");
}

Json gateJson(const GateRef& g) { return Json{{"round", g.round}, {"digest", g.digest}}; }
GateRef gateFromJson(const Json& j) { return {j.at("round").get<RoundId>(), j.at("digest").get<std::string>()}; }

}  // namespace

bool requiresGate(CommitKind k) {
  return k == CommitKind::merge || k == CommitKind::cycle_close || k == CommitKind::phase_advance;
}

Json Commit::toJson() const {
  Json j{{"type", "commit"},
         {"parents", parents},
         {"snapshot", snapshot},
         {"message", message},
         {"author", author},
         {"timestamp", timestamp.str()},
         {"phase", phase},
         {"cycle", cycle},
         {"kind", to_string(kind)}};
  if (gate) j["gate"] = gateJson(*gate);
  return j;
}

Commit Commit::fromJson(const Json& j, CommitId id) {
  try {
    Commit c;
    c.id = std::move(id);
    c.parents = j.at("parents").get<std::vector<CommitId>>();
    c.snapshot = j.at("snapshot").get<SnapshotId>();
    c.message = j.at("message").get<std::string>();
    c.author = j.at("author").get<ResearcherId>();
    c.timestamp = Timestamp::parse(j.at("timestamp").get<std::string>());
    c.phase = j.at("phase").get<PhaseId>();
    c.cycle = j.at("cycle").get<int>();
    c.kind = parseCommitKind(j.at("kind").get<std::string>());
    if (j.contains("gate")) c.gate = gateFromJson(j["gate"]);
    return c;
  } catch (const Json::exception& e) {
    throw Error(Errc::CorruptObject, std::string("malformed commit record: ") + e.what());
  }
}

Json Release::toJson() const {
  return Json{{"type", "release"},  {"tag", tag},       {"commit", commit}, {"phase", phase},
              {"gate", gateJson(gate)}, {"timestamp", timestamp.str()}};
}

Release Release::fromJson(const Json& j) {
  try {
    return Release{j.at("tag").get<std::string>(), j.at("commit").get<CommitId>(), j.at("phase").get<PhaseId>(),
                   gateFromJson(j.at("gate")), Timestamp::parse(j.at("timestamp").get<std::string>())};
  } catch (const Json::exception& e) {
    throw Error(Errc::CorruptObject, std::string("malformed release record: ") + e.what());
  }
}

void validatePath(const std::string& path) {
  if (path.empty() || path.front() == '/' || path.back() == '/') {
    throw Error(Errc::InvalidArgument, "invalid artefact path '" + path + "'");
  }
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto end = std::min(path.find('/', start), path.size());
    const std::string_view seg(path.data() + start, end - start);
    if (seg.empty() || seg == "." || seg == "..") {
      throw Error(Errc::InvalidArgument, "invalid artefact path '" + path + "'");
    }
    start = end + 1;
  }
  if (path.find_first_of("\n\r\t\\") != std::string::npos) {
    throw Error(Errc::InvalidArgument, "invalid artefact path '" + path + "'");
  }
}

void validateRefName(const std::string& name, std::string_view what) {
  const bool bad = name.empty() || name == "." || name == ".." || name.front() == '.' ||
                   name.find_first_of("/\\\n\r\t :") != std::string::npos;
  if (bad) throw Error(Errc::InvalidArgument, "invalid " + std::string(what) + " name '" + name + "'");
}

// ---------------------------------------------------------------------------
// lock

Repository::WriteLock::WriteLock(std::shared_ptr<RepoState> state) : state_(std::move(state)) {
  state_->mutex.lock();
  if (state_->depth == 0) {
    const fs::path lockPath = state_->root / ".curator" / "lock";
    const int fd = ::open(lockPath.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) {
      state_->mutex.unlock();
      throw Error(Errc::IoError, "cannot open " + lockPath.string());
    }
    if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd);
      state_->mutex.unlock();
      throw Error(Errc::LockHeld, "repository is locked by another writer");
    }
    state_->fd = fd;
  }
  ++state_->depth;
}

Repository::WriteLock::WriteLock(WriteLock&& other) noexcept : state_(std::move(other.state_)) {}

Repository::WriteLock::~WriteLock() {
  if (!state_) return;
  if (--state_->depth == 0) {
    ::close(state_->fd);
    state_->fd = -1;
  }
  state_->mutex.unlock();
}

Repository::WriteLock Repository::lock() { return WriteLock(state_); }

// ---------------------------------------------------------------------------
// construction

Repository::Repository(fs::path root) : state_(std::make_shared<RepoState>(std::move(root))) {}

const fs::path& Repository::root() const { return state_->root; }
fs::path Repository::metaDir() const { return state_->root / kMetaDir; }
ObjectStore& Repository::objects() { return state_->objects; }
const ObjectStore& Repository::objects() const { return state_->objects; }

Repository Repository::init(const fs::path& root, RepoConfig config, const ResearcherId& author, Timestamp now) {
  if (fs::exists(root / kMetaDir)) {
    throw Error(Errc::AlreadyInitialized, "repository already exists at " + root.string());
  }
  if (config.phases.empty()) throw Error(Errc::InvalidPhaseConfig, "no phases configured");
  if (config.roster.empty()) throw Error(Errc::InvalidArgument, "roster must not be empty");
  if (!config.find(author)) throw Error(Errc::UnknownResearcher, author.str() + " is not on the roster");
  consensus::validate(config.defaults);
  config.currentPhase = 0;
  config.currentCycle = 1;

  fs::create_directories(root / kMetaDir / "objects");
  fs::create_directories(root / kMetaDir / "refs" / "phases");
  fs::create_directories(root / kMetaDir / "refs" / "releases");
  fs::create_directories(root / kMetaDir / "rounds");
  Repository repo(fs::absolute(root));
  auto guard = repo.lock();
  repo.saveConfig(config);
  writeFileAtomic(repo.metaDir() / "STAGE.json", canonicalDump(Json{{"phases", Json::object()}}));
  const PhaseId first = config.phases.front().id;
  writeFileAtomic(repo.metaDir() / "HEAD", first.str() + "/" + std::string(kMainBranch) + "\n");

  Snapshot empty;
  repo.objects().putJson(empty.toJson());
  Commit rootCommit;
  rootCommit.snapshot = empty.id();
  rootCommit.message = "init " + config.project.str();
  rootCommit.author = author;
  rootCommit.timestamp = now;
  rootCommit.phase = first;
  rootCommit.cycle = 1;
  rootCommit.kind = CommitKind::root;
  repo.writeCommit(rootCommit);
  repo.writeBranch(first, kMainBranch, rootCommit.id);
  return repo;
}

Repository Repository::open(const fs::path& root) {
  if (!fs::is_regular_file(root / kMetaDir / "config.json") || !fs::is_regular_file(root / kMetaDir / "HEAD")) {
    throw Error(Errc::NotARepository, "no repository at " + root.string());
  }
  return Repository(fs::absolute(root));
}

std::optional<fs::path> Repository::discover(const fs::path& start) {
  fs::path dir = fs::absolute(start);
  while (true) {
    if (fs::is_directory(dir / kMetaDir)) return dir;
    if (!dir.has_parent_path() || dir.parent_path() == dir) return std::nullopt;
    dir = dir.parent_path();
  }
}

Repository Repository::clone(std::string_view source, const fs::path& dest) {
  std::string src(source);
  if (src.rfind("file://", 0) == 0) {
    src = src.substr(7);
  } else if (src.find("://") != std::string::npos) {
    throw Error(Errc::SourceUnavailable, "only local paths and file:// URLs are supported: " + src);
  }
  fs::path srcRoot(src);
  if (srcRoot.filename() == kMetaDir) srcRoot = srcRoot.parent_path();
  if (!fs::is_regular_file(srcRoot / kMetaDir / "config.json")) {
    throw Error(Errc::SourceUnavailable, "no repository at " + src);
  }
  if (fs::exists(dest / kMetaDir)) {
    throw Error(Errc::AlreadyInitialized, "repository already exists at " + dest.string());
  }

  const fs::path from = srcRoot / kMetaDir;
  const fs::path to = dest / kMetaDir;
  fs::create_directories(to);
  try {
    for (auto it = fs::recursive_directory_iterator(from); it != fs::recursive_directory_iterator(); ++it) {
      const fs::path rel = fs::relative(it->path(), from);
      const std::string name = it->path().filename().string();
      if (rel == "lock" || name.find(".tmp.") != std::string::npos) continue;
      if (it->is_directory()) {
        fs::create_directories(to / rel);
      } else if (it->is_regular_file()) {
        fs::copy_file(it->path(), to / rel, fs::copy_options::overwrite_existing);
      }
    }
    for (const char* dir : {"objects", "refs/phases", "refs/releases", "rounds"}) fs::create_directories(to / dir);
    Repository repo(fs::absolute(dest));
    repo.objects().verifyAll();
    for (const auto& phase : repo.config().phaseIds()) {
      for (const auto& b : repo.branches(phase)) repo.loadCommit(b.head);
    }
    for (const auto& r : repo.releases()) repo.loadCommit(r.commit);
    return repo;
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(to);
    throw Error(Errc::SourceUnavailable, std::string("copy failed: ") + e.what());
  } catch (const Error& e) {
    fs::remove_all(to);
    if (e.code() == Errc::UnresolvedReference || e.code() == Errc::UnknownCommit) {
      throw Error(Errc::CorruptObject, e.what());
    }
    throw;
  }
}

RepoConfig Repository::config() const {
  auto bytes = readFile(metaDir() / "config.json");
  if (!bytes) throw Error(Errc::NotARepository, "missing config.json in " + root().string());
  return repoConfigFromJson(parseJson(*bytes, "config.json"));
}

void Repository::saveConfig(const RepoConfig& c) {
  writeFileAtomic(metaDir() / "config.json", canonicalDump(toJson(c)));
}

Researcher Repository::member(const ResearcherId& id) const {
  const RepoConfig c = config();
  if (const auto* r = c.find(id)) return *r;
  throw Error(Errc::UnknownResearcher, id.str() + " is not on the roster");
}

// ---------------------------------------------------------------------------
// refs and history

fs::path Repository::branchPath(const PhaseId& phase, std::string_view name) const {
  return metaDir() / "refs" / "phases" / phase.str() / "branches" / std::string(name);
}

void Repository::writeBranch(const PhaseId& phase, std::string_view name, const CommitId& head) {
  writeFileAtomic(branchPath(phase, name), head.str() + "\n");
}

Head Repository::head() const {
  auto bytes = readFile(metaDir() / "HEAD");
  if (!bytes) throw Error(Errc::NotARepository, "missing HEAD");
  std::string text = *bytes;
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  const auto slash = text.find('/');
  if (slash == std::string::npos) throw Error(Errc::CorruptObject, "malformed HEAD '" + text + "'");
  Head h{PhaseId(text.substr(0, slash)), text.substr(slash + 1), std::nullopt};
  h.commit = branchHead(h.phase, h.branch);
  return h;
}

std::optional<CommitId> Repository::branchHead(const PhaseId& phase, std::string_view branch) const {
  auto bytes = readFile(branchPath(phase, branch));
  if (!bytes) return std::nullopt;
  std::string text = *bytes;
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  if (!isDigest(text)) throw Error(Errc::CorruptObject, "malformed ref for branch " + std::string(branch));
  return CommitId(text);
}

std::vector<Branch> Repository::branches(const PhaseId& phase) const {
  std::vector<Branch> out;
  const fs::path dir = metaDir() / "refs" / "phases" / phase.str() / "branches";
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || name.find(".tmp.") != std::string::npos) continue;
    if (auto h = branchHead(phase, name)) out.push_back({name, phase, *h});
  }
  std::sort(out.begin(), out.end(), [](const Branch& a, const Branch& b) { return a.name < b.name; });
  return out;
}

void Repository::switchBranch(std::string_view name) {
  auto guard = lock();
  const Head h = head();
  const RepoConfig c = config();
  requireCurrentPhase(h, c);
  if (!branchHead(h.phase, name)) {
    throw Error(Errc::UnknownBranch, "no branch '" + std::string(name) + "' in phase " + h.phase.str());
  }
  writeFileAtomic(metaDir() / "HEAD", h.phase.str() + "/" + std::string(name) + "\n");
}

Commit Repository::loadCommit(const CommitId& id) const {
  if (objects().typeOf(id.str()) != "commit") throw Error(Errc::UnknownCommit, "unknown commit " + id.str());
  return Commit::fromJson(objects().getJson(id.str(), "commit"), id);
}

Snapshot Repository::loadSnapshot(const SnapshotId& id) const {
  const Json j = objects().getJson(id.str(), "snapshot");
  Snapshot s;
  try {
    for (const auto& [path, aid] : j.at("entries").items()) s.entries.emplace(path, aid.get<ArtefactId>());
  } catch (const Json::exception& e) {
    throw Error(Errc::CorruptObject, std::string("malformed snapshot: ") + e.what());
  }
  return s;
}

Snapshot Repository::snapshotAt(const CommitId& id) const { return loadSnapshot(loadCommit(id).snapshot); }

Snapshot Repository::headSnapshot() const {
  const Head h = head();
  return h.commit ? snapshotAt(*h.commit) : Snapshot{};
}

std::vector<Commit> Repository::log(const PhaseId& phase, std::string_view branch) const {
  auto headId = branchHead(phase, branch);
  if (!headId) {
    throw Error(Errc::UnknownBranch, "no branch '" + std::string(branch) + "' in phase " + phase.str());
  }
  std::vector<Commit> out;
  std::optional<CommitId> cur = headId;
  while (cur) {
    Commit c = loadCommit(*cur);
    cur = c.parents.empty() ? std::nullopt : std::optional<CommitId>(c.parents.front());
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Commit> Repository::allCommits() const {
  std::vector<Commit> out;
  for (const auto& digest : objects().list()) {
    auto bytes = objects().tryGet(digest);
    // Canonical commit records sort "author" first and carry "kind".
    if (!bytes || bytes->rfind("{\"author\":", 0) != 0) continue;
    Json j = parseJson(*bytes, "object " + digest);
    if (j.value("type", "") != "commit") continue;
    out.push_back(Commit::fromJson(j, CommitId(digest)));
  }
  return out;
}

bool Repository::isAncestor(const CommitId& ancestor, const CommitId& descendant) const {
  std::vector<CommitId> stack{descendant};
  std::set<CommitId> seen;
  while (!stack.empty()) {
    CommitId cur = stack.back();
    stack.pop_back();
    if (cur == ancestor) return true;
    if (!seen.insert(cur).second) continue;
    for (auto& p : loadCommit(cur).parents) stack.push_back(p);
  }
  return false;
}

void Repository::requireCurrentPhase(const Head& h, const RepoConfig& c) const {
  if (h.phase != c.phase().id) {
    throw Error(Errc::UnknownPhase, "HEAD phase " + h.phase.str() + " is not the active phase " + c.phase().id.str());
  }
}

CommitId Repository::writeCommit(Commit& c) {
  c.id = CommitId(objects().putJson(c.toJson()));
  return c.id;
}

// ---------------------------------------------------------------------------
// staging

std::map<std::string, StagedState> Repository::loadStage() const {
  std::map<std::string, StagedState> out;
  auto bytes = readFile(metaDir() / "STAGE.json");
  if (!bytes) return out;
  const Json j = parseJson(*bytes, "STAGE.json");
  try {
    for (const auto& [phase, st] : j.at("phases").items()) {
      StagedState s;
      for (const auto& [path, id] : st.at("add").items()) s.adds.emplace(path, id.get<ArtefactId>());
      for (const auto& p : st.at("remove")) s.removes.insert(p.get<std::string>());
      out.emplace(phase, std::move(s));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::CorruptObject, std::string("malformed STAGE.json: ") + e.what());
  }
  return out;
}

void Repository::saveStage(const std::map<std::string, StagedState>& stage) {
  Json phases = Json::object();
  for (const auto& [phase, s] : stage) {
    if (s.empty()) continue;
    Json adds = Json::object();
    for (const auto& [path, id] : s.adds) adds[path] = id;
    phases[phase] = {{"add", std::move(adds)}, {"remove", s.removes}};
  }
  writeFileAtomic(metaDir() / "STAGE.json", canonicalDump(Json{{"phases", std::move(phases)}}));
}

StagedState Repository::staged() const {
  auto stage = loadStage();
  auto it = stage.find(head().phase.str());
  return it == stage.end() ? StagedState{} : it->second;
}

StagedState Repository::stageAdd(const Artefact& a, const std::string& path) {
  return stageAddAll({{path, a}});
}

StagedState Repository::stageAddAll(const std::vector<std::pair<std::string, Artefact>>& items) {
  auto guard = lock();
  const RepoConfig c = config();
  const Head h = head();
  requireCurrentPhase(h, c);
  auto stage = loadStage();
  StagedState& s = stage[h.phase.str()];
  const auto phases = c.phaseIds();
  for (const auto& [path, a] : items) {
    validatePath(path);
    if (a.project != c.project) {
      throw Error(Errc::InvalidArgument, "artefact belongs to project " + a.project.str());
    }
    if (std::find(phases.begin(), phases.end(), a.phase) == phases.end()) {
      throw Error(Errc::UnknownPhase, "phase '" + a.phase.str() + "' is not configured");
    }
    const ArtefactId id = idOf(a);
    if (auto it = s.adds.find(path); it != s.adds.end() && it->second != id) {
      throw Error(Errc::PathConflict, "path '" + path + "' is already staged with " + it->second.str());
    }
    storeArtefact(objects(), a);
    s.adds[path] = id;
    s.removes.erase(path);
  }
  saveStage(stage);
  return s;
}

StagedState Repository::stageRemove(const std::string& path) {
  auto guard = lock();
  const RepoConfig c = config();
  const Head h = head();
  requireCurrentPhase(h, c);
  auto stage = loadStage();
  StagedState& s = stage[h.phase.str()];
  const Snapshot snap = headSnapshot();
  const bool inHead = snap.entries.count(path) > 0;
  const bool inAdds = s.adds.erase(path) > 0;
  if (!inHead && !inAdds) throw Error(Errc::PathNotFound, "path '" + path + "' is not in the collection");
  if (inHead) s.removes.insert(path);
  saveStage(stage);
  return s;
}

// ---------------------------------------------------------------------------
// commits

bool Repository::contains(const ArtefactId& artefact, const CommitId& at) const {
  const Snapshot s = snapshotAt(at);
  return std::any_of(s.entries.begin(), s.entries.end(), [&](const auto& e) { return e.second == artefact; });
}

Commit Repository::commit(const std::string& message, const ResearcherId& author,
                          const std::optional<RoundId>& round, Timestamp now) {
  return commitAs(CommitKind::normal, message, author, round, now);
}

Commit Repository::commitAs(CommitKind kind, const std::string& message, const ResearcherId& author,
                            const std::optional<RoundId>& round, Timestamp now) {
  if (kind == CommitKind::root || kind == CommitKind::merge || kind == CommitKind::branch) {
    throw Error(Errc::InvalidArgument, "commit kind " + std::string(to_string(kind)) + " has its own operation");
  }
  auto guard = lock();
  return recordCommit(kind, message, author, round, now);
}

Commit Repository::recordCommit(CommitKind kind, const std::string& message, const ResearcherId& author,
                                const std::optional<RoundId>& round, Timestamp now) {
  const RepoConfig c = config();
  const Head h = head();
  requireCurrentPhase(h, c);
  member(author);
  auto stage = loadStage();
  StagedState s = stage[h.phase.str()];

  if (s.empty() && !round) throw Error(Errc::NothingToCommit, "nothing staged and no consensus round given");
  if (requiresGate(kind) && !round) {
    throw Error(Errc::GateNotPassed, std::string(to_string(kind)) + " commits need an accepted round");
  }
  std::optional<GateRef> gate;
  if (round) {
    std::optional<SubjectKind> expected;
    if (kind == CommitKind::cycle_close) expected = SubjectKind::cycle_close;
    gate = requireAccepted(*round, expected);
  }

  Snapshot snap;
  Commit next;
  if (h.commit) {
    const Commit parent = loadCommit(*h.commit);
    if (now < parent.timestamp) {
      throw Error(Errc::NonMonotonicTimestamp, "commit time " + now.str() + " precedes parent " + parent.timestamp.str());
    }
    snap = loadSnapshot(parent.snapshot);
    next.parents.push_back(*h.commit);
  }
  for (const auto& p : s.removes) snap.entries.erase(p);
  for (const auto& [p, id] : s.adds) snap.entries[p] = id;

  objects().putJson(snap.toJson());
  next.snapshot = snap.id();
  next.message = message;
  next.author = author;
  next.timestamp = now;
  next.phase = h.phase;
  next.cycle = c.currentCycle;
  next.kind = h.commit ? kind : (kind == CommitKind::normal ? CommitKind::root : kind);
  next.gate = gate;
  writeCommit(next);
  writeBranch(h.phase, h.branch, next.id);
  stage.erase(h.phase.str());
  saveStage(stage);
  return next;
}

Branch Repository::branch(const std::string& name, const std::optional<CommitId>& from,
                          const std::optional<std::string>& pathPrefix, const ResearcherId& author, Timestamp now) {
  validateRefName(name, "branch");
  auto guard = lock();
  const RepoConfig c = config();
  const Head h = head();
  requireCurrentPhase(h, c);
  member(author);
  if (branchHead(h.phase, name)) {
    throw Error(Errc::DuplicateBranch, "branch '" + name + "' already exists in phase " + h.phase.str());
  }
  const std::optional<CommitId> base = from ? from : h.commit;
  if (!base) throw Error(Errc::UnknownCommit, "phase " + h.phase.str() + " has no history to branch from");
  const Commit parent = loadCommit(*base);
  if (parent.phase != h.phase) {
    throw Error(Errc::UnknownCommit, "commit " + base->str() + " is not in phase " + h.phase.str());
  }
  if (now < parent.timestamp) {
    throw Error(Errc::NonMonotonicTimestamp, "branch time precedes its base commit");
  }
  Snapshot snap = loadSnapshot(parent.snapshot);
  if (pathPrefix) {
    std::erase_if(snap.entries, [&](const auto& e) { return e.first.rfind(*pathPrefix, 0) != 0; });
  }
  objects().putJson(snap.toJson());

  Commit next;
  next.parents = {*base};
  next.snapshot = snap.id();
  next.message = "branch:" + name + (pathPrefix ? " filter:" + *pathPrefix : "");
  next.author = author;
  next.timestamp = now;
  next.phase = h.phase;
  next.cycle = c.currentCycle;
  next.kind = CommitKind::branch;
  writeCommit(next);
  writeBranch(h.phase, name, next.id);
  return Branch{name, h.phase, next.id};
}

Commit Repository::merge(const std::string& into, const std::string& from,
                         const std::map<std::string, ArtefactId>& resolver, const ResearcherId& author,
                         const RoundId& round, Timestamp now) {
  auto guard = lock();
  const RepoConfig c = config();
  const PhaseId phase = c.phase().id;
  member(author);
  const auto intoHead = branchHead(phase, into);
  const auto fromHead = branchHead(phase, from);
  if (!intoHead) throw Error(Errc::UnknownBranch, "no branch '" + into + "' in phase " + phase.str());
  if (!fromHead) throw Error(Errc::UnknownBranch, "no branch '" + from + "' in phase " + phase.str());
  if (into == from) throw Error(Errc::InvalidArgument, "cannot merge a branch into itself");

  const Commit left = loadCommit(*intoHead);
  const Commit right = loadCommit(*fromHead);
  Snapshot merged = loadSnapshot(left.snapshot);
  const Snapshot other = loadSnapshot(right.snapshot);
  // Union of both snapshots; every path whose ids differ needs a resolver entry.
  std::vector<std::string> uncovered;
  for (const auto& [path, id] : other.entries) {
    auto it = merged.entries.find(path);
    if (it == merged.entries.end()) {
      merged.entries.emplace(path, id);
    } else if (it->second != id && !resolver.count(path)) {
      uncovered.push_back(path);
    }
  }
  if (!uncovered.empty()) {
    std::string list;
    for (const auto& p : uncovered) list += (list.empty() ? "" : ", ") + p;
    throw Error(Errc::UnresolvedConflict, "unresolved paths: " + list);
  }
  for (const auto& [path, id] : resolver) {
    validatePath(path);
    if (objects().typeOf(id.str()) != "artefact") {
      throw Error(Errc::UnresolvedReference, "resolver choice " + id.str() + " for '" + path + "' does not resolve");
    }
    merged.entries[path] = id;
  }

  const GateRef gate = requireAccepted(round, SubjectKind::merge);
  const VoteRound r = loadRound(round);
  if (r.subject.target != intoHead->str() && r.subject.target != fromHead->str()) {
    throw Error(Errc::GateNotPassed, "round " + round.str() + " does not concern branch '" + from + "' or '" + into + "'");
  }
  if (now < std::max(left.timestamp, right.timestamp)) {
    throw Error(Errc::NonMonotonicTimestamp, "merge time precedes a parent commit");
  }

  objects().putJson(merged.toJson());
  Commit next;
  next.parents = {*intoHead, *fromHead};
  next.snapshot = merged.id();
  next.message = "merge " + from + " into " + into;
  next.author = author;
  next.timestamp = now;
  next.phase = phase;
  next.cycle = c.currentCycle;
  next.kind = CommitKind::merge;
  next.gate = gate;
  writeCommit(next);
  writeBranch(phase, into, next.id);
  return next;
}

void Repository::dropBranch(const std::string& name) {
  auto guard = lock();
  const RepoConfig c = config();
  const Head h = head();
  const PhaseId phase = c.phase().id;
  const auto tip = branchHead(phase, name);
  if (!tip) throw Error(Errc::UnknownBranch, "no branch '" + name + "' in phase " + phase.str());
  if (name == kMainBranch) throw Error(Errc::ProtectedBranch, "branch 'main' cannot be dropped");
  if (h.phase == phase && h.branch == name) {
    throw Error(Errc::ProtectedBranch, "branch '" + name + "' is checked out");
  }
  for (const auto& r : releases()) {
    if (isAncestor(*tip, r.commit)) {
      throw Error(Errc::ProtectedBranch, "branch '" + name + "' is part of release " + r.tag);
    }
  }
  fs::remove(branchPath(phase, name));
}

void Repository::dropStage(const PhaseId& phase) {
  auto guard = lock();
  const RepoConfig c = config();
  const auto ids = c.phaseIds();
  if (std::find(ids.begin(), ids.end(), phase) == ids.end()) {
    throw Error(Errc::UnknownPhase, "phase '" + phase.str() + "' is not configured");
  }
  for (const auto& r : releases()) {
    if (r.phase == phase) throw Error(Errc::PhaseHasReleases, "phase " + phase.str() + " has release " + r.tag);
  }
  auto stage = loadStage();
  StagedState& s = stage[phase.str()];
  if (auto tip = branchHead(phase, kMainBranch)) {
    Snapshot snap = snapshotAt(*tip);
    for (const auto& p : s.removes) snap.entries.erase(p);
    for (const auto& [p, id] : s.adds) snap.entries[p] = id;
    s.adds = std::move(snap.entries);
    s.removes.clear();
  }
  saveStage(stage);
  fs::remove_all(metaDir() / "refs" / "phases" / phase.str());
  const Head h = head();
  if (h.phase == phase && h.branch != kMainBranch) {
    writeFileAtomic(metaDir() / "HEAD", phase.str() + "/" + std::string(kMainBranch) + "\n");
  }
}

Commit Repository::tagArtefact(const Tag& tag, const std::optional<ActionId>& action) {
  auto guard = lock();
  const Snapshot snap = headSnapshot();
  auto it = std::find_if(snap.entries.begin(), snap.entries.end(),
                         [&](const auto& e) { return e.second == tag.target; });
  if (it == snap.entries.end()) {
    throw Error(Errc::PathNotFound, "artefact " + tag.target.str() + " is not in the head snapshot");
  }
  const std::string path = it->first;
  member(tag.author);
  if (objects().typeOf(tag.narrative.str()) != "narrative") {
    throw Error(Errc::UnresolvedReference, "narrative " + tag.narrative.str() + " does not resolve");
  }

  Artefact next = loadArtefact(objects(), tag.target);
  if (tag.timestamp <= next.timestamp) {
    throw Error(Errc::NonMonotonicTimestamp, "tag time must follow the tagged version");
  }
  if (action) {
    const ActionRecord record = loadAction(objects(), *action);
    if (!actionConcerns(objects(), record, tag.target)) {
      throw Error(Errc::ActionMismatch, "action " + action->str() + " references neither side of the artefact");
    }
    next.listOfActions.push_back(*action);
  }
  next.listOfTags.push_back(tag.narrative);
  next.timestamp = tag.timestamp;
  next.predecessor = tag.target;
  stageAdd(next, path);
  return recordCommit(CommitKind::tag, "tag:" + path, tag.author, std::nullopt, tag.timestamp);
}

Commit Repository::tagPath(const std::string& path, const Narrative& narrative, const std::optional<ActionId>& action,
                           const ResearcherId& author, Timestamp now) {
  auto guard = lock();
  const Snapshot snap = headSnapshot();
  auto it = snap.entries.find(path);
  if (it == snap.entries.end()) throw Error(Errc::PathNotFound, "path '" + path + "' is not in the head snapshot");
  const NarrativeId nid = storeNarrative(objects(), narrative);
  return tagArtefact(Tag{it->second, nid, author, now}, action);
}

Release Repository::release(const std::string& tag, const RoundId& round, Timestamp now) {
  validateRefName(tag, "release");
  auto guard = lock();
  const RepoConfig c = config();
  const Head h = head();
  requireCurrentPhase(h, c);
  if (fs::exists(metaDir() / "refs" / "releases" / tag)) {
    throw Error(Errc::DuplicateTag, "release '" + tag + "' already exists");
  }
  const GateRef gate = requireAccepted(round, SubjectKind::release);
  const VoteRound r = loadRound(round);
  if (!h.commit || r.subject.target != h.commit->str()) {
    throw Error(Errc::GateNotPassed, "round " + round.str() + " does not target the current head");
  }
  Release rel{tag, *h.commit, h.phase, gate, now};
  writeFileAtomic(metaDir() / "refs" / "releases" / tag, canonicalDump(rel.toJson()));
  return rel;
}

Commit Repository::beginPhase(const ResearcherId& author, Timestamp now) {
  auto guard = lock();
  const RepoConfig c = config();
  const PhaseId phase = c.phase().id;
  if (branchHead(phase, kMainBranch)) {
    throw Error(Errc::InvalidArgument, "phase " + phase.str() + " already has history");
  }
  member(author);
  Snapshot empty;
  objects().putJson(empty.toJson());
  Commit rootCommit;
  rootCommit.snapshot = empty.id();
  rootCommit.message = "open phase " + phase.str();
  rootCommit.author = author;
  rootCommit.timestamp = now;
  rootCommit.phase = phase;
  rootCommit.cycle = c.currentCycle;
  rootCommit.kind = CommitKind::root;
  writeCommit(rootCommit);
  writeBranch(phase, kMainBranch, rootCommit.id);
  writeFileAtomic(metaDir() / "HEAD", phase.str() + "/" + std::string(kMainBranch) + "\n");
  return rootCommit;
}

std::vector<Release> Repository::releases() const {
  std::vector<Release> out;
  const fs::path dir = metaDir() / "refs" / "releases";
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || name.find(".tmp.") != std::string::npos) continue;
    out.push_back(loadRelease(name));
  }
  std::sort(out.begin(), out.end(), [](const Release& a, const Release& b) {
    return std::tie(a.timestamp, a.tag) < std::tie(b.timestamp, b.tag);
  });
  return out;
}

Release Repository::loadRelease(const std::string& tag) const {
  auto bytes = readFile(metaDir() / "refs" / "releases" / tag);
  if (!bytes) throw Error(Errc::UnknownRelease, "no release '" + tag + "'");
  return Release::fromJson(parseJson(*bytes, "release " + tag));
}

// ---------------------------------------------------------------------------
// rounds

namespace {

fs::path roundPath(const fs::path& meta, const RoundId& id) { return meta / "rounds" / (id.str() + ".json"); }

}  // namespace

std::string Repository::resolveTarget(std::string_view target) const {
  if (target == "head" || target == "HEAD") {
    const Head h = head();
    if (!h.commit) throw Error(Errc::UnknownSubject, "phase " + h.phase.str() + " has no head commit");
    return h.commit->str();
  }
  return std::string(target);
}

VoteRound Repository::openRound(const consensus::DecisionSubject& subject, const std::vector<ResearcherId>& group,
                                const std::optional<consensus::GateConfig>& gateConfig, Timestamp now) {
  auto guard = lock();
  const RepoConfig c = config();
  if (group.empty()) throw Error(Errc::EmptyGroup, "a round needs at least one member");
  const std::string type = objects().typeOf(subject.target);
  const bool wantsArtefact = subject.kind == SubjectKind::artefact_validation;
  if (type != (wantsArtefact ? "artefact" : "commit")) {
    throw Error(Errc::UnknownSubject, std::string(wantsArtefact ? "artefact " : "commit ") + subject.target +
                                          " does not resolve");
  }
  std::vector<consensus::Member> members;
  for (const auto& id : group) {
    const Researcher* r = c.find(id);
    if (!r) throw Error(Errc::UnknownResearcher, id.str() + " is not on the roster");
    members.push_back({r->id, r->hierarchyLevel});
  }

  int next = 1;
  const fs::path dir = metaDir() / "rounds";
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string stem = entry.path().stem().string();
      if (entry.path().extension() != ".json" || stem.size() < 2 || stem[0] != 'r') continue;
      try {
        next = std::max(next, std::stoi(stem.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
  }
  VoteRound r = consensus::openRound(RoundId("r" + std::to_string(next)), subject, c.phase().id,
                                     std::move(members), gateConfig.value_or(c.defaults), now);
  writeFileAtomic(roundPath(metaDir(), r.id), canonicalDump(consensus::toJson(r)));
  return r;
}

VoteRound Repository::loadRound(const RoundId& id) const {
  validateRefName(id.str(), "round");
  auto bytes = readFile(roundPath(metaDir(), id));
  if (!bytes) throw Error(Errc::UnknownRound, "no round '" + id.str() + "'");
  return consensus::roundFromJson(parseJson(*bytes, "round " + id.str()));
}

std::vector<VoteRound> Repository::rounds() const {
  std::vector<std::pair<int, VoteRound>> tmp;
  const fs::path dir = metaDir() / "rounds";
  if (!fs::is_directory(dir)) return {};
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    VoteRound r = loadRound(RoundId(entry.path().stem().string()));
    int order = 0;
    try {
      order = std::stoi(r.id.str().substr(1));
    } catch (const std::exception&) {
    }
    tmp.emplace_back(order, std::move(r));
  }
  std::sort(tmp.begin(), tmp.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first, a.second.id) < std::tie(b.first, b.second.id);
  });
  std::vector<VoteRound> out;
  for (auto& [_, r] : tmp) out.push_back(std::move(r));
  return out;
}

VoteRound Repository::castVote(const RoundId& id, const consensus::PreferenceBallot& ballot) {
  consensus::validateBallot(ballot);
  auto guard = lock();
  VoteRound r = consensus::castVote(loadRound(id), ballot);
  writeFileAtomic(roundPath(metaDir(), id), canonicalDump(consensus::toJson(r)));
  return r;
}

VoteRound Repository::closeRound(const RoundId& id, Timestamp now) {
  auto guard = lock();
  VoteRound r = loadRound(id);
  if (r.state == consensus::RoundState::closed) return r;
  r = consensus::decide(std::move(r), now);
  writeFileAtomic(roundPath(metaDir(), id), canonicalDump(consensus::toJson(r)));
  return r;
}

GateRef Repository::requireAccepted(const RoundId& id, std::optional<SubjectKind> kind) const {
  validateRefName(id.str(), "round");
  auto bytes = readFile(roundPath(metaDir(), id));
  if (!bytes) throw Error(Errc::GateNotPassed, "round '" + id.str() + "' does not exist");
  VoteRound r;
  try {
    r = consensus::roundFromJson(parseJson(*bytes, "round " + id.str()));
  } catch (const Error& e) {
    throw Error(Errc::GateNotPassed, std::string("round record unreadable: ") + e.what());
  }
  if (kind && r.subject.kind != *kind) {
    throw Error(Errc::WrongSubjectKind, "round " + id.str() + " decides " + std::string(to_string(r.subject.kind)) +
                                            ", expected " + std::string(to_string(*kind)));
  }
  if (r.state != consensus::RoundState::closed) {
    throw Error(Errc::GateNotPassed, "round " + id.str() + " is still open");
  }
  consensus::Verdict recomputed;
  try {
    recomputed = consensus::evaluate(r);
  } catch (const Error& e) {
    throw Error(Errc::GateNotPassed, "round " + id.str() + " cannot be recomputed: " + e.what());
  }
  if (recomputed != consensus::Verdict::accept || r.verdict != consensus::Verdict::accept) {
    throw Error(Errc::GateNotPassed, "round " + id.str() + " did not accept");
  }
  return GateRef{id, sha256Hex(*bytes)};
}

}  // namespace curator
