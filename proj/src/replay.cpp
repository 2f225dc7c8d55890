#include "curator/replay.hpp"

#include <cstdio>
#include <map>

#include "curator/canonical_json.hpp"
#include "curator/workflow.hpp"

namespace curator {

namespace fs = std::filesystem;
using consensus::SubjectKind;

namespace {

class Replayer {
 public:
  Replayer(const Json& script, fs::path dest) : script_(script), dest_(std::move(dest)) {}

  Repository run() {
    const Json events = script_.is_array() ? script_ : script_.value("events", Json::array());
    if (!events.is_array()) throw Error(Errc::ScriptError, "events must be a JSON array");
    create();
    for (std::size_t i = 0; i < events.size(); ++i) {
      const Json& ev = events[i];
      const std::string op = ev.is_object() ? ev.value("op", std::string{}) : std::string{};
      try {
        if (!ev.is_object()) throw Error(Errc::InvalidArgument, "event is not an object");
        tick(ev);
        apply(op, ev);
      } catch (const Error& e) {
        throw ScriptFailure(i, e.code(),
                            "event " + std::to_string(i) + " (" + op + "): " + std::string(to_string(e.code())) +
                                ": " + e.what());
      } catch (const Json::exception& e) {
        throw ScriptFailure(i, Errc::InvalidArgument,
                            "event " + std::to_string(i) + " (" + op + "): InvalidArgument: " + e.what());
      }
    }
    return *repo_;
  }

 private:
  void create() {
    const Json meta = script_.is_object() ? script_ : Json::object();
    try {
      workflow::PhaseConfig layout = workflow::defaultPhaseConfig();
      if (meta.contains("phases")) {
        layout.phases = meta["phases"].get<std::vector<std::vector<std::string>>>();
      } else if (meta.contains("layout")) {
        layout = workflow::parsePhaseLayout(meta["layout"].get<std::string>());
      }
      std::vector<Researcher> roster;
      for (const auto& r : meta.value("roster", Json::array())) {
        roster.push_back({r.at("id").get<ResearcherId>(), r.value("displayName", std::string{}), r.value("level", 0)});
      }
      if (roster.empty()) roster.push_back({ResearcherId("researcher"), "Researcher", 0});
      const auto defaults = meta.contains("gateDefaults") ? consensus::gateConfigFromJson(meta["gateDefaults"])
                                                          : consensus::GateConfig{};
      author_ = meta.contains("author") ? meta["author"].get<ResearcherId>() : roster.front().id;
      clock_ = Timestamp::parse(meta.value("start", std::string("2020-01-01T00:00:00.000Z")));
      repo_ = workflow::createProject(layout, ProjectId(meta.value("project", std::string("project"))),
                                      std::move(roster), defaults, dest_, author_, clock_);
    } catch (const Json::exception& e) {
      throw Error(Errc::ScriptError, std::string("malformed script header: ") + e.what());
    }
  }

  void tick(const Json& ev) {
    if (ev.contains("at")) {
      const Timestamp at = Timestamp::parse(ev["at"].get<std::string>());
      if (at < clock_) throw Error(Errc::NonMonotonicTimestamp, "event time " + at.str() + " precedes " + clock_.str());
      clock_ = at;
    } else {
      clock_ = clock_.plusMillis(1000);
    }
  }

  Timestamp next() {
    const Timestamp t = clock_;
    clock_ = clock_.plusMillis(1);
    return t;
  }

  ResearcherId who(const Json& ev, const char* key) const {
    return ev.contains(key) ? ev[key].get<ResearcherId>() : author_;
  }

  ArtefactId artefact(const std::string& ref) const {
    if (auto it = artefacts_.find(ref); it != artefacts_.end()) return it->second;
    if (repo_->objects().typeOf(ref) == "artefact") return ArtefactId(ref);
    throw Error(Errc::UnresolvedReference, "unknown artefact ref '" + ref + "'");
  }

  ActionId action(const std::string& ref) const {
    if (auto it = actions_.find(ref); it != actions_.end()) return it->second;
    return ActionId(ref);
  }

  RoundId round(const std::string& ref) const {
    if (auto it = rounds_.find(ref); it != rounds_.end()) return it->second;
    return RoundId(ref);
  }

  std::string target(const std::string& ref) const {
    if (ref == "head" || ref == "HEAD") return repo_->resolveTarget(ref);
    if (auto it = commits_.find(ref); it != commits_.end()) return it->second.str();
    if (auto it = artefacts_.find(ref); it != artefacts_.end()) return it->second.str();
    return ref;
  }

  DocumentRef document(const Json& ev) {
    if (ev.contains("blob")) {
      const std::string bytes = ev["blob"].get<std::string>();
      return DocumentRef::blob(
          storeBlob(repo_->objects(), bytes, ev.value("mediaType", std::string("application/octet-stream"))));
    }
    return DocumentRef::text(ev.at("text").get<std::string>());
  }

  Metadata metadata(const Json& ev, Timestamp at) const {
    Metadata m;
    m.key = ev.at("key").get<std::string>();
    m.value = ev.at("value").get<std::string>();
    m.origin = ev.value("origin", std::string("manual")) == "automatic" ? MetadataOrigin::automatic
                                                                        : MetadataOrigin::manual;
    if (m.origin == MetadataOrigin::manual) m.producer = who(ev, "producer");
    m.timestamp = at;
    return m;
  }

  Narrative narrative(const Json& ev, const ArtefactId& about, Timestamp at) const {
    return Narrative{loadArtefact(repo_->objects(), about).content, ev.at("text").get<std::string>(),
                     who(ev, "producer"), at};
  }

  static std::string numbered(const std::string& prefix, long n, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*ld", digits, n);
    return prefix + buf;
  }

  void bind(const Json& ev, const ArtefactId& id) {
    artefacts_[ev.contains("as") ? ev["as"].get<std::string>() : ev.at("ref").get<std::string>()] = id;
  }

  void apply(const std::string& op, const Json& ev) {
    Repository& repo = *repo_;
    ObjectStore& store = repo.objects();
    const RepoConfig cfg = repo.config();

    if (op == "artefact") {
      const Timestamp at = next();
      Artefact a = createArtefact(document(ev), who(ev, "producer"), cfg.phase().id, cfg.project, at, cfg.phaseIds());
      storeArtefact(store, a);
      artefacts_[ev.at("as").get<std::string>()] = idOf(a);
      if (ev.contains("path")) repo.stageAdd(a, ev["path"].get<std::string>());
    } else if (op == "stage") {
      const auto id = artefact(ev.at("ref").get<std::string>());
      repo.stageAdd(loadArtefact(store, id), ev.at("path").get<std::string>());
    } else if (op == "remove") {
      repo.stageRemove(ev.at("path").get<std::string>());
    } else if (op == "metadata" || op == "update-metadata") {
      const auto id = artefact(ev.at("ref").get<std::string>());
      const Timestamp at = next();
      const Metadata m = metadata(ev, at);
      bind(ev, idOf(op == "metadata" ? addMetadata(store, m, id, at) : updateMetadata(store, m, id, at)));
    } else if (op == "narrative") {
      const auto id = artefact(ev.at("ref").get<std::string>());
      const Timestamp at = next();
      bind(ev, idOf(addNarrative(store, narrative(ev, id, at), id, at)));
    } else if (op == "revise") {
      const auto id = artefact(ev.at("ref").get<std::string>());
      bind(ev, idOf(reviseContent(store, document(ev), who(ev, "producer"), id, next())));
    } else if (op == "action") {
      ActionRecord a;
      a.original = artefact(ev.at("original").get<std::string>());
      a.result = artefact(ev.at("result").get<std::string>());
      a.operation.name = ev.at("name").get<std::string>();
      a.operation.parameters = ev.value("parameters", std::map<std::string, std::string>{});
      a.operation.assessmentScores = ev.value("scores", std::map<std::string, double>{});
      a.producer = who(ev, "producer");
      a.timestamp = next();
      actions_[ev.at("as").get<std::string>()] = storeAction(store, a);
    } else if (op == "ritl") {
      const auto id = artefact(ev.at("ref").get<std::string>());
      const Timestamp at = next();
      bind(ev, idOf(addRITL(store, narrative(ev, id, at), action(ev.at("action").get<std::string>()), id, at)));
    } else if (op == "curate") {
      const auto id = artefact(ev.at("ref").get<std::string>());
      workflow::CurationInput in{loadArtefact(store, id), {}, std::nullopt, ev.at("path").get<std::string>()};
      const Timestamp at = next();
      for (const auto& m : ev.value("metadata", Json::array())) in.metadata.push_back(metadata(m, at));
      if (ev.contains("ritl")) {
        const Json& r = ev["ritl"];
        in.ritl.emplace(narrative(r, id, at), action(r.at("action").get<std::string>()));
      }
      const auto result = workflow::runCurationStep(repo, in, who(ev, "author"), at);
      clock_ = std::max(clock_, result.commit.timestamp.plusMillis(1));
      bind(ev, result.version);
    } else if (op == "commit") {
      std::optional<RoundId> r;
      if (ev.contains("round")) r = round(ev["round"].get<std::string>());
      const Commit c = repo.commit(ev.at("message").get<std::string>(), who(ev, "author"), r, next());
      if (ev.contains("as")) commits_[ev["as"].get<std::string>()] = c.id;
    } else if (op == "round") {
      consensus::DecisionSubject subject{consensus::parseSubjectKind(ev.at("kind").get<std::string>()),
                                         target(ev.value("target", std::string("head")))};
      std::vector<ResearcherId> group;
      if (ev.contains("group")) {
        group = ev["group"].get<std::vector<ResearcherId>>();
      } else {
        for (const auto& r : cfg.roster) group.push_back(r.id);
      }
      std::optional<consensus::GateConfig> gc;
      if (ev.contains("config")) {
        Json merged = consensus::toJson(cfg.defaults);
        merged.update(ev["config"]);
        gc = consensus::gateConfigFromJson(merged);
      }
      const auto r = repo.openRound(subject, group, gc, next());
      rounds_[ev.at("as").get<std::string>()] = r.id;
    } else if (op == "vote") {
      consensus::PreferenceBallot b;
      b.voter = ev.at("voter").get<ResearcherId>();
      b.pref = ev.at("pref").get<double>();
      if (ev.contains("credits")) b.credits = ev["credits"].get<std::uint64_t>();
      b.timestamp = next();
      repo.castVote(round(ev.at("round").get<std::string>()), b);
    } else if (op == "close-round") {
      repo.closeRound(round(ev.at("round").get<std::string>()), next());
    } else if (op == "close-cycle") {
      workflow::closeCycle(repo, round(ev.at("round").get<std::string>()), who(ev, "author"), next());
    } else if (op == "advance") {
      std::optional<std::string> tag;
      if (ev.contains("release")) tag = ev["release"].get<std::string>();
      workflow::advancePhase(repo, round(ev.at("round").get<std::string>()), tag, who(ev, "author"), next());
    } else if (op == "release") {
      repo.release(ev.at("tag").get<std::string>(), round(ev.at("round").get<std::string>()), next());
    } else if (op == "branch") {
      std::optional<CommitId> from;
      if (ev.contains("from")) from = CommitId(target(ev["from"].get<std::string>()));
      std::optional<std::string> filter;
      if (ev.contains("filter")) filter = ev["filter"].get<std::string>();
      repo.branch(ev.at("name").get<std::string>(), from, filter, who(ev, "author"), next());
    } else if (op == "switch") {
      repo.switchBranch(ev.at("branch").get<std::string>());
    } else if (op == "merge") {
      std::map<std::string, ArtefactId> resolver;
      const Json resolve = ev.value("resolve", Json::object());
      for (const auto& [path, ref] : resolve.items()) {
        resolver.emplace(path, artefact(ref.get<std::string>()));
      }
      const std::string into = ev.contains("into") ? ev["into"].get<std::string>() : repo.head().branch;
      repo.merge(into, ev.at("from").get<std::string>(), resolver, who(ev, "author"),
                 round(ev.at("round").get<std::string>()), next());
    } else if (op == "tag") {
      const std::string path = ev.at("path").get<std::string>();
      const Snapshot snap = repo.headSnapshot();
      auto it = snap.entries.find(path);
      if (it == snap.entries.end()) throw Error(Errc::PathNotFound, "path '" + path + "' is not in the head snapshot");
      const Timestamp at = next();
      std::optional<ActionId> act;
      if (ev.contains("action")) act = action(ev["action"].get<std::string>());
      Json nev = ev;
      if (!nev.contains("producer")) nev["producer"] = who(ev, "author");
      repo.tagPath(path, narrative(nev, it->second, at), act, who(ev, "author"), at);
      if (ev.contains("as")) artefacts_[ev["as"].get<std::string>()] = repo.headSnapshot().entries.at(path);
    } else if (op == "drop-branch") {
      repo.dropBranch(ev.at("name").get<std::string>());
    } else if (op == "drop-stage") {
      repo.dropStage(PhaseId(ev.at("phase").get<std::string>()));
    } else if (op == "stage-batch") {
      const std::string prefix = ev.at("prefix").get<std::string>();
      const long first = ev.value("first", 1L);
      const long count = ev.at("count").get<long>();
      const int digits = ev.value("digits", 4);
      const std::string tmpl = ev.at("text").get<std::string>();
      const Json meta = ev.value("metadata", Json::object());
      std::vector<std::pair<std::string, Artefact>> items;
      items.reserve(static_cast<std::size_t>(count));
      for (long n = first; n < first + count; ++n) {
        std::string text = tmpl;
        const std::string num = numbered("", n, digits);
        for (auto pos = text.find("{n}"); pos != std::string::npos; pos = text.find("{n}", pos)) {
          text.replace(pos, 3, num);
        }
        Artefact a = createArtefact(DocumentRef::text(text), who(ev, "producer"), cfg.phase().id, cfg.project,
                                    next(), cfg.phaseIds());
        if (!meta.empty()) {
          storeArtefact(store, a);
          const auto values = meta.at("values").get<std::vector<std::string>>();
          Json mev{{"key", meta.at("key")},
                   {"value", values.at(static_cast<std::size_t>(n - first) % values.size())},
                   {"origin", meta.value("origin", std::string("manual"))}};
          if (ev.contains("producer")) mev["producer"] = ev["producer"];
          const Timestamp at = next();
          a = addMetadata(store, metadata(mev, at), idOf(a), at);
        }
        items.emplace_back(numbered(prefix, n, digits), std::move(a));
      }
      repo.stageAddAll(items);
    } else if (op == "remove-batch") {
      const std::string prefix = ev.at("prefix").get<std::string>();
      const int digits = ev.value("digits", 4);
      for (long n = ev.at("first").get<long>(); n <= ev.at("last").get<long>(); ++n) {
        repo.stageRemove(numbered(prefix, n, digits));
      }
    } else {
      throw Error(Errc::InvalidArgument, "unknown op '" + op + "'");
    }
  }

  const Json& script_;
  fs::path dest_;
  std::optional<Repository> repo_;
  ResearcherId author_;
  Timestamp clock_;
  std::map<std::string, ArtefactId> artefacts_;
  std::map<std::string, ActionId> actions_;
  std::map<std::string, RoundId> rounds_;
  std::map<std::string, CommitId> commits_;
};

}  // namespace

Repository replayScript(const Json& script, const fs::path& dest) { return Replayer(script, dest).run(); }

Repository replayFile(const fs::path& scriptPath, const fs::path& dest) {
  auto bytes = readFile(scriptPath);
  if (!bytes) throw Error(Errc::InvalidArgument, "cannot read script " + scriptPath.string());
  return replayScript(parseJson(*bytes, scriptPath.string()), dest);
}

}  // namespace curator
