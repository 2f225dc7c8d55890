#include "curator/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "curator/canonical_json.hpp"
#include "curator/digest.hpp"
#include "curator/error.hpp"
#include "curator/replay.hpp"
#include "curator/repository.hpp"
#include "curator/service.hpp"
#include "curator/views.hpp"
#include "curator/workflow.hpp"

namespace curator::cli {

namespace fs = std::filesystem;

namespace {

std::string shortId(std::string_view id) { return std::string(id.substr(0, 12)); }

std::pair<std::string, std::string> splitPair(const std::string& text, char sep, std::string_view what) {
  const auto pos = text.find(sep);
  if (pos == std::string::npos || pos == 0) {
    throw Error(Errc::InvalidArgument, std::string(what) + " must look like key" + sep + "value, got '" + text + "'");
  }
  return {text.substr(0, pos), text.substr(pos + 1)};
}

std::vector<std::string> splitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string mediaTypeFor(const fs::path& file) {
  static const std::map<std::string, std::string> known = {
      {".txt", "text/plain"},       {".md", "text/markdown"},      {".csv", "text/csv"},
      {".json", "application/json"}, {".pdf", "application/pdf"}, {".png", "image/png"},
      {".jpg", "image/jpeg"},       {".jpeg", "image/jpeg"},       {".gif", "image/gif"},
      {".tif", "image/tiff"},       {".tiff", "image/tiff"},       {".html", "text/html"}};
  std::string ext = file.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  const auto it = known.find(ext);
  return it == known.end() ? "application/octet-stream" : it->second;
}

/// State shared by the subcommand callbacks of one invocation.
class Session {
 public:
  Session(const CliEnv& env, std::ostream& out) : env_(env), out_(out) {}

  std::ostream& out() { return out_; }
  const CliEnv& env() const { return env_; }

  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : env_.cwd / p; }

  /// Root for commands that create a repository.
  fs::path targetRoot() const {
    if (env_.curatorDir) return resolve(*env_.curatorDir);
    return env_.cwd;
  }

  Repository& repo() {
    if (!repo_) {
      fs::path root;
      if (env_.curatorDir) {
        root = resolve(*env_.curatorDir);
        if (root.filename() == Repository::kMetaDir) root = root.parent_path();
      } else if (auto found = Repository::discover(env_.cwd)) {
        root = *found;
      } else {
        throw Error(Errc::NotARepository, "no .curator directory found from " + env_.cwd.string());
      }
      repo_.emplace(Repository::open(root));
    }
    return *repo_;
  }

  ResearcherId author() const {
    if (!env_.author || env_.author->empty()) {
      throw Error(Errc::MissingAuthor, "set CURATOR_AUTHOR to the acting researcher id");
    }
    return ResearcherId(*env_.author);
  }

  void emit(const Json& view) { out_ << views::render(view); }

  /// Storage for option values that must outlive command construction.
  template <class T>
  T& hold(T init = T{}) {
    auto p = std::make_shared<T>(std::move(init));
    T& ref = *p;
    held_.push_back(std::move(p));
    return ref;
  }

 private:
  std::vector<std::shared_ptr<void>> held_;
  const CliEnv& env_;
  std::ostream& out_;
  std::optional<Repository> repo_;
};

void printCommit(std::ostream& out, const Commit& c) {
  out << "[" << c.phase.str() << " c" << c.cycle << " " << to_string(c.kind) << " " << shortId(c.id.str()) << "] "
      << c.message << "\n";
}

void printRound(std::ostream& out, const consensus::VoteRound& r) {
  out << r.id.str() << " " << consensus::to_string(r.subject.kind) << " " << r.subject.target << " "
      << consensus::to_string(r.state);
  if (r.verdict) out << " " << consensus::to_string(*r.verdict);
  out << " (" << r.ballots.size() << "/" << r.group.size() << " ballots, " << consensus::to_string(r.config.strategy)
      << ")\n";
  const Json tally = views::round(r)["tally"];
  if (!tally.is_null()) {
    out << std::fixed << std::setprecision(4) << "  score " << tally["score"].get<double>();
    if (!tally["disagreement"].is_null()) out << "  dis " << tally["disagreement"].get<double>();
    out << "  gate " << tally["gate"].get<std::string>() << "\n";
    out.unsetf(std::ios::floatfield);
  }
}

void printProject(std::ostream& out, const workflow::ProjectState& s) {
  out << "project " << s.project.str() << "\n";
  for (std::size_t i = 0; i < s.phases.size(); ++i) {
    out << (i == s.currentPhase ? "* " : "  ") << s.phases[i].id.str();
    if (i == s.currentPhase) out << " (cycle " << s.currentCycle << ")";
    out << "\n";
  }
  for (const auto& r : s.releases) out << "release " << r.tag << " " << shortId(r.commit.str()) << "\n";
}

consensus::GateConfig gateFrom(const consensus::GateConfig& defaults, const std::optional<std::string>& strategy,
                               const std::optional<double>& pref, const std::optional<std::string>& dis,
                               const std::optional<double>& quorum) {
  consensus::GateConfig g = defaults;
  if (strategy) g.strategy = consensus::parseStrategy(*strategy);
  if (pref) g.prefThreshold = *pref;
  if (dis) {
    if (*dis == "off" || *dis == "none") {
      g.disThreshold.reset();
    } else {
      try {
        g.disThreshold = std::stod(*dis);
      } catch (const std::exception&) {
        throw Error(Errc::InvalidGateConfig, "--dis expects a number or 'off', got '" + *dis + "'");
      }
    }
  }
  if (quorum) g.quorum = *quorum;
  consensus::validate(g);
  return g;
}

struct GateFlags {
  std::optional<std::string> strategy;
  std::optional<double> pref;
  std::optional<std::string> dis;
  std::optional<double> quorum;

  void attach(CLI::App* cmd) {
    cmd->add_option("--strategy", strategy, "AVERAGE, PLURALITY, LEAST_MISERY, QUADRATIC or EXPERT_WEIGHTED");
    cmd->add_option("--pref", pref, "preference threshold");
    cmd->add_option("--dis", dis, "disagreement threshold, or 'off'");
    cmd->add_option("--quorum", quorum, "fraction of the group that must vote");
  }
};

void buildCommands(CLI::App& app, Session& s) {
  // ----- init -----
  {
    auto* cmd = app.add_subcommand("init", "create a repository");
    auto& path = s.hold<std::optional<std::string>>();
    auto& project = s.hold<std::optional<std::string>>();
    auto& layout = s.hold<std::optional<std::string>>();
    auto& researchers = s.hold<std::vector<std::string>>();
    auto& gate = s.hold<GateFlags>();
    cmd->add_option("path", path, "directory to initialize (default: current)");
    cmd->add_option("--project", project, "project id (default: directory name)");
    cmd->add_option("--layout", layout, "phase layout such as 1,2,3+4,5");
    cmd->add_option("--researcher", researchers, "roster entry id[:level[:display name]]")->take_all();
    gate.attach(cmd);
    cmd->callback([&] {
      const fs::path root = path ? s.resolve(*path) : s.targetRoot();
      std::vector<Researcher> roster;
      for (const auto& entry : researchers) {
        Researcher r;
        const auto first = entry.find(':');
        r.id = ResearcherId(entry.substr(0, first));
        if (first != std::string::npos) {
          const auto second = entry.find(':', first + 1);
          try {
            r.hierarchyLevel = std::stoi(entry.substr(first + 1, second - first - 1));
          } catch (const std::exception&) {
            throw Error(Errc::InvalidArgument, "bad hierarchy level in '" + entry + "'");
          }
          if (second != std::string::npos) r.displayName = entry.substr(second + 1);
        }
        if (r.displayName.empty()) r.displayName = r.id.str();
        roster.push_back(std::move(r));
      }
      ResearcherId author = s.env().author && !s.env().author->empty()
                                ? ResearcherId(*s.env().author)
                                : (roster.empty() ? ResearcherId("curator") : roster.front().id);
      if (roster.empty()) roster.push_back(Researcher{author, author.str(), 0});
      const auto config = layout ? workflow::parsePhaseLayout(*layout) : workflow::defaultPhaseConfig();
      const auto defaults = gateFrom(consensus::GateConfig{}, gate.strategy, gate.pref, gate.dis, gate.quorum);
      fs::path dir = fs::absolute(root).lexically_normal();
      if (dir.filename().empty()) dir = dir.parent_path();
      const ProjectId pid(project ? *project : dir.filename().string());
      auto repo = workflow::createProject(config, pid, std::move(roster), defaults, root, author, Timestamp::now());
      s.out() << "initialized curator repository in " << fs::absolute(repo.root()).lexically_normal().string() << "\n";
    });
  }

  // ----- clone -----
  {
    auto* cmd = app.add_subcommand("clone", "copy a repository and re-verify every object");
    auto& source = s.hold<std::string>();
    auto& dest = s.hold<std::optional<std::string>>();
    cmd->add_option("source", source, "path or file:// URL")->required();
    cmd->add_option("dest", dest, "destination directory");
    cmd->callback([&] {
      std::string src = source;
      if (src.rfind("file://", 0) != 0) src = s.resolve(src).string();
      fs::path target;
      if (dest) {
        target = s.resolve(*dest);
      } else {
        fs::path from(src.rfind("file://", 0) == 0 ? src.substr(7) : src);
        from = from.lexically_normal();
        if (from.filename().empty()) from = from.parent_path();
        target = s.env().cwd / from.filename();
      }
      auto repo = Repository::clone(src, target);
      s.out() << "cloned into " << repo.root().string() << " (" << repo.objects().list().size() << " objects verified)\n";
    });
  }

  // ----- add / rm / status -----
  {
    auto* cmd = app.add_subcommand("add", "stage a new artefact at a path");
    auto& path = s.hold<std::string>();
    auto& file = s.hold<std::string>();
    auto& asText = s.hold<bool>(false);
    auto& mediaType = s.hold<std::optional<std::string>>();
    auto& metadata = s.hold<std::vector<std::string>>();
    cmd->add_option("path", path, "logical artefact path")->required();
    cmd->add_option("file", file, "file holding the document")->required();
    cmd->add_flag("--text", asText, "store the document inline as UTF-8 text");
    cmd->add_option("--media-type", mediaType, "media type of a blob document");
    cmd->add_option("--meta", metadata, "metadata entry key=value")->take_all();
    cmd->callback([&] {
      const ResearcherId who = s.author();
      Repository& repo = s.repo();
      repo.member(who);
      validatePath(path);
      const fs::path source = s.resolve(file);
      const auto read = fs::is_regular_file(source) ? readFile(source) : std::nullopt;
      if (!read) throw Error(Errc::IoError, "cannot read " + source.string());
      const std::string& bytes = *read;
      auto guard = repo.lock();
      DocumentRef content = asText ? DocumentRef::text(bytes)
                                   : DocumentRef::blob(storeBlob(repo.objects(), bytes,
                                                                 mediaType ? *mediaType : mediaTypeFor(source)));
      const RepoConfig cfg = repo.config();
      Timestamp now = Timestamp::now();
      Artefact a = createArtefact(std::move(content), who, cfg.phase().id, cfg.project, now, cfg.phaseIds());
      for (const auto& entry : metadata) {
        const auto [key, value] = splitPair(entry, '=', "--meta");
        storeArtefact(repo.objects(), a);
        now = std::max(Timestamp::now(), a.timestamp.plusMillis(1));
        a = addMetadata(repo.objects(), Metadata{key, value, MetadataOrigin::manual, who, now}, idOf(a), now);
      }
      repo.stageAdd(a, path);
      s.out() << "staged " << path << " " << idOf(a).str() << "\n";
    });
  }
  {
    auto* cmd = app.add_subcommand("rm", "stage the removal of a path");
    auto& path = s.hold<std::string>();
    cmd->add_option("path", path, "logical artefact path")->required();
    cmd->callback([&] {
      s.author();
      s.repo().stageRemove(path);
      s.out() << "staged removal of " << path << "\n";
    });
  }
  {
    auto* cmd = app.add_subcommand("status", "show HEAD and staged changes");
    auto& json = s.hold<bool>(false);
    cmd->add_flag("--json", json, "machine-readable output");
    cmd->callback([&] {
      Repository& repo = s.repo();
      const StagedState st = repo.staged();
      if (json) return s.emit(views::staged(st));
      const Head h = repo.head();
      s.out() << "on " << h.phase.str() << "/" << h.branch << "\n";
      for (const auto& [p, id] : st.adds) s.out() << "  add    " << p << " " << shortId(id.str()) << "\n";
      for (const auto& p : st.removes) s.out() << "  remove " << p << "\n";
      if (st.empty()) s.out() << "nothing staged\n";
    });
  }

  // ----- commit -----
  {
    auto* cmd = app.add_subcommand("commit", "record staged changes");
    auto& message = s.hold<std::string>();
    auto& round = s.hold<std::optional<std::string>>();
    cmd->add_option("-m,--message", message, "commit message")->required();
    cmd->add_option("--round", round, "accepted round gating this commit");
    cmd->callback([&] {
      const ResearcherId who = s.author();
      std::optional<RoundId> r;
      if (round) r = RoundId(*round);
      printCommit(s.out(), s.repo().commit(message, who, r, Timestamp::now()));
    });
  }

  // ----- branches -----
  {
    auto* cmd = app.add_subcommand("branch", "create a branch, or list branches when no name is given");
    auto& name = s.hold<std::optional<std::string>>();
    auto& from = s.hold<std::optional<std::string>>();
    auto& filter = s.hold<std::optional<std::string>>();
    cmd->add_option("name", name, "branch name");
    cmd->add_option("--from", from, "starting commit (default: HEAD)");
    cmd->add_option("--filter", filter, "keep only paths under this prefix");
    cmd->callback([&] {
      Repository& repo = s.repo();
      if (!name) {
        const Head h = repo.head();
        for (const auto& b : repo.branches(h.phase)) {
          s.out() << (b.name == h.branch ? "* " : "  ") << b.name << " " << shortId(b.head.str()) << "\n";
        }
        return;
      }
      const ResearcherId who = s.author();
      std::optional<CommitId> start;
      if (from) start = CommitId(repo.resolveTarget(*from));
      const Branch b = repo.branch(*name, start, filter, who, Timestamp::now());
      s.out() << "created branch " << b.phase.str() << "/" << b.name << " at " << shortId(b.head.str()) << "\n";
    });
  }
  {
    auto* cmd = app.add_subcommand("switch", "move HEAD to another branch of the current phase");
    auto& name = s.hold<std::string>();
    cmd->add_option("name", name, "branch name")->required();
    cmd->callback([&] {
      s.author();
      s.repo().switchBranch(name);
      s.out() << "switched to " << name << "\n";
    });
  }
  {
    auto* cmd = app.add_subcommand("merge", "merge a branch under an accepted MERGE round");
    auto& from = s.hold<std::string>();
    auto& into = s.hold<std::optional<std::string>>();
    auto& resolve = s.hold<std::vector<std::string>>();
    auto& round = s.hold<std::string>();
    cmd->add_option("from", from, "branch to merge")->required();
    cmd->add_option("--into", into, "target branch (default: HEAD branch)");
    cmd->add_option("--resolve", resolve, "conflict resolution path=artefactId")->take_all();
    cmd->add_option("--round", round, "accepted MERGE round")->required();
    cmd->callback([&] {
      const ResearcherId who = s.author();
      Repository& repo = s.repo();
      std::map<std::string, ArtefactId> resolver;
      for (const auto& entry : resolve) {
        const auto pos = entry.rfind('=');
        if (pos == std::string::npos || pos == 0) {
          throw Error(Errc::InvalidArgument, "--resolve must look like path=artefactId, got '" + entry + "'");
        }
        resolver.emplace(entry.substr(0, pos), ArtefactId(entry.substr(pos + 1)));
      }
      const std::string target = into ? *into : repo.head().branch;
      printCommit(s.out(), repo.merge(target, from, resolver, who, RoundId(round), Timestamp::now()));
    });
  }
  {
    auto* cmd = app.add_subcommand("drop-branch", "delete a branch ref");
    auto& name = s.hold<std::string>();
    cmd->add_option("name", name, "branch name")->required();
    cmd->callback([&] {
      s.author();
      s.repo().dropBranch(name);
      s.out() << "dropped branch " << name << "\n";
    });
  }
  {
    auto* cmd = app.add_subcommand("drop-stage", "discard a phase's history, keeping its head contents staged");
    auto& phase = s.hold<std::string>();
    cmd->add_option("phase", phase, "phase id such as G2")->required();
    cmd->callback([&] {
      s.author();
      s.repo().dropStage(PhaseId(phase));
      s.out() << "dropped history of " << phase << "\n";
    });
  }

  // ----- tag -----
  {
    auto* cmd = app.add_subcommand("tag", "attach a narrative to the artefact at a path");
    auto& path = s.hold<std::string>();
    auto& narrativeFile = s.hold<std::optional<std::string>>();
    auto& message = s.hold<std::optional<std::string>>();
    auto& action = s.hold<std::optional<std::string>>();
    cmd->add_option("path", path, "logical artefact path")->required();
    auto* n = cmd->add_option("--narrative", narrativeFile, "file holding the narrative text");
    auto* m = cmd->add_option("--message", message, "narrative text given inline");
    n->excludes(m);
    cmd->add_option("--action", action, "action record this narrative explains");
    cmd->callback([&] {
      const ResearcherId who = s.author();
      Repository& repo = s.repo();
      std::string text;
      if (narrativeFile) {
        const fs::path file = s.resolve(*narrativeFile);
        const auto read = fs::is_regular_file(file) ? readFile(file) : std::nullopt;
        if (!read) throw Error(Errc::IoError, "cannot read " + file.string());
        text = *read;
      } else if (message) {
        text = *message;
      } else {
        throw Error(Errc::InvalidArgument, "tag needs --narrative <file> or --message <text>");
      }
      const Timestamp now = Timestamp::now();
      Narrative nar{DocumentRef::text(text), text, who, now};
      std::optional<ActionId> act;
      if (action) act = ActionId(*action);
      printCommit(s.out(), repo.tagPath(path, nar, act, who, now));
    });
  }

  // ----- rounds -----
  {
    auto* round = app.add_subcommand("round", "consensus rounds");
    round->require_subcommand(1);

    auto* open = round->add_subcommand("open", "open a round");
    auto& kind = s.hold<std::string>();
    auto& target = s.hold<std::string>("head");
    auto& group = s.hold<std::optional<std::string>>();
    auto& gate = s.hold<GateFlags>();
    auto& openJson = s.hold<bool>(false);
    open->add_option("kind", kind, "ARTEFACT_VALIDATION, CYCLE_CLOSE, PHASE_ADVANCE, RELEASE or MERGE")->required();
    open->add_option("--target", target, "commit id, artefact id or 'head'");
    open->add_option("--group", group, "comma-separated researcher ids (default: roster)");
    gate.attach(open);
    open->add_flag("--json", openJson, "machine-readable output");
    open->callback([&] {
      const ResearcherId who = s.author();
      Repository& repo = s.repo();
      repo.member(who);
      const RepoConfig cfg = repo.config();
      std::vector<ResearcherId> members;
      if (group) {
        for (const auto& id : splitList(*group)) members.emplace_back(id);
      } else {
        for (const auto& r : cfg.roster) members.push_back(r.id);
      }
      const consensus::DecisionSubject subject{consensus::parseSubjectKind(kind), repo.resolveTarget(target)};
      const auto config = gateFrom(cfg.defaults, gate.strategy, gate.pref, gate.dis, gate.quorum);
      const auto r = repo.openRound(subject, members, config, Timestamp::now());
      if (openJson) return s.emit(views::round(r));
      s.out() << "opened ";
      printRound(s.out(), r);
    });

    auto* vote = round->add_subcommand("vote", "cast or replace your ballot");
    auto& voteId = s.hold<std::string>();
    auto& pref = s.hold<double>(0);
    auto& credits = s.hold<std::optional<std::uint64_t>>();
    vote->add_option("id", voteId, "round id")->required();
    vote->add_option("--pref", pref, "preference in [0, 1]")->required();
    vote->add_option("--credits", credits, "voice credits for QUADRATIC rounds");
    vote->callback([&] {
      const ResearcherId who = s.author();
      consensus::PreferenceBallot b{who, pref, credits, Timestamp::now()};
      consensus::validateBallot(b);
      printRound(s.out(), s.repo().castVote(RoundId(voteId), b));
    });

    auto* close = round->add_subcommand("close", "close a round and record its verdict");
    auto& closeId = s.hold<std::string>();
    close->add_option("id", closeId, "round id")->required();
    close->callback([&] {
      s.author();
      printRound(s.out(), s.repo().closeRound(RoundId(closeId), Timestamp::now()));
    });

    auto* show = round->add_subcommand("show", "show one round");
    auto& showId = s.hold<std::string>();
    auto& showJson = s.hold<bool>(false);
    show->add_option("id", showId, "round id")->required();
    show->add_flag("--json", showJson, "machine-readable output");
    show->callback([&] {
      const auto r = s.repo().loadRound(RoundId(showId));
      if (showJson) return s.emit(views::round(r));
      printRound(s.out(), r);
      for (const auto& b : r.ballots) {
        s.out() << "  " << b.voter.str() << " " << b.pref;
        if (b.credits) s.out() << " credits " << *b.credits;
        s.out() << "\n";
      }
    });

    auto* list = round->add_subcommand("list", "list all rounds");
    auto& listJson = s.hold<bool>(false);
    list->add_flag("--json", listJson, "machine-readable output");
    list->callback([&] {
      if (listJson) return s.emit(views::rounds(s.repo()));
      for (const auto& r : s.repo().rounds()) printRound(s.out(), r);
    });
  }

  // ----- workflow -----
  {
    auto* cycle = app.add_subcommand("cycle", "curation cycles");
    cycle->require_subcommand(1);
    auto* close = cycle->add_subcommand("close", "close the current cycle under an accepted round");
    auto& round = s.hold<std::string>();
    close->add_option("--round", round, "accepted CYCLE_CLOSE round")->required();
    close->callback([&] {
      const ResearcherId who = s.author();
      printProject(s.out(), workflow::closeCycle(s.repo(), RoundId(round), who, Timestamp::now()));
    });
  }
  {
    auto* phase = app.add_subcommand("phase", "workflow phases");
    phase->require_subcommand(1);
    auto* advance = phase->add_subcommand("advance", "advance to the next phase under an accepted round");
    auto& round = s.hold<std::string>();
    auto& release = s.hold<std::optional<std::string>>();
    advance->add_option("--round", round, "accepted PHASE_ADVANCE or RELEASE round")->required();
    advance->add_option("--release", release, "release tag to cut before advancing");
    advance->callback([&] {
      const ResearcherId who = s.author();
      printProject(s.out(), workflow::advancePhase(s.repo(), RoundId(round), release, who, Timestamp::now()));
    });
  }
  {
    auto* cmd = app.add_subcommand("release", "cut a release of HEAD under an accepted RELEASE round");
    auto& tag = s.hold<std::string>();
    auto& round = s.hold<std::string>();
    cmd->add_option("tag", tag, "release tag")->required();
    cmd->add_option("--round", round, "accepted RELEASE round")->required();
    cmd->callback([&] {
      s.author();
      const Release r = s.repo().release(tag, RoundId(round), Timestamp::now());
      s.out() << "released " << r.tag << " at " << shortId(r.commit.str()) << "\n";
    });
  }

  // ----- reads -----
  {
    auto* cmd = app.add_subcommand("log", "first-parent history of a branch");
    auto& phase = s.hold<std::optional<std::string>>();
    auto& branch = s.hold<std::optional<std::string>>();
    auto& json = s.hold<bool>(false);
    cmd->add_option("--phase", phase, "phase id (default: HEAD phase)");
    cmd->add_option("--branch", branch, "branch (default: HEAD branch)");
    cmd->add_flag("--json", json, "machine-readable output");
    cmd->callback([&] {
      Repository& repo = s.repo();
      const Head h = repo.head();
      const PhaseId p = phase ? PhaseId(*phase) : h.phase;
      const std::string b = branch ? *branch : h.branch;
      if (json) return s.emit(views::log(repo, p, b));
      for (const auto& c : repo.log(p, b)) {
        s.out() << shortId(c.id.str()) << " " << c.timestamp.str() << " c" << c.cycle << " " << to_string(c.kind)
                << " " << c.author.str() << "  " << c.message;
        if (c.gate) s.out() << "  [gate " << c.gate->round.str() << "]";
        s.out() << "\n";
      }
    });
  }
  {
    auto* cmd = app.add_subcommand("show", "show the artefact at a HEAD path (or an artefact id)");
    auto& what = s.hold<std::string>();
    auto& json = s.hold<bool>(false);
    cmd->add_option("path", what, "logical path or artefact id")->required();
    cmd->add_flag("--json", json, "machine-readable output");
    cmd->callback([&] {
      Repository& repo = s.repo();
      std::optional<ArtefactId> id;
      const Snapshot snap = repo.headSnapshot();
      if (auto it = snap.entries.find(what); it != snap.entries.end()) {
        id = it->second;
      } else if (isDigest(what)) {
        id = ArtefactId(what);
      } else {
        throw Error(Errc::PathNotFound, "path '" + what + "' is not in the head snapshot");
      }
      const Json view = views::artefact(repo, *id);
      if (json) return s.emit(view);
      const Artefact a = loadArtefact(repo.objects(), *id);
      s.out() << "artefact " << id->str() << "\n"
              << "producer " << a.producer.str() << "  phase " << a.phase.str() << "  " << a.timestamp.str() << "\n"
              << "versions " << view["versions"].size() << "\n";
      if (a.content.isText()) {
        s.out() << "\n" << a.content.textValue() << "\n";
      } else {
        const BlobRef& b = a.content.blobValue();
        s.out() << "blob " << b.digest.str() << " " << b.mediaType << " " << b.size << " bytes\n";
      }
      if (!a.metaData.empty()) s.out() << "\nmetadata\n";
      for (const auto& m : a.metaData) s.out() << "  " << m.key << " = " << m.value << "\n";
      if (!view["narratives"].empty()) s.out() << "\nnarratives\n";
      for (const auto& n : view["narratives"]) s.out() << "  - " << n["narrative"].get<std::string>() << "\n";
    });
  }
  {
    auto* cmd = app.add_subcommand("stats", "per-phase project statistics");
    auto& json = s.hold<bool>(false);
    cmd->add_flag("--json", json, "machine-readable output");
    cmd->callback([&] {
      if (json) return s.emit(views::stats(s.repo()));
      s.out() << workflow::renderTable(workflow::computeStats(s.repo()));
    });
  }
  {
    auto* cmd = app.add_subcommand("project", "project state");
    auto& json = s.hold<bool>(false);
    cmd->add_flag("--json", json, "machine-readable output");
    cmd->callback([&] {
      if (json) return s.emit(views::project(s.repo()));
      printProject(s.out(), workflow::projectState(s.repo()));
    });
  }
  {
    auto* cmd = app.add_subcommand("releases", "list releases");
    auto& json = s.hold<bool>(false);
    cmd->add_flag("--json", json, "machine-readable output");
    cmd->callback([&] {
      if (json) return s.emit(views::releases(s.repo()));
      for (const auto& r : s.repo().releases()) {
        s.out() << r.tag << " " << r.phase.str() << " " << shortId(r.commit.str()) << " " << r.timestamp.str()
                << " [gate " << r.gate.round.str() << "]\n";
      }
    });
  }
  {
    auto* cmd = app.add_subcommand("audit", "check every gated commit and release against its round");
    auto& json = s.hold<bool>(false);
    cmd->add_flag("--json", json, "machine-readable output");
    cmd->callback([&] {
      const auto report = workflow::auditGates(s.repo());
      if (json) {
        s.emit(workflow::toJson(report));
      } else {
        s.out() << "checked " << report.commitsChecked << " commits, " << report.releasesChecked << " releases, "
                << report.gatesChecked << " gates\n";
        for (const auto& f : report.findings) s.out() << "  " << f.subject << ": " << f.problem << "\n";
      }
      if (!report.ok()) {
        throw Error(Errc::GateNotPassed, std::to_string(report.findings.size()) + " gate finding(s)");
      }
    });
  }
  {
    auto* cmd = app.add_subcommand("verify", "re-hash every stored object");
    cmd->callback([&] {
      s.repo().objects().verifyAll();
      s.out() << s.repo().objects().list().size() << " objects verified\n";
    });
  }

  // ----- replay / serve -----
  {
    auto* cmd = app.add_subcommand("replay", "build a repository from a JSON event script");
    auto& script = s.hold<std::string>();
    auto& dest = s.hold<std::optional<std::string>>();
    cmd->add_option("script", script, "script file")->required();
    cmd->add_option("--dest", dest, "directory to build in (default: current)");
    cmd->callback([&] {
      const fs::path target = dest ? s.resolve(*dest) : s.targetRoot();
      auto repo = replayFile(s.resolve(script), target);
      const auto state = workflow::projectState(repo);
      s.out() << "replayed " << script << " into " << repo.root().string() << " (" << state.releases.size()
              << " releases)\n";
    });
  }
  {
    auto* cmd = app.add_subcommand("serve", "serve the HTTP API");
    auto& port = s.hold<int>(8080);
    auto& host = s.hold<std::string>("127.0.0.1");
    auto& ui = s.hold<std::optional<std::string>>();
    cmd->add_option("--port", port, "TCP port (0 picks a free one)");
    cmd->add_option("--host", host, "bind address");
    cmd->add_option("--ui", ui, "directory of web UI assets served under /ui");
    cmd->callback([&] {
      service::Options options;
      if (ui) options.uiDir = s.resolve(*ui);
      service::Server server(s.repo().root(), options);
      const int bound = server.bind(host, port);
      s.out() << "listening on http://" << host << ":" << bound << "\n" << std::flush;
      server.run();
    });
  }
}

}  // namespace

int runCli(const std::vector<std::string>& args, const CliEnv& env, std::ostream& out, std::ostream& err) {
  CLI::App app{"curator: consensus-gated version control for research artefacts", "curator"};
  app.require_subcommand(1);
  app.fallthrough(false);
  Session session(env, out);
  buildCommands(app, session);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const ScriptFailure& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const Json::exception& e) {
    err << "error: " << to_string(Errc::InvalidArgument) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << to_string(Errc::IoError) << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}

CliEnv processEnv() {
  CliEnv env;
  if (const char* dir = std::getenv("CURATOR_DIR"); dir && *dir) env.curatorDir = fs::path(dir);
  if (const char* who = std::getenv("CURATOR_AUTHOR"); who && *who) env.author = who;
  env.cwd = fs::current_path();
  return env;
}

}  // namespace curator::cli
