#include <fstream>
#include <set>

#include "curator/digest.hpp"
#include "support.hpp"

using namespace curator;
using consensus::SubjectKind;
using curator::test::at;
using curator::test::decidedRound;
using curator::test::makeProject;
using curator::test::R0;
using curator::test::R1;
using curator::test::TempDir;
using curator::test::textArtefact;

namespace {

Commit addAndCommit(Repository& repo, const std::string& path, const std::string& text, int when) {
  repo.stageAdd(textArtefact(repo, text, at(when)), path);
  return repo.commit("add " + path, R0, std::nullopt, at(when));
}

std::set<std::string> paths(const Snapshot& s) {
  std::set<std::string> out;
  for (const auto& [p, id] : s.entries) out.insert(p);
  return out;
}

}  // namespace

TEST_SUITE("repository") {
  TEST_CASE("init creates the layout with one root commit") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const auto meta = dir / ".curator";
    for (const char* f : {"config.json", "HEAD", "STAGE.json", "objects", "refs/phases/G1/branches/main", "rounds"}) {
      CHECK_MESSAGE(std::filesystem::exists(meta / f), f);
    }
    CHECK(readFile(meta / "HEAD").value() == "G1/main\n");
    const auto log = repo.log(PhaseId("G1"), "main");
    REQUIRE(log.size() == 1);
    CHECK(log[0].parents.empty());
    CHECK(log[0].kind == CommitKind::root);
    CHECK(repo.loadSnapshot(log[0].snapshot).entries.empty());
    CHECK(readFile(meta / "refs/phases/G1/branches/main").value() == log[0].id.str() + "\n");
    CHECK_ERRC(makeProject(dir.path()), Errc::AlreadyInitialized);
  }

  TEST_CASE("open and discover") {
    TempDir dir;
    makeProject(dir.path());
    std::filesystem::create_directories(dir / "a/b");
    CHECK(Repository::discover(dir / "a/b").value() == dir.path());
    CHECK_ERRC(Repository::open(dir / "a"), Errc::NotARepository);
    CHECK(Repository::open(dir.path()).config().project == ProjectId("demo"));
  }

  TEST_CASE("stage, commit and log") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const Artefact a = textArtefact(repo, "RQ v1", at(1));
    auto staged = repo.stageAdd(a, "rq/v1");
    CHECK(staged.size() == 1);
    CHECK(repo.stageAdd(a, "rq/v1") == staged);
    CHECK_ERRC(repo.stageAdd(textArtefact(repo, "other", at(1)), "rq/v1"), Errc::PathConflict);
    CHECK_ERRC(repo.stageAdd(a, "../escape"), Errc::InvalidArgument);

    const Commit c = repo.commit("first", R0, std::nullopt, at(2));
    const auto log = repo.log(PhaseId("G1"), "main");
    REQUIRE(log.size() == 2);
    CHECK(log[0].id == c.id);
    CHECK(c.parents == std::vector<CommitId>{log[1].id});
    CHECK(repo.staged().empty());
    CHECK(repo.contains(idOf(a), c.id));
    CHECK_FALSE(repo.contains(idOf(textArtefact(repo, "never", at(1))), c.id));
    CHECK_ERRC(repo.contains(idOf(a), CommitId(std::string(64, 'e'))), Errc::UnknownCommit);
    CHECK_ERRC(repo.commit("empty", R0, std::nullopt, at(3)), Errc::NothingToCommit);
    CHECK_ERRC(repo.log(PhaseId("G1"), "nope"), Errc::UnknownBranch);
  }

  TEST_CASE("commits need roster authors and monotonic time") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    repo.stageAdd(textArtefact(repo, "x", at(1)), "x");
    CHECK_ERRC(repo.commit("by stranger", ResearcherId("Z9"), std::nullopt, at(2)), Errc::UnknownResearcher);
    CHECK_ERRC(repo.commit("in the past", R0, std::nullopt, Timestamp::parse("2020-01-01T00:00:00Z")),
               Errc::NonMonotonicTimestamp);
  }

  TEST_CASE("removal keeps history") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const Commit c1 = addAndCommit(repo, "rq/v1", "RQ", 1);
    const ArtefactId id = repo.headSnapshot().entries.at("rq/v1");
    addAndCommit(repo, "other", "O", 2);
    CHECK_ERRC(repo.stageRemove("missing"), Errc::PathNotFound);
    repo.stageRemove("rq/v1");
    const Commit c3 = repo.commit("drop rq", R0, std::nullopt, at(3));
    CHECK_FALSE(repo.headSnapshot().entries.count("rq/v1"));
    CHECK(repo.contains(id, c1.id));
    CHECK_FALSE(repo.contains(id, c3.id));
    CHECK(repo.objects().contains(id.str()));
  }

  TEST_CASE("consensus-only commits are allowed with an accepted round") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    addAndCommit(repo, "a", "A", 1);
    const std::string a = repo.headSnapshot().entries.at("a").str();
    const auto ok = decidedRound(repo, SubjectKind::artefact_validation, a, 0.9, 0.8, at(2));
    const Commit c = repo.commit("validated", R0, ok.id, at(3));
    REQUIRE(c.gate);
    CHECK(c.gate->round == ok.id);
    CHECK(c.gate->digest == sha256Hex(readFile(dir / (".curator/rounds/" + ok.id.str() + ".json")).value()));
    const auto bad = decidedRound(repo, SubjectKind::artefact_validation, a, 0.9, 0.1, at(4));
    CHECK_ERRC(repo.commit("rejected", R0, bad.id, at(5)), Errc::GateNotPassed);
    const auto open = repo.openRound({SubjectKind::artefact_validation, a}, {R0, R1}, std::nullopt, at(6));
    CHECK_ERRC(repo.commit("still open", R0, open.id, at(7)), Errc::GateNotPassed);
  }

  TEST_CASE("rounds are persisted with sequential ids") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const auto head = repo.resolveTarget("head");
    const auto a = repo.openRound({SubjectKind::cycle_close, head}, {R0, R1}, std::nullopt, at(1));
    const auto b = repo.openRound({SubjectKind::cycle_close, head}, {R0, R1}, std::nullopt, at(2));
    CHECK(a.id == RoundId("r1"));
    CHECK(b.id == RoundId("r2"));
    CHECK(repo.rounds().size() == 2);
    CHECK_ERRC(repo.openRound({SubjectKind::cycle_close, head}, {}, std::nullopt, at(3)), Errc::EmptyGroup);
    CHECK_ERRC(repo.openRound({SubjectKind::cycle_close, head}, {ResearcherId("Z9")}, std::nullopt, at(3)),
               Errc::UnknownResearcher);
    CHECK_ERRC(repo.openRound({SubjectKind::cycle_close, std::string(64, 'f')}, {R0}, std::nullopt, at(3)),
               Errc::UnknownSubject);
    CHECK_ERRC(repo.loadRound(RoundId("r99")), Errc::UnknownRound);
    repo.castVote(a.id, {R0, 0.8, std::nullopt, at(4)});
    repo.castVote(a.id, {R1, 0.4, std::nullopt, at(4)});
    const auto closed = repo.closeRound(a.id, at(5));
    CHECK(closed.verdict == consensus::Verdict::accept);
    CHECK(repo.closeRound(a.id, at(6)) == closed);
    CHECK_ERRC(repo.castVote(a.id, {R0, 0.1, std::nullopt, at(7)}), Errc::RoundClosed);
  }

  TEST_CASE("branches with and without a path filter") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    addAndCommit(repo, "graffiti/0001", "photo 1", 1);
    const Commit base = addAndCommit(repo, "notes/plan", "plan", 2);
    const Branch manual = repo.branch("manual-classification", base.id, std::nullopt, R0, at(3));
    const Branch ml = repo.branch("ml-classification", base.id, std::string("graffiti/"), R0, at(4));
    CHECK(repo.loadCommit(manual.head).parents == std::vector<CommitId>{base.id});
    CHECK(repo.loadCommit(ml.head).parents == std::vector<CommitId>{base.id});
    CHECK(paths(repo.snapshotAt(manual.head)) == std::set<std::string>{"graffiti/0001", "notes/plan"});
    CHECK(paths(repo.snapshotAt(ml.head)) == std::set<std::string>{"graffiti/0001"});
    CHECK(repo.branches(PhaseId("G1")).size() == 3);
    CHECK(repo.head().branch == "main");
    CHECK_ERRC(repo.branch("manual-classification", base.id, std::nullopt, R0, at(5)), Errc::DuplicateBranch);
    CHECK_ERRC(repo.branch("x", CommitId(std::string(64, 'd')), std::nullopt, R0, at(5)), Errc::UnknownCommit);
    CHECK_ERRC(repo.switchBranch("nope"), Errc::UnknownBranch);
  }

  TEST_CASE("merges need a resolver for differing paths and an accepted MERGE round") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const Commit base = addAndCommit(repo, "shared", "v0", 1);
    repo.branch("side", base.id, std::nullopt, R0, at(2));
    repo.switchBranch("side");
    addAndCommit(repo, "side-only", "S", 3);
    repo.stageAdd(textArtefact(repo, "v-side", at(4)), "shared");
    repo.commit("side edit", R0, std::nullopt, at(4));
    repo.switchBranch("main");
    addAndCommit(repo, "main-only", "M", 5);

    const auto round = decidedRound(repo, SubjectKind::merge, "head", 0.9, 0.8, at(6));
    try {
      repo.merge("main", "side", {}, R0, round.id, at(7));
      FAIL("expected UnresolvedConflict");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnresolvedConflict);
      CHECK(std::string(e.what()).find("shared") != std::string::npos);
    }
    const auto sideShared = repo.snapshotAt(repo.branchHead(PhaseId("G1"), "side").value()).entries.at("shared");
    const auto rejected = decidedRound(repo, SubjectKind::merge, "head", 0.9, 0.1, at(8));
    CHECK_ERRC(repo.merge("main", "side", {{"shared", sideShared}}, R0, rejected.id, at(9)), Errc::GateNotPassed);
    const auto wrongKind = decidedRound(repo, SubjectKind::cycle_close, "head", 0.9, 0.9, at(10));
    CHECK_ERRC(repo.merge("main", "side", {{"shared", sideShared}}, R0, wrongKind.id, at(11)),
               Errc::WrongSubjectKind);

    const Commit m = repo.merge("main", "side", {{"shared", sideShared}}, R0, round.id, at(12));
    CHECK(m.kind == CommitKind::merge);
    CHECK(m.parents.size() == 2);
    CHECK(paths(repo.loadSnapshot(m.snapshot)) == std::set<std::string>{"main-only", "shared", "side-only"});
    CHECK(repo.loadSnapshot(m.snapshot).entries.at("shared") == sideShared);
    CHECK(repo.log(PhaseId("G1"), "main").front().parents.size() == 2);
  }

  TEST_CASE("merge on disjoint paths commutes") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const Commit base = addAndCommit(repo, "base", "b", 1);
    repo.branch("a", base.id, std::nullopt, R0, at(2));
    repo.branch("b", base.id, std::nullopt, R0, at(2));
    repo.switchBranch("a");
    addAndCommit(repo, "only-a", "A", 3);
    repo.switchBranch("b");
    addAndCommit(repo, "only-b", "B", 4);
    repo.branch("a2", repo.branchHead(PhaseId("G1"), "a"), std::nullopt, R0, at(5));
    repo.branch("b2", repo.branchHead(PhaseId("G1"), "b"), std::nullopt, R0, at(5));
    const auto r1 = decidedRound(repo, SubjectKind::merge, repo.branchHead(PhaseId("G1"), "a")->str(), 1, 1, at(6));
    const Commit ab = repo.merge("a", "b", {}, R0, r1.id, at(7));
    const auto r2 = decidedRound(repo, SubjectKind::merge, repo.branchHead(PhaseId("G1"), "b2")->str(), 1, 1, at(8));
    const Commit ba = repo.merge("b2", "a2", {}, R0, r2.id, at(9));
    CHECK(repo.loadSnapshot(ab.snapshot) == repo.loadSnapshot(ba.snapshot));
  }

  TEST_CASE("dropBranch") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const Commit base = addAndCommit(repo, "a", "A", 1);
    repo.branch("side", base.id, std::nullopt, R0, at(2));
    repo.switchBranch("side");
    addAndCommit(repo, "b", "B", 3);
    repo.switchBranch("main");
    const auto round = decidedRound(repo, SubjectKind::merge, "head", 1, 1, at(4));
    const Commit m = repo.merge("main", "side", {}, R0, round.id, at(5));
    CHECK_ERRC(repo.dropBranch("main"), Errc::ProtectedBranch);
    CHECK_ERRC(repo.dropBranch("nope"), Errc::UnknownBranch);
    repo.switchBranch("side");
    CHECK_ERRC(repo.dropBranch("side"), Errc::ProtectedBranch);
    repo.switchBranch("main");
    repo.dropBranch("side");
    CHECK_FALSE(repo.branchHead(PhaseId("G1"), "side"));
    CHECK(repo.loadCommit(m.id).parents.size() == 2);
  }

  TEST_CASE("releases") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const Commit base = addAndCommit(repo, "data", "D", 1);
    repo.branch("kept", base.id, std::nullopt, R0, at(2));
    repo.switchBranch("kept");
    const CommitId tip = *repo.branchHead(PhaseId("G1"), "kept");
    const auto bad = decidedRound(repo, SubjectKind::release, "head", 0.2, 0.2, at(3));
    CHECK_ERRC(repo.release("v1", bad.id, at(4)), Errc::GateNotPassed);
    const auto good = decidedRound(repo, SubjectKind::release, "head", 0.9, 0.9, at(5));
    const Release rel = repo.release("gamma1-v1", good.id, at(6));
    CHECK(rel.commit == tip);
    REQUIRE(repo.releases().size() == 1);
    CHECK(repo.loadRelease("gamma1-v1").commit == tip);
    CHECK_ERRC(repo.release("gamma1-v1", good.id, at(7)), Errc::DuplicateTag);
    CHECK_ERRC(repo.loadRelease("none"), Errc::UnknownRelease);
    repo.switchBranch("main");
    CHECK_ERRC(repo.dropBranch("kept"), Errc::ProtectedBranch);
    CHECK_ERRC(repo.dropStage(PhaseId("G1")), Errc::PhaseHasReleases);
    addAndCommit(repo, "more", "M", 8);
    CHECK_ERRC(repo.release("stale", good.id, at(9)), Errc::GateNotPassed);
  }

  TEST_CASE("dropStage keeps the head collection as staging") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    addAndCommit(repo, "a", "A", 1);
    addAndCommit(repo, "b", "B", 2);
    addAndCommit(repo, "c", "C", 3);
    const Snapshot before = repo.headSnapshot();
    repo.dropStage(PhaseId("G1"));
    CHECK(repo.branches(PhaseId("G1")).empty());
    CHECK(repo.staged().adds == before.entries);
    const Commit again = repo.commit("restart", R0, std::nullopt, at(4));
    CHECK(again.parents.empty());
    CHECK(repo.headSnapshot() == before);
  }

  TEST_CASE("dropStage on a fresh phase leaves empty staging") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    repo.dropStage(PhaseId("G1"));
    CHECK(repo.staged().empty());
    CHECK_ERRC(repo.dropStage(PhaseId("G7")), Errc::UnknownPhase);
  }

  TEST_CASE("tagging creates a successor version at the same path") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    addAndCommit(repo, "graffiti/0001", "photo", 1);
    const auto original = repo.headSnapshot().entries.at("graffiti/0001");
    const Narrative where{DocumentRef::text("photo"), "near the old town cathedral", R1, at(2)};
    const Commit c = repo.tagPath("graffiti/0001", where, std::nullopt, R1, at(2));
    CHECK(c.message == "tag:graffiti/0001");
    const auto tagged = repo.headSnapshot().entries.at("graffiti/0001");
    CHECK(tagged != original);
    CHECK(loadArtefact(repo.objects(), tagged).predecessor == original);
    repo.tagPath("graffiti/0001", {DocumentRef::text("photo"), "second tag", R0, at(3)}, std::nullopt, R0, at(3));
    CHECK(versionChain(repo.objects(), repo.headSnapshot().entries.at("graffiti/0001")).size() == 3);
    CHECK_ERRC(repo.tagPath("missing", where, std::nullopt, R1, at(4)), Errc::PathNotFound);
  }

  TEST_CASE("clone reproduces refs, releases and rounds and verifies objects") {
    TempDir dir;
    auto repo = makeProject(dir / "src");
    addAndCommit(repo, "a", "A", 1);
    addAndCommit(repo, "b", "B", 2);
    addAndCommit(repo, "c", "C", 3);
    const auto good = decidedRound(repo, SubjectKind::release, "head", 0.9, 0.9, at(4));
    const Release rel = repo.release("v1", good.id, at(5));

    auto copy = Repository::clone((dir / "src").string(), dir / "dst");
    CHECK(copy.loadRelease("v1").commit == rel.commit);
    CHECK(copy.log(PhaseId("G1"), "main").size() == repo.log(PhaseId("G1"), "main").size());
    CHECK(copy.objects().list() == repo.objects().list());
    CHECK(copy.loadRound(good.id) == repo.loadRound(good.id));

    auto viaUrl = Repository::clone("file://" + (dir / "src").string(), dir / "dst2");
    CHECK(viaUrl.head().commit == repo.head().commit);
    CHECK_ERRC(Repository::clone((dir / "nothing").string(), dir / "dst3"), Errc::SourceUnavailable);
    CHECK_ERRC(Repository::clone((dir / "src").string(), dir / "dst"), Errc::AlreadyInitialized);
  }

  TEST_CASE("clone rejects a corrupted object") {
    TempDir dir;
    auto repo = makeProject(dir / "src");
    addAndCommit(repo, "a", "A", 1);
    const auto victim = repo.objects().list().front();
    const auto file = dir / ("src/.curator/objects/" + victim.substr(0, 2) + "/" + victim);
    std::filesystem::permissions(file, std::filesystem::perms::owner_write, std::filesystem::perm_options::add);
    {
      std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
      char ch = 0;
      f.get(ch);
      f.seekp(0);
      f.put(static_cast<char>(ch ^ 0x01));
    }
    CHECK_ERRC(Repository::clone((dir / "src").string(), dir / "dst"), Errc::CorruptObject);
  }

  TEST_CASE("a second writer fails fast with LockHeld") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    auto other = Repository::open(dir.path());
    auto guard = repo.lock();
    CHECK_ERRC(other.stageAdd(textArtefact(other, "x", at(1)), "x"), Errc::LockHeld);
    repo.stageAdd(textArtefact(repo, "y", at(1)), "y");
  }
}
