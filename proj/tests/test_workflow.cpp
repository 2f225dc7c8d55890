#include "curator/replay.hpp"
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

TEST_SUITE("workflow") {
  TEST_CASE("phase layouts") {
    CHECK(workflow::defaultPhaseConfig().phases.size() == 5);
    const auto uc1 = workflow::parsePhaseLayout("1,2,3+4,5");
    REQUIRE(uc1.phases.size() == 4);
    CHECK(workflow::phaseIdFor(uc1.phases[2]) == PhaseId("G3-4"));
    CHECK(workflow::parsePhaseLayout("problem_statement,data_acquisition,data_management+analysis,reporting")
              .phases == uc1.phases);
    CHECK_ERRC(workflow::parsePhaseLayout("1,2,3,4"), Errc::InvalidPhaseConfig);
    CHECK_ERRC(workflow::parsePhaseLayout("1,2,2,3,4,5"), Errc::InvalidPhaseConfig);
    CHECK_ERRC(workflow::parsePhaseLayout("1,3+2,4,5"), Errc::InvalidPhaseConfig);
    CHECK_ERRC(workflow::parsePhaseLayout("1+3,2,4,5"), Errc::InvalidPhaseConfig);
  }

  TEST_CASE("createProject") {
    TempDir dir;
    auto repo = makeProject(dir / "uc1");
    const auto s = workflow::projectState(repo);
    CHECK(s.phases.size() == 4);
    CHECK(s.phase() == PhaseId("G1"));
    CHECK(s.currentCycle == 1);
    auto plain = workflow::createProject(workflow::defaultPhaseConfig(), ProjectId("p"), {{R0, "R0", 0}},
                                         consensus::GateConfig{}, dir / "plain", R0, at(0));
    CHECK(workflow::projectState(plain).phases.size() == 5);
    CHECK_ERRC(workflow::createProject(workflow::defaultPhaseConfig(), ProjectId("p"), {}, consensus::GateConfig{},
                                       dir / "empty", R0, at(0)),
               Errc::InvalidArgument);
    CHECK_ERRC(workflow::createProject(workflow::defaultPhaseConfig(), ProjectId("p"), {{R0, "a", 0}, {R0, "b", 1}},
                                       consensus::GateConfig{}, dir / "dup", R0, at(0)),
               Errc::InvalidArgument);
  }

  TEST_CASE("fresh project statistics") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const auto stats = workflow::computeStats(repo);
    REQUIRE(stats.phases.size() == 4);
    CHECK(stats.of(PhaseId("G1")).cycleCount == 1);
    CHECK(stats.of(PhaseId("G1")).commitCount == 0);
    CHECK(stats.of(PhaseId("G2")).cycleCount == 0);
    CHECK(stats.releases.empty());
  }

  TEST_CASE("closing cycles is gated") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    repo.stageAdd(textArtefact(repo, "RQ", at(1)), "rq");
    repo.commit("rq", R0, std::nullopt, at(1));

    const auto reject = decidedRound(repo, SubjectKind::cycle_close, "head", 0.9, 0.2, at(2));
    CHECK_ERRC(workflow::closeCycle(repo, reject.id, R0, at(3)), Errc::GateNotPassed);
    CHECK(workflow::projectState(repo).currentCycle == 1);

    const auto wrong = decidedRound(repo, SubjectKind::phase_advance, "head", 0.9, 0.9, at(4));
    CHECK_ERRC(workflow::closeCycle(repo, wrong.id, R0, at(5)), Errc::WrongSubjectKind);

    const auto ok = decidedRound(repo, SubjectKind::cycle_close, "head", 0.8, 0.7, at(6));
    CHECK(workflow::closeCycle(repo, ok.id, R0, at(7)).currentCycle == 2);
    const Commit closing = repo.log(PhaseId("G1"), "main").front();
    CHECK(closing.kind == CommitKind::cycle_close);
    CHECK(closing.cycle == 1);

    // The round targeted the previous head, so it cannot close cycle 2.
    CHECK_ERRC(workflow::closeCycle(repo, ok.id, R0, at(8)), Errc::GateNotPassed);
  }

  TEST_CASE("advancing phases, with and without a release") {
    TempDir dir;
    auto repo = makeProject(dir.path(), "1+2+3+4,5");
    repo.stageAdd(textArtefact(repo, "data", at(1)), "data");
    repo.commit("data", R0, std::nullopt, at(1));
    const auto adv = decidedRound(repo, SubjectKind::release, "head", 0.9, 0.9, at(2));
    const auto s = workflow::advancePhase(repo, adv.id, std::string("dataset-v1"), R0, at(3));
    CHECK(s.phase() == PhaseId("G5"));
    CHECK(s.currentCycle == 1);
    REQUIRE(s.releases.size() == 1);
    CHECK(s.releases[0].tag == "dataset-v1");
    CHECK(repo.head().phase == PhaseId("G5"));
    CHECK(repo.headSnapshot().entries.empty());

    repo.stageAdd(textArtefact(repo, "report", at(4)), "report");
    repo.commit("report", R0, std::nullopt, at(4));
    const auto last = decidedRound(repo, SubjectKind::phase_advance, "head", 0.9, 0.9, at(5));
    CHECK_ERRC(workflow::advancePhase(repo, last.id, std::nullopt, R0, at(6)), Errc::LastPhase);
    const auto rel = decidedRound(repo, SubjectKind::release, "head", 0.9, 0.9, at(7));
    const auto final = workflow::advancePhase(repo, rel.id, std::string("final"), R0, at(8));
    CHECK(final.phase() == PhaseId("G5"));
    CHECK(final.releases.size() == 2);
  }

  TEST_CASE("phase advance needs the matching round kind") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const auto cc = decidedRound(repo, SubjectKind::cycle_close, "head", 0.9, 0.9, at(1));
    CHECK_ERRC(workflow::advancePhase(repo, cc.id, std::nullopt, R0, at(2)), Errc::WrongSubjectKind);
    const auto adv = decidedRound(repo, SubjectKind::phase_advance, "head", 0.9, 0.9, at(3));
    CHECK_ERRC(workflow::advancePhase(repo, adv.id, std::string("tag"), R0, at(4)), Errc::WrongSubjectKind);
    CHECK(workflow::advancePhase(repo, adv.id, std::nullopt, R0, at(5)).phase() == PhaseId("G2"));
  }

  TEST_CASE("curation steps") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const Artefact a = textArtefact(repo, "photo", at(1));
    workflow::CurationInput in{a, {{"area", "docks", MetadataOrigin::manual, R0, at(2)}}, std::nullopt, "g/0001"};
    const auto first = workflow::runCurationStep(repo, in, R0, at(2));
    CHECK(first.added);
    CHECK(first.chainLength == 2);
    CHECK(repo.log(PhaseId("G1"), "main").size() == 2);

    const Artefact current = loadArtefact(repo.objects(), first.version);
    ActionRecord act{idOf(a), first.version, {"k-means", {{"k", "4"}}, {{"silhouette", 0.41}}}, R0, at(3)};
    storeArtefact(repo.objects(), a);
    const ActionId actId = storeAction(repo.objects(), act);
    workflow::CurationInput again{current,
                                  {{"score", "0.41", MetadataOrigin::automatic, std::nullopt, at(4)}},
                                  std::make_pair(Narrative{current.content, "cluster 2 is political", R1, at(4)}, actId),
                                  "g/0001"};
    const auto second = workflow::runCurationStep(repo, again, R0, at(4));
    CHECK_FALSE(second.added);
    const Artefact v = loadArtefact(repo.objects(), second.version);
    CHECK(v.listOfTags.size() == 1);
    CHECK(v.listOfActions.size() == 1);
    CHECK(v.metaData.size() == 2);
    CHECK(repo.headSnapshot().entries.at("g/0001") == second.version);
  }

  TEST_CASE("dropping an unreleased branch lowers branchCount but not commitCount") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    repo.stageAdd(textArtefact(repo, "x", at(1)), "x");
    const Commit base = repo.commit("x", R0, std::nullopt, at(1));
    repo.branch("side", base.id, std::nullopt, R0, at(2));
    const auto before = workflow::computeStats(repo).of(PhaseId("G1"));
    repo.dropBranch("side");
    const auto after = workflow::computeStats(repo).of(PhaseId("G1"));
    CHECK(after.branchCount == before.branchCount - 1);
    CHECK(after.commitCount == before.commitCount);
  }

  TEST_CASE("stats render as an aligned table") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    const auto table = workflow::renderTable(workflow::computeStats(repo));
    CHECK(table.find("G3-4") != std::string::npos);
    CHECK(table.find("cycles") != std::string::npos);
  }

  TEST_CASE("audit passes on gated history and fails on a tampered round") {
    TempDir dir;
    auto repo = makeProject(dir.path());
    repo.stageAdd(textArtefact(repo, "x", at(1)), "x");
    repo.commit("x", R0, std::nullopt, at(1));
    const auto ok = decidedRound(repo, SubjectKind::cycle_close, "head", 0.8, 0.7, at(2));
    workflow::closeCycle(repo, ok.id, R0, at(3));
    auto report = workflow::auditGates(repo);
    CHECK(report.ok());
    CHECK(report.gatesChecked == 1);

    const auto file = dir / (".curator/rounds/" + ok.id.str() + ".json");
    std::string bytes = readFile(file).value();
    const auto pos = bytes.find("\"pref\":0.8");
    REQUIRE(pos != std::string::npos);
    bytes[pos + 9] = '1';  // 0.8 -> 0.1 turns the verdict into REJECT
    writeFileAtomic(file, bytes);
    report = workflow::auditGates(repo);
    CHECK_FALSE(report.ok());
  }

  TEST_CASE("replay reports the failing event") {
    TempDir dir;
    const Json script = {{"roster", {{{"id", "R0"}, {"level", 0}}}},
                         {"events",
                          {{{"op", "round"}, {"as", "r"}, {"kind", "CYCLE_CLOSE"}},
                           {{"op", "vote"}, {"round", "r"}, {"voter", "Z9"}, {"pref", 0.5}}}}};
    try {
      replayScript(script, dir.path());
      FAIL("expected ScriptError");
    } catch (const ScriptFailure& e) {
      CHECK(e.code() == Errc::ScriptError);
      CHECK(e.index() == 1);
      CHECK(e.cause() == Errc::VoterNotInGroup);
    }
  }

  TEST_CASE("empty script yields a fresh repository") {
    TempDir dir;
    auto repo = replayScript(Json::array(), dir.path());
    CHECK(repo.log(PhaseId("G1"), "main").size() == 1);
  }

  TEST_CASE("replay rejects timestamps that go backwards") {
    TempDir dir;
    const Json script = {{"start", "2021-03-01T09:00:00Z"},
                         {"events", {{{"op", "artefact"}, {"as", "a"}, {"text", "x"}, {"at", "2020-01-01T00:00:00Z"}}}}};
    try {
      replayScript(script, dir.path());
      FAIL("expected ScriptError");
    } catch (const ScriptFailure& e) {
      CHECK(e.index() == 0);
      CHECK(e.cause() == Errc::NonMonotonicTimestamp);
    }
  }
}
