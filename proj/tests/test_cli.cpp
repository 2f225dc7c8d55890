#include <cstdlib>
#include <fstream>
#include <sstream>

#include "curator/cli.hpp"
#include "curator/views.hpp"
#include "support.hpp"

using namespace curator;
using curator::test::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::filesystem::path& cwd, std::vector<std::string> args, std::optional<std::string> author = "R0") {
  std::ostringstream out, err;
  const int code = cli::runCli(args, cli::CliEnv{std::nullopt, std::move(author), cwd}, out, err);
  return {code, out.str(), err.str()};
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

/// Two-member UC1-layout repository driven entirely through the CLI.
void initTeam(const std::filesystem::path& dir) {
  const auto r = run(dir, {"init", "--project", "demo", "--layout", "1,2,3+4,5", "--researcher", "R0:1:Junior",
                           "R1:0:Senior"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
}

void acceptRound(const std::filesystem::path& dir, const std::string& id) {
  REQUIRE(run(dir, {"round", "vote", id, "--pref", "0.8"}, "R0").code == 0);
  REQUIRE(run(dir, {"round", "vote", id, "--pref", "0.7"}, "R1").code == 0);
  REQUIRE(run(dir, {"round", "close", id}).code == 0);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("init prints the repository path") {
    TempDir dir;
    const auto r = run(dir.path(), {"init"});
    CHECK(r.code == 0);
    CHECK(r.out.find(dir.path().string()) != std::string::npos);
    CHECK(std::filesystem::exists(dir / ".curator/config.json"));
    CHECK(run(dir.path(), {"init"}).err.rfind("error: AlreadyInitialized: ", 0) == 0);
  }

  TEST_CASE("usage errors exit 2 with a synopsis") {
    TempDir dir;
    auto r = run(dir.path(), {});
    CHECK(r.code == 2);
    CHECK(r.err.find("Usage") != std::string::npos);
    r = run(dir.path(), {"frobnicate"});
    CHECK(r.code == 2);
    r = run(dir.path(), {"commit"});
    CHECK(r.code == 2);
    r = run(dir.path(), {"round", "vote", "r1", "--pref", "high"});
    CHECK(r.code == 2);
    CHECK(run(dir.path(), {"--help"}).code == 0);
  }

  TEST_CASE("domain errors exit 1 with one error line") {
    TempDir dir;
    CHECK(run(dir.path(), {"log"}).err == run(dir.path(), {"log"}).err);
    auto r = run(dir.path(), {"stats"});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error: NotARepository: ", 0) == 0);
    initTeam(dir.path());
    REQUIRE(run(dir.path(), {"round", "open", "CYCLE_CLOSE"}).code == 0);
    r = run(dir.path(), {"round", "vote", "r1", "--pref", "1.5"});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error: PrefOutOfRange: ", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    r = run(dir.path(), {"round", "vote", "r1", "--pref", "0.5"}, std::nullopt);
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error: MissingAuthor: ", 0) == 0);
    r = run(dir.path(), {"round", "close", "r1"});
    CHECK(r.err.rfind("error: QuorumNotMet: ", 0) == 0);
    r = run(dir.path(), {"commit", "-m", "nothing"});
    CHECK(r.err.rfind("error: NothingToCommit: ", 0) == 0);
    r = run(dir.path(), {"rm", "missing"});
    CHECK(r.err.rfind("error: PathNotFound: ", 0) == 0);
    r = run(dir.path(), {"drop-branch", "main"});
    CHECK(r.err.rfind("error: ProtectedBranch: ", 0) == 0);
    r = run(dir.path(), {"round", "show", "r42"});
    CHECK(r.err.rfind("error: UnknownRound: ", 0) == 0);
  }

  TEST_CASE("a full cycle through the CLI") {
    TempDir dir;
    initTeam(dir.path());
    write(dir / "rq.txt", "Is it possible to trace political graffiti?");
    write(dir / "why.txt", "Definition agreed in the first meeting.");
    auto r = run(dir.path(), {"add", "problem/rq", "rq.txt", "--text", "--meta", "kind=research-question"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = run(dir.path(), {"commit", "-m", "research question"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = run(dir.path(), {"tag", "problem/rq", "--narrative", "why.txt"}, "R1");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = run(dir.path(), {"show", "problem/rq", "--json"});
    REQUIRE(r.code == 0);
    const Json shown = Json::parse(r.out);
    CHECK(shown["narratives"].size() == 1);
    CHECK(shown["record"]["metaData"].size() == 1);

    REQUIRE(run(dir.path(), {"round", "open", "cycle_close"}).code == 0);
    acceptRound(dir.path(), "r1");
    r = run(dir.path(), {"cycle", "close", "--round", "r1"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = run(dir.path(), {"project", "--json"});
    CHECK(Json::parse(r.out)["currentCycle"] == 2);

    REQUIRE(run(dir.path(), {"round", "open", "PHASE_ADVANCE", "--strategy", "EXPERT_WEIGHTED", "--dis", "off"}).code ==
            0);
    acceptRound(dir.path(), "r2");
    r = run(dir.path(), {"phase", "advance", "--round", "r2"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(Json::parse(run(dir.path(), {"project", "--json"}).out)["currentPhase"] == "G2");
    r = run(dir.path(), {"round", "show", "r2", "--json"});
    CHECK(Json::parse(r.out)["config"]["strategy"] == "EXPERT_WEIGHTED");
    CHECK(Json::parse(r.out)["config"]["disThreshold"].is_null());

    r = run(dir.path(), {"log", "--phase", "G1", "--json"});
    const Json log = Json::parse(r.out);
    CHECK(log.size() == 5);
    CHECK(log[0]["kind"] == "phase-advance");
    CHECK(run(dir.path(), {"audit"}).code == 0);
    CHECK(run(dir.path(), {"verify"}).code == 0);
  }

  TEST_CASE("branch, merge and blob add") {
    TempDir dir;
    initTeam(dir.path());
    write(dir / "photo.jpg", std::string("\xff\xd8\xff\xe0", 4));
    REQUIRE(run(dir.path(), {"add", "g/0001", "photo.jpg"}).code == 0);
    REQUIRE(run(dir.path(), {"commit", "-m", "photo"}).code == 0);
    REQUIRE(run(dir.path(), {"branch", "side"}).code == 0);
    REQUIRE(run(dir.path(), {"switch", "side"}).code == 0);
    write(dir / "notes.txt", "notes");
    REQUIRE(run(dir.path(), {"add", "notes", "notes.txt", "--text"}).code == 0);
    REQUIRE(run(dir.path(), {"commit", "-m", "notes"}).code == 0);
    REQUIRE(run(dir.path(), {"switch", "main"}).code == 0);
    REQUIRE(run(dir.path(), {"round", "open", "MERGE"}).code == 0);
    acceptRound(dir.path(), "r1");
    auto r = run(dir.path(), {"merge", "side", "--round", "r1"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const Json shown = Json::parse(run(dir.path(), {"show", "g/0001", "--json"}).out);
    CHECK(shown["record"]["content"]["mediaType"] == "image/jpeg");
    CHECK(shown["record"]["content"]["size"] == 4);
    r = run(dir.path(), {"branch"});
    CHECK(r.out.find("side") != std::string::npos);
    CHECK(Json::parse(run(dir.path(), {"stats", "--json"}).out)["phases"][0]["mergeCount"] == 1);
  }

  TEST_CASE("replay then stats --json matches the stats view byte for byte") {
    TempDir dir;
    auto r = run(dir.path(), {"replay", curator::test::fixture("uc1.json").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    r = run(dir.path(), {"stats", "--json"});
    REQUIRE(r.code == 0);
    CHECK(r.out == views::render(views::stats(Repository::open(dir.path()))));
    const Json stats = Json::parse(r.out);
    CHECK(stats["phases"][0]["narrativeCount"] == 15);
  }

  TEST_CASE("CURATOR_DIR overrides discovery") {
    TempDir dir;
    REQUIRE(run(dir.path(), {"init", "repo"}).code == 0);
    std::ostringstream out, err;
    const int code =
        cli::runCli({"project", "--json"}, cli::CliEnv{dir / "repo", std::nullopt, dir.path()}, out, err);
    CHECK(code == 0);
    CHECK(Json::parse(out.str())["project"] == "repo");
  }

  TEST_CASE("the curator executable honours the exit-code contract") {
    TempDir dir;
    const std::string bin = CURATOR_BINARY;
    const std::string prefix = "cd '" + dir.path().string() + "' && CURATOR_AUTHOR=curator '" + bin + "' ";
    auto status = [](int raw) { return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1; };
    CHECK(status(std::system((prefix + "init > /dev/null").c_str())) == 0);
    CHECK(status(std::system((prefix + "round vote r1 --pref 0.5 2> /dev/null").c_str())) == 1);
    CHECK(status(std::system((prefix + "nonsense 2> /dev/null").c_str())) == 2);
  }
}
