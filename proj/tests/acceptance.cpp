// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "curator/consensus.hpp"
#include "curator/replay.hpp"
#include "curator/views.hpp"
#include "curator/workflow.hpp"
#include "oracles.hpp"

using namespace curator;
using namespace curator::consensus;
namespace fs = std::filesystem;

namespace {

class Scratch {
 public:
  Scratch() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("curator-acceptance-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path operator/(const std::string& child) const { return path_ / child; }

 private:
  fs::path path_;
};

const Timestamp kEpoch = Timestamp::parse("2021-03-01T09:00:00Z");

std::vector<ResearcherId> group(std::size_t n) {
  std::vector<ResearcherId> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back("u" + std::to_string(i));
  return out;
}

std::vector<PreferenceBallot> ballots(const std::vector<double>& prefs) {
  std::vector<PreferenceBallot> out;
  const auto g = group(prefs.size());
  for (std::size_t i = 0; i < prefs.size(); ++i) out.push_back({g[i], prefs[i], std::nullopt, kEpoch});
  return out;
}

double disOf(const std::vector<double>& prefs) { return dis(ballots(prefs), group(prefs.size())); }
double gprefOf(const std::vector<double>& prefs) { return gpref(ballots(prefs), group(prefs.size())); }

double scoreOf(const std::vector<double>& prefs, Strategy s) {
  std::vector<Member> members;
  for (const auto& id : group(prefs.size())) members.push_back({id, 0});
  GateConfig c;
  c.strategy = s;
  VoteRound r = openRound(RoundId("r1"), {SubjectKind::artefact_validation, "x"}, PhaseId("G1"), members, c, kEpoch);
  for (std::size_t i = 0; i < prefs.size(); ++i) r = castVote(r, {members[i].id, prefs[i], std::nullopt, kEpoch});
  return aggregate(r).score;
}

fs::path uc1() { return fs::path(CURATOR_FIXTURES_DIR) / "uc1.json"; }

std::string statsBytes(const Repository& repo) { return views::render(views::stats(repo)); }

// Each check returns an empty string on success or a description of the
// first mismatch.
using Check = std::function<std::string()>;

std::string consensusExactness() {
  std::ostringstream why;
  if (std::fabs(disOf({1.0, 0.5, 0.0}) - 2.0 / 3.0) > 1e-12) why << "dis{1,.5,0}=" << disOf({1.0, 0.5, 0.0}) << " ";
  if (std::fabs(disOf({0.8, 0.4}) - 0.4) > 1e-12) why << "dis{.8,.4}=" << disOf({0.8, 0.4}) << " ";
  if (std::fabs(gprefOf({0.8, 0.4}) - 0.6) > 1e-12) why << "gpref{.8,.4}=" << gprefOf({0.8, 0.4}) << " ";
  return why.str();
}

std::string oracleEquivalence() {
  std::mt19937_64 rng(20210301);
  std::uniform_int_distribution<int> size(2, 6);
  std::uniform_real_distribution<double> pref(0.0, 1.0);
  for (int sample = 0; sample < 1000; ++sample) {
    std::vector<double> p(static_cast<std::size_t>(size(rng)));
    for (double& x : p) x = pref(rng);
    const double got = disOf(p);
    const double want = oracle::disOrdered(p);
    if (std::fabs(got - want) > 1e-9) return "sample " + std::to_string(sample) + " dis mismatch";
    if (scoreOf(p, Strategy::least_misery) > scoreOf(p, Strategy::average) + 1e-12) {
      return "sample " + std::to_string(sample) + " least-misery above average";
    }
  }
  return {};
}

std::string uc1Replay() {
  Scratch dir;
  const auto repo = replayFile(uc1(), dir / "repo");
  const auto stats = workflow::computeStats(repo);
  std::ostringstream why;
  auto expect = [&](const char* what, std::size_t got, std::size_t want) {
    if (got != want) why << what << "=" << got << " (want " << want << ") ";
  };
  const auto& g1 = stats.of(PhaseId("G1"));
  const auto& g2 = stats.of(PhaseId("G2"));
  const auto& g34 = stats.of(PhaseId("G3-4"));
  const auto& g5 = stats.of(PhaseId("G5"));
  expect("G1.cycles", g1.cycleCount, 2);
  expect("G1.narratives", g1.narrativeCount, 15);
  expect("G1.versions", g1.contentVersions, 4);
  expect("G1.branches", g1.branchCount, 0);
  expect("G2.cycles", g2.cycleCount, 3);
  expect("G2.largestAddition", g2.largestAddition, 1050);
  expect("G3-4.cycles", g34.cycleCount, 3);
  expect("G3-4.branches", g34.branchCount, 2);
  expect("G3-4.merges", g34.mergeCount, 2);
  expect("G3-4.artefacts", g34.artefactCount, 15);
  expect("G5.cycles", g5.cycleCount, 2);
  expect("releases", stats.releases.size(), 2);
  if (stats.releases.size() == 2) {
    expect("release[G2].artefacts", stats.releases[0].artefactCount, 546);
    expect("release[G5].artefacts", stats.releases[1].artefactCount, 3);
  }
  for (const auto& c : repo.log(PhaseId("G3-4"), "main")) {
    if (c.kind != CommitKind::merge) continue;
    if (!c.gate || repo.loadRound(c.gate->round).verdict != Verdict::accept) why << "merge without ACCEPT round ";
  }
  return why.str();
}

std::string gateAudit() {
  Scratch dir;
  const auto repo = replayFile(uc1(), dir / "repo");
  const auto clean = workflow::auditGates(repo);
  if (!clean.ok()) return "clean repository has " + std::to_string(clean.findings.size()) + " findings";
  if (clean.gatesChecked == 0) return "no gates checked";

  // Flip one byte inside the first ballot of the first gated round.
  const fs::path file = repo.metaDir() / "rounds" / "r1.json";
  std::string bytes;
  {
    std::ifstream in(file, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto pos = bytes.find("\"pref\":");
  if (pos == std::string::npos) return "round file has no ballot";
  char& digit = bytes[pos + 9];
  digit = digit == '1' ? '2' : '1';
  std::ofstream(file, std::ios::binary | std::ios::trunc) << bytes;
  if (workflow::auditGates(Repository::open(repo.root())).ok()) return "tampered ballot went unnoticed";
  return {};
}

std::string cloneFidelity() {
  Scratch dir;
  const auto original = replayFile(uc1(), dir / "origin");
  const auto copy = Repository::clone((dir / "origin").string(), dir / "copy");
  const std::size_t checked = copy.objects().verifyAll();
  if (checked != original.objects().verifyAll()) return "object counts differ";
  if (statsBytes(copy) != statsBytes(original)) return "stats --json bytes differ";
  return {};
}

std::string storeDeterminism() {
  Scratch dir;
  const auto a = replayFile(uc1(), dir / "a");
  const auto b = replayFile(uc1(), dir / "b");
  const auto ra = a.releases();
  const auto rb = b.releases();
  if (ra.empty()) return "no releases";
  if (ra.size() != rb.size()) return "release counts differ";
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].tag != rb[i].tag || ra[i].commit != rb[i].commit) return "release " + ra[i].tag + " differs";
  }
  return {};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budgetSeconds;
    Check check;
  };
  const std::vector<Criterion> criteria = {
      {"consensus-exactness", 1.0, consensusExactness},
      {"oracle-equivalence", 5.0, oracleEquivalence},
      {"uc1-replay", 30.0, uc1Replay},
      {"gate-soundness-audit", 5.0, gateAudit},
      {"clone-fidelity", 10.0, cloneFidelity},
      {"store-determinism", 60.0, storeDeterminism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string problem;
    try {
      problem = c.check();
    } catch (const std::exception& e) {
      problem = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (problem.empty() && seconds > c.budgetSeconds) {
      problem = "took longer than " + std::to_string(c.budgetSeconds) + " s";
    }
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(3);
    line << (problem.empty() ? "PASS " : "FAIL ") << c.name << " (" << seconds << " s)";
    if (!problem.empty()) line << ": " << problem;
    std::cout << line.str() << "\n";
    if (!problem.empty()) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
