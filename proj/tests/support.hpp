#pragma once

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "curator/consensus.hpp"
#include "curator/error.hpp"
#include "curator/repository.hpp"
#include "curator/workflow.hpp"

namespace curator::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("curator-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(CURATOR_FIXTURES_DIR) / name;
}

inline Timestamp at(int seconds) { return Timestamp::parse("2021-03-01T09:00:00Z").plusMillis(seconds * 1000LL); }

inline const ResearcherId R0{"R0"};
inline const ResearcherId R1{"R1"};

/// Two-member project (junior R0, senior R1) in the given layout.
inline Repository makeProject(const std::filesystem::path& dir, const std::string& layout = "1,2,3+4,5") {
  return workflow::createProject(workflow::parsePhaseLayout(layout), ProjectId("demo"),
                                 {{R0, "Junior", 1}, {R1, "Senior", 0}}, consensus::GateConfig{}, dir, R0, at(0));
}

/// Text artefact in the repository's active phase.
inline Artefact textArtefact(const Repository& repo, const std::string& text, Timestamp when,
                             const ResearcherId& producer = R0) {
  const RepoConfig c = repo.config();
  return createArtefact(DocumentRef::text(text), producer, c.phase().id, c.project, when, c.phaseIds());
}

/// Opens a round on `target`, casts the two prefs and closes it.
inline consensus::VoteRound decidedRound(Repository& repo, consensus::SubjectKind kind, const std::string& target,
                                         double p0, double p1, Timestamp when,
                                         std::optional<consensus::GateConfig> config = std::nullopt) {
  auto r = repo.openRound({kind, repo.resolveTarget(target)}, {R0, R1}, config, when);
  repo.castVote(r.id, {R0, p0, std::nullopt, when});
  repo.castVote(r.id, {R1, p1, std::nullopt, when});
  return repo.closeRound(r.id, when);
}

}  // namespace curator::test

#define CHECK_ERRC(expr, errc)                                     \
  do {                                                             \
    bool thrown_ = false;                                          \
    try {                                                          \
      (void)(expr);                                                \
    } catch (const ::curator::Error& e_) {                         \
      thrown_ = true;                                              \
      CHECK_MESSAGE(e_.code() == (errc), "got " << e_.what());     \
    }                                                              \
    CHECK_MESSAGE(thrown_, "expected " #errc " from " #expr);      \
  } while (false)
