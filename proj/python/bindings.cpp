#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "curator/canonical_json.hpp"
#include "curator/cli.hpp"
#include "curator/consensus.hpp"
#include "curator/replay.hpp"
#include "curator/repository.hpp"
#include "curator/views.hpp"
#include "curator/workflow.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace curator;

namespace {

/// Builds a closed-form round in which voter i cast prefs[i].
consensus::VoteRound adHocRound(const std::vector<double>& prefs, const consensus::GateConfig& config,
                                const std::vector<std::uint64_t>& credits, const std::vector<int>& levels) {
  if (!credits.empty() && credits.size() != prefs.size()) {
    throw Error(Errc::InvalidArgument, "credits must have one entry per preference");
  }
  if (!levels.empty() && levels.size() != prefs.size()) {
    throw Error(Errc::InvalidArgument, "levels must have one entry per preference");
  }
  std::vector<consensus::Member> group;
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    group.push_back({ResearcherId("v" + std::to_string(i)), levels.empty() ? 0 : levels[i]});
  }
  auto round = consensus::openRound(RoundId("adhoc"), {consensus::SubjectKind::artefact_validation, "adhoc"},
                                    PhaseId("G1"), group, config, Timestamp());
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    std::optional<std::uint64_t> c;
    if (!credits.empty()) c = credits[i];
    round = consensus::castVote(std::move(round), {group[i].id, prefs[i], c, Timestamp()});
  }
  return round;
}

}  // namespace

PYBIND11_MODULE(_curator, m) {
  m.doc() = "Consensus-gated version control for research artefacts";

  static py::exception<Error> curatorError(m, "CuratorError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = curatorError;
      py::object instance = err(std::string(to_string(e.code())), e.what());
      PyErr_SetObject(err.ptr(), instance.ptr());
    }
  });

  m.def(
      "gpref",
      [](const std::vector<double>& prefs) {
        std::vector<consensus::PreferenceBallot> ballots;
        std::vector<ResearcherId> group;
        for (std::size_t i = 0; i < prefs.size(); ++i) {
          group.emplace_back("v" + std::to_string(i));
          ballots.push_back({group.back(), prefs[i], std::nullopt, Timestamp()});
        }
        return consensus::gpref(ballots, group);
      },
      py::arg("prefs"), "Mean preference of a group.");

  m.def(
      "dis",
      [](const std::vector<double>& prefs) {
        std::vector<consensus::PreferenceBallot> ballots;
        std::vector<ResearcherId> group;
        for (std::size_t i = 0; i < prefs.size(); ++i) {
          group.emplace_back("v" + std::to_string(i));
          ballots.push_back({group.back(), prefs[i], std::nullopt, Timestamp()});
        }
        return consensus::dis(ballots, group);
      },
      py::arg("prefs"), "Mean absolute pairwise disagreement of a group.");

  m.def(
      "aggregate",
      [](const std::string& strategy, const std::vector<double>& prefs, const std::vector<std::uint64_t>& credits,
         const std::vector<int>& levels) {
        consensus::GateConfig config;
        config.strategy = consensus::parseStrategy(strategy);
        const auto agg = consensus::aggregate(adHocRound(prefs, config, credits, levels));
        return py::make_tuple(agg.score, agg.disagreement ? py::cast(*agg.disagreement) : py::none());
      },
      py::arg("strategy"), py::arg("prefs"), py::arg("credits") = std::vector<std::uint64_t>{},
      py::arg("levels") = std::vector<int>{}, "Strategy score and disagreement as (score, dis).");

  m.def(
      "evaluate",
      [](const std::string& strategy, const std::vector<double>& prefs, double prefThreshold,
         std::optional<double> disThreshold) {
        consensus::GateConfig config;
        config.strategy = consensus::parseStrategy(strategy);
        config.prefThreshold = prefThreshold;
        config.disThreshold = disThreshold;
        consensus::validate(config);
        return std::string(consensus::to_string(consensus::evaluate(adHocRound(prefs, config, {}, {}))));
      },
      py::arg("strategy"), py::arg("prefs"), py::arg("pref_threshold") = 0.6, py::arg("dis_threshold") = 0.4,
      "Verdict string for a fully voted round.");

  py::class_<Repository>(m, "Repository")
      .def_static("open", &Repository::open, py::arg("root"))
      .def_static(
          "clone", [](const std::string& source, const fs::path& dest) { return Repository::clone(source, dest); },
          py::arg("source"), py::arg("dest"))
      .def_property_readonly("root", [](const Repository& r) { return r.root(); })
      .def("stats_json", [](const Repository& r) { return views::render(views::stats(r)); })
      .def("project_json", [](const Repository& r) { return views::render(views::project(r)); })
      .def("releases_json", [](const Repository& r) { return views::render(views::releases(r)); })
      .def("rounds_json", [](const Repository& r) { return views::render(views::rounds(r)); })
      .def(
          "log_json",
          [](const Repository& r, const std::string& phase, const std::string& branch) {
            return views::render(views::log(r, PhaseId(phase), branch));
          },
          py::arg("phase"), py::arg("branch") = "main")
      .def(
          "artefact_json",
          [](const Repository& r, const std::string& id) { return views::render(views::artefact(r, ArtefactId(id))); },
          py::arg("id"))
      .def("audit_json", [](const Repository& r) { return views::render(workflow::toJson(workflow::auditGates(r))); })
      .def("verify", [](const Repository& r) { r.objects().verifyAll(); });

  m.def(
      "replay",
      [](const fs::path& script, const fs::path& dest) { return replayFile(script, dest); }, py::arg("script"),
      py::arg("dest"), "Builds a repository from a JSON event script.");

  m.def(
      "cli",
      [](const std::vector<std::string>& args, const fs::path& cwd, std::optional<std::string> author,
         std::optional<fs::path> curatorDir) {
        std::ostringstream out, err;
        const int code = cli::runCli(args, cli::CliEnv{std::move(curatorDir), std::move(author), cwd}, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), py::arg("cwd"), py::arg("author") = py::none(), py::arg("curator_dir") = py::none(),
      "Runs one curator command line in-process; returns (exit_code, stdout, stderr).");
}
