#include "curator/views.hpp"

#include "curator/canonical_json.hpp"
#include "curator/error.hpp"
#include "curator/workflow.hpp"

namespace curator::views {

Json commit(const Commit& c) {
  Json j = c.toJson();
  j["id"] = c.id;
  return j;
}

Json log(const Repository& repo, const PhaseId& phase, std::string_view branch) {
  Json out = Json::array();
  for (const auto& c : repo.log(phase, branch)) out.push_back(commit(c));
  return out;
}

Json round(const consensus::VoteRound& r) {
  Json j = consensus::toJson(r);
  // Live tally over the ballots cast so far, ignoring quorum.
  Json tally = nullptr;
  if (!r.ballots.empty()) {
    consensus::VoteRound partial = r;
    partial.config.quorum = 1e-9;
    const auto agg = consensus::aggregate(partial);
    bool quorumMet = true;
    try {
      consensus::aggregate(r);
    } catch (const Error&) {
      quorumMet = false;
    }
    tally = Json{{"score", agg.score},
                 {"disagreement", agg.disagreement ? Json(*agg.disagreement) : Json(nullptr)},
                 {"ballots", r.ballots.size()},
                 {"quorumMet", quorumMet},
                 {"gate", consensus::to_string(consensus::evaluate(partial))}};
  }
  j["tally"] = std::move(tally);
  return j;
}

Json rounds(const Repository& repo) {
  Json out = Json::array();
  for (const auto& r : repo.rounds()) out.push_back(round(r));
  return out;
}

Json artefact(const Repository& repo, const ArtefactId& id) {
  const Artefact a = loadArtefact(repo.objects(), id);
  Json narratives = Json::array();
  for (const auto& n : a.listOfTags) {
    Json nj = toJson(loadNarrative(repo.objects(), n));
    nj["id"] = n;
    narratives.push_back(std::move(nj));
  }
  Json ritl = Json::array();
  for (const auto& [n, act] : getRITL(repo.objects(), id)) {
    ritl.push_back({{"narrative", toJson(n)}, {"action", toJson(act)}});
  }
  Json versions = Json::array();
  for (const auto& v : versionChain(repo.objects(), id)) versions.push_back(v);
  return Json{{"id", id}, {"record", toJson(a)}, {"narratives", std::move(narratives)},
              {"ritl", std::move(ritl)}, {"versions", std::move(versions)}};
}

Json releases(const Repository& repo) {
  Json out = Json::array();
  for (const auto& r : repo.releases()) out.push_back(r.toJson());
  return out;
}

Json project(const Repository& repo) { return workflow::toJson(workflow::projectState(repo)); }

Json stats(const Repository& repo) { return workflow::toJson(workflow::computeStats(repo)); }

Json staged(const StagedState& s) {
  Json adds = Json::object();
  for (const auto& [p, id] : s.adds) adds[p] = id;
  return Json{{"add", std::move(adds)}, {"remove", s.removes}};
}

std::string render(const Json& view) { return canonicalDump(view) + "\n"; }

}  // namespace curator::views
