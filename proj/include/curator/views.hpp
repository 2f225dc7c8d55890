#pragma once

#include <string>

#include "curator/repository.hpp"

namespace curator::views {

// JSON documents shared by `--json` CLI output and the HTTP service, so both
// surfaces emit the same bytes. `render` appends the trailing newline.

Json commit(const Commit& c);
Json log(const Repository& repo, const PhaseId& phase, std::string_view branch);
Json round(const consensus::VoteRound& r);
Json rounds(const Repository& repo);
Json artefact(const Repository& repo, const ArtefactId& id);
Json releases(const Repository& repo);
Json project(const Repository& repo);
Json stats(const Repository& repo);
Json staged(const StagedState& s);

std::string render(const Json& view);

}  // namespace curator::views
