#include "curator/service.hpp"

#include <httplib.h>

#include <mutex>
#include <thread>

#include "curator/canonical_json.hpp"
#include "curator/repository.hpp"
#include "curator/views.hpp"
#include "curator/workflow.hpp"

namespace curator::service {

namespace fs = std::filesystem;

int httpStatusFor(Errc code) {
  switch (code) {
    case Errc::UnknownRound:
    case Errc::UnknownCommit:
    case Errc::UnknownBranch:
    case Errc::UnknownRelease:
    case Errc::UnknownPhase:
    case Errc::UnknownSubject:
    case Errc::UnresolvedReference:
    case Errc::PathNotFound:
    case Errc::NotARepository:
      return 404;
    case Errc::InvalidArgument:
    case Errc::InvalidArtefact:
    case Errc::PrefOutOfRange:
    case Errc::InvalidGateConfig:
    case Errc::InvalidPhaseConfig:
    case Errc::MissingAuthor:
    case Errc::UnknownResearcher:
    case Errc::ScriptError:
      return 400;
    default:
      return 409;
  }
}

namespace {

constexpr const char* kJson = "application/json";
constexpr const char* kAuthorHeader = "X-Curator-Author";

void sendError(httplib::Response& res, Errc code, const std::string& message) {
  res.status = httpStatusFor(code);
  res.set_content(views::render(Json{{"error", to_string(code)}, {"message", message}}), kJson);
}

Json body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json j = parseJson(req.body, "request body");
  if (!j.is_object()) throw Error(Errc::InvalidArgument, "request body must be a JSON object");
  return j;
}

ResearcherId author(const httplib::Request& req) {
  const std::string who = req.get_header_value(kAuthorHeader);
  if (who.empty()) throw Error(Errc::MissingAuthor, std::string("header ") + kAuthorHeader + " is required");
  return ResearcherId(who);
}

std::optional<std::string> optString(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

}  // namespace

struct Server::Impl {
  Repository repo;
  Options options;
  httplib::Server http;
  std::mutex writer;

  Impl(const fs::path& root, Options opts) : repo(Repository::open(root)), options(std::move(opts)) {
    // Plain SO_REUSEADDR: a second server on the same port must fail to bind
    // rather than share the socket.
    http.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    routes();
  }

  template <class F>
  httplib::Server::Handler read(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      try {
        res.set_content(views::render(f(req)), kJson);
      } catch (const Error& e) {
        sendError(res, e.code(), e.what());
      } catch (const Json::exception& e) {
        sendError(res, Errc::InvalidArgument, e.what());
      }
    };
  }

  template <class F>
  httplib::Server::Handler write(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      try {
        const ResearcherId who = author(req);
        std::lock_guard<std::mutex> lock(writer);
        res.set_content(views::render(f(req, who)), kJson);
      } catch (const Error& e) {
        sendError(res, e.code(), e.what());
      } catch (const Json::exception& e) {
        sendError(res, Errc::InvalidArgument, e.what());
      }
    };
  }

  Json roundWithPoll(const httplib::Request& req) {
    const RoundId id(req.matches[1]);
    auto r = repo.loadRound(id);
    if (!req.has_param("since")) return views::round(r);
    const std::size_t since = std::stoul(req.get_param_value("since"));
    const auto deadline = std::chrono::steady_clock::now() + options.longPollTimeout;
    while (r.ballots.size() <= since && r.state == consensus::RoundState::open &&
           std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      r = repo.loadRound(id);
    }
    return views::round(r);
  }

  Json createArtefact(const httplib::Request& req, const ResearcherId& who) {
    std::string path;
    DocumentRef content;
    Json metadata = Json::object();
    const RepoConfig cfg = repo.config();
    if (req.is_multipart_form_data()) {
      if (!req.has_file("path")) throw Error(Errc::InvalidArgument, "multipart field 'path' is required");
      path = req.get_file_value("path").content;
      if (req.has_file("document")) {
        const auto doc = req.get_file_value("document");
        const std::string type = doc.content_type.empty() ? "application/octet-stream" : doc.content_type;
        content = DocumentRef::blob(storeBlob(repo.objects(), doc.content, type));
      } else if (req.has_file("text")) {
        content = DocumentRef::text(req.get_file_value("text").content);
      } else {
        throw Error(Errc::InvalidArgument, "multipart field 'document' or 'text' is required");
      }
      if (req.has_file("metadata")) metadata = parseJson(req.get_file_value("metadata").content, "metadata");
    } else {
      const Json j = body(req);
      path = j.at("path").get<std::string>();
      content = DocumentRef::text(j.at("text").get<std::string>());
      metadata = j.value("metadata", Json::object());
    }
    if (!metadata.is_object()) throw Error(Errc::InvalidArgument, "metadata must be a JSON object of strings");
    validatePath(path);
    repo.member(who);

    auto guard = repo.lock();
    Timestamp now = Timestamp::now();
    Artefact a = curator::createArtefact(std::move(content), who, cfg.phase().id, cfg.project, now, cfg.phaseIds());
    for (const auto& [key, value] : metadata.items()) {
      storeArtefact(repo.objects(), a);
      now = std::max(Timestamp::now(), a.timestamp.plusMillis(1));
      a = addMetadata(repo.objects(), Metadata{key, value.get<std::string>(), MetadataOrigin::manual, who, now},
                      idOf(a), now);
    }
    const StagedState s = repo.stageAdd(a, path);
    return Json{{"id", idOf(a)}, {"path", path}, {"staged", views::staged(s)}};
  }

  void routes() {
    http.Get("/project", read([this](const httplib::Request&) { return views::project(repo); }));
    http.Get("/stats", read([this](const httplib::Request&) { return views::stats(repo); }));
    http.Get(R"(/log/([^/]+)/([^/]+))", read([this](const httplib::Request& req) {
               return views::log(repo, PhaseId(req.matches[1]), std::string(req.matches[2]));
             }));
    http.Get(R"(/artefact/([0-9a-f]{64}))", read([this](const httplib::Request& req) {
               return views::artefact(repo, ArtefactId(req.matches[1]));
             }));
    http.Get("/releases", read([this](const httplib::Request&) { return views::releases(repo); }));
    http.Get("/rounds", read([this](const httplib::Request&) { return views::rounds(repo); }));
    http.Get(R"(/rounds/([A-Za-z0-9_-]+))", read([this](const httplib::Request& req) { return roundWithPoll(req); }));

    http.Post("/artefacts", write([this](const httplib::Request& req, const ResearcherId& who) {
                return createArtefact(req, who);
              }));
    http.Post("/commits", write([this](const httplib::Request& req, const ResearcherId& who) {
                const Json j = body(req);
                std::optional<RoundId> round;
                if (auto r = optString(j, "round")) round = RoundId(*r);
                return views::commit(repo.commit(j.at("message").get<std::string>(), who, round, Timestamp::now()));
              }));
    http.Post("/rounds", write([this](const httplib::Request& req, const ResearcherId& who) {
                repo.member(who);
                const Json j = body(req);
                const RepoConfig cfg = repo.config();
                consensus::DecisionSubject subject{consensus::parseSubjectKind(j.at("kind").get<std::string>()),
                                                   repo.resolveTarget(j.value("target", std::string("head")))};
                std::vector<ResearcherId> group;
                if (j.contains("group")) {
                  group = j["group"].get<std::vector<ResearcherId>>();
                } else {
                  for (const auto& r : cfg.roster) group.push_back(r.id);
                }
                Json gate = consensus::toJson(cfg.defaults);
                for (const char* key : {"strategy", "prefThreshold", "disThreshold", "quorum"}) {
                  if (j.contains(key)) gate[key] = j[key];
                }
                return views::round(
                    repo.openRound(subject, group, consensus::gateConfigFromJson(gate), Timestamp::now()));
              }));
    http.Post(R"(/rounds/([A-Za-z0-9_-]+)/votes)", write([this](const httplib::Request& req, const ResearcherId& who) {
                const Json j = body(req);
                consensus::PreferenceBallot b;
                b.voter = who;
                b.pref = j.at("pref").get<double>();
                if (j.contains("credits") && !j["credits"].is_null()) b.credits = j["credits"].get<std::uint64_t>();
                b.timestamp = Timestamp::now();
                return views::round(repo.castVote(RoundId(req.matches[1]), b));
              }));
    http.Post(R"(/rounds/([A-Za-z0-9_-]+)/close)", write([this](const httplib::Request& req, const ResearcherId&) {
                return views::round(repo.closeRound(RoundId(req.matches[1]), Timestamp::now()));
              }));
    http.Post("/cycles/close", write([this](const httplib::Request& req, const ResearcherId& who) {
                const Json j = body(req);
                workflow::closeCycle(repo, RoundId(j.at("round").get<std::string>()), who, Timestamp::now());
                return views::project(repo);
              }));
    http.Post("/phases/advance", write([this](const httplib::Request& req, const ResearcherId& who) {
                const Json j = body(req);
                workflow::advancePhase(repo, RoundId(j.at("round").get<std::string>()), optString(j, "release"), who,
                                       Timestamp::now());
                return views::project(repo);
              }));
    http.Post("/branches", write([this](const httplib::Request& req, const ResearcherId& who) {
                const Json j = body(req);
                std::optional<CommitId> from;
                if (auto f = optString(j, "from")) from = CommitId(repo.resolveTarget(*f));
                const Branch b =
                    repo.branch(j.at("name").get<std::string>(), from, optString(j, "filter"), who, Timestamp::now());
                return Json{{"name", b.name}, {"phase", b.phase}, {"head", b.head}};
              }));
    http.Post("/merges", write([this](const httplib::Request& req, const ResearcherId& who) {
                const Json j = body(req);
                std::map<std::string, ArtefactId> resolver;
                const Json resolve = j.value("resolve", Json::object());
                for (const auto& [path, id] : resolve.items()) {
                  resolver.emplace(path, id.get<ArtefactId>());
                }
                const std::string into = optString(j, "into").value_or(repo.head().branch);
                return views::commit(repo.merge(into, j.at("from").get<std::string>(), resolver, who,
                                                RoundId(j.at("round").get<std::string>()), Timestamp::now()));
              }));

    if (options.uiDir) http.set_mount_point("/ui", options.uiDir->string());
  }
};

Server::Server(const fs::path& repoRoot, Options options)
    : impl_(std::make_unique<Impl>(repoRoot, std::move(options))) {}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->http.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::IoError, "cannot bind " + host);
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port)) {
    throw Error(Errc::IoError, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return port;
}

void Server::run() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace curator::service
