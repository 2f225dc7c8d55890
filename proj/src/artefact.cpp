#include "curator/artefact.hpp"

#include <algorithm>

#include "curator/canonical_json.hpp"
#include "curator/digest.hpp"
#include "curator/error.hpp"

namespace curator {

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(Errc::InvalidArtefact, "malformed " + what + " record");
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception&) {
    malformed(what);
  }
}

Artefact derive(const ObjectStore& store, const ArtefactId& target, Timestamp now) {
  Artefact next = loadArtefact(store, target);
  if (now <= next.timestamp) {
    throw Error(Errc::NonMonotonicTimestamp, "new version of " + target.str() + " at " + now.str() +
                                                 " is not after " + next.timestamp.str());
  }
  next.timestamp = now;
  next.predecessor = target;
  return next;
}

Artefact commitVersion(ObjectStore& store, Artefact next) {
  storeArtefact(store, next);
  return next;
}

}  // namespace

std::string_view to_string(MetadataOrigin origin) {
  return origin == MetadataOrigin::automatic ? "automatic" : "manual";
}

Json toJson(const DocumentRef& doc) {
  if (doc.isText()) return Json{{"kind", "text"}, {"text", doc.textValue()}};
  const auto& b = doc.blobValue();
  return Json{{"kind", "blob"}, {"digest", b.digest}, {"mediaType", b.mediaType}, {"size", b.size}};
}

DocumentRef documentFromJson(const Json& j) {
  return guarded("document", [&] {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "text") return DocumentRef::text(j.at("text").get<std::string>());
    if (kind != "blob") malformed("document");
    return DocumentRef::blob(BlobRef{j.at("digest").get<BlobId>(), j.at("mediaType").get<std::string>(),
                                     j.at("size").get<std::uint64_t>()});
  });
}

Json toJson(const Metadata& m) {
  Json j{{"key", m.key},
         {"value", m.value},
         {"origin", to_string(m.origin)},
         {"timestamp", m.timestamp.str()}};
  if (m.producer) j["producer"] = *m.producer;
  return j;
}

Metadata metadataFromJson(const Json& j) {
  return guarded("metadata", [&] {
    Metadata m;
    m.key = j.at("key").get<std::string>();
    m.value = j.at("value").get<std::string>();
    const auto origin = j.at("origin").get<std::string>();
    if (origin != "automatic" && origin != "manual") malformed("metadata");
    m.origin = origin == "automatic" ? MetadataOrigin::automatic : MetadataOrigin::manual;
    if (j.contains("producer")) m.producer = j["producer"].get<ResearcherId>();
    m.timestamp = Timestamp::parse(j.at("timestamp").get<std::string>());
    return m;
  });
}

Json toJson(const Narrative& n) {
  return Json{{"type", "narrative"},
              {"content", toJson(n.content)},
              {"narrative", n.narrative},
              {"producer", n.producer},
              {"timestamp", n.timestamp.str()}};
}

Narrative narrativeFromJson(const Json& j) {
  return guarded("narrative", [&] {
    return Narrative{documentFromJson(j.at("content")), j.at("narrative").get<std::string>(),
                     j.at("producer").get<ResearcherId>(),
                     Timestamp::parse(j.at("timestamp").get<std::string>())};
  });
}

Json toJson(const ActionRecord& a) {
  return Json{{"type", "action"},
              {"original", a.original},
              {"result", a.result},
              {"operation",
               {{"name", a.operation.name},
                {"parameters", a.operation.parameters},
                {"assessmentScores", a.operation.assessmentScores}}},
              {"producer", a.producer},
              {"timestamp", a.timestamp.str()}};
}

ActionRecord actionFromJson(const Json& j) {
  return guarded("action", [&] {
    ActionRecord a;
    a.original = j.at("original").get<ArtefactId>();
    a.result = j.at("result").get<ArtefactId>();
    const Json& op = j.at("operation");
    a.operation.name = op.at("name").get<std::string>();
    a.operation.parameters = op.at("parameters").get<std::map<std::string, std::string>>();
    a.operation.assessmentScores = op.at("assessmentScores").get<std::map<std::string, double>>();
    a.producer = j.at("producer").get<ResearcherId>();
    a.timestamp = Timestamp::parse(j.at("timestamp").get<std::string>());
    return a;
  });
}

Json toJson(const Artefact& a) {
  Json meta = Json::array();
  for (const auto& m : a.metaData) meta.push_back(toJson(m));
  Json j{{"type", "artefact"},
         {"content", toJson(a.content)},
         {"producer", a.producer},
         {"timestamp", a.timestamp.str()},
         {"projectWfPh", {{"phase", a.phase}, {"project", a.project}}},
         {"metaData", std::move(meta)},
         {"listOfTags", a.listOfTags},
         {"listOfActions", a.listOfActions}};
  if (a.predecessor) j["predecessor"] = *a.predecessor;
  return j;
}

Artefact artefactFromJson(const Json& j) {
  return guarded("artefact", [&] {
    Artefact a;
    a.content = documentFromJson(j.at("content"));
    a.producer = j.at("producer").get<ResearcherId>();
    a.timestamp = Timestamp::parse(j.at("timestamp").get<std::string>());
    a.phase = j.at("projectWfPh").at("phase").get<PhaseId>();
    a.project = j.at("projectWfPh").at("project").get<ProjectId>();
    for (const auto& m : j.at("metaData")) a.metaData.push_back(metadataFromJson(m));
    a.listOfTags = j.at("listOfTags").get<std::vector<NarrativeId>>();
    a.listOfActions = j.at("listOfActions").get<std::vector<ActionId>>();
    if (j.contains("predecessor")) a.predecessor = j["predecessor"].get<ArtefactId>();
    return a;
  });
}

std::string canonicalBytes(const Artefact& a) { return canonicalDump(toJson(a)); }
ArtefactId idOf(const Artefact& a) { return ArtefactId(sha256Hex(canonicalBytes(a))); }
NarrativeId idOf(const Narrative& n) { return NarrativeId(sha256Hex(canonicalDump(toJson(n)))); }
ActionId idOf(const ActionRecord& a) { return ActionId(sha256Hex(canonicalDump(toJson(a)))); }

std::string canonicalize(const Artefact& a, const ObjectStore& store) {
  for (const auto& tag : a.listOfTags) {
    if (store.typeOf(tag.str()) != "narrative") {
      throw Error(Errc::UnresolvedReference, "narrative " + tag.str() + " does not resolve");
    }
  }
  for (const auto& action : a.listOfActions) {
    if (store.typeOf(action.str()) != "action") {
      throw Error(Errc::UnresolvedReference, "action " + action.str() + " does not resolve");
    }
  }
  if (!a.content.isText() && !store.contains(a.content.blobValue().digest.str())) {
    throw Error(Errc::UnresolvedReference, "blob " + a.content.blobValue().digest.str() + " does not resolve");
  }
  return canonicalBytes(a);
}

Artefact createArtefact(DocumentRef content, ResearcherId producer, PhaseId phase, ProjectId project,
                        Timestamp now, std::span<const PhaseId> configuredPhases) {
  if (std::find(configuredPhases.begin(), configuredPhases.end(), phase) == configuredPhases.end()) {
    throw Error(Errc::UnknownPhase, "phase '" + phase.str() + "' is not configured");
  }
  Artefact a;
  a.content = std::move(content);
  a.producer = std::move(producer);
  a.timestamp = now;
  a.phase = std::move(phase);
  a.project = std::move(project);
  return a;
}

ArtefactId storeArtefact(ObjectStore& store, const Artefact& a) {
  if (a.predecessor && store.typeOf(a.predecessor->str()) != "artefact") {
    throw Error(Errc::UnresolvedReference, "predecessor " + a.predecessor->str() + " does not resolve");
  }
  return ArtefactId(store.put(canonicalize(a, store)));
}

Artefact loadArtefact(const ObjectStore& store, const ArtefactId& id) {
  return artefactFromJson(store.getJson(id.str(), "artefact"));
}

NarrativeId storeNarrative(ObjectStore& store, const Narrative& n) {
  if (n.narrative.empty()) throw Error(Errc::InvalidArgument, "narrative text must not be empty");
  return NarrativeId(store.putJson(toJson(n)));
}

Narrative loadNarrative(const ObjectStore& store, const NarrativeId& id) {
  return narrativeFromJson(store.getJson(id.str(), "narrative"));
}

ActionId storeAction(ObjectStore& store, const ActionRecord& a) {
  if (a.original == a.result) {
    throw Error(Errc::InvalidArgument, "action original and result must differ");
  }
  for (const auto* id : {&a.original, &a.result}) {
    if (store.typeOf(id->str()) != "artefact") {
      throw Error(Errc::UnresolvedReference, "artefact " + id->str() + " does not resolve");
    }
  }
  return ActionId(store.putJson(toJson(a)));
}

ActionRecord loadAction(const ObjectStore& store, const ActionId& id) {
  return actionFromJson(store.getJson(id.str(), "action"));
}

BlobRef storeBlob(ObjectStore& store, std::string_view bytes, std::string mediaType) {
  return BlobRef{BlobId(store.put(bytes)), std::move(mediaType), bytes.size()};
}

Artefact addMetadata(ObjectStore& store, const Metadata& m, const ArtefactId& target, Timestamp now) {
  if (m.key.empty()) throw Error(Errc::InvalidArgument, "metadata key must not be empty");
  Artefact next = derive(store, target, now);
  next.metaData.push_back(m);
  return commitVersion(store, std::move(next));
}

Artefact updateMetadata(ObjectStore& store, const Metadata& m, const ArtefactId& target, Timestamp now) {
  Artefact next = derive(store, target, now);
  auto it = std::find_if(next.metaData.rbegin(), next.metaData.rend(),
                         [&](const Metadata& e) { return e.key == m.key; });
  if (it == next.metaData.rend()) {
    throw Error(Errc::KeyNotFound, "artefact " + target.str() + " has no metadata key '" + m.key + "'");
  }
  *it = m;
  return commitVersion(store, std::move(next));
}

std::vector<Metadata> getMetadata(const ObjectStore& store, const ArtefactId& target) {
  return loadArtefact(store, target).metaData;
}

Artefact addRITL(ObjectStore& store, const Narrative& n, const ActionId& action, const ArtefactId& target,
                 Timestamp now) {
  const ActionRecord record = loadAction(store, action);
  if (!actionConcerns(store, record, target)) {
    throw Error(Errc::ActionMismatch,
                "action " + action.str() + " references neither side of artefact " + target.str());
  }
  Artefact next = derive(store, target, now);
  next.listOfTags.push_back(storeNarrative(store, n));
  next.listOfActions.push_back(action);
  return commitVersion(store, std::move(next));
}

std::vector<std::pair<Narrative, ActionRecord>> getRITL(const ObjectStore& store, const ArtefactId& target) {
  // A RITL attachment is the only step that grows both lists at once, so the
  // pairs are recovered by diffing each version against its predecessor.
  std::vector<std::pair<Narrative, ActionRecord>> pairs;
  Artefact current = loadArtefact(store, target);
  while (current.predecessor) {
    Artefact previous = loadArtefact(store, *current.predecessor);
    if (current.listOfTags.size() == previous.listOfTags.size() + 1 &&
        current.listOfActions.size() == previous.listOfActions.size() + 1) {
      pairs.emplace_back(loadNarrative(store, current.listOfTags.back()),
                         loadAction(store, current.listOfActions.back()));
    }
    current = std::move(previous);
  }
  std::reverse(pairs.begin(), pairs.end());
  return pairs;
}

Artefact addNarrative(ObjectStore& store, const Narrative& n, const ArtefactId& target, Timestamp now) {
  Artefact next = derive(store, target, now);
  next.listOfTags.push_back(storeNarrative(store, n));
  return commitVersion(store, std::move(next));
}

Artefact reviseContent(ObjectStore& store, DocumentRef content, ResearcherId producer,
                       const ArtefactId& target, Timestamp now) {
  Artefact next = derive(store, target, now);
  next.content = std::move(content);
  next.producer = std::move(producer);
  return commitVersion(store, std::move(next));
}

bool actionConcerns(const ObjectStore& store, const ActionRecord& action, const ArtefactId& target) {
  const auto chain = versionChain(store, target);
  return std::any_of(chain.begin(), chain.end(),
                     [&](const ArtefactId& v) { return v == action.original || v == action.result; });
}

std::vector<ArtefactId> versionChain(const ObjectStore& store, const ArtefactId& newest) {
  std::vector<ArtefactId> chain{newest};
  Artefact current = loadArtefact(store, newest);
  while (current.predecessor) {
    chain.push_back(*current.predecessor);
    current = loadArtefact(store, *current.predecessor);
  }
  return chain;
}

std::size_t contentVersionCount(const ObjectStore& store, const ArtefactId& newest) {
  std::size_t count = 1;
  Artefact current = loadArtefact(store, newest);
  while (current.predecessor) {
    Artefact previous = loadArtefact(store, *current.predecessor);
    if (!(previous.content == current.content)) ++count;
    current = std::move(previous);
  }
  return count;
}

}  // namespace curator
