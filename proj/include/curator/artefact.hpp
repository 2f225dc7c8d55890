#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "curator/ids.hpp"
#include "curator/object_store.hpp"
#include "curator/timestamp.hpp"

namespace curator {

struct BlobRef {
  BlobId digest;
  std::string mediaType;
  std::uint64_t size = 0;

  bool operator==(const BlobRef&) const = default;
};

/// Inline UTF-8 text or a reference to a blob stored verbatim.
struct DocumentRef {
  std::variant<std::string, BlobRef> value;

  static DocumentRef text(std::string t) { return DocumentRef{std::move(t)}; }
  static DocumentRef blob(BlobRef ref) { return DocumentRef{std::move(ref)}; }

  bool isText() const noexcept { return std::holds_alternative<std::string>(value); }
  const std::string& textValue() const { return std::get<std::string>(value); }
  const BlobRef& blobValue() const { return std::get<BlobRef>(value); }

  bool operator==(const DocumentRef&) const = default;
};

enum class MetadataOrigin { automatic, manual };

struct Metadata {
  std::string key;
  std::string value;
  MetadataOrigin origin = MetadataOrigin::manual;
  std::optional<ResearcherId> producer;  // absent when automatic
  Timestamp timestamp;

  bool operator==(const Metadata&) const = default;
};

struct Narrative {
  DocumentRef content;
  std::string narrative;
  ResearcherId producer;
  Timestamp timestamp;

  bool operator==(const Narrative&) const = default;
};

struct OperationDescriptor {
  std::string name;
  std::map<std::string, std::string> parameters;
  std::map<std::string, double> assessmentScores;

  bool operator==(const OperationDescriptor&) const = default;
};

/// Provenance of an operation that turned `original` into `result`.
struct ActionRecord {
  ArtefactId original;
  ArtefactId result;
  OperationDescriptor operation;
  ResearcherId producer;
  Timestamp timestamp;

  bool operator==(const ActionRecord&) const = default;
};

/// One immutable artefact version. Every annotation produces a new version
/// whose `predecessor` is the id of the version it was derived from.
struct Artefact {
  DocumentRef content;
  ResearcherId producer;
  Timestamp timestamp;
  PhaseId phase;
  ProjectId project;
  std::vector<Metadata> metaData;
  std::vector<NarrativeId> listOfTags;
  std::vector<ActionId> listOfActions;
  std::optional<ArtefactId> predecessor;

  bool operator==(const Artefact&) const = default;
};

// Serialization. These are the canonical object forms written to the store.
Json toJson(const DocumentRef& doc);
DocumentRef documentFromJson(const Json& j);
Json toJson(const Metadata& m);
Metadata metadataFromJson(const Json& j);
Json toJson(const Narrative& n);
Narrative narrativeFromJson(const Json& j);
Json toJson(const ActionRecord& a);
ActionRecord actionFromJson(const Json& j);
Json toJson(const Artefact& a);
Artefact artefactFromJson(const Json& j);

/// Canonical bytes without reference checks.
std::string canonicalBytes(const Artefact& a);
ArtefactId idOf(const Artefact& a);
NarrativeId idOf(const Narrative& n);
ActionId idOf(const ActionRecord& a);

/// Canonical bytes after checking that every narrative, action and blob the
/// artefact lists resolves in `store`. Throws UnresolvedReference.
std::string canonicalize(const Artefact& a, const ObjectStore& store);

/// Fresh artefact with no annotations. Throws UnknownPhase when `phase` is
/// not in `configuredPhases`.
Artefact createArtefact(DocumentRef content, ResearcherId producer, PhaseId phase, ProjectId project,
                        Timestamp now, std::span<const PhaseId> configuredPhases);

// Store-backed access. Loading checks the object type.
ArtefactId storeArtefact(ObjectStore& store, const Artefact& a);
Artefact loadArtefact(const ObjectStore& store, const ArtefactId& id);
NarrativeId storeNarrative(ObjectStore& store, const Narrative& n);
Narrative loadNarrative(const ObjectStore& store, const NarrativeId& id);
/// Checks original != result and that both resolve.
ActionId storeAction(ObjectStore& store, const ActionRecord& a);
ActionRecord loadAction(const ObjectStore& store, const ActionId& id);
BlobRef storeBlob(ObjectStore& store, std::string_view bytes, std::string mediaType);

// Copy-on-write annotation operations. Each loads `target`, derives a new
// version timestamped `now` (strictly after the predecessor), stores it and
// returns it.
Artefact addMetadata(ObjectStore& store, const Metadata& m, const ArtefactId& target, Timestamp now);
/// Replaces the most recent entry with `m.key`; KeyNotFound otherwise.
Artefact updateMetadata(ObjectStore& store, const Metadata& m, const ArtefactId& target, Timestamp now);
std::vector<Metadata> getMetadata(const ObjectStore& store, const ArtefactId& target);
/// Stores the narrative and appends it together with `action`, which must
/// name `target` as original or result (ActionMismatch otherwise).
Artefact addRITL(ObjectStore& store, const Narrative& n, const ActionId& action, const ArtefactId& target,
                 Timestamp now);
std::vector<std::pair<Narrative, ActionRecord>> getRITL(const ObjectStore& store, const ArtefactId& target);
/// Appends a narrative tag without an action.
Artefact addNarrative(ObjectStore& store, const Narrative& n, const ArtefactId& target, Timestamp now);
/// New version with replaced content, produced by `producer`.
Artefact reviseContent(ObjectStore& store, DocumentRef content, ResearcherId producer,
                       const ArtefactId& target, Timestamp now);

/// Version ids from `newest` back to the creation version.
std::vector<ArtefactId> versionChain(const ObjectStore& store, const ArtefactId& newest);
/// True when the action's original or result is `target` or one of its
/// earlier versions, so annotations made after the action still match it.
bool actionConcerns(const ObjectStore& store, const ActionRecord& action, const ArtefactId& target);
/// Number of distinct content revisions along the chain ending at `newest`.
std::size_t contentVersionCount(const ObjectStore& store, const ArtefactId& newest);

std::string_view to_string(MetadataOrigin origin);

}  // namespace curator
