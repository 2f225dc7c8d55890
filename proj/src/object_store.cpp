#include "curator/object_store.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>

#include "curator/canonical_json.hpp"
#include "curator/digest.hpp"
#include "curator/error.hpp"

namespace curator {

namespace fs = std::filesystem;

void writeFileAtomic(const fs::path& target, std::string_view bytes) {
  static std::atomic<unsigned> counter{0};
  fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(Errc::IoError, "cannot rename into " + target.string() + ": " + ec.message());
  }
}

std::optional<std::string> readFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

ObjectStore::ObjectStore(fs::path dir) : dir_(std::move(dir)) {}

fs::path ObjectStore::pathFor(std::string_view digest) const {
  return dir_ / std::string(digest.substr(0, 2)) / std::string(digest);
}

std::string ObjectStore::put(std::string_view bytes) {
  std::string digest = sha256Hex(bytes);
  const fs::path target = pathFor(digest);
  if (!fs::exists(target)) writeFileAtomic(target, bytes);
  return digest;
}

std::string ObjectStore::putJson(const Json& value) { return put(canonicalDump(value)); }

bool ObjectStore::contains(std::string_view digest) const {
  return isDigest(digest) && fs::exists(pathFor(digest));
}

std::optional<std::string> ObjectStore::tryGet(std::string_view digest) const {
  if (!isDigest(digest)) return std::nullopt;
  return readFile(pathFor(digest));
}

std::string ObjectStore::get(std::string_view digest) const {
  auto bytes = tryGet(digest);
  if (!bytes) throw Error(Errc::UnresolvedReference, "object " + std::string(digest) + " not found");
  return std::move(*bytes);
}

Json ObjectStore::getJson(std::string_view digest, std::string_view expectedType) const {
  const std::string bytes = get(digest);
  Json value;
  try {
    value = Json::parse(bytes);
  } catch (const Json::parse_error&) {
    throw Error(Errc::UnresolvedReference, "object " + std::string(digest) + " is not a JSON record");
  }
  if (!expectedType.empty()) {
    if (!value.is_object() || !value.contains("type") || value["type"] != expectedType) {
      throw Error(Errc::UnresolvedReference,
                  "object " + std::string(digest) + " is not a " + std::string(expectedType));
    }
  }
  return value;
}

std::string ObjectStore::typeOf(std::string_view digest) const {
  auto bytes = tryGet(digest);
  if (!bytes || bytes->empty() || bytes->front() != '{') return {};
  try {
    Json value = Json::parse(*bytes);
    if (value.is_object() && value.contains("type") && value["type"].is_string()) {
      return value["type"].get<std::string>();
    }
  } catch (const Json::parse_error&) {
  }
  return {};
}

void ObjectStore::verify(std::string_view digest) const {
  auto bytes = tryGet(digest);
  if (!bytes) throw Error(Errc::UnresolvedReference, "object " + std::string(digest) + " not found");
  if (sha256Hex(*bytes) != digest) {
    throw Error(Errc::CorruptObject, "object " + std::string(digest) + " fails hash verification");
  }
}

std::size_t ObjectStore::verifyAll() const {
  std::size_t n = 0;
  for (const auto& digest : list()) {
    verify(digest);
    ++n;
  }
  return n;
}

std::vector<std::string> ObjectStore::list() const {
  std::vector<std::string> out;
  if (!fs::exists(dir_)) return out;
  for (const auto& fan : fs::directory_iterator(dir_)) {
    if (!fan.is_directory()) continue;
    for (const auto& entry : fs::directory_iterator(fan.path())) {
      const std::string name = entry.path().filename().string();
      if (!entry.is_regular_file()) continue;
      if (!isDigest(name)) {
        // Stray temp files or foreign names inside the object area.
        if (name.find(".tmp.") == std::string::npos) {
          throw Error(Errc::CorruptObject, "unexpected file in object store: " + name);
        }
        continue;
      }
      if (name.substr(0, 2) != fan.path().filename().string()) {
        throw Error(Errc::CorruptObject, "object " + name + " is in the wrong fan-out directory");
      }
      out.push_back(name);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace curator
