#include "curator/canonical_json.hpp"

#include "curator/error.hpp"

namespace curator {

std::string canonicalDump(const Json& value) {
  // nlohmann::json keeps objects in std::map, so keys are already sorted.
  return value.dump(-1, ' ', false, Json::error_handler_t::strict);
}

Json parseJson(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw Error(Errc::InvalidArgument, "malformed JSON in " + std::string(what) + ": " + e.what());
  }
}

}  // namespace curator
