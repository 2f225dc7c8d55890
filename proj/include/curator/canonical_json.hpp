#pragma once

#include <string>
#include <string_view>

#include "curator/ids.hpp"

namespace curator {

/// Canonical form: UTF-8, object keys sorted bytewise, no insignificant
/// whitespace, arrays in stored order. Every JSON file the repository
/// writes goes through this.
std::string canonicalDump(const Json& value);

/// Parses JSON, mapping parse failures to Error(code).
Json parseJson(std::string_view text, std::string_view what);

}  // namespace curator
