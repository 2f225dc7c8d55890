#pragma once

#include <string>
#include <string_view>

namespace curator {

/// Lowercase hex SHA-256 of `bytes` (64 characters).
std::string sha256Hex(std::string_view bytes);

/// True for a 64-character lowercase hex string.
bool isDigest(std::string_view text) noexcept;

}  // namespace curator
