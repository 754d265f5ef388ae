#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace covuln {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::string sha256_file(const std::filesystem::path& path);

/// Compact, key-sorted JSON text. nlohmann::json objects are key-ordered, so
/// the result does not depend on insertion order. Invalid UTF-8 is replaced
/// with U+FFFD instead of throwing. Also the line format of every JSONL file.
std::string canonical_json(const nlohmann::json& value);

inline std::string json_digest(const nlohmann::json& value) {
  return sha256_hex(canonical_json(value));
}

}  // namespace covuln
