#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

namespace bottleneck {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Digest of the compact serialization of `j` (keys are sorted by nlohmann::json).
inline std::string json_digest(const nlohmann::json& j) { return sha256_hex(j.dump()); }

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace bottleneck
