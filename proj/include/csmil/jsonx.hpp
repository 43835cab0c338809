#pragma once

#include <string>

#include <json.hpp>

namespace csmil {

using Json = nlohmann::ordered_json;

// Serializer with pinned float formatting (17 significant digits) and the
// document's own key order, so identical values always produce identical
// bytes. Two-space indent.
std::string dump_fixed(const Json& j);

// Parse with a line/column diagnostic on failure (throws ConfigError).
Json parse_json_text(const std::string& text, const std::string& origin);
Json parse_json_file(const std::string& path);

}  // namespace csmil
