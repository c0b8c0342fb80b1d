#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>

#include <json.hpp>

namespace scenerecon {

// Sorted keys, two-space indent, floats at 9 significant digits, trailing
// newline. Byte-stable across load/save cycles.
std::string canonical_dump(const nlohmann::json& doc);
void write_canonical(const nlohmann::json& doc, const std::filesystem::path& path);

// Parses a file, turning parser failures into Error naming the path.
nlohmann::json read_json(const std::filesystem::path& path);

// Schema helpers. `where` is a JSON path such as "$.objects[2].params".
void require_object(const nlohmann::json& j, const std::string& where);
void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const std::string& where);
const nlohmann::json& required(const nlohmann::json& j, const char* key,
                               const std::string& where);
double get_number(const nlohmann::json& j, const std::string& where);
long long get_integer(const nlohmann::json& j, const std::string& where);
bool get_bool(const nlohmann::json& j, const std::string& where);
std::string get_string(const nlohmann::json& j, const std::string& where);

}  // namespace scenerecon
