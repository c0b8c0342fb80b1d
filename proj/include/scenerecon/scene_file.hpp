#pragma once

#include <filesystem>

#include <json.hpp>

#include "scenerecon/class_map.hpp"
#include "scenerecon/fit.hpp"

namespace scenerecon {

// Scene JSON documents. Camera pitch and roll are stored in degrees
// (`pitch_deg`, `roll_deg`); everything else is SI units and radians.
// `class_pix3d` is derived from `class_nyu37` through the class map: it is
// checked on load when present and always written on save.
SceneSample scene_from_json(const nlohmann::json& doc, const ClassMap& classes);
nlohmann::json scene_to_json(const SceneSample& scene, const ClassMap& classes);

SceneSample load_scene(const std::filesystem::path& path, const ClassMap& classes);
void save_scene(const SceneSample& scene, const std::filesystem::path& path,
                const ClassMap& classes);

// Resolves an object's relative path against the scene file's directory.
std::filesystem::path resolve_relative(const std::filesystem::path& scene_path,
                                       const std::string& relative);

// Reads every object's point cloud (`pointcloud_path`) into `cloud`.
void load_object_clouds(SceneSample& scene, const std::filesystem::path& scene_path);

}  // namespace scenerecon
