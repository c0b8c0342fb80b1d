#include "scenerecon/class_map.hpp"

#include <fstream>

#include <json.hpp>

#include "scenerecon/canonical_json.hpp"
#include "scenerecon/common.hpp"

#ifndef SCENERECON_DATA_DIR
#define SCENERECON_DATA_DIR "data"
#endif

namespace scenerecon {

ClassMap ClassMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  ClassMap map;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    require_object(j, "$");
    reject_unknown(j, {"version", "pix3d", "nyu37"}, "$");
    map.version_ = j.at("version").get<int>();
    for (const auto& p : j.at("pix3d")) {
      reject_unknown(p, {"id", "name"}, "$.pix3d[]");
      map.pix3d_names_[p.at("id").get<int>()] = p.at("name").get<std::string>();
    }
    for (const auto& n : j.at("nyu37")) {
      reject_unknown(n, {"id", "name", "pix3d"}, "$.nyu37[]");
      const int id = n.at("id").get<int>();
      map.nyu_names_[id] = n.at("name").get<std::string>();
      const auto& target = n.at("pix3d");
      if (target.is_null()) {
        map.nyu_to_pix3d_[id] = std::nullopt;
      } else {
        const int pix = target.get<int>();
        if (!map.pix3d_names_.count(pix)) {
          throw Error("NYU class " + std::to_string(id) +
                      " maps to unknown Pix3D id " + std::to_string(pix));
        }
        map.nyu_to_pix3d_[id] = pix;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return map;
}

std::filesystem::path ClassMap::bundled_path() {
  return std::filesystem::path(SCENERECON_DATA_DIR) / "nyu37_to_pix3d.json";
}

ClassMap ClassMap::bundled() { return load(bundled_path()); }

std::optional<int> ClassMap::pix3d(int nyu_id) const {
  const auto it = nyu_to_pix3d_.find(nyu_id);
  if (it == nyu_to_pix3d_.end()) throw Error("unknown NYU-37 class id " + std::to_string(nyu_id));
  return it->second;
}

const std::string& ClassMap::nyu_name(int nyu_id) const {
  const auto it = nyu_names_.find(nyu_id);
  if (it == nyu_names_.end()) throw Error("unknown NYU-37 class id " + std::to_string(nyu_id));
  return it->second;
}

const std::string& ClassMap::pix3d_name(int pix3d_id) const {
  const auto it = pix3d_names_.find(pix3d_id);
  if (it == pix3d_names_.end()) throw Error("unknown Pix3D class id " + std::to_string(pix3d_id));
  return it->second;
}

}  // namespace scenerecon
