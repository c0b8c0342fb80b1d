#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace scenerecon {

// NYU-37 semantic classes mapped to Pix3D shape categories. Structural
// classes (wall, floor, ceiling) have no Pix3D counterpart.
class ClassMap {
 public:
  static ClassMap load(const std::filesystem::path& path);
  // The bundled table under the data directory.
  static ClassMap bundled();
  static std::filesystem::path bundled_path();

  int version() const { return version_; }
  bool has_nyu(int nyu_id) const { return nyu_names_.count(nyu_id) != 0; }
  std::optional<int> pix3d(int nyu_id) const;
  const std::string& nyu_name(int nyu_id) const;
  const std::string& pix3d_name(int pix3d_id) const;
  int nyu_count() const { return static_cast<int>(nyu_names_.size()); }

 private:
  int version_{0};
  std::map<int, std::string> nyu_names_;
  std::map<int, std::optional<int>> nyu_to_pix3d_;
  std::map<int, std::string> pix3d_names_;
};

}  // namespace scenerecon
