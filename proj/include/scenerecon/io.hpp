#pragma once

#include <filesystem>

#include "scenerecon/mesh.hpp"

namespace scenerecon {

// Wavefront OBJ: `v` and triangular `f` records only. Face indices may carry
// texture/normal references (`f 1/2/3 ...`); negative indices are relative.
Mesh read_obj(const std::filesystem::path& path);
void write_obj(const Mesh& mesh, const std::filesystem::path& path);

// Whitespace-separated `x y z` per line; extra columns are ignored.
Points read_xyz(const std::filesystem::path& path);
void write_xyz(const Points& points, const std::filesystem::path& path);

// PLY vertex positions, ascii or binary_little_endian.
Points read_ply(const std::filesystem::path& path);

// Dispatches on extension: .xyz, .ply, or .obj (mesh vertices).
Points read_point_cloud(const std::filesystem::path& path);

}  // namespace scenerecon
