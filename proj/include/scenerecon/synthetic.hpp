#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scenerecon/class_map.hpp"
#include "scenerecon/fit.hpp"

namespace scenerecon {

enum class Primitive { kBox, kSphere, kCylinder };

const char* primitive_name(Primitive p);

// Object-space primitive normalized to the unit cube [-1/2, 1/2]^3.
Mesh primitive_mesh(Primitive p);

struct SyntheticOptions {
  int rooms{1};
  int objects{3};
  double noise{0.0};  // Gaussian sigma added to sampled points, meters
  std::uint64_t seed{0};
  int points_per_object{2000};
  CameraIntrinsics intrinsics{529.5, 529.5, 320.0, 240.0};
  double image_width{640.0};
  double image_height{480.0};

  void validate() const;
};

struct SyntheticScene {
  SceneSample scene;  // ground truth; object clouds are filled in
  std::vector<Primitive> primitives;
  std::vector<Mesh> meshes;  // object-space, unit cube
};

// Scene `room` of the run described by `options`. Deterministic in
// (options, room).
SyntheticScene generate_scene(const SyntheticOptions& options, int room);

// Writes room_NNNN/{scene.json, object_KK.obj, object_KK.xyz} per room and
// returns the scene file paths in order.
std::vector<std::filesystem::path> write_synthetic(const SyntheticOptions& options,
                                                   const std::filesystem::path& out_dir,
                                                   const ClassMap& classes);

}  // namespace scenerecon
