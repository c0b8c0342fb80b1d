#include "scenerecon/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "scenerecon/io.hpp"
#include "scenerecon/metrics.hpp"
#include "scenerecon/scene_file.hpp"

namespace scenerecon {
namespace {

constexpr int kCylinderSegments = 32;
constexpr double kMaxPitch = deg_to_rad(15.0);
constexpr double kMaxRoll = deg_to_rad(5.0);
constexpr double kMinDistance = 1.5;
constexpr double kMaxDistance = 6.0;
constexpr double kMinSize = 0.3;
constexpr double kMaxSize = 1.5;
constexpr double kMaxOffsetPixels = 10.0;
constexpr double kLayoutMargin = 0.5;
constexpr int kMaxPlacementTries = 1000;
constexpr std::uint64_t kSeedMask = (std::uint64_t{1} << 53) - 1;

// NYU-37 ids with a Pix3D counterpart, used for random labels.
constexpr int kObjectClasses[] = {3, 4, 5, 6, 7, 10, 14, 17, 24, 25, 29, 32, 35};

std::string two_digits(int v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", v);
  return buf;
}

std::string room_name(int room) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "room_%04d", room);
  return buf;
}

Mesh cylinder_mesh(int segments) {
  Mesh m;
  m.vertices.resize(3, 2 * segments + 2);
  for (int i = 0; i < segments; ++i) {
    const double a = 2 * std::numbers::pi * i / segments;
    m.vertices.col(i) = Vec3(std::cos(a), -1, std::sin(a));
    m.vertices.col(segments + i) = Vec3(std::cos(a), 1, std::sin(a));
  }
  const int bottom = 2 * segments, top = 2 * segments + 1;
  m.vertices.col(bottom) = Vec3(0, -1, 0);
  m.vertices.col(top) = Vec3(0, 1, 0);
  m.faces.resize(3, 4 * segments);
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    m.faces.col(4 * i) = Eigen::Vector3i(i, segments + i, j);
    m.faces.col(4 * i + 1) = Eigen::Vector3i(j, segments + i, segments + j);
    m.faces.col(4 * i + 2) = Eigen::Vector3i(bottom, i, j);
    m.faces.col(4 * i + 3) = Eigen::Vector3i(top, segments + j, segments + i);
  }
  return m;
}

}  // namespace

const char* primitive_name(Primitive p) {
  switch (p) {
    case Primitive::kBox:
      return "box";
    case Primitive::kSphere:
      return "sphere";
    case Primitive::kCylinder:
      return "cylinder";
  }
  return "unknown";
}

Mesh primitive_mesh(Primitive p) {
  switch (p) {
    case Primitive::kBox:
      return box_mesh(OrientedBox{});
    case Primitive::kSphere:
      return normalize_to_unit_cube(icosphere(3));
    case Primitive::kCylinder:
      return normalize_to_unit_cube(cylinder_mesh(kCylinderSegments));
  }
  throw Error("unknown primitive");
}

void SyntheticOptions::validate() const {
  if (rooms < 1) throw Error("synthetic: rooms must be >= 1");
  if (objects < 1) throw Error("synthetic: objects must be >= 1");
  if (!(noise >= 0)) throw Error("synthetic: noise must be >= 0");
  if (points_per_object < 1) throw Error("synthetic: points_per_object must be >= 1");
  if (!(image_width > 0) || !(image_height > 0)) throw Error("synthetic: bad image size");
}

SyntheticScene generate_scene(const SyntheticOptions& options, int room) {
  options.validate();
  std::mt19937_64 rng(mix_seed(options.seed, static_cast<std::uint64_t>(room)));
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto pick = [&rng](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };

  SyntheticScene out;
  SceneSample& s = out.scene;
  s.scene_id = room_name(room);
  s.intrinsics = options.intrinsics;
  s.camera.pitch = uniform(-kMaxPitch, kMaxPitch);
  s.camera.roll = uniform(-kMaxRoll, kMaxRoll);
  const Mat3 r_cam = rotation_from_pose(s.camera);
  const Eigen::Matrix3d k = s.intrinsics.matrix();

  Points all_corners(3, 0);
  for (int i = 0; i < options.objects; ++i) {
    SceneObject obj;
    OrientedBox box;
    Eigen::Matrix<double, 2, 8> pixels;
    // Redraw until every corner lies in front of the camera.
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementTries && !placed; ++attempt) {
      obj.params.size = Vec3(uniform(kMinSize, kMaxSize), uniform(kMinSize, kMaxSize),
                             uniform(kMinSize, kMaxSize));
      obj.params.yaw = uniform(-std::numbers::pi, std::numbers::pi);
      obj.params.distance = uniform(kMinDistance, kMaxDistance);
      obj.params.offset = Vec2(uniform(-kMaxOffsetPixels, kMaxOffsetPixels),
                               uniform(-kMaxOffsetPixels, kMaxOffsetPixels));
      const Vec2 projected(uniform(0.2, 0.8) * options.image_width,
                           uniform(0.2, 0.8) * options.image_height);
      obj.box2d.center = projected - obj.params.offset;
      box = box_from_detection(obj.detection(), s.camera, s.intrinsics);
      const BoxCorners corners = box_corners(box);
      placed = true;
      for (int c = 0; c < 8; ++c) {
        const Vec3 cam = r_cam * corners.col(c);
        if (cam.z() < 0.1) {
          placed = false;
          break;
        }
        pixels.col(c) = (k * (cam / cam.z())).head<2>();
      }
    }
    if (!placed) throw Error("synthetic: could not place object in front of the camera");
    const Vec2 lo = pixels.rowwise().minCoeff();
    const Vec2 hi = pixels.rowwise().maxCoeff();
    // The 2D box is the tight projection; its center stays at cb.
    obj.box2d.width = std::max(2.0 * std::max(hi.x() - obj.box2d.center.x(),
                                              obj.box2d.center.x() - lo.x()),
                               1.0);
    obj.box2d.height = std::max(2.0 * std::max(hi.y() - obj.box2d.center.y(),
                                               obj.box2d.center.y() - lo.y()),
                                1.0);
    obj.class_nyu37 = kObjectClasses[pick(static_cast<int>(std::size(kObjectClasses)))];
    // Kept below 2^53 so the seed survives any JSON reader.
    obj.sample_seed =
        mix_seed(options.seed, (static_cast<std::uint64_t>(room) << 20) + i + 1) & kSeedMask;

    const Primitive prim = static_cast<Primitive>(pick(3));
    const Mesh unit = primitive_mesh(prim);
    obj.cloud = sample_surface(place_in_box(unit, box), options.points_per_object,
                               *obj.sample_seed);
    if (options.noise > 0) {
      std::normal_distribution<double> noise(0.0, options.noise);
      for (Eigen::Index c = 0; c < obj.cloud.cols(); ++c) {
        for (int a = 0; a < 3; ++a) obj.cloud(a, c) += noise(rng);
      }
    }
    all_corners.conservativeResize(3, all_corners.cols() + 8);
    all_corners.rightCols<8>() = box_corners(box);

    out.primitives.push_back(prim);
    out.meshes.push_back(unit);
    s.objects.push_back(std::move(obj));
  }

  // Layout: the objects' bounding box (plus the camera) in a random-yaw
  // frame, padded by a margin.
  s.layout.yaw = uniform(-std::numbers::pi, std::numbers::pi);
  const Mat3 r_layout = rotation_y(s.layout.yaw);
  Points extent(3, all_corners.cols() + 1);
  extent << r_layout.transpose() * all_corners, Vec3::Zero();
  const Vec3 lo = extent.rowwise().minCoeff().array() - kLayoutMargin;
  const Vec3 hi = extent.rowwise().maxCoeff().array() + kLayoutMargin;
  s.layout.center = r_layout * (0.5 * (lo + hi));
  s.layout.size = hi - lo;
  return out;
}

std::vector<std::filesystem::path> write_synthetic(const SyntheticOptions& options,
                                                   const std::filesystem::path& out_dir,
                                                   const ClassMap& classes) {
  options.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  for (int room = 0; room < options.rooms; ++room) {
    SyntheticScene syn = generate_scene(options, room);
    const std::filesystem::path dir = out_dir / syn.scene.scene_id;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t i = 0; i < syn.scene.objects.size(); ++i) {
      SceneObject& obj = syn.scene.objects[i];
      const std::string stem = "object_" + two_digits(static_cast<int>(i));
      obj.mesh_path = stem + ".obj";
      obj.pointcloud_path = stem + ".xyz";
      write_obj(syn.meshes[i], dir / obj.mesh_path);
      write_xyz(obj.cloud, dir / obj.pointcloud_path);
    }
    const std::filesystem::path scene_path = dir / "scene.json";
    save_scene(syn.scene, scene_path, classes);
    written.push_back(scene_path);
  }
  return written;
}

}  // namespace scenerecon
