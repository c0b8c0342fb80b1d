#include "scenerecon/scene_file.hpp"

#include "scenerecon/canonical_json.hpp"
#include "scenerecon/io.hpp"

namespace scenerecon {
namespace {

using nlohmann::json;

template <int N>
Eigen::Matrix<double, N, 1> get_vector(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != N) {
    throw Error(where + ": expected array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out(i) = get_number(j[i], where + "[" + std::to_string(i) + "]");
  return out;
}

template <typename Derived>
json vector_json(const Eigen::MatrixBase<Derived>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

double positive(double v, const std::string& where) {
  if (!(v > 0)) throw Error(where + ": must be positive");
  return v;
}

template <int N>
Eigen::Matrix<double, N, 1> positive_vector(const json& j, const std::string& where) {
  const auto v = get_vector<N>(j, where);
  for (int i = 0; i < N; ++i) positive(v(i), where + "[" + std::to_string(i) + "]");
  return v;
}

double pose_angle(const json& j, const std::string& where) {
  const double deg = get_number(j, where);
  if (!(deg > -90 && deg < 90)) throw Error(where + ": must lie in (-90, 90) degrees");
  return deg_to_rad(deg);
}

OrientedBox box_from_json(const json& j, const std::string& where) {
  reject_unknown(j, {"center", "size", "yaw"}, where);
  OrientedBox b;
  b.center = get_vector<3>(required(j, "center", where), where + ".center");
  b.size = positive_vector<3>(required(j, "size", where), where + ".size");
  b.yaw = get_number(required(j, "yaw", where), where + ".yaw");
  return b;
}

json box_json(const OrientedBox& b) {
  return {{"center", vector_json(b.center)}, {"size", vector_json(b.size)}, {"yaw", b.yaw}};
}

SceneObject object_from_json(const json& j, const std::string& where, const ClassMap& classes) {
  reject_unknown(j,
                 {"class_nyu37", "class_pix3d", "box2d", "params", "confidence",
                  "pointcloud_path", "mesh_path", "sample_seed"},
                 where);
  SceneObject o;
  o.class_nyu37 =
      static_cast<int>(get_integer(required(j, "class_nyu37", where), where + ".class_nyu37"));
  if (!classes.has_nyu(o.class_nyu37)) {
    throw Error(where + ".class_nyu37: unknown NYU-37 class " + std::to_string(o.class_nyu37));
  }
  if (j.contains("class_pix3d")) {
    const json& p = j.at("class_pix3d");
    const auto expected = classes.pix3d(o.class_nyu37);
    const std::optional<int> got =
        p.is_null() ? std::nullopt
                    : std::optional<int>(static_cast<int>(get_integer(p, where + ".class_pix3d")));
    if (got != expected) {
      throw Error(where + ".class_pix3d: does not match the class map for NYU class " +
                  std::to_string(o.class_nyu37));
    }
  }

  const std::string bw = where + ".box2d";
  const json& b = required(j, "box2d", where);
  reject_unknown(b, {"cb", "w", "h"}, bw);
  o.box2d.center = get_vector<2>(required(b, "cb", bw), bw + ".cb");
  o.box2d.width = positive(get_number(required(b, "w", bw), bw + ".w"), bw + ".w");
  o.box2d.height = positive(get_number(required(b, "h", bw), bw + ".h"), bw + ".h");

  const std::string pw = where + ".params";
  const json& p = required(j, "params", where);
  reject_unknown(p, {"delta", "d", "size", "yaw"}, pw);
  o.params.offset = get_vector<2>(required(p, "delta", pw), pw + ".delta");
  o.params.distance = positive(get_number(required(p, "d", pw), pw + ".d"), pw + ".d");
  o.params.size = positive_vector<3>(required(p, "size", pw), pw + ".size");
  o.params.yaw = get_number(required(p, "yaw", pw), pw + ".yaw");

  if (j.contains("confidence")) {
    o.confidence = get_number(j.at("confidence"), where + ".confidence");
  }
  if (j.contains("pointcloud_path")) {
    o.pointcloud_path = get_string(j.at("pointcloud_path"), where + ".pointcloud_path");
  }
  if (j.contains("mesh_path")) {
    o.mesh_path = get_string(j.at("mesh_path"), where + ".mesh_path");
  }
  if (j.contains("sample_seed")) {
    const long long s = get_integer(j.at("sample_seed"), where + ".sample_seed");
    if (s < 0) throw Error(where + ".sample_seed: must be non-negative");
    o.sample_seed = static_cast<std::uint64_t>(s);
  }
  return o;
}

}  // namespace

SceneSample scene_from_json(const json& doc, const ClassMap& classes) {
  const std::string root = "$";
  reject_unknown(doc, {"scene_id", "camera", "layout", "objects"}, root);
  SceneSample s;
  if (doc.contains("scene_id")) s.scene_id = get_string(doc.at("scene_id"), "$.scene_id");

  const json& cam = required(doc, "camera", root);
  reject_unknown(cam, {"K", "pitch_deg", "roll_deg"}, "$.camera");
  const Eigen::Vector4d k = get_vector<4>(required(cam, "K", "$.camera"), "$.camera.K");
  s.intrinsics = {positive(k(0), "$.camera.K[0]"), positive(k(1), "$.camera.K[1]"), k(2), k(3)};
  s.camera.pitch = pose_angle(required(cam, "pitch_deg", "$.camera"), "$.camera.pitch_deg");
  s.camera.roll = pose_angle(required(cam, "roll_deg", "$.camera"), "$.camera.roll_deg");

  s.layout = box_from_json(required(doc, "layout", root), "$.layout");

  const json& objs = required(doc, "objects", root);
  if (!objs.is_array()) throw Error("$.objects: expected array");
  for (std::size_t i = 0; i < objs.size(); ++i) {
    s.objects.push_back(
        object_from_json(objs[i], "$.objects[" + std::to_string(i) + "]", classes));
  }
  return s;
}

json scene_to_json(const SceneSample& scene, const ClassMap& classes) {
  json doc;
  if (!scene.scene_id.empty()) doc["scene_id"] = scene.scene_id;
  doc["camera"] = {{"K",
                    {scene.intrinsics.fx, scene.intrinsics.fy, scene.intrinsics.cx,
                     scene.intrinsics.cy}},
                   {"pitch_deg", rad_to_deg(scene.camera.pitch)},
                   {"roll_deg", rad_to_deg(scene.camera.roll)}};
  doc["layout"] = box_json(scene.layout);
  json objs = json::array();
  for (const auto& o : scene.objects) {
    json j;
    j["class_nyu37"] = o.class_nyu37;
    const auto pix = classes.pix3d(o.class_nyu37);
    j["class_pix3d"] = pix ? json(*pix) : json(nullptr);
    j["box2d"] = {{"cb", vector_json(o.box2d.center)}, {"w", o.box2d.width}, {"h", o.box2d.height}};
    j["params"] = {{"delta", vector_json(o.params.offset)},
                   {"d", o.params.distance},
                   {"size", vector_json(o.params.size)},
                   {"yaw", o.params.yaw}};
    if (o.confidence) j["confidence"] = *o.confidence;
    if (!o.pointcloud_path.empty()) j["pointcloud_path"] = o.pointcloud_path;
    if (!o.mesh_path.empty()) j["mesh_path"] = o.mesh_path;
    if (o.sample_seed) j["sample_seed"] = *o.sample_seed;
    objs.push_back(std::move(j));
  }
  doc["objects"] = std::move(objs);
  return doc;
}

SceneSample load_scene(const std::filesystem::path& path, const ClassMap& classes) {
  const json doc = read_json(path);
  try {
    return scene_from_json(doc, classes);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_scene(const SceneSample& scene, const std::filesystem::path& path,
                const ClassMap& classes) {
  write_canonical(scene_to_json(scene, classes), path);
}

std::filesystem::path resolve_relative(const std::filesystem::path& scene_path,
                                       const std::string& relative) {
  const std::filesystem::path p(relative);
  if (p.is_absolute()) return p;
  return scene_path.parent_path() / p;
}

void load_object_clouds(SceneSample& scene, const std::filesystem::path& scene_path) {
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    auto& o = scene.objects[i];
    if (o.pointcloud_path.empty()) {
      throw Error(scene_path.string() + ": $.objects[" + std::to_string(i) +
                  "].pointcloud_path: missing");
    }
    o.cloud = read_point_cloud(resolve_relative(scene_path, o.pointcloud_path));
  }
}

}  // namespace scenerecon
