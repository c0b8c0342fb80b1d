#include <doctest.h>

#include <cstring>

#include "scenerecon/canonical_json.hpp"
#include "scenerecon/class_map.hpp"
#include "scenerecon/io.hpp"
#include "scenerecon/scene_file.hpp"
#include "scratch.hpp"

using namespace scenerecon;

namespace {

SceneSample sample_scene() {
  SceneSample s;
  s.scene_id = "room_a";
  s.intrinsics = {529.5, 529.5, 320, 240};
  s.camera = {deg_to_rad(-10.0), deg_to_rad(2.5)};
  s.layout.center = Vec3(0.5, -0.2, 3);
  s.layout.size = Vec3(5, 3, 6);
  s.layout.yaw = 0.25;
  SceneObject o;
  o.class_nyu37 = 5;
  o.box2d = {Vec2(300, 250), 80, 120};
  o.params.offset = Vec2(3, -2);
  o.params.distance = 2.5;
  o.params.size = Vec3(0.5, 0.9, 0.6);
  o.params.yaw = -1.2;
  o.confidence = 0.75;
  o.mesh_path = "object_00.obj";
  o.pointcloud_path = "object_00.xyz";
  o.sample_seed = 123456789;
  s.objects.push_back(o);
  o.class_nyu37 = 1;
  o.confidence.reset();
  o.sample_seed.reset();
  s.objects.push_back(o);
  return s;
}

template <typename F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("obj round trip") {
  ScratchDir dir("io_obj");
  const Mesh m = icosphere(1);
  write_obj(m, dir / "m.obj");
  const Mesh r = read_obj(dir / "m.obj");
  CHECK(r.faces == m.faces);
  CHECK((r.vertices - m.vertices).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("obj reader handles common variants") {
  ScratchDir dir("io_obj_variants");
  spit(dir / "quad.obj",
       "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\n"
       "f 1/1/1 2/1/1 3/1/1 4/1/1\n");
  const Mesh q = read_obj(dir / "quad.obj");
  CHECK(q.vertices.cols() == 4);
  CHECK(q.faces.cols() == 2);
  spit(dir / "rel.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
  CHECK(read_obj(dir / "rel.obj").faces.col(0) == Eigen::Vector3i(0, 1, 2));
  spit(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nf 1 2 7\n");
  CHECK(error_of([&] { read_obj(dir / "bad.obj"); }).find("bad.obj") != std::string::npos);
  CHECK(error_of([&] { read_obj(dir / "none.obj"); }).find("none.obj") != std::string::npos);
}

TEST_CASE("point cloud formats") {
  ScratchDir dir("io_points");
  Points p(3, 3);
  p << 0.1, 1, 2, -3, 4.5, 5, 6, 7, 8.25;
  write_xyz(p, dir / "p.xyz");
  CHECK(read_xyz(dir / "p.xyz") == p);
  CHECK(read_point_cloud(dir / "p.xyz") == p);

  spit(dir / "a.ply",
       "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
       "property float z\nproperty uchar red\nelement face 0\n"
       "property list uchar int vertex_indices\nend_header\n"
       "0.1 -3 6 1\n1 4.5 7 2\n2 5 8.25 3\n");
  CHECK((read_ply(dir / "a.ply") - p).cwiseAbs().maxCoeff() < 1e-6);

  std::string bin =
      "ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty double x\n"
      "property double y\nproperty double z\nend_header\n";
  for (int c = 0; c < 3; ++c) {
    for (int a = 0; a < 3; ++a) {
      char bytes[8];
      const double v = p(a, c);
      std::memcpy(bytes, &v, 8);
      bin.append(bytes, 8);
    }
  }
  spit(dir / "b.ply", bin);
  CHECK(read_point_cloud(dir / "b.ply") == p);

  spit(dir / "short.ply",
       "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
       "property float z\nend_header\n0 0 0\n");
  CHECK_THROWS_AS(read_ply(dir / "short.ply"), Error);
  spit(dir / "nan.xyz", "0 0 nan\n");
  CHECK_THROWS_AS(read_xyz(dir / "nan.xyz"), Error);
  CHECK_THROWS_AS(read_point_cloud(dir / "p.csv"), Error);
}

TEST_CASE("canonical json formatting") {
  const nlohmann::json j = {{"b", 0.1}, {"a", -0.0}, {"c", {1, 2.5}}, {"d", "x"}};
  CHECK(canonical_dump(j) ==
        "{\n  \"a\": 0,\n  \"b\": 0.1,\n  \"c\": [\n    1,\n    2.5\n  ],\n  \"d\": \"x\"\n}\n");
  CHECK(canonical_dump(nlohmann::json{{"pi", 3.14159265358979}}) == "{\n  \"pi\": 3.14159265\n}\n");
}

TEST_CASE("class map") {
  const ClassMap m = ClassMap::bundled();
  CHECK(m.nyu_count() == 37);
  CHECK(m.version() >= 1);
  for (int id = 1; id <= 37; ++id) CHECK(m.has_nyu(id));
  CHECK_FALSE(m.has_nyu(0));
  CHECK_FALSE(m.has_nyu(38));
  CHECK(m.nyu_name(5) == "chair");
  REQUIRE(m.pix3d(5).has_value());
  CHECK(m.pix3d_name(*m.pix3d(5)) == "chair");
  CHECK_FALSE(m.pix3d(1).has_value());

  ScratchDir dir("io_class_map");
  spit(dir / "bad.json", "{\"version\": 1, \"pix3d\": [], \"nyu37\": [], \"extra\": 1}");
  CHECK(error_of([&] { ClassMap::load(dir / "bad.json"); }).find("extra") != std::string::npos);
}

TEST_CASE("scene files round trip byte for byte") {
  ScratchDir dir("io_scene");
  const ClassMap classes = ClassMap::bundled();
  const SceneSample s = sample_scene();
  save_scene(s, dir / "a.json", classes);
  const SceneSample r = load_scene(dir / "a.json", classes);
  save_scene(r, dir / "b.json", classes);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  CHECK(r.camera.pitch == doctest::Approx(s.camera.pitch));
  CHECK(r.objects.size() == 2);
  CHECK(r.objects[0].sample_seed == s.objects[0].sample_seed);
  CHECK(r.objects[0].confidence == doctest::Approx(0.75));
  CHECK_FALSE(r.objects[1].confidence.has_value());
  CHECK(r.objects[1].params.yaw == doctest::Approx(-1.2));

  const nlohmann::json doc = read_json(dir / "a.json");
  CHECK(doc["camera"]["pitch_deg"].get<double>() == doctest::Approx(-10.0));
  CHECK(doc["objects"][0]["class_pix3d"] == *classes.pix3d(5));
  CHECK(doc["objects"][1]["class_pix3d"].is_null());
}

TEST_CASE("scene validation errors carry a path") {
  const ClassMap classes = ClassMap::bundled();
  const nlohmann::json good = scene_to_json(sample_scene(), classes);
  CHECK_NOTHROW(scene_from_json(good, classes));

  nlohmann::json j = good;
  j["objects"][1]["params"]["foo"] = 1;
  CHECK(error_of([&] { scene_from_json(j, classes); }) == "$.objects[1].params.foo: unknown field");
  j = good;
  j["objects"][0]["params"]["d"] = -1;
  CHECK(error_of([&] { scene_from_json(j, classes); }).find("$.objects[0].params.d") == 0);
  j = good;
  j["camera"]["pitch_deg"] = 95;
  CHECK(error_of([&] { scene_from_json(j, classes); }).find("$.camera.pitch_deg") == 0);
  j = good;
  j["objects"][0]["class_nyu37"] = 99;
  CHECK(error_of([&] { scene_from_json(j, classes); }).find("$.objects[0].class_nyu37") == 0);
  j = good;
  j["objects"][0]["class_pix3d"] = 8;
  CHECK(error_of([&] { scene_from_json(j, classes); }).find("class_pix3d") != std::string::npos);
  j = good;
  j.erase("layout");
  CHECK(error_of([&] { scene_from_json(j, classes); }).find("layout") != std::string::npos);

  ScratchDir dir("io_scene_bad");
  spit(dir / "broken.json", "{\"camera\": ");
  CHECK(error_of([&] { load_scene(dir / "broken.json", classes); }).find("broken.json") !=
        std::string::npos);
}

TEST_CASE("object clouds resolve relative to the scene file") {
  ScratchDir dir("io_clouds");
  std::filesystem::create_directories(dir / "sub");
  const ClassMap classes = ClassMap::bundled();
  SceneSample s = sample_scene();
  s.objects.resize(1);
  save_scene(s, dir / "sub/scene.json", classes);
  Points p = Points::Random(3, 20);
  write_xyz(p, dir / "sub/object_00.xyz");
  SceneSample r = load_scene(dir / "sub/scene.json", classes);
  load_object_clouds(r, dir / "sub/scene.json");
  CHECK((r.objects[0].cloud - p).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(resolve_relative(dir / "sub/scene.json", "x.obj") == dir / "sub/x.obj");
  CHECK(resolve_relative(dir / "sub/scene.json", "/abs/x.obj") == "/abs/x.obj");
}

}  // TEST_SUITE
