#include <doctest.h>

#include <sstream>

#include "scenerecon/canonical_json.hpp"
#include "scenerecon/class_map.hpp"
#include "scenerecon/cli.hpp"
#include "scenerecon/io.hpp"
#include "scenerecon/metrics.hpp"
#include "scenerecon/scene_file.hpp"
#include "scenerecon/synthetic.hpp"
#include "scratch.hpp"

using namespace scenerecon;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

SceneSample base_scene() {
  SceneSample s;
  s.intrinsics = {529.5, 529.5, 320, 240};
  s.camera = {deg_to_rad(-5.0), deg_to_rad(1.0)};
  s.layout.center = Vec3(0, 0, 4);
  s.layout.size = Vec3(8, 3, 10);
  return s;
}

// Object of class 5 whose world-frame center is `center`.
SceneObject object_at(const SceneSample& s, const Vec3& center, std::optional<double> conf = {}) {
  SceneObject o;
  o.class_nyu37 = 5;
  const ProjectedCenter pc = project_center(center, s.camera, s.intrinsics);
  o.box2d = {pc.center().array().round(), 60, 80};
  o.params.offset = pc.center() - o.box2d.center;
  o.params.distance = pc.distance;
  o.params.size = Vec3(0.6, 0.8, 0.5);
  o.confidence = conf;
  return o;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help, version and usage errors") {
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
  const Outcome v = run_cli({"--version"});
  CHECK(v.code == cli::kExitOk);
  CHECK(v.out.find("scenerecon") != std::string::npos);
  CHECK(run_cli({}).code == cli::kExitError);
  CHECK(run_cli({"fit-mesh"}).code == cli::kExitError);
  CHECK(run_cli({"no-such-command"}).code == cli::kExitError);
}

TEST_CASE("missing and malformed inputs exit with an error naming the file") {
  ScratchDir dir("cli_errors");
  const std::string missing = (dir / "missing.xyz").string();
  const Outcome m = run_cli({"fit-mesh", "--target", missing, "--out", (dir / "o.obj").string()});
  CHECK(m.code == cli::kExitError);
  CHECK(m.err.find(missing) != std::string::npos);

  spit(dir / "bad.json", "{\"camera\": [1, 2");
  const Outcome b = run_cli({"eval-detection", "--pred", (dir / "bad.json").string(), "--gt",
                             (dir / "bad.json").string(), "--out", (dir / "r.json").string()});
  CHECK(b.code == cli::kExitError);
  CHECK(b.err.find("bad.json") != std::string::npos);

  const ClassMap classes = ClassMap::bundled();
  SceneSample s = base_scene();
  s.objects.push_back(object_at(s, Vec3(0, 0, 3)));
  nlohmann::json j = scene_to_json(s, classes);
  j["objects"][0]["box2d"]["depth"] = 1;
  write_canonical(j, dir / "extra.json");
  const Outcome u = run_cli({"eval-detection", "--pred", (dir / "extra.json").string(), "--gt",
                             (dir / "extra.json").string(), "--out", (dir / "r.json").string()});
  CHECK(u.code == cli::kExitError);
  CHECK(u.err.find("$.objects[0].box2d.depth: unknown field") != std::string::npos);

  spit(dir / "cfg.json", "{\"weights\": {\"chamfr\": 1}}");
  const Outcome c = run_cli({"gen-synthetic", "--out", (dir / "syn").string(), "--config",
                             (dir / "cfg.json").string()});
  CHECK(c.code == cli::kExitError);
  CHECK(c.err.find("chamfr") != std::string::npos);
}

TEST_CASE("eval-detection on identical scenes") {
  ScratchDir dir("cli_det_same");
  const ClassMap classes = ClassMap::bundled();
  SceneSample s = base_scene();
  s.objects.push_back(object_at(s, Vec3(-1, 0, 3)));
  s.objects.push_back(object_at(s, Vec3(1, 0.2, 4)));
  s.objects.back().class_nyu37 = 7;
  save_scene(s, dir / "s.json", classes);
  const Outcome r = run_cli({"eval-detection", "--pred", (dir / "s.json").string(), "--gt",
                             (dir / "s.json").string(), "--out", (dir / "r.json").string()});
  REQUIRE(r.code == cli::kExitOk);
  const nlohmann::json rep = read_json(dir / "r.json");
  CHECK(rep["mAP"] == 1.0);
  CHECK(rep["classes_in_mean"] == 2);
  CHECK(rep["layout_iou"].get<double>() == doctest::Approx(1.0));
  CHECK(rep["camera_mae_deg"]["pitch"] == 0.0);
  CHECK(rep["camera_mae_deg"]["roll"] == 0.0);
  CHECK(rep["config"] == read_json(std::filesystem::path(SCENERECON_TEST_DATA_DIR) /
                                   "default_config.json"));
}

TEST_CASE("eval-detection hand case through scene files") {
  ScratchDir dir("cli_det_hand");
  const ClassMap classes = ClassMap::bundled();
  SceneSample gt = base_scene();
  gt.objects.push_back(object_at(gt, Vec3(-1, 0, 3)));
  gt.objects.push_back(object_at(gt, Vec3(1.5, 0, 5)));
  SceneSample pred = base_scene();
  pred.objects.push_back(object_at(pred, Vec3(-1, 0, 3), 0.9));
  pred.objects.push_back(object_at(pred, Vec3(0, 0, 8), 0.8));
  pred.objects.push_back(object_at(pred, Vec3(1.5, 0, 5), 0.7));
  save_scene(gt, dir / "gt.json", classes);
  save_scene(pred, dir / "pred.json", classes);
  const Outcome r = run_cli({"eval-detection", "--pred", (dir / "pred.json").string(), "--gt",
                             (dir / "gt.json").string(), "--out", (dir / "r.json").string()});
  REQUIRE(r.code == cli::kExitOk);
  const nlohmann::json rep = read_json(dir / "r.json");
  CHECK(rep["mAP"].get<double>() == doctest::Approx(5.0 / 6).epsilon(1e-8));
  CHECK(rep["per_class"]["5"]["name"] == "chair");
}

TEST_CASE("gen-synthetic is deterministic and consistent with eval-mesh") {
  ScratchDir dir("cli_gen");
  const std::vector<std::string> common{"--rooms", "2", "--objects", "2", "--points", "3000",
                                        "--seed", "7"};
  auto args_a = common, args_b = common;
  args_a.insert(args_a.begin(), {"gen-synthetic", "--out", (dir / "a").string()});
  args_b.insert(args_b.begin(), {"gen-synthetic", "--out", (dir / "b").string()});
  REQUIRE(run_cli(args_a).code == cli::kExitOk);
  REQUIRE(run_cli(args_b).code == cli::kExitOk);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir / "a");
    CHECK(slurp(e.path()) == slurp(dir / "b" / rel.string()));
    ++files;
  }
  CHECK(files == 2 * 5);

  const std::string scene = (dir / "a/room_0000/scene.json").string();
  REQUIRE(run_cli({"eval-mesh", "--scene", scene, "--out", (dir / "m.json").string()}).code ==
          cli::kExitOk);
  const nlohmann::json rep = read_json(dir / "m.json");
  CHECK(rep["mean_chamfer"].get<double>() < 1e-4);

  const ClassMap classes = ClassMap::bundled();
  const SceneSample s = load_scene(scene, classes);
  save_scene(s, dir / "again.json", classes);
  CHECK(slurp(dir / "again.json") == slurp(scene));
}

TEST_CASE("assemble and refine-scene on a synthetic room") {
  ScratchDir dir("cli_assemble");
  REQUIRE(run_cli({"gen-synthetic", "--out", (dir / "syn").string(), "--objects", "2", "--points",
                   "2000", "--seed", "3"})
              .code == cli::kExitOk);
  const auto scene = dir / "syn/room_0000/scene.json";
  REQUIRE(run_cli({"assemble", "--scene", scene.string(), "--out", (dir / "asm").string()}).code ==
          cli::kExitOk);
  const ClassMap classes = ClassMap::bundled();
  const SceneSample s = load_scene(scene, classes);
  const auto boxes = object_boxes(s);
  for (int i = 0; i < 2; ++i) {
    const Mesh placed = read_obj(dir / ("asm/object_0" + std::to_string(i) + ".obj"));
    const Mesh source = read_obj(dir / ("syn/room_0000/object_0" + std::to_string(i) + ".obj"));
    const Mesh expected = place_in_box(normalize_to_unit_cube(source), boxes[i]);
    CHECK((placed.vertices - expected.vertices).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK(read_obj(dir / "asm/layout.obj").faces.cols() == 12);

  SceneSample perturbed = s;
  for (auto& o : perturbed.objects) o.params.distance *= 1.1;
  save_scene(perturbed, dir / "syn/room_0000/perturbed.json", classes);
  const auto refined = dir / "out/refined.json";
  const Outcome r = run_cli({"refine-scene", "--scene",
                             (dir / "syn/room_0000/perturbed.json").string(), "--out",
                             refined.string()});
  CHECK((r.code == cli::kExitOk || r.code == cli::kExitNotConverged));
  const nlohmann::json rep = read_json(dir / "out/refined_report.json");
  CHECK(rep["global_loss"]["final"].get<double>() < rep["global_loss"]["initial"].get<double>());
  SceneSample back = load_scene(refined, classes);
  CHECK_NOTHROW(load_object_clouds(back, refined));
  CHECK(std::filesystem::exists(dir / "out/refined_trace.csv"));
}

TEST_CASE("fit-mesh writes a deterministic mesh, trace and report") {
  ScratchDir dir("cli_fit");
  write_xyz(sample_surface(icosphere(3), 3000, 1), dir / "t.xyz");
  for (const char* name : {"a.obj", "b.obj"}) {
    const Outcome r = run_cli({"fit-mesh", "--target", (dir / "t.xyz").string(), "--out",
                               (dir / name).string(), "--seed", "2"});
    CHECK((r.code == cli::kExitOk || r.code == cli::kExitNotConverged));
  }
  for (const char* suffix : {".obj", "_deformed.obj", "_trace.csv", "_report.json"}) {
    CHECK(slurp(dir / (std::string("a") + suffix)) == slurp(dir / (std::string("b") + suffix)));
    CHECK_FALSE(slurp(dir / (std::string("a") + suffix)).empty());
  }
  const Outcome t = run_cli({"modify-topology", "--mesh", (dir / "a.obj").string(), "--target",
                             (dir / "t.xyz").string(), "--out", (dir / "m.obj").string()});
  CHECK(t.code == cli::kExitOk);
  CHECK(read_obj(dir / "m.obj").faces.cols() == read_obj(dir / "a.obj").faces.cols());
}

}  // TEST_SUITE
