#include "scenerecon/cli.hpp"

#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "scenerecon/canonical_json.hpp"
#include "scenerecon/class_map.hpp"
#include "scenerecon/config.hpp"
#include "scenerecon/io.hpp"
#include "scenerecon/metrics.hpp"
#include "scenerecon/scene_file.hpp"
#include "scenerecon/synthetic.hpp"

namespace scenerecon::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonOptions {
  std::string config_path;
  std::string class_map_path;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "JSON config overriding the defaults");
  cmd->add_option("--class-map", common.class_map_path, "NYU-37 to Pix3D class map JSON");
  cmd->add_option("--seed", common.seed, "Random seed (overrides the config)");
}

ToolConfig resolve_config(const CommonOptions& common) {
  ToolConfig cfg = common.config_path.empty() ? ToolConfig{} : ToolConfig::load(common.config_path);
  if (common.seed) cfg.seed = *common.seed;
  cfg.validate();
  return cfg;
}

ClassMap resolve_classes(const CommonOptions& common) {
  return common.class_map_path.empty() ? ClassMap::bundled() : ClassMap::load(common.class_map_path);
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  return out.parent_path() / (out.stem().string() + suffix);
}

void ensure_parent(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw Error("cannot create " + parent.string() + ": " + ec.message());
}

json trace_summary(const LossTrace& trace) {
  return {{"initial", trace.total.front()},
          {"final", trace.total.back()},
          {"accepted_steps", static_cast<int>(trace.total.size()) - 1}};
}

int fit_mesh(const std::string& target, const std::string& out_path, const ToolConfig& cfg,
             std::ostream& out) {
  const Points points = read_point_cloud(target);
  const TemplateFit fit = fit_template(points, cfg.fit_config());
  const fs::path out_file(out_path);
  ensure_parent(out_file);
  write_obj(fit.mesh, out_file);
  write_obj(fit.deformed, sibling(out_file, "_deformed.obj"));
  fit.trace.write_csv(sibling(out_file, "_trace.csv"));
  json report = {
      {"converged", fit.converged},
      {"loss", trace_summary(fit.trace)},
      {"template_vertices", static_cast<int>(fit.deformed.vertices.cols())},
      {"edges_cut", fit.edge_report.cut_count()},
      {"edges_scored", static_cast<int>(fit.edge_report.edges.cols())},
      {"faces", static_cast<int>(fit.mesh.faces.cols())},
      {"components", connected_components(fit.mesh)},
      {"boundary_loops", static_cast<int>(boundary_loops(fit.mesh).size())},
      {"config", cfg.to_json()}};
  write_canonical(report, sibling(out_file, "_report.json"));
  out << "wrote " << out_file.string() << " (" << fit.edge_report.cut_count() << " edges cut, "
      << connected_components(fit.mesh) << " components)\n";
  return fit.converged ? kExitOk : kExitNotConverged;
}

int modify_topology_cmd(const std::string& mesh_path, const std::string& target,
                        const std::string& out_path, const ToolConfig& cfg, std::ostream& out) {
  const Mesh mesh = read_obj(mesh_path);
  const Points points = read_point_cloud(target);
  const FitConfig fc = cfg.fit_config();
  const TopologyResult topo = modify_topology(mesh, target_from_points(points, fc.target_neighbors), fc);
  const fs::path out_file(out_path);
  ensure_parent(out_file);
  write_obj(topo.mesh, out_file);
  json report = {{"edges_cut", topo.edge_report.cut_count()},
                 {"edges_scored", static_cast<int>(topo.edge_report.edges.cols())},
                 {"faces", static_cast<int>(topo.mesh.faces.cols())},
                 {"components", connected_components(topo.mesh)},
                 {"config", cfg.to_json()}};
  write_canonical(report, sibling(out_file, "_report.json"));
  out << "wrote " << out_file.string() << '\n';
  return kExitOk;
}

int eval_detection(const std::string& pred_path, const std::string& gt_path,
                   std::optional<double> iou_flag, const std::string& out_path,
                   ToolConfig cfg, const ClassMap& classes, std::ostream& out) {
  if (iou_flag) cfg.metrics.iou_threshold = *iou_flag;
  cfg.validate();
  const SceneSample pred = load_scene(pred_path, classes);
  const SceneSample gt = load_scene(gt_path, classes);
  std::vector<DetectionRecord> dets;
  const auto pred_boxes = object_boxes(pred);
  for (std::size_t i = 0; i < pred.objects.size(); ++i) {
    dets.push_back({pred_boxes[i], pred.objects[i].class_nyu37,
                    pred.objects[i].confidence.value_or(1.0)});
  }
  std::vector<GroundTruthBox> truth;
  const auto gt_boxes = object_boxes(gt);
  for (std::size_t i = 0; i < gt.objects.size(); ++i) {
    truth.push_back({gt_boxes[i], gt.objects[i].class_nyu37});
  }
  const ApReport ap = average_precision(dets, truth, cfg.metrics.iou_threshold);
  json per_class = json::object();
  for (const auto& [label, c] : ap.per_class) {
    per_class[std::to_string(label)] = {{"name", classes.nyu_name(label)},
                                        {"ap", c.ap},
                                        {"gt_count", c.gt_count},
                                        {"detection_count", c.detection_count}};
  }
  const CameraPose pred_pose[] = {pred.camera};
  const CameraPose gt_pose[] = {gt.camera};
  const CameraMae mae = camera_mae(pred_pose, gt_pose);
  const double layout_iou = iou3d(pred.layout, gt.layout);
  json report = {{"per_class", per_class},
                 {"mAP", ap.mean_ap},
                 {"classes_in_mean", ap.classes_in_mean},
                 {"layout_iou", layout_iou},
                 {"camera_mae_deg", {{"pitch", mae.pitch_deg}, {"roll", mae.roll_deg}}},
                 {"conventions",
                  {{"iou_threshold", cfg.metrics.iou_threshold},
                   {"ap_interpolation", cfg.metrics.ap_interpolation},
                   {"true_positive", "iou > threshold, greedy by confidence"},
                   {"classes_without_gt", "excluded from mean"},
                   {"class_labels", "nyu37"}}},
                 {"config", cfg.to_json()}};
  const fs::path out_file(out_path);
  ensure_parent(out_file);
  write_canonical(report, out_file);
  out << "mAP " << ap.mean_ap << " over " << ap.classes_in_mean << " classes\n";
  return kExitOk;
}

std::vector<Mesh> load_meshes(const SceneSample& scene, const fs::path& scene_path) {
  std::vector<Mesh> meshes;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& o = scene.objects[i];
    if (o.mesh_path.empty()) {
      throw Error(scene_path.string() + ": $.objects[" + std::to_string(i) +
                  "].mesh_path: missing");
    }
    meshes.push_back(read_obj(resolve_relative(scene_path, o.mesh_path)));
  }
  return meshes;
}

// Re-expresses a path stored relative to `from_scene` so it resolves from
// `to_scene`.
std::string rebase(const std::string& stored, const fs::path& from_scene,
                   const fs::path& to_scene) {
  if (stored.empty() || fs::path(stored).is_absolute()) return stored;
  const fs::path target = fs::weakly_canonical(resolve_relative(from_scene, stored));
  const fs::path base = fs::weakly_canonical(fs::absolute(to_scene).parent_path());
  return target.lexically_relative(base).generic_string();
}

int refine_scene_cmd(const std::string& scene_path, const std::string& gt_path,
                     const std::string& out_path, const ToolConfig& cfg,
                     const ClassMap& classes, std::ostream& out) {
  SceneSample scene = load_scene(scene_path, classes);
  load_object_clouds(scene, scene_path);
  const std::vector<Mesh> meshes = load_meshes(scene, scene_path);
  std::optional<CooperativeTargets> targets;
  if (!gt_path.empty()) {
    const SceneSample gt = load_scene(gt_path, classes);
    if (gt.objects.size() != scene.objects.size()) {
      throw Error(gt_path + ": object count differs from " + scene_path);
    }
    CooperativeTargets t;
    for (const auto& b : object_boxes(gt)) t.objects.push_back(box_corners(b));
    t.layout = box_corners(gt.layout);
    targets = std::move(t);
  }
  const SceneRefinement refined = refine_scene(scene, meshes, cfg.fit_config(), targets);

  const fs::path out_file(out_path);
  ensure_parent(out_file);
  SceneSample result = scene;
  result.camera = refined.camera;
  for (std::size_t i = 0; i < result.objects.size(); ++i) {
    auto& o = result.objects[i];
    o.params = refined.params[i];
    o.pointcloud_path = rebase(o.pointcloud_path, scene_path, out_file);
    o.mesh_path = rebase(o.mesh_path, scene_path, out_file);
  }
  save_scene(result, out_file, classes);
  refined.trace.write_csv(sibling(out_file, "_trace.csv"));
  json report = {{"converged", refined.converged},
                 {"global_loss", {{"initial", refined.initial_global},
                                  {"final", refined.final_global}}},
                 {"loss", trace_summary(refined.trace)},
                 {"cooperative", targets.has_value()},
                 {"config", cfg.to_json()}};
  write_canonical(report, sibling(out_file, "_report.json"));
  out << "L_g " << refined.initial_global << " -> " << refined.final_global << '\n';
  return refined.converged ? kExitOk : kExitNotConverged;
}

int assemble_cmd(const std::string& scene_path, const std::string& out_dir,
                 const ClassMap& classes, std::ostream& out) {
  const SceneSample scene = load_scene(scene_path, classes);
  const AssembledScene assembled = assemble(scene, load_meshes(scene, scene_path));
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < assembled.objects.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "object_%02zu.obj", i);
    write_obj(assembled.objects[i], dir / name);
  }
  write_obj(assembled.layout, dir / "layout.obj");
  out << "wrote " << assembled.objects.size() << " objects and layout to " << dir.string()
      << '\n';
  return kExitOk;
}

int eval_mesh_cmd(const std::string& pred, const std::string& gt, const std::string& scene_path,
                  std::optional<int> samples, const std::string& out_path, ToolConfig cfg,
                  const ClassMap& classes, std::ostream& out) {
  if (samples) cfg.metrics.surface_samples = *samples;
  cfg.validate();
  MeshChamferOptions opts;
  opts.samples = cfg.metrics.surface_samples;
  opts.seed = cfg.seed;
  opts.icp = cfg.metrics.icp;
  json results = json::array();
  double total = 0;
  if (!scene_path.empty()) {
    SceneSample scene = load_scene(scene_path, classes);
    load_object_clouds(scene, scene_path);
    const AssembledScene assembled = assemble(scene, load_meshes(scene, scene_path));
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      MeshChamferOptions o = opts;
      const auto& obj = scene.objects[i];
      if (!samples && obj.sample_seed) {
        // Reproduce the sampling that produced the cloud.
        o.samples = static_cast<int>(obj.cloud.cols());
        o.seed = *obj.sample_seed;
      }
      const double d = eval_mesh_chamfer(assembled.objects[i], obj.cloud, o);
      total += d;
      results.push_back({{"object", static_cast<int>(i)}, {"chamfer", d}});
    }
    total /= static_cast<double>(std::max<std::size_t>(scene.objects.size(), 1));
  } else {
    if (pred.empty() || gt.empty()) throw Error("eval-mesh: give --scene or both --pred and --gt");
    total = eval_mesh_chamfer(read_obj(pred), read_point_cloud(gt), opts);
    results.push_back({{"object", 0}, {"chamfer", total}});
  }
  json report = {{"objects", results}, {"mean_chamfer", total}, {"config", cfg.to_json()}};
  const fs::path out_file(out_path);
  ensure_parent(out_file);
  write_canonical(report, out_file);
  out << "mean chamfer " << total << '\n';
  return kExitOk;
}

int gen_synthetic_cmd(SyntheticOptions opts, const std::string& out_dir, const ClassMap& classes,
                      std::ostream& out) {
  const auto written = write_synthetic(opts, out_dir, classes);
  out << "wrote " << written.size() << " scenes to " << out_dir << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene reconstruction toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "scenerecon 0.1.0");

  CommonOptions common;
  std::function<int()> action;

  // fit-mesh
  std::string target, out_path;
  auto* fit_cmd = app.add_subcommand("fit-mesh", "Fit a template sphere to a point cloud");
  fit_cmd->add_option("--target", target, "Target point cloud (.xyz, .ply, .obj)")->required();
  fit_cmd->add_option("--out", out_path, "Output OBJ")->required();
  add_common(fit_cmd, common);
  fit_cmd->callback([&] {
    action = [&] { return fit_mesh(target, out_path, resolve_config(common), out); };
  });

  // modify-topology
  std::string mesh_path;
  auto* topo_cmd = app.add_subcommand("modify-topology", "Cut low-density edges of a mesh");
  topo_cmd->add_option("--mesh", mesh_path, "Input OBJ")->required();
  topo_cmd->add_option("--target", target, "Target point cloud")->required();
  topo_cmd->add_option("--out", out_path, "Output OBJ")->required();
  add_common(topo_cmd, common);
  topo_cmd->callback([&] {
    action = [&] {
      return modify_topology_cmd(mesh_path, target, out_path, resolve_config(common), out);
    };
  });

  // eval-detection
  std::string pred_path, gt_path;
  std::optional<double> iou;
  auto* det_cmd = app.add_subcommand("eval-detection", "3D detection, layout and camera metrics");
  det_cmd->add_option("--pred", pred_path, "Predicted scene JSON")->required();
  det_cmd->add_option("--gt", gt_path, "Ground-truth scene JSON")->required();
  det_cmd->add_option("--iou", iou, "IoU threshold for a true positive");
  det_cmd->add_option("--out", out_path, "Report JSON")->required();
  add_common(det_cmd, common);
  det_cmd->callback([&] {
    action = [&] {
      return eval_detection(pred_path, gt_path, iou, out_path, resolve_config(common),
                            resolve_classes(common), out);
    };
  });

  // refine-scene
  std::string scene_path;
  auto* refine_cmd = app.add_subcommand("refine-scene", "Jointly refine boxes and camera pose");
  refine_cmd->add_option("--scene", scene_path, "Scene JSON with meshes and point clouds")
      ->required();
  refine_cmd->add_option("--gt", gt_path, "Ground-truth scene for the cooperative term");
  refine_cmd->add_option("--out", out_path, "Refined scene JSON")->required();
  add_common(refine_cmd, common);
  refine_cmd->callback([&] {
    action = [&] {
      return refine_scene_cmd(scene_path, gt_path, out_path, resolve_config(common),
                              resolve_classes(common), out);
    };
  });

  // assemble
  auto* asm_cmd = app.add_subcommand("assemble", "Place object meshes into the world frame");
  asm_cmd->add_option("--scene", scene_path, "Scene JSON")->required();
  asm_cmd->add_option("--out", out_path, "Output directory")->required();
  add_common(asm_cmd, common);
  asm_cmd->callback([&] {
    action = [&] {
      resolve_config(common);
      return assemble_cmd(scene_path, out_path, resolve_classes(common), out);
    };
  });

  // eval-mesh
  std::optional<int> samples;
  auto* mesh_cmd = app.add_subcommand("eval-mesh", "Chamfer distance after ICP alignment");
  mesh_cmd->add_option("--pred", pred_path, "Predicted OBJ");
  mesh_cmd->add_option("--gt", gt_path, "Ground-truth point cloud");
  mesh_cmd->add_option("--scene", scene_path, "Scene JSON: evaluate every object");
  mesh_cmd->add_option("--samples", samples, "Surface samples on the predicted mesh");
  mesh_cmd->add_option("--out", out_path, "Report JSON")->required();
  add_common(mesh_cmd, common);
  mesh_cmd->callback([&] {
    action = [&] {
      return eval_mesh_cmd(pred_path, gt_path, scene_path, samples, out_path,
                           resolve_config(common), resolve_classes(common), out);
    };
  });

  // gen-synthetic
  SyntheticOptions syn;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate synthetic ground-truth scenes");
  gen_cmd->add_option("--rooms", syn.rooms, "Number of scenes")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--objects", syn.objects, "Objects per scene")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--noise", syn.noise, "Gaussian noise sigma in meters")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--points", syn.points_per_object, "Points per object cloud")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", out_path, "Output directory")->required();
  add_common(gen_cmd, common);
  gen_cmd->callback([&] {
    action = [&] {
      syn.seed = resolve_config(common).seed;
      return gen_synthetic_cmd(syn, out_path, resolve_classes(common), out);
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }

  try {
    return action ? action() : kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace scenerecon::cli
