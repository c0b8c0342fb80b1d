#include "scenerecon/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "scenerecon/metrics.hpp"

namespace scenerecon {
namespace {

// Armijo constant for the sufficient-decrease test.
constexpr double kArmijo = 1e-4;
// Step sizes below this fraction of the initial step mean no descent is left.
constexpr double kMinStepRatio = 1e-14;
// Pitch and roll stay strictly inside (-pi/2, pi/2).
constexpr double kAngleMargin = 1e-6;
constexpr int kObjectParams = 7;

void check_finite(double value, int iteration) {
  if (!std::isfinite(value)) {
    throw FitError("non-finite loss at iteration " + std::to_string(iteration), iteration);
  }
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void FitConfig::validate() const {
  if (max_iters < 1) throw Error("fit config: max_iters must be >= 1");
  if (!(step > 0)) throw Error("fit config: step must be > 0");
  if (!(backtrack > 0 && backtrack < 1)) throw Error("fit config: backtrack must be in (0, 1)");
  if (!(tolerance > 0)) throw Error("fit config: tolerance must be > 0");
  if (template_subdivisions < 0) throw Error("fit config: template_subdivisions must be >= 0");
  if (mesh_samples < 0) throw Error("fit config: mesh_samples must be >= 0");
  if (!(scene_step > 0)) throw Error("fit config: scene_step must be > 0");
}

void LossTrace::append(int iter, double value, std::vector<double> terms_at_iter) {
  iteration.push_back(iter);
  total.push_back(value);
  term_values.push_back(std::move(terms_at_iter));
}

std::string LossTrace::to_csv() const {
  std::ostringstream os;
  os << "iteration,total";
  for (const auto& t : terms) os << ',' << t;
  os << '\n';
  for (std::size_t r = 0; r < total.size(); ++r) {
    os << iteration[r] << ',' << format_number(total[r]);
    for (double v : term_values[r]) os << ',' << format_number(v);
    os << '\n';
  }
  return os.str();
}

void LossTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_csv();
}

DescentResult gradient_descent(const Objective& objective, Eigen::VectorXd x0,
                               const FitConfig& config, LossTrace& trace,
                               const Eigen::VectorXd& preconditioner,
                               const Projection& project) {
  config.validate();
  DescentResult result;
  result.x = std::move(x0);
  if (project) project(result.x);
  result.last = objective(result.x);
  check_finite(result.last.value, 0);
  trace.append(0, result.last.value, result.last.terms);

  double step = config.step;
  for (int it = 1; it <= config.max_iters; ++it) {
    const Eigen::VectorXd& g = result.last.gradient;
    const Eigen::VectorXd& scale = result.last.preconditioner.size() == g.size()
                                       ? result.last.preconditioner
                                       : preconditioner;
    Eigen::VectorXd direction =
        scale.size() == g.size() ? Eigen::VectorXd(-scale.cwiseProduct(g)) : Eigen::VectorXd(-g);
    if (!(direction.squaredNorm() > 0.0)) {
      result.converged = true;
      break;
    }
    bool accepted = false;
    while (step >= kMinStepRatio * config.step) {
      Eigen::VectorXd trial_x = result.x + step * direction;
      if (project) project(trial_x);
      ObjectiveValue trial = objective(trial_x);
      check_finite(trial.value, it);
      const double predicted = -g.dot(trial_x - result.x);
      if (trial.value < result.last.value &&
          result.last.value - trial.value >= kArmijo * predicted) {
        const double previous = result.last.value;
        result.x = std::move(trial_x);
        result.last = std::move(trial);
        result.iterations = it;
        trace.append(it, result.last.value, result.last.terms);
        accepted = true;
        const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
        if ((previous - result.last.value) / scale < config.tolerance) result.converged = true;
        step /= config.backtrack;
        break;
      }
      step *= config.backtrack;
    }
    if (!accepted) {
      // No step decreases the loss: a stationary point for this method.
      result.converged = true;
      break;
    }
    if (result.converged) break;
  }
  return result;
}

TopologyResult modify_topology(const Mesh& mesh, const TargetSurface& target,
                               const FitConfig& config) {
  TopologyResult out;
  out.edge_report = score_edges(mesh, target, config.edge_scoring);
  out.modified = cut_edges(mesh, out.edge_report, config.edge_scoring.threshold);
  out.mesh = refine_boundary(out.modified, config.refine_iterations, config.refine_step);
  return out;
}

TemplateFit fit_template(const Points& target, const FitConfig& config) {
  config.validate();
  if (target.cols() < 10) throw Error("fit_template: target needs at least 10 points");
  const Mesh sphere = icosphere(config.template_subdivisions);
  const Edges edges = unique_edges(sphere);
  const auto loops = boundary_loops(sphere);
  const PointIndex target_index(target);
  const LossWeights& w = config.weights;
  const Eigen::Index nv = sphere.vertices.cols();

  TemplateFit fit;
  fit.trace.terms = {"chamfer", "edge", "boundary"};
  const Eigen::VectorXd edge_curvature = w.edge * edge_loss_hessian_diagonal(nv, edges);
  const Objective objective = [&](const Eigen::VectorXd& x) {
    const Eigen::Map<const Points> verts(x.data(), 3, nv);
    const Points v = verts;
    Eigen::VectorXd curvature;
    const PointsLoss c = chamfer(v, target_index, &curvature);
    const PointsLoss e = edge_loss(v, edges);
    ObjectiveValue out;
    out.value = w.chamfer * c.value + w.edge * e.value;
    Points grad = w.chamfer * c.gradient + w.edge * e.gradient;
    double b_value = 0.0;
    if (!loops.empty()) {
      const PointsLoss b = boundary_loss(v, loops);
      out.value += w.boundary * b.value;
      grad += w.boundary * b.gradient;
      b_value = b.value;
    }
    out.gradient = Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size());
    out.terms = {c.value, e.value, b_value};
    // Jacobi scaling: inverse of the per-vertex Hessian diagonal of the
    // chamfer and edge terms at the current assignment.
    curvature = w.chamfer * curvature + edge_curvature;
    out.preconditioner = curvature.cwiseInverse().replicate(1, 3).transpose().reshaped();
    return out;
  };

  const Eigen::VectorXd x0 =
      Eigen::Map<const Eigen::VectorXd>(sphere.vertices.data(), sphere.vertices.size());
  const DescentResult descent = gradient_descent(objective, x0, config, fit.trace);
  fit.converged = descent.converged;
  fit.deformed.faces = sphere.faces;
  fit.deformed.vertices = Eigen::Map<const Points>(descent.x.data(), 3, nv);

  const TargetSurface surface = target_from_points(target, config.target_neighbors);
  TopologyResult topo = modify_topology(fit.deformed, surface, config);
  fit.edge_report = std::move(topo.edge_report);
  fit.modified = std::move(topo.modified);
  fit.mesh = std::move(topo.mesh);
  return fit;
}

std::vector<OrientedBox> object_boxes(const SceneSample& scene) {
  std::vector<OrientedBox> out;
  for (const auto& obj : scene.objects) {
    out.push_back(box_from_detection(obj.detection(), scene.camera, scene.intrinsics));
  }
  return out;
}

Mesh normalize_to_unit_cube(const Mesh& mesh) {
  if (mesh.vertices.cols() == 0) throw Error("normalize: mesh has no vertices");
  const Vec3 lo = mesh.vertices.rowwise().minCoeff();
  const Vec3 hi = mesh.vertices.rowwise().maxCoeff();
  const Vec3 extent = hi - lo;
  if ((extent.array() <= 1e-12).any()) {
    throw Error("normalize: mesh bounding box has zero extent along an axis");
  }
  Mesh out = mesh;
  const Vec3 mid = 0.5 * (lo + hi);
  out.vertices = (mesh.vertices.colwise() - mid).array().colwise() / extent.array();
  return out;
}

Mesh place_in_box(const Mesh& normalized, const OrientedBox& box) {
  Mesh out = normalized;
  const Mat3 r = rotation_y(box.yaw);
  out.vertices = (r * box.size.asDiagonal() * normalized.vertices).colwise() + box.center;
  return out;
}

Mesh box_mesh(const OrientedBox& box) {
  Mesh mesh;
  mesh.vertices = box_corners(box);
  // Two triangles per face; each quad lists its corners in cyclic order.
  const int quads[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1},
                           {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
  mesh.faces.resize(3, 12);
  const Vec3 center = mesh.vertices.rowwise().mean();
  for (int q = 0; q < 6; ++q) {
    Eigen::Vector3i t0(quads[q][0], quads[q][1], quads[q][2]);
    Eigen::Vector3i t1(quads[q][0], quads[q][2], quads[q][3]);
    for (Eigen::Vector3i* t : {&t0, &t1}) {
      const Vec3 a = mesh.vertices.col((*t)(0)), b = mesh.vertices.col((*t)(1)),
                 c = mesh.vertices.col((*t)(2));
      // Orient outward.
      if ((b - a).cross(c - a).dot((a + b + c) / 3.0 - center) < 0) std::swap((*t)(1), (*t)(2));
    }
    mesh.faces.col(2 * q) = t0;
    mesh.faces.col(2 * q + 1) = t1;
  }
  return mesh;
}

AssembledScene assemble(const SceneSample& scene, const std::vector<Mesh>& meshes) {
  if (meshes.size() != scene.objects.size()) {
    throw Error("assemble: " + std::to_string(scene.objects.size()) + " objects but " +
                std::to_string(meshes.size()) + " meshes");
  }
  AssembledScene out;
  const auto boxes = object_boxes(scene);
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    out.objects.push_back(place_in_box(normalize_to_unit_cube(meshes[i]), boxes[i]));
  }
  out.layout = box_mesh(scene.layout);
  return out;
}

SceneRefinement refine_scene(const SceneSample& scene, const std::vector<Mesh>& meshes,
                             const FitConfig& config,
                             const std::optional<CooperativeTargets>& gt) {
  config.validate();
  const std::size_t n = scene.objects.size();
  if (n == 0) throw Error("refine_scene: scene has no objects");
  if (meshes.size() != n) throw Error("refine_scene: need one mesh per object");
  if (gt && gt->objects.size() != n) {
    throw Error("refine_scene: ground-truth corner count does not match objects");
  }

  // Fixed object-space samples M_i in the unit cube.
  std::vector<Points> local(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (scene.objects[i].cloud.cols() == 0) {
      throw Error("refine_scene: object " + std::to_string(i) + " has no scene points");
    }
    const Mesh unit = normalize_to_unit_cube(meshes[i]);
    const Points samples =
        config.mesh_samples > 0 ? sample_surface(unit, config.mesh_samples, config.seed + i)
                                : Points(3, 0);
    local[i].resize(3, unit.vertices.cols() + samples.cols());
    local[i] << unit.vertices, samples;
  }

  const Eigen::Index dim = static_cast<Eigen::Index>(kObjectParams * n + 2);
  auto unpack = [&](const Eigen::VectorXd& x, std::vector<ObjectDetection>& dets,
                    CameraPose& pose) {
    dets.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = x.segment<kObjectParams>(kObjectParams * i);
      dets[i].box_center = scene.objects[i].box2d.center;
      dets[i].params.offset = p.head<2>();
      dets[i].params.distance = p(2);
      dets[i].params.size = p.segment<3>(3);
      dets[i].params.yaw = p(6);
    }
    pose.pitch = x(dim - 2);
    pose.roll = x(dim - 1);
  };

  Eigen::VectorXd x0(dim);
  Eigen::VectorXd precond = Eigen::VectorXd::Ones(dim);
  const double focal = 0.5 * (scene.intrinsics.fx + scene.intrinsics.fy);
  for (std::size_t i = 0; i < n; ++i) {
    const BoxParams& p = scene.objects[i].params;
    x0.segment<kObjectParams>(kObjectParams * i) << p.offset, p.distance, p.size, p.yaw;
    // Offsets are in pixels; rescale so a unit step moves the center by a
    // comparable metric amount as the other parameters.
    const double pixels_per_unit = focal / std::max(p.distance, kParamFloor);
    precond.segment<2>(kObjectParams * i).setConstant(pixels_per_unit * pixels_per_unit);
  }
  x0(dim - 2) = scene.camera.pitch;
  x0(dim - 1) = scene.camera.roll;

  const LossWeights& w = config.weights;
  std::vector<BoxCorners> gt_layout;
  std::vector<BoxCorners> pred_layout;
  if (gt && gt->layout) {
    gt_layout.push_back(*gt->layout);
    pred_layout.push_back(box_corners(scene.layout));
  }

  const Objective objective = [&](const Eigen::VectorXd& x) {
    std::vector<ObjectDetection> dets;
    CameraPose pose;
    unpack(x, dets, pose);
    std::vector<CenterJacobian> centers;
    std::vector<Points> world(n);
    std::vector<PartialChamferObject> objs(n);
    for (std::size_t i = 0; i < n; ++i) {
      centers.push_back(center_jacobian(dets[i], pose, scene.intrinsics));
      const Mat3 r = rotation_y(dets[i].params.yaw);
      world[i] = (r * dets[i].params.size.asDiagonal() * local[i]).colwise() + centers[i].center;
      objs[i] = {&world[i], &scene.objects[i].cloud};
    }
    const PartialChamferResult lg = partial_chamfer(objs);

    ObjectiveValue out;
    out.gradient = Eigen::VectorXd::Zero(dim);
    out.value = w.global * lg.value;
    for (std::size_t i = 0; i < n; ++i) {
      const Points& g = lg.gradients[i];
      const Mat3 r = rotation_y(dets[i].params.yaw);
      const Mat3 dr = rotation_y_derivative(dets[i].params.yaw);
      const Vec3& s = dets[i].params.size;
      const Vec3 d_center = g.rowwise().sum();
      // p = C + R(theta) diag(s) u.
      const Eigen::Matrix3d g_u = g * local[i].transpose();  // sum_j g_j u_j^T
      Eigen::Matrix<double, kObjectParams, 1> grad;
      const Eigen::Matrix<double, 5, 1> via_center = centers[i].jacobian.transpose() * d_center;
      grad.head<3>() = via_center.head<3>();
      for (int a = 0; a < 3; ++a) grad(3 + a) = r.col(a).dot(g_u.col(a));
      grad(6) = (dr * s.asDiagonal()).cwiseProduct(g_u).sum();
      out.gradient.segment<kObjectParams>(kObjectParams * i) += w.global * grad;
      out.gradient(dim - 2) += w.global * via_center(3);
      out.gradient(dim - 1) += w.global * via_center(4);
    }
    double co_value = 0.0;
    if (gt) {
      const CooperativeParamsResult co = cooperative_loss_params(
          dets, pose, scene.intrinsics, gt->objects, pred_layout, gt_layout);
      co_value = co.value;
      out.value += w.cooperative * co.value;
      for (std::size_t i = 0; i < n; ++i) {
        out.gradient.segment<kObjectParams>(kObjectParams * i) +=
            w.cooperative * co.object_gradients[i];
      }
      out.gradient.tail<2>() += w.cooperative * co.camera_gradient;
    }
    out.terms = {lg.value, co_value};
    return out;
  };

  const Projection project = [&](Eigen::VectorXd& x) {
    for (std::size_t i = 0; i < n; ++i) {
      auto p = x.segment<kObjectParams>(kObjectParams * i);
      p(2) = std::max(p(2), kParamFloor);
      for (int a = 3; a < 6; ++a) p(a) = std::max(p(a), kParamFloor);
    }
    const double limit = std::numbers::pi / 2 - kAngleMargin;
    x(dim - 2) = std::clamp(x(dim - 2), -limit, limit);
    x(dim - 1) = std::clamp(x(dim - 1), -limit, limit);
  };

  SceneRefinement out;
  out.trace.terms = {"global", "cooperative"};
  FitConfig descent_config = config;
  descent_config.step = config.scene_step;
  const DescentResult descent =
      gradient_descent(objective, x0, descent_config, out.trace, precond, project);
  out.converged = descent.converged;
  out.initial_global = out.trace.term_values.front()[0];
  out.final_global = out.trace.term_values.back()[0];

  std::vector<ObjectDetection> dets;
  unpack(descent.x, dets, out.camera);
  for (auto& d : dets) {
    d.params.yaw = wrap_angle(d.params.yaw);
    out.params.push_back(d.params);
  }
  return out;
}

}  // namespace scenerecon
