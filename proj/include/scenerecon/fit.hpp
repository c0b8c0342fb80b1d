#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scenerecon/geomcore.hpp"
#include "scenerecon/losses.hpp"
#include "scenerecon/mesh.hpp"

namespace scenerecon {

struct FitConfig {
  int max_iters{400};
  double step{1.0};
  double backtrack{0.5};   // step shrink factor on rejection, in (0, 1)
  double tolerance{1e-6};  // relative loss change that counts as converged
  LossWeights weights{};
  std::uint64_t seed{0};

  // Template fitting.
  int template_subdivisions{4};
  EdgeScoreOptions edge_scoring{};
  int target_neighbors{kDefaultTargetNeighbors};
  int refine_iterations{10};
  double refine_step{0.5};

  // Scene refinement.
  int mesh_samples{2000};
  double scene_step{0.01};  // initial step; grows on accepted iterates

  void validate() const;
};

// Loss history: one row per accepted iterate, columns `total` then terms.
struct LossTrace {
  std::vector<std::string> terms;
  std::vector<int> iteration;
  std::vector<double> total;
  std::vector<std::vector<double>> term_values;

  void append(int iter, double value, std::vector<double> terms_at_iter);
  void write_csv(const std::filesystem::path& path) const;
  std::string to_csv() const;
};

class FitError : public Error {
 public:
  FitError(const std::string& what, int iteration) : Error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

// Objective evaluated at x: total value, gradient, and per-term values for
// the trace. A non-empty `preconditioner` (positive, one entry per
// coordinate) scales the next descent direction from this point.
struct ObjectiveValue {
  double value{0};
  Eigen::VectorXd gradient;
  std::vector<double> terms;
  Eigen::VectorXd preconditioner;
};

using Objective = std::function<ObjectiveValue(const Eigen::VectorXd&)>;
using Projection = std::function<void(Eigen::VectorXd&)>;

struct DescentResult {
  Eigen::VectorXd x;
  ObjectiveValue last;
  bool converged{false};
  int iterations{0};
};

// Gradient descent with backtracking line search. A trial point is accepted
// only if it satisfies sufficient decrease on the raw objective, so the
// recorded values never increase. `preconditioner` (optional, positive)
// scales the gradient per coordinate unless the objective supplies its own;
// `project` maps trial points back into the feasible set.
DescentResult gradient_descent(const Objective& objective, Eigen::VectorXd x0,
                               const FitConfig& config, LossTrace& trace,
                               const Eigen::VectorXd& preconditioner = {},
                               const Projection& project = {});

struct TemplateFit {
  Mesh deformed;  // after stage 1
  EdgeScoreReport edge_report;
  Mesh modified;  // after edge cutting
  Mesh mesh;      // final, after boundary refinement
  LossTrace trace;
  bool converged{false};
};

// Deform an icosphere to the target with lambda_c * chamfer + lambda_e * edge
// + lambda_b * boundary, cut edges whose density score is below threshold,
// then smooth the new boundaries.
TemplateFit fit_template(const Points& target, const FitConfig& config = {});

// Stage 2 and 3 only: topology modification of an existing mesh.
struct TopologyResult {
  EdgeScoreReport edge_report;
  Mesh modified;
  Mesh mesh;
};

TopologyResult modify_topology(const Mesh& mesh, const TargetSurface& target,
                               const FitConfig& config = {});

struct SceneObject {
  Box2D box2d;
  int class_nyu37{0};
  BoxParams params;
  std::optional<double> confidence;
  std::optional<std::uint64_t> sample_seed;
  std::string pointcloud_path;
  std::string mesh_path;
  Points cloud = Points(3, 0);  // world-frame scene points S_i

  ObjectDetection detection() const { return {box2d.center, params}; }
};

struct SceneSample {
  std::string scene_id;
  CameraIntrinsics intrinsics;
  CameraPose camera;
  OrientedBox layout;
  std::vector<SceneObject> objects;
};

std::vector<OrientedBox> object_boxes(const SceneSample& scene);

// Maps an object-space mesh into the unit cube [-1/2, 1/2]^3 (per-axis,
// using its tight bounding box). Throws on a flat bounding box.
Mesh normalize_to_unit_cube(const Mesh& mesh);

// Places a normalized mesh into a world box: scale by size, rotate by yaw,
// translate to the center.
Mesh place_in_box(const Mesh& normalized, const OrientedBox& box);

// Closed 12-triangle box mesh with corners in box_corners order.
Mesh box_mesh(const OrientedBox& box);

struct AssembledScene {
  std::vector<Mesh> objects;
  Mesh layout;
};

AssembledScene assemble(const SceneSample& scene, const std::vector<Mesh>& meshes);

struct SceneRefinement {
  std::vector<BoxParams> params;
  CameraPose camera;
  LossTrace trace;
  double initial_global{0};
  double final_global{0};
  bool converged{false};
};

struct CooperativeTargets {
  std::vector<BoxCorners> objects;
  std::optional<BoxCorners> layout;
};

// Jointly refines every object's (delta, d, s, theta) and the camera pose
// against lambda_g * L_g (meshes placed in their boxes vs the scene points)
// plus lambda_co * L_co when ground-truth corners are supplied. The descent
// starts from config.scene_step instead of config.step.
SceneRefinement refine_scene(const SceneSample& scene, const std::vector<Mesh>& meshes,
                             const FitConfig& config = {},
                             const std::optional<CooperativeTargets>& gt = std::nullopt);

inline constexpr double kParamFloor = 1e-3;

}  // namespace scenerecon
