#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenerecon/geomcore.hpp"
#include "scenerecon/mesh.hpp"
#include "scenerecon/spatial.hpp"

// Loss kernels for box regression, mesh generation and joint scene terms.
// Each returns its value together with the analytic gradient with respect to
// its continuous inputs. Nearest-neighbor terms use the exact lowest-index
// assignment from PointIndex, which selects a valid subgradient at ties.

namespace scenerecon {

template <typename Gradient>
struct LossValue {
  double value{0};
  Gradient gradient;
};

using PointsLoss = LossValue<Points>;
using VectorLoss = LossValue<Eigen::VectorXd>;

// Symmetric Chamfer distance: mean squared distance from each predicted point
// to its nearest ground-truth point plus the same in the other direction.
// The gradient is with respect to the predicted points.
PointsLoss chamfer(const Points& pred, const Points& gt);
// Same, reusing a prebuilt index over `gt`. If `hessian_diagonal` is given it
// receives, per predicted point, the diagonal of the loss Hessian at the
// current nearest-neighbor assignment.
PointsLoss chamfer(const Points& pred, const PointIndex& gt,
                   Eigen::VectorXd* hessian_diagonal = nullptr);

// One object's contribution to the scene-to-mesh partial Chamfer term.
struct PartialChamferObject {
  const Points* mesh_points{nullptr};  // M_i
  const Points* scene_points{nullptr};  // S_i
};

// L_g = (1/N) sum_i (1/|S_i|) sum_{q in S_i} min_{p in M_i} |p - q|^2.
// Gradients are returned per object, with respect to M_i.
struct PartialChamferResult {
  double value{0};
  std::vector<double> per_object;
  std::vector<Points> gradients;
};

PartialChamferResult partial_chamfer(std::span<const PartialChamferObject> objects);

// Mean squared edge length over the unique edges of the mesh.
PointsLoss edge_loss(const Mesh& mesh);
// Same with a precomputed edge list, for fixed-topology optimization.
PointsLoss edge_loss(const Points& vertices, const Edges& edges);
// Per-vertex diagonal of the edge-loss Hessian.
Eigen::VectorXd edge_loss_hessian_diagonal(int vertex_count, const Edges& edges);

// Mean over boundary-loop terms of |v - (prev + next) / 2|^2. Closed loops
// contribute every vertex, open chains their interior vertices.
PointsLoss boundary_loss(const Mesh& mesh);
PointsLoss boundary_loss(const Points& vertices, const std::vector<BoundaryLoop>& loops);

inline constexpr double kProbabilityClamp = 1e-7;

// Mean binary cross-entropy with scores clamped to [eps, 1 - eps].
VectorLoss binary_cross_entropy(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

// Discretization of one regression target into ordered bins.
struct BinSpec {
  std::vector<double> edges;  // strictly increasing, size = bins + 1
  bool periodic{false};       // values are wrapped into [edges.front(), edges.back())

  static BinSpec uniform(double low, double high, int bins, bool periodic = false);

  int count() const { return static_cast<int>(edges.size()) - 1; }
  double center(int bin) const { return 0.5 * (edges[bin] + edges[bin + 1]); }
  double width(int bin) const { return edges[bin + 1] - edges[bin]; }

  // Bin holding `value` (after wrapping when periodic). Bins are half-open
  // [e_i, e_{i+1}); the upper end of a non-periodic range maps to the last
  // bin. Throws if the value is out of range.
  int locate(double value) const;
  // Identity unless periodic.
  double wrap(double value) const;
  void validate() const;
};

struct ClsRegResult {
  double value{0};
  double classification{0};
  double regression{0};
  int gt_bin{-1};
  Eigen::VectorXd logits_gradient;
  Eigen::VectorXd residual_gradient;
};

// Softmax cross-entropy against the ground-truth bin plus lambda_r times the
// squared error between that bin's residual and (gt - center) / width.
ClsRegResult cls_reg_loss(const Eigen::VectorXd& logits, const Eigen::VectorXd& residuals,
                          double gt_value, const BinSpec& bins, double lambda_r);

// Mean over boxes and corners of the squared corner-position error.
struct CooperativeResult {
  double value{0};
  std::vector<BoxCorners> gradients;
};

CooperativeResult cooperative_loss(std::span<const BoxCorners> pred,
                                   std::span<const BoxCorners> gt);

// Cooperative loss chained through the box parameterization: gradients with
// respect to every object's (delta, d, s, theta) and the shared (pitch, roll).
struct CooperativeParamsResult {
  double value{0};
  std::vector<Eigen::Matrix<double, 7, 1>> object_gradients;
  Eigen::Vector2d camera_gradient = Eigen::Vector2d::Zero();
};

CooperativeParamsResult cooperative_loss_params(std::span<const ObjectDetection> detections,
                                                const CameraPose& pose,
                                                const CameraIntrinsics& k,
                                                std::span<const BoxCorners> gt_objects,
                                                std::span<const BoxCorners> pred_layout = {},
                                                std::span<const BoxCorners> gt_layout = {});

// Weights of the joint objective. Defaults are the published values.
struct LossWeights {
  double lambda_r{10};
  // Object box terms.
  double delta{1};
  double distance{1};
  double size{1};
  double yaw{1};
  // Layout and camera terms.
  double pitch{1};
  double roll{1};
  double layout_center{1};
  double layout_size{1};
  double layout_yaw{1};
  // Mesh terms.
  double chamfer{100};
  double edge{10};
  double boundary{50};
  double cross_entropy{0.01};
  // Joint terms.
  double cooperative{10};
  double global{100};
};

enum class LossTerm {
  kDelta,
  kDistance,
  kSize,
  kYaw,
  kPitch,
  kRoll,
  kLayoutCenter,
  kLayoutSize,
  kLayoutYaw,
  kChamfer,
  kEdge,
  kBoundary,
  kCrossEntropy,
  kCooperative,
  kGlobal,
};

inline constexpr int kLossTermCount = 15;

const char* term_name(LossTerm term);
double term_weight(const LossWeights& weights, LossTerm term);
std::vector<LossTerm> all_loss_terms();

// One evaluated term: its value and, optionally, its gradient over a shared
// caller-defined parameter vector.
struct TermValue {
  double value{0};
  std::optional<Eigen::VectorXd> gradient;
};

struct JointLossResult {
  double value{0};
  std::map<std::string, double> breakdown;  // weighted contribution per term
  std::optional<Eigen::VectorXd> gradient;
};

// Weighted sum of the supplied terms. Terms listed in `required` must be
// present; the error message names every missing one.
JointLossResult joint_loss(const std::map<LossTerm, TermValue>& terms,
                           const LossWeights& weights,
                           std::span<const LossTerm> required = {});

}  // namespace scenerecon
