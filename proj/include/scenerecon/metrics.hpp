#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "scenerecon/geomcore.hpp"
#include "scenerecon/mesh.hpp"

namespace scenerecon {

// Exact IoU of two yaw-only boxes: footprint polygon intersection in the
// horizontal (x, z) plane times the overlap of their vertical extents.
double iou3d(const OrientedBox& a, const OrientedBox& b);

// Area of the convex intersection of two yaw-rotated footprint rectangles.
double footprint_intersection_area(const OrientedBox& a, const OrientedBox& b);

struct DetectionRecord {
  OrientedBox box;
  int label{0};
  double confidence{0};
};

struct GroundTruthBox {
  OrientedBox box;
  int label{0};
};

inline constexpr double kDefaultIouThreshold = 0.15;

struct ClassAp {
  double ap{0};
  int gt_count{0};
  int detection_count{0};
  std::vector<double> precision;
  std::vector<double> recall;
};

struct ApReport {
  std::map<int, ClassAp> per_class;
  double mean_ap{0};
  int classes_in_mean{0};
};

// All-point interpolated average precision per class. A detection is a true
// positive if its IoU with the best still-unmatched ground-truth box of the
// same class exceeds `iou_threshold`. Classes without ground truth are
// reported but excluded from the mean.
ApReport average_precision(std::span<const DetectionRecord> detections,
                           std::span<const GroundTruthBox> gt,
                           double iou_threshold = kDefaultIouThreshold);

// AP of a ranked list of true/false positive flags against `gt_count`
// ground-truth boxes.
double average_precision_from_matches(const std::vector<bool>& true_positive, int gt_count,
                                      std::vector<double>* precision = nullptr,
                                      std::vector<double>* recall = nullptr);

struct PoseError {
  double translation{0};  // meters
  double rotation{0};     // degrees
  double scale{0};        // mean |s_pred / s_gt - 1|
};

PoseError pose_errors(const OrientedBox& pred, const OrientedBox& gt);

struct PoseThresholds {
  double translation{0.5};
  double rotation{30.0};
  double scale{0.2};
};

// Per-component correctness, thresholds inclusive. A relative slack of 1e-12
// absorbs rounding of values that sit exactly on a threshold.
struct PoseCorrect {
  bool translation{false};
  bool rotation{false};
  bool scale{false};
};

PoseCorrect pose_within(const PoseError& err, const PoseThresholds& thresholds = {});

struct CameraMae {
  double pitch_deg{0};
  double roll_deg{0};
};

CameraMae camera_mae(std::span<const CameraPose> pred, std::span<const CameraPose> gt);

inline constexpr int kDefaultSurfaceSamples = 10000;

// Area-weighted face choice followed by uniform barycentric sampling.
Points sample_surface(const Mesh& mesh, int n_points, std::uint64_t seed);

struct IcpOptions {
  int max_iters{100};
  double tolerance{1e-10};  // relative RMS improvement
  bool with_scale{false};
  // Try a set of initial rotations (principal-axis and cube-group
  // alignments after centroid matching) and keep the best result.
  bool multi_start{false};
};

struct IcpResult {
  Eigen::Matrix4d transform = Eigen::Matrix4d::Identity();  // maps source to target
  double rms{0};
  std::vector<double> rms_history;
  int iterations{0};
};

IcpResult icp_align(const Points& source, const Points& target, const IcpOptions& options = {});

// Single ICP run starting from `initial`.
IcpResult icp_refine(const Points& source, const Points& target, const Eigen::Matrix4d& initial,
                     const IcpOptions& options);

Points apply_transform(const Eigen::Matrix4d& transform, const Points& points);

struct MeshChamferOptions {
  int samples{kDefaultSurfaceSamples};
  std::uint64_t seed{0};
  IcpOptions icp{};
};

// Samples the predicted mesh, aligns the samples to the ground truth with
// ICP and returns their symmetric Chamfer distance.
double eval_mesh_chamfer(const Mesh& pred, const Points& gt,
                         const MeshChamferOptions& options = {});

}  // namespace scenerecon
