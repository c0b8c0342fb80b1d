#include "scenerecon/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace scenerecon {
namespace {

void require_points(const Points& p, const char* what) {
  if (p.cols() == 0) throw Error(std::string(what) + ": point set is empty");
}

}  // namespace

PointsLoss chamfer(const Points& pred, const Points& gt) {
  require_points(gt, "chamfer");
  return chamfer(pred, PointIndex(gt));
}

PointsLoss chamfer(const Points& pred, const PointIndex& gt, Eigen::VectorXd* hessian_diagonal) {
  require_points(pred, "chamfer");
  const PointIndex pred_index(pred);
  const double np = static_cast<double>(pred.cols());
  const double ng = static_cast<double>(gt.size());

  PointsLoss out;
  out.gradient = Points::Zero(3, pred.cols());
  if (hessian_diagonal) hessian_diagonal->setConstant(pred.cols(), 2.0 / np);
  double forward = 0.0, backward = 0.0;
  for (int i = 0; i < pred.cols(); ++i) {
    const Neighbor nb = gt.nearest(pred.col(i));
    const Vec3 diff = pred.col(i) - gt.points().col(nb.index);
    forward += diff.squaredNorm();
    out.gradient.col(i) += (2.0 / np) * diff;
  }
  for (int j = 0; j < gt.size(); ++j) {
    const Neighbor nb = pred_index.nearest(gt.points().col(j));
    const Vec3 diff = pred.col(nb.index) - gt.points().col(j);
    backward += diff.squaredNorm();
    out.gradient.col(nb.index) += (2.0 / ng) * diff;
    if (hessian_diagonal) (*hessian_diagonal)(nb.index) += 2.0 / ng;
  }
  out.value = forward / np + backward / ng;
  return out;
}

PartialChamferResult partial_chamfer(std::span<const PartialChamferObject> objects) {
  if (objects.empty()) throw Error("partial_chamfer: object list is empty");
  PartialChamferResult out;
  const double n = static_cast<double>(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& obj = objects[i];
    if (obj.mesh_points == nullptr || obj.mesh_points->cols() == 0) {
      throw Error("partial_chamfer: object " + std::to_string(i) + " has no mesh points");
    }
    if (obj.scene_points == nullptr || obj.scene_points->cols() == 0) {
      throw Error("partial_chamfer: object " + std::to_string(i) + " has no scene points");
    }
    const Points& mesh = *obj.mesh_points;
    const Points& scene = *obj.scene_points;
    const PointIndex index(mesh);
    const double ns = static_cast<double>(scene.cols());
    Points grad = Points::Zero(3, mesh.cols());
    double sum = 0.0;
    for (int j = 0; j < scene.cols(); ++j) {
      const Neighbor nb = index.nearest(scene.col(j));
      const Vec3 diff = mesh.col(nb.index) - scene.col(j);
      sum += diff.squaredNorm();
      grad.col(nb.index) += (2.0 / (n * ns)) * diff;
    }
    out.per_object.push_back(sum / ns);
    out.value += sum / ns / n;
    out.gradients.push_back(std::move(grad));
  }
  return out;
}

PointsLoss edge_loss(const Mesh& mesh) { return edge_loss(mesh.vertices, unique_edges(mesh)); }

PointsLoss edge_loss(const Points& vertices, const Edges& edges) {
  if (edges.cols() == 0) throw Error("edge_loss: mesh has no edges");
  const double ne = static_cast<double>(edges.cols());
  PointsLoss out;
  out.gradient = Points::Zero(3, vertices.cols());
  for (int e = 0; e < edges.cols(); ++e) {
    const Vec3 diff = vertices.col(edges(0, e)) - vertices.col(edges(1, e));
    out.value += diff.squaredNorm();
    out.gradient.col(edges(0, e)) += (2.0 / ne) * diff;
    out.gradient.col(edges(1, e)) -= (2.0 / ne) * diff;
  }
  out.value /= ne;
  return out;
}

Eigen::VectorXd edge_loss_hessian_diagonal(int vertex_count, const Edges& edges) {
  if (edges.cols() == 0) throw Error("edge_loss: mesh has no edges");
  const double ne = static_cast<double>(edges.cols());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(vertex_count);
  for (int e = 0; e < edges.cols(); ++e) {
    out(edges(0, e)) += 2.0 / ne;
    out(edges(1, e)) += 2.0 / ne;
  }
  return out;
}

PointsLoss boundary_loss(const Mesh& mesh) {
  return boundary_loss(mesh.vertices, boundary_loops(mesh));
}

PointsLoss boundary_loss(const Points& vertices, const std::vector<BoundaryLoop>& loops) {
  PointsLoss out;
  out.gradient = Points::Zero(3, vertices.cols());
  int terms = 0;
  for (const auto& loop : loops) {
    const int n = static_cast<int>(loop.vertices.size());
    for (int i = 0; i < n; ++i) {
      if (!loop.closed && (i == 0 || i == n - 1)) continue;
      ++terms;
    }
  }
  if (terms == 0) return out;
  for (const auto& loop : loops) {
    const int n = static_cast<int>(loop.vertices.size());
    for (int i = 0; i < n; ++i) {
      if (!loop.closed && (i == 0 || i == n - 1)) continue;
      const int prev = loop.vertices[(i + n - 1) % n];
      const int v = loop.vertices[i];
      const int next = loop.vertices[(i + 1) % n];
      const Vec3 r = vertices.col(v) - 0.5 * (vertices.col(prev) + vertices.col(next));
      out.value += r.squaredNorm();
      out.gradient.col(v) += (2.0 / terms) * r;
      out.gradient.col(prev) -= (1.0 / terms) * r;
      out.gradient.col(next) -= (1.0 / terms) * r;
    }
  }
  out.value /= terms;
  return out;
}

VectorLoss binary_cross_entropy(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  if (scores.size() != labels.size()) {
    throw Error("binary_cross_entropy: " + std::to_string(scores.size()) + " scores vs " +
                std::to_string(labels.size()) + " labels");
  }
  if (scores.size() == 0) throw Error("binary_cross_entropy: no scores");
  const double n = static_cast<double>(scores.size());
  VectorLoss out;
  out.gradient = Eigen::VectorXd::Zero(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double y = labels(i);
    if (y != 0.0 && y != 1.0) throw Error("binary_cross_entropy: labels must be 0 or 1");
    const double raw = scores(i);
    const double s = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
    out.value -= y * std::log(s) + (1.0 - y) * std::log(1.0 - s);
    // Zero gradient where the clamp is active.
    if (raw > kProbabilityClamp && raw < 1.0 - kProbabilityClamp) {
      out.gradient(i) = (-y / s + (1.0 - y) / (1.0 - s)) / n;
    }
  }
  out.value /= n;
  return out;
}

BinSpec BinSpec::uniform(double low, double high, int bins, bool periodic) {
  if (bins < 1 || !(high > low)) throw Error("BinSpec: need bins >= 1 and high > low");
  BinSpec spec;
  spec.periodic = periodic;
  spec.edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) spec.edges[i] = low + (high - low) * i / bins;
  spec.edges.back() = high;
  return spec;
}

void BinSpec::validate() const {
  if (edges.size() < 2) throw Error("BinSpec: need at least one bin");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw Error("BinSpec: edges must be strictly increasing");
  }
}

double BinSpec::wrap(double value) const {
  if (!periodic) return value;
  const double low = edges.front(), high = edges.back();
  const double period = high - low;
  value = low + std::fmod(value - low, period);
  if (value < low) value += period;
  if (value >= high) value -= period;
  return value;
}

int BinSpec::locate(double value) const {
  validate();
  const double low = edges.front(), high = edges.back();
  value = wrap(value);
  if (!(value >= low && value <= high)) {
    throw Error("BinSpec: value " + std::to_string(value) + " outside [" +
                std::to_string(low) + ", " + std::to_string(high) + "]");
  }
  const auto it = std::upper_bound(edges.begin(), edges.end(), value);
  const int bin = static_cast<int>(it - edges.begin()) - 1;
  return std::min(bin, count() - 1);
}

ClsRegResult cls_reg_loss(const Eigen::VectorXd& logits, const Eigen::VectorXd& residuals,
                          double gt_value, const BinSpec& bins, double lambda_r) {
  const int nb = bins.count();
  if (logits.size() != nb || residuals.size() != nb) {
    throw Error("cls_reg_loss: expected " + std::to_string(nb) + " logits and residuals");
  }
  ClsRegResult out;
  out.gt_bin = bins.locate(gt_value);
  const double value = bins.wrap(gt_value);

  const double peak = logits.maxCoeff();
  const Eigen::VectorXd shifted = (logits.array() - peak).exp();
  const double sum = shifted.sum();
  out.classification = -(logits(out.gt_bin) - peak - std::log(sum));
  out.logits_gradient = shifted / sum;
  out.logits_gradient(out.gt_bin) -= 1.0;

  const double target = (value - bins.center(out.gt_bin)) / bins.width(out.gt_bin);
  const double err = residuals(out.gt_bin) - target;
  out.regression = err * err;
  out.residual_gradient = Eigen::VectorXd::Zero(nb);
  out.residual_gradient(out.gt_bin) = 2.0 * lambda_r * err;
  out.value = out.classification + lambda_r * out.regression;
  return out;
}

CooperativeResult cooperative_loss(std::span<const BoxCorners> pred,
                                   std::span<const BoxCorners> gt) {
  if (pred.size() != gt.size()) {
    throw Error("cooperative_loss: " + std::to_string(pred.size()) + " predicted vs " +
                std::to_string(gt.size()) + " ground-truth boxes");
  }
  CooperativeResult out;
  if (pred.empty()) return out;
  const double scale = 1.0 / (8.0 * static_cast<double>(pred.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const BoxCorners diff = pred[i] - gt[i];
    out.value += diff.squaredNorm() * scale;
    out.gradients.push_back(2.0 * scale * diff);
  }
  return out;
}

CooperativeParamsResult cooperative_loss_params(std::span<const ObjectDetection> detections,
                                                const CameraPose& pose,
                                                const CameraIntrinsics& k,
                                                std::span<const BoxCorners> gt_objects,
                                                std::span<const BoxCorners> pred_layout,
                                                std::span<const BoxCorners> gt_layout) {
  if (detections.size() != gt_objects.size() || pred_layout.size() != gt_layout.size()) {
    throw Error("cooperative_loss: predicted and ground-truth box counts differ");
  }
  const auto placed = boxes_world_from_params_with_jacobian(detections, pose, k);
  std::vector<BoxCorners> pred, gt;
  for (const auto& p : placed) pred.push_back(p.corners);
  pred.insert(pred.end(), pred_layout.begin(), pred_layout.end());
  gt.assign(gt_objects.begin(), gt_objects.end());
  gt.insert(gt.end(), gt_layout.begin(), gt_layout.end());
  const CooperativeResult corner_loss = cooperative_loss(pred, gt);

  CooperativeParamsResult out;
  out.value = corner_loss.value;
  for (std::size_t i = 0; i < placed.size(); ++i) {
    const Eigen::Map<const Eigen::Matrix<double, 24, 1>> g(corner_loss.gradients[i].data());
    const Eigen::Matrix<double, kBoxParamCount, 1> full = placed[i].jacobian.transpose() * g;
    out.object_gradients.push_back(full.head<7>());
    out.camera_gradient += full.tail<2>();
  }
  return out;
}

const char* term_name(LossTerm term) {
  switch (term) {
    case LossTerm::kDelta: return "delta";
    case LossTerm::kDistance: return "distance";
    case LossTerm::kSize: return "size";
    case LossTerm::kYaw: return "yaw";
    case LossTerm::kPitch: return "pitch";
    case LossTerm::kRoll: return "roll";
    case LossTerm::kLayoutCenter: return "layout_center";
    case LossTerm::kLayoutSize: return "layout_size";
    case LossTerm::kLayoutYaw: return "layout_yaw";
    case LossTerm::kChamfer: return "chamfer";
    case LossTerm::kEdge: return "edge";
    case LossTerm::kBoundary: return "boundary";
    case LossTerm::kCrossEntropy: return "cross_entropy";
    case LossTerm::kCooperative: return "cooperative";
    case LossTerm::kGlobal: return "global";
  }
  return "unknown";
}

double term_weight(const LossWeights& w, LossTerm term) {
  switch (term) {
    case LossTerm::kDelta: return w.delta;
    case LossTerm::kDistance: return w.distance;
    case LossTerm::kSize: return w.size;
    case LossTerm::kYaw: return w.yaw;
    case LossTerm::kPitch: return w.pitch;
    case LossTerm::kRoll: return w.roll;
    case LossTerm::kLayoutCenter: return w.layout_center;
    case LossTerm::kLayoutSize: return w.layout_size;
    case LossTerm::kLayoutYaw: return w.layout_yaw;
    case LossTerm::kChamfer: return w.chamfer;
    case LossTerm::kEdge: return w.edge;
    case LossTerm::kBoundary: return w.boundary;
    case LossTerm::kCrossEntropy: return w.cross_entropy;
    case LossTerm::kCooperative: return w.cooperative;
    case LossTerm::kGlobal: return w.global;
  }
  return 0.0;
}

std::vector<LossTerm> all_loss_terms() {
  std::vector<LossTerm> out;
  for (int i = 0; i < kLossTermCount; ++i) out.push_back(static_cast<LossTerm>(i));
  return out;
}

JointLossResult joint_loss(const std::map<LossTerm, TermValue>& terms,
                           const LossWeights& weights, std::span<const LossTerm> required) {
  std::string missing;
  for (LossTerm t : required) {
    if (!terms.count(t)) missing += (missing.empty() ? "" : ", ") + std::string(term_name(t));
  }
  if (!missing.empty()) throw Error("joint_loss: missing required terms: " + missing);

  JointLossResult out;
  for (const auto& [term, tv] : terms) {
    const double w = term_weight(weights, term);
    const double contribution = w * tv.value;
    out.breakdown[term_name(term)] = contribution;
    out.value += contribution;
    if (tv.gradient) {
      if (!out.gradient) {
        out.gradient = Eigen::VectorXd::Zero(tv.gradient->size());
      } else if (out.gradient->size() != tv.gradient->size()) {
        throw Error(std::string("joint_loss: gradient size mismatch for term ") +
                    term_name(term));
      }
      *out.gradient += w * *tv.gradient;
    }
  }
  return out;
}

}  // namespace scenerecon
