#include "scenerecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/SVD>

#include "scenerecon/losses.hpp"
#include "scenerecon/spatial.hpp"

namespace scenerecon {
namespace {

using Polygon = std::vector<Vec2>;

// Footprint of a box in the horizontal (x, z) plane, counter-clockwise.
Polygon footprint(const OrientedBox& box) {
  const BoxCorners c = box_corners(box);
  Polygon poly;
  for (int i : {0, 1, 5, 4}) poly.emplace_back(c(0, i), c(2, i));
  double area2 = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    area2 += p.x() * q.y() - q.x() * p.y();
  }
  if (area2 < 0) std::reverse(poly.begin(), poly.end());
  return poly;
}

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double polygon_area(const Polygon& poly) {
  double area2 = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    area2 += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * std::abs(area2);
}

// Sutherland-Hodgman clip of `subject` against the convex CCW polygon `clip`.
Polygon clip_polygon(Polygon subject, const Polygon& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    const Vec2 dir = b - a;
    const auto side = [&](const Vec2& p) { return cross(dir, p - a); };
    Polygon next;
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vec2& p = subject[i];
      const Vec2& q = subject[(i + 1) % subject.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0) next.push_back(p);
      if ((sp >= 0) != (sq >= 0)) next.push_back(p + (q - p) * (sp / (sp - sq)));
    }
    subject = std::move(next);
  }
  return subject;
}

std::vector<Mat3> cube_rotations() {
  std::vector<Mat3> out;
  int perm[3] = {0, 1, 2};
  do {
    for (int signs = 0; signs < 8; ++signs) {
      Mat3 r = Mat3::Zero();
      for (int row = 0; row < 3; ++row) r(row, perm[row]) = (signs >> row) & 1 ? -1.0 : 1.0;
      if (r.determinant() > 0) out.push_back(r);
    }
  } while (std::next_permutation(perm, perm + 3));
  return out;
}

void require_non_collinear(const Points& pts, const char* which) {
  if (pts.cols() < 3) {
    throw Error(std::string("icp_align: ") + which + " needs at least 3 points");
  }
  const Vec3 mean = pts.rowwise().mean();
  const Points centered = pts.colwise() - mean;
  const Eigen::JacobiSVD<Mat3> svd(centered * centered.transpose());
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0) || sv(1) <= 1e-12 * sv(0)) {
    throw Error(std::string("icp_align: ") + which + " points are degenerate (collinear)");
  }
}

struct Correspondence {
  Points matched;
  double rms{0};
};

Correspondence correspond(const Points& moved, const PointIndex& target) {
  Correspondence c;
  c.matched.resize(3, moved.cols());
  double sum = 0.0;
  for (int i = 0; i < moved.cols(); ++i) {
    const Neighbor nb = target.nearest(moved.col(i));
    c.matched.col(i) = target.points().col(nb.index);
    sum += nb.distance * nb.distance;
  }
  c.rms = std::sqrt(sum / static_cast<double>(moved.cols()));
  return c;
}

}  // namespace

double footprint_intersection_area(const OrientedBox& a, const OrientedBox& b) {
  const Polygon inter = clip_polygon(footprint(a), footprint(b));
  return inter.size() < 3 ? 0.0 : polygon_area(inter);
}

double iou3d(const OrientedBox& a, const OrientedBox& b) {
  const double top = std::min(a.center.y() + a.size.y() / 2, b.center.y() + b.size.y() / 2);
  const double bottom = std::max(a.center.y() - a.size.y() / 2, b.center.y() - b.size.y() / 2);
  const double height = std::max(0.0, top - bottom);
  if (height == 0.0) return 0.0;
  const double inter = footprint_intersection_area(a, b) * height;
  const double uni = a.size.prod() + b.size.prod() - inter;
  if (!(uni > 0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double average_precision_from_matches(const std::vector<bool>& true_positive, int gt_count,
                                      std::vector<double>* precision,
                                      std::vector<double>* recall) {
  std::vector<double> prec, rec;
  int tp = 0;
  for (std::size_t i = 0; i < true_positive.size(); ++i) {
    tp += true_positive[i];
    prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    rec.push_back(gt_count > 0 ? static_cast<double>(tp) / gt_count : 0.0);
  }
  if (precision) *precision = prec;
  if (recall) *recall = rec;
  if (gt_count <= 0) return 0.0;

  // All-point interpolation over a monotone precision envelope, summed from
  // the integer counts in extended precision and divided once.
  const std::size_t n = true_positive.size();
  std::vector<long double> envelope(n + 1, 0.0L);
  int hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hits += true_positive[i];
    envelope[i] = static_cast<long double>(hits) / static_cast<long double>(i + 1);
  }
  for (std::size_t i = n; i > 0; --i) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  long double sum = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    if (true_positive[i]) sum += envelope[i];
  }
  return static_cast<double>(sum / static_cast<long double>(gt_count));
}

ApReport average_precision(std::span<const DetectionRecord> detections,
                           std::span<const GroundTruthBox> gt, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw Error("average_precision: IoU threshold must lie in (0, 1)");
  }
  std::map<int, std::vector<int>> det_by_class, gt_by_class;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    det_by_class[detections[i].label].push_back(static_cast<int>(i));
  }
  for (std::size_t i = 0; i < gt.size(); ++i) gt_by_class[gt[i].label].push_back(static_cast<int>(i));

  ApReport report;
  std::vector<int> labels;
  for (const auto& [label, _] : det_by_class) labels.push_back(label);
  for (const auto& [label, _] : gt_by_class) labels.push_back(label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());

  double sum = 0.0;
  for (int label : labels) {
    std::vector<int> dets = det_by_class[label];
    const std::vector<int>& gts = gt_by_class[label];
    std::stable_sort(dets.begin(), dets.end(), [&](int a, int b) {
      return detections[a].confidence > detections[b].confidence;
    });
    std::vector<bool> matched(gts.size(), false);
    std::vector<bool> tp;
    for (int d : dets) {
      int best = -1;
      double best_iou = -1.0;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (matched[g]) continue;
        const double iou = iou3d(detections[d].box, gt[gts[g]].box);
        if (iou > best_iou) {
          best_iou = iou;
          best = static_cast<int>(g);
        }
      }
      const bool hit = best >= 0 && best_iou > iou_threshold;
      if (hit) matched[best] = true;
      tp.push_back(hit);
    }
    ClassAp cls;
    cls.gt_count = static_cast<int>(gts.size());
    cls.detection_count = static_cast<int>(dets.size());
    cls.ap = average_precision_from_matches(tp, cls.gt_count, &cls.precision, &cls.recall);
    if (cls.gt_count > 0) {
      sum += cls.ap;
      ++report.classes_in_mean;
    }
    report.per_class[label] = std::move(cls);
  }
  report.mean_ap = report.classes_in_mean > 0 ? sum / report.classes_in_mean : 0.0;
  return report;
}

PoseError pose_errors(const OrientedBox& pred, const OrientedBox& gt) {
  PoseError err;
  err.translation = (pred.center - gt.center).norm();
  err.rotation = rad_to_deg(std::abs(wrap_angle(pred.yaw - gt.yaw)));
  err.scale = (pred.size.array() / gt.size.array() - 1.0).abs().mean();
  return err;
}

PoseCorrect pose_within(const PoseError& err, const PoseThresholds& t) {
  const auto le = [](double v, double limit) { return v <= limit * (1.0 + 1e-12); };
  return {le(err.translation, t.translation), le(err.rotation, t.rotation),
          le(err.scale, t.scale)};
}

CameraMae camera_mae(std::span<const CameraPose> pred, std::span<const CameraPose> gt) {
  if (pred.size() != gt.size()) {
    throw Error("camera_mae: " + std::to_string(pred.size()) + " predictions vs " +
                std::to_string(gt.size()) + " ground-truth poses");
  }
  CameraMae out;
  if (pred.empty()) return out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.pitch_deg += std::abs(wrap_angle(pred[i].pitch - gt[i].pitch));
    out.roll_deg += std::abs(wrap_angle(pred[i].roll - gt[i].roll));
  }
  const double n = static_cast<double>(pred.size());
  out.pitch_deg = rad_to_deg(out.pitch_deg / n);
  out.roll_deg = rad_to_deg(out.roll_deg / n);
  return out;
}

Points sample_surface(const Mesh& mesh, int n_points, std::uint64_t seed) {
  if (n_points < 0) throw Error("sample_surface: negative sample count");
  std::vector<double> cumulative(mesh.face_count());
  double total = 0.0;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Vec3 a = mesh.vertices.col(mesh.faces(0, f));
    const Vec3 b = mesh.vertices.col(mesh.faces(1, f));
    const Vec3 c = mesh.vertices.col(mesh.faces(2, f));
    total += 0.5 * (b - a).cross(c - a).norm();
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw Error("sample_surface: mesh has zero surface area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Points out(3, n_points);
  for (int i = 0; i < n_points; ++i) {
    const double pick = unit(rng) * total;
    int f = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) -
                             cumulative.begin());
    f = std::min(f, mesh.face_count() - 1);
    const double r1 = std::sqrt(unit(rng));
    const double r2 = unit(rng);
    const Vec3 a = mesh.vertices.col(mesh.faces(0, f));
    const Vec3 b = mesh.vertices.col(mesh.faces(1, f));
    const Vec3 c = mesh.vertices.col(mesh.faces(2, f));
    out.col(i) = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c;
  }
  return out;
}

Points apply_transform(const Eigen::Matrix4d& transform, const Points& points) {
  return (transform.topLeftCorner<3, 3>() * points).colwise() +
         Vec3(transform.topRightCorner<3, 1>());
}

IcpResult icp_refine(const Points& source, const Points& target, const Eigen::Matrix4d& initial,
                     const IcpOptions& options) {
  require_non_collinear(source, "source");
  require_non_collinear(target, "target");
  const PointIndex index(target);

  IcpResult result;
  result.transform = initial;
  Correspondence corr = correspond(apply_transform(initial, source), index);
  result.rms = corr.rms;
  result.rms_history.push_back(corr.rms);
  for (int it = 0; it < options.max_iters && result.rms > 0.0; ++it) {
    // Closed-form least-squares fit to the current correspondences.
    const Eigen::Matrix4d next = Eigen::umeyama(source, corr.matched, options.with_scale);
    Correspondence next_corr = correspond(apply_transform(next, source), index);
    if (next_corr.rms > result.rms) break;
    const double improvement = result.rms - next_corr.rms;
    const double previous = result.rms;
    result.transform = next;
    result.rms = next_corr.rms;
    result.rms_history.push_back(next_corr.rms);
    result.iterations = it + 1;
    corr = std::move(next_corr);
    if (improvement <= options.tolerance * previous) break;
  }
  return result;
}

IcpResult icp_align(const Points& source, const Points& target, const IcpOptions& options) {
  require_non_collinear(source, "source");
  require_non_collinear(target, "target");
  const Vec3 mu_s = source.rowwise().mean();
  const Vec3 mu_t = target.rowwise().mean();

  auto start_from = [&](const Mat3& rotation) {
    double scale = 1.0;
    if (options.with_scale) {
      const double spread_s = std::sqrt((source.colwise() - mu_s).squaredNorm() / source.cols());
      const double spread_t = std::sqrt((target.colwise() - mu_t).squaredNorm() / target.cols());
      scale = spread_t / spread_s;
    }
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    t.topLeftCorner<3, 3>() = scale * rotation;
    t.topRightCorner<3, 1>() = mu_t - scale * rotation * mu_s;
    return t;
  };

  if (!options.multi_start) return icp_refine(source, target, start_from(Mat3::Identity()), options);

  std::vector<Mat3> rotations = cube_rotations();
  // Principal-axis alignments with the four proper sign choices.
  const auto axes = [](const Points& pts, const Vec3& mu) {
    const Points centered = pts.colwise() - mu;
    Eigen::SelfAdjointEigenSolver<Mat3> eig(centered * centered.transpose());
    return Mat3(eig.eigenvectors());
  };
  const Mat3 axes_s = axes(source, mu_s), axes_t = axes(target, mu_t);
  for (int signs = 0; signs < 8; ++signs) {
    Mat3 flip = Mat3::Identity();
    for (int a = 0; a < 3; ++a) flip(a, a) = (signs >> a) & 1 ? -1.0 : 1.0;
    const Mat3 r = axes_t * flip * axes_s.transpose();
    if (r.determinant() > 0) rotations.push_back(r);
  }

  IcpResult best;
  bool have = false;
  for (const Mat3& r : rotations) {
    IcpResult candidate = icp_refine(source, target, start_from(r), options);
    if (!have || candidate.rms < best.rms) {
      best = std::move(candidate);
      have = true;
    }
  }
  return best;
}

double eval_mesh_chamfer(const Mesh& pred, const Points& gt, const MeshChamferOptions& options) {
  const Points samples = sample_surface(pred, options.samples, options.seed);
  const IcpResult icp = icp_align(samples, gt, options.icp);
  return chamfer(apply_transform(icp.transform, samples), gt).value;
}

}  // namespace scenerecon
