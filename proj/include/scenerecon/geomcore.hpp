#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scenerecon/common.hpp"

// Camera model, rotations and oriented-box parameterization.
//
// Frames: the world frame shares its origin with the camera. The y axis is
// the world vertical; boxes rotate about it by their yaw. A camera pose
// (pitch, roll) maps world directions to camera directions through
// rotation_from_pose; intrinsics map camera rays to pixels.
//
// Everything here is templated on the scalar type so the same code runs in
// double for the library and in long double for test references.

namespace scenerecon {

template <typename Scalar>
struct CameraIntrinsicsT {
  Scalar fx{1};
  Scalar fy{1};
  Scalar cx{0};
  Scalar cy{0};

  Eigen::Matrix<Scalar, 3, 3> matrix() const {
    Eigen::Matrix<Scalar, 3, 3> k;
    k << fx, Scalar(0), cx, Scalar(0), fy, cy, Scalar(0), Scalar(0), Scalar(1);
    return k;
  }
};

// Pitch (beta) and roll (gamma), radians, both in (-pi/2, pi/2).
template <typename Scalar>
struct CameraPoseT {
  Scalar pitch{0};
  Scalar roll{0};
};

// Image-space description of an object center: the 2D detection box center
// cb, a learned offset delta (so the projected center is cb + delta) and the
// distance d from the camera center.
template <typename Scalar>
struct ProjectedCenterT {
  Eigen::Matrix<Scalar, 2, 1> box_center = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Eigen::Matrix<Scalar, 2, 1> offset = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Scalar distance{1};

  Eigen::Matrix<Scalar, 2, 1> center() const { return box_center + offset; }
};

// Yaw-only 3D box. `size` holds full edge lengths, not half extents.
template <typename Scalar>
struct OrientedBoxT {
  Eigen::Matrix<Scalar, 3, 1> center = Eigen::Matrix<Scalar, 3, 1>::Zero();
  Eigen::Matrix<Scalar, 3, 1> size = Eigen::Matrix<Scalar, 3, 1>::Ones();
  Scalar yaw{0};
};

template <typename Scalar>
struct SceneLayoutT {
  OrientedBoxT<Scalar> box;
  CameraPoseT<Scalar> camera;
};

// Per-object box parameters as regressed by a detector: (delta, d, s, theta).
template <typename Scalar>
struct BoxParamsT {
  Eigen::Matrix<Scalar, 2, 1> offset = Eigen::Matrix<Scalar, 2, 1>::Zero();
  Scalar distance{1};
  Eigen::Matrix<Scalar, 3, 1> size = Eigen::Matrix<Scalar, 3, 1>::Ones();
  Scalar yaw{0};
};

// A 2D detection center together with the box parameters attached to it.
template <typename Scalar>
struct ObjectDetectionT {
  Eigen::Matrix<Scalar, 2, 1> box_center = Eigen::Matrix<Scalar, 2, 1>::Zero();
  BoxParamsT<Scalar> params;
};

// Axis-aligned image box given by center, width and height in pixels.
struct Box2D {
  Vec2 center = Vec2::Zero();
  double width{1};
  double height{1};
};

using CameraIntrinsics = CameraIntrinsicsT<double>;
using CameraPose = CameraPoseT<double>;
using ProjectedCenter = ProjectedCenterT<double>;
using OrientedBox = OrientedBoxT<double>;
using SceneLayout = SceneLayoutT<double>;
using BoxParams = BoxParamsT<double>;
using ObjectDetection = ObjectDetectionT<double>;

using BoxCorners = Eigen::Matrix<double, 3, 8>;

// Condition number above which K is treated as singular.
inline constexpr double kMaxIntrinsicsCondition = 1e12;

// Number of scalar parameters in a box Jacobian, in this column order:
// offset x, offset y, distance, size x, size y, size z, yaw, pitch, roll.
inline constexpr int kBoxParamCount = 9;
enum BoxParam : int {
  kOffsetX = 0,
  kOffsetY,
  kDistance,
  kSizeX,
  kSizeY,
  kSizeZ,
  kYaw,
  kPitch,
  kRoll
};

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rotation_from_pose(const CameraPoseT<Scalar>& pose) {
  using std::cos;
  using std::sin;
  const Scalar cb = cos(pose.pitch), sb = sin(pose.pitch);
  const Scalar cg = cos(pose.roll), sg = sin(pose.roll);
  Eigen::Matrix<Scalar, 3, 3> r;
  r << cb, -cg * sb, sb * sg,
       sb, cb * cg, -cb * sg,
       Scalar(0), sg, cg;
  return r;
}

// d/d(pitch) and d/d(roll) of rotation_from_pose.
template <typename Scalar>
std::array<Eigen::Matrix<Scalar, 3, 3>, 2> rotation_from_pose_derivatives(
    const CameraPoseT<Scalar>& pose) {
  using std::cos;
  using std::sin;
  const Scalar cb = cos(pose.pitch), sb = sin(pose.pitch);
  const Scalar cg = cos(pose.roll), sg = sin(pose.roll);
  Eigen::Matrix<Scalar, 3, 3> d_pitch, d_roll;
  d_pitch << -sb, -cg * cb, cb * sg,
             cb, -sb * cg, sb * sg,
             Scalar(0), Scalar(0), Scalar(0);
  d_roll << Scalar(0), sg * sb, sb * cg,
            Scalar(0), -cb * sg, -cb * cg,
            Scalar(0), cg, -sg;
  return {d_pitch, d_roll};
}

// Rotation about the world vertical (y) axis.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rotation_y(Scalar yaw) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(yaw), s = sin(yaw);
  Eigen::Matrix<Scalar, 3, 3> r;
  r << c, Scalar(0), s,
       Scalar(0), Scalar(1), Scalar(0),
       -s, Scalar(0), c;
  return r;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rotation_y_derivative(Scalar yaw) {
  using std::cos;
  using std::sin;
  const Scalar c = cos(yaw), s = sin(yaw);
  Eigen::Matrix<Scalar, 3, 3> r;
  r << -s, Scalar(0), c,
       Scalar(0), Scalar(0), Scalar(0),
       -c, Scalar(0), -s;
  return r;
}

// Inverse of K, after checking it is well conditioned.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> intrinsics_inverse(const CameraIntrinsicsT<Scalar>& k) {
  if (!(k.fx > Scalar(0)) || !(k.fy > Scalar(0))) {
    throw Error("camera intrinsics: focal lengths must be positive");
  }
  // K is upper triangular with unit last row; invert in closed form.
  Eigen::Matrix<Scalar, 3, 3> inv;
  inv << Scalar(1) / k.fx, Scalar(0), -k.cx / k.fx,
         Scalar(0), Scalar(1) / k.fy, -k.cy / k.fy,
         Scalar(0), Scalar(0), Scalar(1);
  // Frobenius-norm condition number.
  const Scalar condition = k.matrix().norm() * inv.norm();
  if (!(condition <= Scalar(kMaxIntrinsicsCondition))) {
    throw Error("camera intrinsics: matrix K is numerically singular");
  }
  return inv;
}

// World-frame center from its projection and distance:
// C = R^-1 * d * K^-1 [c, 1]^T / |K^-1 [c, 1]^T|.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> center_from_projection(
    const ProjectedCenterT<Scalar>& pc, const CameraPoseT<Scalar>& pose,
    const CameraIntrinsicsT<Scalar>& k) {
  const Eigen::Matrix<Scalar, 3, 3> k_inv = intrinsics_inverse(k);
  const Eigen::Matrix<Scalar, 2, 1> c = pc.center();
  const Eigen::Matrix<Scalar, 3, 1> ray =
      k_inv * Eigen::Matrix<Scalar, 3, 1>(c.x(), c.y(), Scalar(1));
  return rotation_from_pose(pose).transpose() * (pc.distance * ray.normalized());
}

// Inverse of center_from_projection. The returned box_center holds the
// projected center and offset is zero.
template <typename Scalar>
ProjectedCenterT<Scalar> project_center(const Eigen::Matrix<Scalar, 3, 1>& center,
                                        const CameraPoseT<Scalar>& pose,
                                        const CameraIntrinsicsT<Scalar>& k) {
  intrinsics_inverse(k);  // validates K
  const Eigen::Matrix<Scalar, 3, 1> cam = rotation_from_pose(pose) * center;
  if (!(cam.z() > Scalar(0))) {
    throw Error("project_center: point is not in front of the camera");
  }
  const Eigen::Matrix<Scalar, 3, 1> pix = k.matrix() * (cam / cam.z());
  ProjectedCenterT<Scalar> out;
  out.box_center = pix.template head<2>();
  out.offset.setZero();
  out.distance = center.norm();
  return out;
}

// Unit-cube sign of corner `index` along `axis`: bit `axis` of the index
// selects +1 when set, -1 when clear.
constexpr int corner_sign(int index, int axis) {
  return ((index >> axis) & 1) ? 1 : -1;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 8> box_corners(const OrientedBoxT<Scalar>& box) {
  const Eigen::Matrix<Scalar, 3, 3> r = rotation_y(box.yaw);
  Eigen::Matrix<Scalar, 3, 8> corners;
  for (int i = 0; i < 8; ++i) {
    Eigen::Matrix<Scalar, 3, 1> local;
    for (int a = 0; a < 3; ++a) {
      local(a) = Scalar(corner_sign(i, a)) * box.size(a) / Scalar(2);
    }
    corners.col(i) = box.center + r * local;
  }
  return corners;
}

template <typename Scalar>
OrientedBoxT<Scalar> box_from_detection(const ObjectDetectionT<Scalar>& det,
                                        const CameraPoseT<Scalar>& pose,
                                        const CameraIntrinsicsT<Scalar>& k) {
  ProjectedCenterT<Scalar> pc;
  pc.box_center = det.box_center;
  pc.offset = det.params.offset;
  pc.distance = det.params.distance;
  OrientedBoxT<Scalar> box;
  box.center = center_from_projection(pc, pose, k);
  box.size = det.params.size;
  box.yaw = det.params.yaw;
  return box;
}

// Jacobian of center_from_projection with respect to
// (offset x, offset y, distance, pitch, roll).
struct CenterJacobian {
  Vec3 center;
  Eigen::Matrix<double, 3, 5> jacobian;
};

inline CenterJacobian center_jacobian(const ObjectDetection& det, const CameraPose& pose,
                                      const CameraIntrinsics& k) {
  const Mat3 k_inv = intrinsics_inverse(k);
  const Vec2 c = det.box_center + det.params.offset;
  const Vec3 ray = k_inv * Vec3(c.x(), c.y(), 1.0);
  const double ray_norm = ray.norm();
  const Vec3 n = ray / ray_norm;
  const double d = det.params.distance;
  const Mat3 rt = rotation_from_pose(pose).transpose();
  const auto dr = rotation_from_pose_derivatives(pose);

  CenterJacobian out;
  out.center = rt * (d * n);
  const Mat3 dn_dray = (Mat3::Identity() - n * n.transpose()) / ray_norm;
  out.jacobian.leftCols<2>() = d * rt * dn_dray * k_inv.leftCols<2>();
  out.jacobian.col(2) = rt * n;
  out.jacobian.col(3) = dr[0].transpose() * (d * n);
  out.jacobian.col(4) = dr[1].transpose() * (d * n);
  return out;
}

// World-frame corners for one object together with d(corners)/d(params).
// Jacobian rows are corner-major (row 3*k + axis); columns follow BoxParam.
struct BoxCornersJacobian {
  BoxCorners corners;
  Eigen::Matrix<double, 24, kBoxParamCount> jacobian;
};

inline BoxCornersJacobian box_corners_jacobian(const ObjectDetection& det,
                                               const CameraPose& pose,
                                               const CameraIntrinsics& k) {
  const CenterJacobian cj = center_jacobian(det, pose, k);
  const Vec3& size = det.params.size;
  const Mat3 r = rotation_y(det.params.yaw);
  const Mat3 dr = rotation_y_derivative(det.params.yaw);

  BoxCornersJacobian out;
  out.jacobian.setZero();
  for (int i = 0; i < 8; ++i) {
    Vec3 sign;
    for (int a = 0; a < 3; ++a) sign(a) = corner_sign(i, a);
    const Vec3 local = sign.cwiseProduct(size) / 2.0;
    out.corners.col(i) = cj.center + r * local;

    auto rows = out.jacobian.middleRows<3>(3 * i);
    rows.col(kOffsetX) = cj.jacobian.col(0);
    rows.col(kOffsetY) = cj.jacobian.col(1);
    rows.col(kDistance) = cj.jacobian.col(2);
    for (int a = 0; a < 3; ++a) rows.col(kSizeX + a) = r.col(a) * (sign(a) / 2.0);
    rows.col(kYaw) = dr * local;
    rows.col(kPitch) = cj.jacobian.col(3);
    rows.col(kRoll) = cj.jacobian.col(4);
  }
  return out;
}

inline std::vector<BoxCorners> boxes_world_from_params(
    std::span<const ObjectDetection> detections, const CameraPose& pose,
    const CameraIntrinsics& k) {
  std::vector<BoxCorners> out;
  out.reserve(detections.size());
  for (const auto& det : detections) {
    out.push_back(box_corners(box_from_detection(det, pose, k)));
  }
  return out;
}

inline std::vector<BoxCornersJacobian> boxes_world_from_params_with_jacobian(
    std::span<const ObjectDetection> detections, const CameraPose& pose,
    const CameraIntrinsics& k) {
  std::vector<BoxCornersJacobian> out;
  out.reserve(detections.size());
  for (const auto& det : detections) out.push_back(box_corners_jacobian(det, pose, k));
  return out;
}

}  // namespace scenerecon
