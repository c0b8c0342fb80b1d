#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace scenerecon {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Point sets are stored column-wise: one 3D point per column.
using Points = Eigen::Matrix3Xd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wraps an angle into [-pi, pi).
template <typename Scalar>
Scalar wrap_angle(Scalar angle) {
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  Scalar wrapped = std::fmod(angle + std::numbers::pi_v<Scalar>, two_pi);
  if (wrapped < Scalar(0)) wrapped += two_pi;
  wrapped -= std::numbers::pi_v<Scalar>;
  // fmod can land exactly on +pi after the shift for inputs just below -pi.
  if (wrapped >= std::numbers::pi_v<Scalar>) wrapped -= two_pi;
  return wrapped;
}

// Derives an independent seed for sub-stream `stream` (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename Scalar>
constexpr Scalar deg_to_rad(Scalar deg) {
  return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}

template <typename Scalar>
constexpr Scalar rad_to_deg(Scalar rad) {
  return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

}  // namespace scenerecon
