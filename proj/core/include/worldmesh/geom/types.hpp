#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace worldmesh {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Geometric coincidence tolerance (meters).
inline constexpr double kCoincidentEps = 1e-9;

struct Aabb3 {
  Vec3 min{Vec3::Constant(std::numeric_limits<double>::infinity())};
  Vec3 max{Vec3::Constant(-std::numeric_limits<double>::infinity())};

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb3& o) {
    min = min.cwiseMin(o.min);
    max = max.cwiseMax(o.max);
  }
  bool empty() const { return (min.array() > max.array()).any(); }
  bool overlaps(const Aabb3& o, double eps = 0.0) const {
    return (min.array() <= o.max.array() + eps).all() && (o.min.array() <= max.array() + eps).all();
  }
  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 size() const { return max - min; }
};

}  // namespace worldmesh
