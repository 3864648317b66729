#pragma once

#include <Eigen/Core>

namespace rmf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Upper bound on feature channels and MLP layer widths. Keeps per-hit
// feature vectors on the stack.
inline constexpr int kMaxChannels = 64;

using Feature = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxChannels, 1>;

inline Feature zero_feature(int channels) { return Feature::Zero(channels); }

}  // namespace rmf
