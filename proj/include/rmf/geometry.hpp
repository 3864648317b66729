#pragma once

#include <optional>

#include "rmf/types.hpp"

namespace rmf {

enum class Projection { kPinhole, kOrthographic };

// Camera frame convention: +x right, +y down (pixel rows grow downward),
// +z forward. `rotation` maps camera axes to world axes.
struct Camera {
  Vec3 position = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  double fov_y = 0.5;  // radians, pinhole only
  Projection mode = Projection::kPinhole;
  double near = 0.1;
  double far = 10.0;
  double ortho_half_height = 1.0;  // orthographic only

  Vec3 lookat() const { return rotation.col(2); }

  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  bool operator==(const Camera& other) const;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length

  Vec3 at(double t) const { return origin + t * direction; }
};

Vec3 world2cam(const Camera& camera, const Vec3& x);
Vec3 cam2world(const Camera& camera, const Vec3& x);

/// Ray through the center of integer pixel (u, v). Throws std::out_of_range
/// for pixels outside [0, width) x [0, height).
Ray ray_for_pixel(const Camera& camera, int u, int v, int width, int height);

/// Ray through continuous pixel coordinates, where (0, 0) is the top-left
/// image corner and pixel (u, v) has its center at (u + 0.5, v + 0.5).
Ray ray_through(const Camera& camera, double px, double py, int width, int height);

/// Inverse of ray_through: continuous pixel coordinates of a world point.
/// Empty when the point is on or behind the pinhole image plane.
std::optional<Vec2> project_to_pixel(const Camera& camera, const Vec3& x, int width,
                                     int height);

/// Image-plane coordinates in [-1, 1] across the frustum (x scaled by aspect).
/// Empty when the point is on or behind the pinhole image plane.
std::optional<Vec2> normalized_image_coords(const Camera& camera, const Vec3& x_cam,
                                            double aspect);

// Rotation for yaw (about camera y), then pitch (x), then roll (z).
Mat3 pose_rotation(double yaw, double pitch, double roll);

/// Camera at `radius` from `target`, oriented by pose_rotation. Zero pose
/// looks down +z from (target - radius * z). Intrinsics come from `intrinsics`.
Camera orbit_camera(double yaw, double pitch, double roll, double radius, const Vec3& target,
                    const Camera& intrinsics);

/// Rotates the camera about the axis through `pivot` parallel to its own
/// y axis.
Camera orbit_about(const Camera& camera, const Vec3& pivot, double yaw);

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y, double near,
               double far);

/// Moves a pinhole camera along its lookat axis so the subject sits at
/// `new_distance` in depth, and widens or narrows fov so that
/// new_distance * tan(fov'/2) == d * tan(fov/2). near/far scale with the
/// distance ratio. Throws std::invalid_argument for orthographic cameras or
/// non-positive distances.
Camera dolly_zoom_camera(const Camera& camera, double new_distance, const Vec3& subject);

}  // namespace rmf
