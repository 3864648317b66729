#include "rmf/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Geometry>

namespace rmf {

void Camera::validate() const {
  const Mat3 gram = rotation.transpose() * rotation;
  if (!gram.isIdentity(1e-10) || rotation.determinant() < 0.0) {
    throw std::invalid_argument("camera rotation is not a proper orthonormal matrix");
  }
  if (!(near > 0.0 && near < far)) {
    throw std::invalid_argument("camera requires 0 < near < far");
  }
  if (mode == Projection::kPinhole && !(fov_y > 0.0 && fov_y < std::numbers::pi)) {
    throw std::invalid_argument("camera fov_y must lie in (0, pi)");
  }
  if (mode == Projection::kOrthographic && !(ortho_half_height > 0.0)) {
    throw std::invalid_argument("orthographic camera requires ortho_half_height > 0");
  }
  if (!position.allFinite()) {
    throw std::invalid_argument("camera position is not finite");
  }
}

bool Camera::operator==(const Camera& other) const {
  return position == other.position && rotation == other.rotation && fov_y == other.fov_y &&
         mode == other.mode && near == other.near && far == other.far &&
         ortho_half_height == other.ortho_half_height;
}

Vec3 world2cam(const Camera& camera, const Vec3& x) {
  return camera.rotation.transpose() * (x - camera.position);
}

Vec3 cam2world(const Camera& camera, const Vec3& x) {
  return camera.rotation * x + camera.position;
}

Ray ray_for_pixel(const Camera& camera, int u, int v, int width, int height) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  if (u < 0 || u >= width || v < 0 || v >= height) {
    throw std::out_of_range("pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                            ") outside " + std::to_string(width) + "x" +
                            std::to_string(height) + " image");
  }
  return ray_through(camera, u + 0.5, v + 0.5, width, height);
}

Ray ray_through(const Camera& camera, double px, double py, int width, int height) {
  const double aspect = static_cast<double>(width) / height;
  const double nx = 2.0 * px / width - 1.0;
  const double ny = 2.0 * py / height - 1.0;
  Ray ray;
  if (camera.mode == Projection::kPinhole) {
    const double t = std::tan(0.5 * camera.fov_y);
    const Vec3 d(nx * t * aspect, ny * t, 1.0);
    ray.origin = camera.position;
    ray.direction = camera.rotation * d.normalized();
  } else {
    const double h = camera.ortho_half_height;
    ray.origin = camera.position + camera.rotation * Vec3(nx * h * aspect, ny * h, 0.0);
    ray.direction = camera.rotation.col(2);
  }
  return ray;
}

std::optional<Vec2> normalized_image_coords(const Camera& camera, const Vec3& x_cam,
                                            double aspect) {
  if (camera.mode == Projection::kPinhole) {
    if (x_cam.z() <= 0.0) return std::nullopt;
    const double t = std::tan(0.5 * camera.fov_y);
    return Vec2(x_cam.x() / (x_cam.z() * t * aspect), x_cam.y() / (x_cam.z() * t));
  }
  const double h = camera.ortho_half_height;
  return Vec2(x_cam.x() / (h * aspect), x_cam.y() / h);
}

std::optional<Vec2> project_to_pixel(const Camera& camera, const Vec3& x, int width,
                                     int height) {
  const double aspect = static_cast<double>(width) / height;
  const auto ndc = normalized_image_coords(camera, world2cam(camera, x), aspect);
  if (!ndc) return std::nullopt;
  return Vec2(0.5 * (ndc->x() + 1.0) * width, 0.5 * (ndc->y() + 1.0) * height);
}

Mat3 pose_rotation(double yaw, double pitch, double roll) {
  const Eigen::AngleAxisd ry(yaw, Vec3::UnitY());
  const Eigen::AngleAxisd rx(pitch, Vec3::UnitX());
  const Eigen::AngleAxisd rz(roll, Vec3::UnitZ());
  return (ry * rx * rz).toRotationMatrix();
}

Camera orbit_camera(double yaw, double pitch, double roll, double radius, const Vec3& target,
                    const Camera& intrinsics) {
  Camera camera = intrinsics;
  camera.rotation = pose_rotation(yaw, pitch, roll);
  camera.position = target - radius * camera.rotation.col(2);
  return camera;
}

Camera orbit_about(const Camera& camera, const Vec3& pivot, double yaw) {
  const Mat3 q = Eigen::AngleAxisd(yaw, camera.rotation.col(1)).toRotationMatrix();
  Camera out = camera;
  out.position = pivot + q * (camera.position - pivot);
  out.rotation = q * camera.rotation;
  return out;
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_y, double near,
               double far) {
  const Vec3 z = (target - eye).normalized();
  const Vec3 down = -(up - up.dot(z) * z);
  if (down.norm() < 1e-12) {
    throw std::invalid_argument("look_at: up vector parallel to viewing direction");
  }
  const Vec3 y = down.normalized();
  const Vec3 x = y.cross(z);
  Camera camera;
  camera.position = eye;
  camera.rotation.col(0) = x;
  camera.rotation.col(1) = y;
  camera.rotation.col(2) = z;
  camera.fov_y = fov_y;
  camera.near = near;
  camera.far = far;
  return camera;
}

Camera dolly_zoom_camera(const Camera& camera, double new_distance, const Vec3& subject) {
  if (camera.mode != Projection::kPinhole) {
    throw std::invalid_argument("dolly zoom requires a pinhole camera");
  }
  if (!(new_distance > 0.0)) {
    throw std::invalid_argument("dolly zoom distance must be positive");
  }
  const Vec3 axis = camera.lookat();
  const double d = (subject - camera.position).dot(axis);
  if (!(d > 0.0)) {
    throw std::invalid_argument("dolly zoom subject must lie in front of the camera");
  }
  if (new_distance == d) return camera;

  Camera out = camera;
  out.position = camera.position + (d - new_distance) * axis;
  out.fov_y = 2.0 * std::atan(d * std::tan(0.5 * camera.fov_y) / new_distance);
  const double scale = new_distance / d;
  out.near = camera.near * scale;
  out.far = camera.far * scale;
  return out;
}

}  // namespace rmf
