#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "rmf/geometry.hpp"
#include "rmf/types.hpp"

namespace rmf {

class ManifoldCache;

// Feature grid aligned with the input camera's frustum. Lateral axes follow
// normalized image coordinates in [-1, 1]; the depth axis is camera-space z
// from near to far. Corner-aligned: node 0 sits on the boundary.
struct DetailVoxel {
  int height = 32;
  int width = 32;
  int depth = 16;
  int channels = 8;
  Camera camera;
  double aspect = 1.0;  // input image width / height
  std::vector<double> data;  // [y][x][z][channel]

  static DetailVoxel zeros(const Camera& camera, double aspect, int height = 32, int width = 32,
                           int depth = 16, int channels = 8);

  std::size_t index(int y, int x, int z, int c) const {
    return ((static_cast<std::size_t>(y) * width + x) * depth + z) * channels + c;
  }
  double slab_width() const { return (camera.far - camera.near) / depth; }
  void validate_dims() const;
  void validate() const;
};

struct VoxelTaps {
  std::array<std::size_t, 8> offset{};  // channel-0 offsets
  std::array<double, 8> weight{};
  bool inside = false;
};

struct VoxelSample {
  Feature feature;
  bool inside = false;
};

VoxelTaps voxel_taps(const DetailVoxel& voxel, const Vec3& x_world);

/// Trilinear sample; zero and inside = false outside the frustum.
VoxelSample sample_voxel(const DetailVoxel& voxel, const Vec3& x_world);

// Per-level 2D feature map parameterized by the input camera's pixel grid:
// texel (0, 0) sits on pixel center (0.5, 0.5) and texel (width-1, height-1)
// on the last pixel center.
struct ManifoldFeatureMap {
  int level = 0;
  int width = 0;
  int height = 0;
  int channels = 0;
  int grid_width = 0;  // input camera pixel grid
  int grid_height = 0;
  std::vector<double> data;  // [row][col][channel]

  static ManifoldFeatureMap zeros(int level, int width, int height, int channels, int grid_width,
                                  int grid_height);
  std::size_t index(int col, int row, int c = 0) const {
    return (static_cast<std::size_t>(row) * width + col) * channels + c;
  }
  Feature texel(int col, int row) const;
};

/// One low-res map per iso-level. Texel (j, k) holds the voxel sampled at the
/// nearest cached crossing of that level on low-res ray (j, k); rays without
/// a valid crossing give zero. Throws when the voxel and cache cameras differ.
std::vector<ManifoldFeatureMap> flatten_manifolds(const DetailVoxel& voxel,
                                                  const ManifoldCache& cache);

/// Transpose of flatten_manifolds: accumulates into a voxel-shaped buffer.
void flatten_backward(const DetailVoxel& voxel, const ManifoldCache& cache,
                      const std::vector<ManifoldFeatureMap>& grad_maps,
                      std::span<double> grad_voxel);

struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weight;  // [out][in][3][3]
  std::vector<double> bias;    // [out]

  std::size_t index(int o, int i, int dy, int dx) const {
    return ((static_cast<std::size_t>(o) * in_channels + i) * 3 + dy) * 3 + dx;
  }
};

// Two blocks of conv3x3 -> LeakyReLU -> conv3x3 -> bilinear x2, replicate
// padding at borders.
struct ConvStack {
  std::array<ConvLayer, 4> layers;
  double slope = 0.2;

  /// Center-tap identity kernels: the stack then reduces to two bilinear
  /// doublings for non-negative inputs.
  static ConvStack identity(int channels);
  void validate(int channels) const;
};

struct UpsampleOp {
  enum class Kind { kBilinear, kConvStack };
  Kind kind = Kind::kBilinear;
  ConvStack stack;
};

/// Corner-aligned bilinear resize to (width, height).
ManifoldFeatureMap resize_bilinear(const ManifoldFeatureMap& map, int width, int height);
ManifoldFeatureMap resize_bilinear_backward(const ManifoldFeatureMap& grad_out, int width,
                                            int height);

/// x4 super-resolution. Throws for any other factor.
ManifoldFeatureMap upsample(const ManifoldFeatureMap& map, const UpsampleOp& op, int factor = 4);

/// Gradient w.r.t. the low-res input map of upsample(map, op).
ManifoldFeatureMap upsample_backward(const ManifoldFeatureMap& map, const UpsampleOp& op,
                                     const ManifoldFeatureMap& grad_out);

struct MapTaps {
  std::array<std::size_t, 4> offset{};
  std::array<double, 4> weight{};
  bool inside = false;
};

MapTaps map_taps(const ManifoldFeatureMap& map, const Camera& camera_in, const Vec3& x);

/// Detail feature for a point on manifold `level`: projects x through the
/// input camera and samples maps[level] bilinearly. Zero outside the image.
Feature reproject(std::span<const ManifoldFeatureMap> maps, const Camera& camera_in,
                  const Vec3& x, int level);

void reproject_scatter(std::span<ManifoldFeatureMap> grad_maps, const Camera& camera_in,
                       const Vec3& x, int level, const Feature& grad);

class DetailManifolds {
 public:
  DetailManifolds(Camera camera_in, std::vector<ManifoldFeatureMap> lowres,
                  std::vector<ManifoldFeatureMap> highres);

  Feature at(const Vec3& x, int level) const;
  int channels() const { return channels_; }
  const Camera& camera() const { return camera_; }
  const std::vector<ManifoldFeatureMap>& lowres() const { return lowres_; }
  const std::vector<ManifoldFeatureMap>& highres() const { return highres_; }

 private:
  Camera camera_;
  int channels_ = 0;
  std::vector<ManifoldFeatureMap> lowres_;
  std::vector<ManifoldFeatureMap> highres_;
};

/// voxel -> flatten -> upsample -> maps ready for reprojection.
DetailManifolds build_detail(const DetailVoxel& voxel, const ManifoldCache& cache,
                             const UpsampleOp& op = {});

struct DetailHitGrad {
  Vec3 point;
  int level = 0;
  Feature grad;
};

/// Zeroed gradient buffers shaped like built.highres().
std::vector<ManifoldFeatureMap> zero_highres_grads(const DetailManifolds& built);

/// Accumulates dL/d voxel from gradients w.r.t. the high-res maps.
void highres_backward(const DetailVoxel& voxel, const ManifoldCache& cache, const UpsampleOp& op,
                      const DetailManifolds& built,
                      const std::vector<ManifoldFeatureMap>& grad_highres,
                      std::span<double> grad_voxel);

/// Accumulates dL/d voxel from per-hit gradients of the detail feature.
void detail_backward(const DetailVoxel& voxel, const ManifoldCache& cache, const UpsampleOp& op,
                     const DetailManifolds& built, std::span<const DetailHitGrad> hit_grads,
                     std::span<double> grad_voxel);

}  // namespace rmf
