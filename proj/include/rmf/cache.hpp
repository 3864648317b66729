#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rmf/intersect.hpp"
#include "rmf/radiance.hpp"
#include "rmf/render.hpp"

namespace rmf {

struct CacheNode {
  bool valid = false;
  Vec3 point = Vec3::Zero();
  double t = 0.0;
  Feature feature;  // coarse tri-plane feature
  RadianceSample radiance;  // decode(feature), no detail
};

// All nodes of one (level, crossing) pair over the low-res ray grid.
struct CacheSlot {
  int level = 0;
  int crossing = 0;
  std::vector<CacheNode> nodes;  // row-major, lowres_width x lowres_height
};

// Barycentric location on one cached triangle. Each grid quad (j, k) splits
// into triangle 0 = (j,k) (j+1,k) (j,k+1) and triangle 1 = (j+1,k) (j+1,k+1) (j,k+1).
struct CachedPoint {
  int slot = 0;
  int quad_x = 0;
  int quad_y = 0;
  int half = 0;
  Vec3 bary = Vec3(1.0, 0.0, 0.0);
};

// Manifold geometry and coarse features seen from the input camera. Holds
// no scalar field, so rendering from it cannot evaluate one.
class ManifoldCache {
 public:
  Camera camera;
  int width = 0;   // input image size the low-res grid is aligned to
  int height = 0;
  int factor = 1;
  int num_levels = 0;
  int channels = 0;
  IntersectionSet lowres;
  std::vector<CacheSlot> slots;  // sorted by (level, crossing)
  Mlp decoder;

  int lowres_width() const { return lowres.width; }
  int lowres_height() const { return lowres.height; }
  const CacheNode& node(int slot, int j, int k) const {
    return slots[static_cast<std::size_t>(slot)]
        .nodes[static_cast<std::size_t>(k) * lowres.width + j];
  }
  /// Slot index of (level, crossing), or -1.
  int find_slot(int level, int crossing) const;

  /// Corner nodes of a cached triangle in barycentric order.
  std::array<const CacheNode*, 3> triangle(const CachedPoint& p) const;

  Vec3 point_at(const CachedPoint& p) const;
  Feature feature_at(const CachedPoint& p) const;

  /// Decoded radiance at a cached point. Depends only on the point, never
  /// on a render camera.
  RadianceSample radiance_at(const CachedPoint& p, const DetailManifolds* detail) const;
};

ManifoldCache cache_manifolds(const TriPlaneScene& scene, const Camera& camera_in, int width,
                              int height, int factor, const SolverParams& params = {});

/// Rasterizes the cached manifold meshes into `camera`. Uses options.width,
/// options.height, background and background_manifold; normals are not
/// available from a cache.
ShadedImage shade_cached(const ManifoldCache& cache, const Camera& camera,
                         const DetailManifolds* detail, const RenderOptions& options);

GBuffer render_cached(const ManifoldCache& cache, const Camera& camera,
                      const RenderOptions& options, const DetailManifolds* detail = nullptr);

}  // namespace rmf
