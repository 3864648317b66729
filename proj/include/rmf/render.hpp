#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rmf/geometry.hpp"
#include "rmf/image.hpp"
#include "rmf/intersect.hpp"
#include "rmf/radiance.hpp"

namespace rmf {

class DetailManifolds;

struct DepthSample {
  RadianceSample radiance;
  double depth = 0.0;
};

struct CompositeResult {
  Vec3 color = Vec3::Zero();
  double z_surf = 0.0;
  std::vector<double> weights;
  double residual = 1.0;  // prod (1 - alpha_j) over all samples
};

/// Front-to-back compositing. Color excludes any background term. Throws
/// std::invalid_argument when depths decrease.
CompositeResult composite(std::span<const DepthSample> samples);

enum class IntersectMode { kExact, kLowres };

struct RenderOptions {
  int width = 64;
  int height = 64;
  IntersectMode mode = IntersectMode::kLowres;
  int factor = 4;
  SolverParams solver;
  Vec3 background = Vec3::Zero();
  // When set, hits on the last iso-level are treated as fully opaque.
  bool background_manifold = false;
  bool normals = false;

  void validate() const;
};

// One decoded intersection. `depth` is camera-space z in the render camera.
struct ShadedHit {
  Vec3 point = Vec3::Zero();
  double depth = 0.0;
  int level = 0;
  int crossing = 0;
  Feature input;  // decoder input: coarse feature plus detail
  RadianceSample radiance;
  bool opaque = false;  // alpha pinned to 1 by the background manifold
  Vec3 alpha_grad = Vec3::Zero();
};

struct ShadedImage {
  int width = 0;
  int height = 0;
  std::vector<std::vector<ShadedHit>> pixels;  // row-major, sorted near to far
  std::uint64_t field_evals = 0;

  const std::vector<ShadedHit>& at(int u, int v) const {
    return pixels[static_cast<std::size_t>(v) * width + u];
  }
};

struct GBuffer {
  int width = 0;
  int height = 0;
  Image color;
  std::vector<double> z_surf;
  std::vector<Vec3> normal;
  std::vector<double> residual;
  std::vector<std::uint8_t> degenerate;
  std::uint64_t field_evals = 0;

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
};

/// Intersections for `camera` as selected by options.mode and options.factor.
IntersectionSet render_intersections(const TriPlaneScene& scene, const Camera& camera,
                                     const RenderOptions& options);

/// Decodes every valid hit. `detail` may be null.
ShadedImage shade(const TriPlaneScene& scene, const Camera& camera,
                  const IntersectionSet& hits, const DetailManifolds* detail,
                  const RenderOptions& options);

/// Composites shaded hits into a G-buffer. Pixels without hits take the
/// background color, z_surf = far and a zero normal.
GBuffer composite_image(const ShadedImage& shaded, const Camera& camera,
                        const RenderOptions& options);

GBuffer render(const TriPlaneScene& scene, const Camera& camera, const RenderOptions& options,
               const DetailManifolds* detail = nullptr);

/// Unit normals from render(options with normals = true); degenerate pixels
/// carry a zero vector.
GBuffer normal_map(const TriPlaneScene& scene, const Camera& camera, RenderOptions options,
                   const DetailManifolds* detail = nullptr);

struct Scanline {
  int row = 0;
  int col_start = 0;
  int col_end = 0;  // exclusive
};

/// One rendered scanline per trajectory pose, stacked top to bottom.
Image texture_strip(const TriPlaneScene& scene, std::span<const Camera> trajectory,
                    const Scanline& scanline, const RenderOptions& options,
                    const DetailManifolds* detail = nullptr);

/// Given dL/dcolor per pixel (same layout as Image::data), returns dL/d input
/// for every shaded hit, laid out like `shaded.pixels`. Geometry is treated
/// as constant.
std::vector<std::vector<Feature>> shade_backward(const ShadedImage& shaded,
                                                 const Mlp& decoder,
                                                 std::span<const double> grad_color,
                                                 const RenderOptions& options);

/// Accumulates dL/d planes for the coarse part of the decoder input.
void scatter_to_planes(const TriPlanes& planes, const ShadedImage& shaded,
                       const std::vector<std::vector<Feature>>& grad_inputs,
                       std::span<double> grad_planes);

}  // namespace rmf
