#pragma once

// Per-pixel kernels shared by the OpenMP drivers and the serial reference
// drivers, so both paths run identical arithmetic.

#include <vector>

#include "rmf/render.hpp"

namespace rmf::internal {

std::vector<ShadedHit> shade_pixel(const TriPlaneScene& scene, const Camera& camera,
                                   const HitList& hits, const DetailManifolds* detail,
                                   const RenderOptions& options);

void sort_by_depth(std::vector<ShadedHit>& hits);

double hit_alpha(const ShadedHit& hit);

void composite_pixel(const std::vector<ShadedHit>& hits, const Camera& camera,
                     const RenderOptions& options, GBuffer& out, std::size_t index);

std::vector<Feature> backward_pixel(const std::vector<ShadedHit>& hits, const Mlp& decoder,
                                    const Vec3& grad_color, const Vec3& background);

GBuffer allocate_gbuffer(int width, int height);

}  // namespace rmf::internal
