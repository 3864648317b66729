#pragma once

// Single-threaded drivers over the same per-ray and per-pixel kernels as the
// OpenMP paths. Tests compare the two bit for bit; the benchmark times them.

#include "rmf/intersect.hpp"
#include "rmf/render.hpp"

namespace rmf::reference {

IntersectionSet intersect_grid(const Camera& camera, const ScalarField& field,
                               const IsoLevels& levels, int width, int height,
                               const SolverParams& params = {});

IntersectionSet intersect_lowres_upsample(const Camera& camera, const ScalarField& field,
                                          const IsoLevels& levels, int width, int height,
                                          int factor, const SolverParams& params = {});

ShadedImage shade(const TriPlaneScene& scene, const Camera& camera, const IntersectionSet& hits,
                  const DetailManifolds* detail, const RenderOptions& options);

GBuffer composite_image(const ShadedImage& shaded, const Camera& camera,
                        const RenderOptions& options);

GBuffer render(const TriPlaneScene& scene, const Camera& camera, const RenderOptions& options,
               const DetailManifolds* detail = nullptr);

}  // namespace rmf::reference
