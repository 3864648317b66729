#pragma once

// Per-ray and per-pixel kernels shared by the OpenMP drivers and the serial
// reference drivers.

#include "rmf/intersect.hpp"

namespace rmf::internal {

int checked_lowres_size(int full, int factor);

HitList solve_lowres_ray(const Camera& camera, const ScalarField& field, const IsoLevels& levels,
                         int j, int k, int lr_width, int lr_height, int width, int height,
                         const SolverParams& params, std::uint64_t* evals);

HitList upsample_pixel(const IntersectionSet& lowres, const Camera& camera, int u, int v,
                       int width, int height);

}  // namespace rmf::internal
