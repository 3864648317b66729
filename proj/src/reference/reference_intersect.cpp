#include <stdexcept>

#include "../intersect_internal.hpp"
#include "rmf/reference.hpp"

namespace rmf::reference {

IntersectionSet intersect_grid(const Camera& camera, const ScalarField& field,
                               const IsoLevels& levels, int width, int height,
                               const SolverParams& params) {
  if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
  camera.validate();
  params.validate();
  IntersectionSet set;
  set.width = width;
  set.height = height;
  set.rays.reserve(static_cast<std::size_t>(width) * height);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      set.rays.push_back(intersect_ray(ray_for_pixel(camera, u, v, width, height), field, levels,
                                       camera.near, camera.far, params, &set.field_evals));
    }
  }
  return set;
}

IntersectionSet intersect_lowres_upsample(const Camera& camera, const ScalarField& field,
                                          const IsoLevels& levels, int width, int height,
                                          int factor, const SolverParams& params) {
  const int lw = internal::checked_lowres_size(width, factor);
  const int lh = internal::checked_lowres_size(height, factor);
  camera.validate();
  params.validate();
  IntersectionSet lowres;
  lowres.width = lw;
  lowres.height = lh;
  for (int k = 0; k < lh; ++k) {
    for (int j = 0; j < lw; ++j) {
      lowres.rays.push_back(internal::solve_lowres_ray(camera, field, levels, j, k, lw, lh, width,
                                                       height, params, &lowres.field_evals));
    }
  }
  IntersectionSet set;
  set.width = width;
  set.height = height;
  set.field_evals = lowres.field_evals;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      set.rays.push_back(internal::upsample_pixel(lowres, camera, u, v, width, height));
    }
  }
  return set;
}

}  // namespace rmf::reference
