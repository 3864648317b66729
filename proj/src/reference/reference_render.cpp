#include "../render_internal.hpp"
#include "rmf/detail.hpp"
#include "rmf/reference.hpp"

namespace rmf::reference {

ShadedImage shade(const TriPlaneScene& scene, const Camera& camera, const IntersectionSet& hits,
                  const DetailManifolds* detail, const RenderOptions& options) {
  if (detail && detail->channels() != scene.channels()) {
    throw std::invalid_argument("detail channels must match the tri-plane channels");
  }
  ShadedImage out;
  out.width = hits.width;
  out.height = hits.height;
  out.field_evals = hits.field_evals;
  for (const HitList& ray : hits.rays) {
    out.pixels.push_back(internal::shade_pixel(scene, camera, ray, detail, options));
  }
  return out;
}

GBuffer composite_image(const ShadedImage& shaded, const Camera& camera,
                        const RenderOptions& options) {
  GBuffer g = internal::allocate_gbuffer(shaded.width, shaded.height);
  g.field_evals = shaded.field_evals;
  for (std::size_t i = 0; i < shaded.pixels.size(); ++i) {
    internal::composite_pixel(shaded.pixels[i], camera, options, g, i);
  }
  return g;
}

GBuffer render(const TriPlaneScene& scene, const Camera& camera, const RenderOptions& options,
               const DetailManifolds* detail) {
  options.validate();
  const IntersectionSet hits =
      options.mode == IntersectMode::kExact
          ? reference::intersect_grid(camera, scene.field, scene.levels, options.width, options.height,
                           options.solver)
          : reference::intersect_lowres_upsample(camera, scene.field, scene.levels, options.width,
                                      options.height, options.factor, options.solver);
  return reference::composite_image(reference::shade(scene, camera, hits, detail, options), camera, options);
}

}  // namespace rmf::reference
