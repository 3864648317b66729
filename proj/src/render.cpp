#include "rmf/render.hpp"

#include <algorithm>
#include <stdexcept>

#include "render_internal.hpp"
#include "rmf/detail.hpp"

namespace rmf {

CompositeResult composite(std::span<const DepthSample> samples) {
  CompositeResult out;
  out.weights.reserve(samples.size());
  double transmittance = 1.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0 && samples[i].depth < samples[i - 1].depth) {
      throw std::invalid_argument("composite: samples must be sorted near to far");
    }
    const double alpha = samples[i].radiance.alpha;
    const double w = transmittance * alpha;
    out.weights.push_back(w);
    out.color += w * samples[i].radiance.color;
    out.z_surf += w * samples[i].depth;
    transmittance *= 1.0 - alpha;
  }
  out.residual = transmittance;
  return out;
}

void RenderOptions::validate() const {
  if (width < 1 || height < 1) throw std::invalid_argument("render size must be positive");
  if (mode == IntersectMode::kLowres && factor < 1) {
    throw std::invalid_argument("upsampling factor must be >= 1");
  }
  solver.validate();
}

namespace internal {

void sort_by_depth(std::vector<ShadedHit>& hits) {
  std::stable_sort(hits.begin(), hits.end(),
                   [](const ShadedHit& a, const ShadedHit& b) { return a.depth < b.depth; });
}

double hit_alpha(const ShadedHit& hit) { return hit.opaque ? 1.0 : hit.radiance.alpha; }

std::vector<ShadedHit> shade_pixel(const TriPlaneScene& scene, const Camera& camera,
                                   const HitList& hits, const DetailManifolds* detail,
                                   const RenderOptions& options) {
  const int last_level = scene.levels.size() - 1;
  std::vector<ShadedHit> out;
  out.reserve(hits.size());
  for (const Hit& h : hits) {
    if (!h.valid) continue;
    ShadedHit s;
    s.point = h.point;
    s.depth = world2cam(camera, h.point).z();
    s.level = h.level;
    s.crossing = h.crossing;
    const Feature coarse = triplane_sample(scene.planes, h.point);
    const Feature extra = detail ? detail->at(h.point, h.level) : zero_feature(scene.channels());
    s.input = coarse + extra;
    s.radiance = decode(scene.decoder, s.input);
    s.opaque = options.background_manifold && h.level == last_level;
    if (options.normals && !s.opaque) s.alpha_grad = alpha_grad(scene, h.point, extra);
    out.push_back(std::move(s));
  }
  sort_by_depth(out);
  return out;
}

GBuffer allocate_gbuffer(int width, int height) {
  GBuffer g;
  g.width = width;
  g.height = height;
  g.color = Image(width, height);
  const auto n = static_cast<std::size_t>(width) * height;
  g.z_surf.assign(n, 0.0);
  g.normal.assign(n, Vec3::Zero());
  g.residual.assign(n, 1.0);
  g.degenerate.assign(n, 0);
  return g;
}

void composite_pixel(const std::vector<ShadedHit>& hits, const Camera& camera,
                     const RenderOptions& options, GBuffer& out, std::size_t index) {
  Vec3 color = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  double z = 0.0;
  double transmittance = 1.0;
  for (const ShadedHit& h : hits) {
    const double alpha = hit_alpha(h);
    const double w = transmittance * alpha;
    color += w * h.radiance.color;
    z += w * h.depth;
    normal -= w * h.alpha_grad;
    transmittance *= 1.0 - alpha;
  }
  color += transmittance * options.background;
  const std::size_t o = 3 * index;
  out.color.data[o] = color.x();
  out.color.data[o + 1] = color.y();
  out.color.data[o + 2] = color.z();
  out.z_surf[index] = hits.empty() ? camera.far : z;
  out.residual[index] = transmittance;
  if (options.normals) {
    const double norm = normal.norm();
    if (norm < 1e-9) {
      out.normal[index] = Vec3::Zero();
      out.degenerate[index] = 1;
    } else {
      out.normal[index] = normal / norm;
    }
  }
}

std::vector<Feature> backward_pixel(const std::vector<ShadedHit>& hits, const Mlp& decoder,
                                    const Vec3& grad_color, const Vec3& background) {
  const std::size_t n = hits.size();
  std::vector<double> trans(n);
  double t = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    trans[i] = t;
    t *= 1.0 - hit_alpha(hits[i]);
  }
  std::vector<Feature> grads(n);
  // Color seen from behind hit k, normalized by the transmittance at k+1.
  Vec3 behind = background;
  for (std::size_t k = n; k-- > 0;) {
    const ShadedHit& h = hits[k];
    const double alpha = hit_alpha(h);
    const Vec3 dc = trans[k] * alpha * grad_color;
    const double da = h.opaque ? 0.0 : trans[k] * grad_color.dot(h.radiance.color - behind);
    grads[k] = decode_vjp(decoder, h.input, dc, da);
    behind = alpha * h.radiance.color + (1.0 - alpha) * behind;
  }
  return grads;
}

}  // namespace internal

IntersectionSet render_intersections(const TriPlaneScene& scene, const Camera& camera,
                                     const RenderOptions& options) {
  options.validate();
  if (options.mode == IntersectMode::kExact) {
    return intersect_grid(camera, scene.field, scene.levels, options.width, options.height,
                          options.solver);
  }
  return intersect_lowres_upsample(camera, scene.field, scene.levels, options.width,
                                   options.height, options.factor, options.solver);
}

namespace {

void check_detail(const TriPlaneScene& scene, const DetailManifolds* detail) {
  if (detail && detail->channels() != scene.channels()) {
    throw std::invalid_argument("detail channels must match the tri-plane channels");
  }
}

}  // namespace

ShadedImage shade(const TriPlaneScene& scene, const Camera& camera, const IntersectionSet& hits,
                  const DetailManifolds* detail, const RenderOptions& options) {
  check_detail(scene, detail);
  ShadedImage out;
  out.width = hits.width;
  out.height = hits.height;
  out.field_evals = hits.field_evals;
  out.pixels.resize(hits.rays.size());
  const long long total = static_cast<long long>(hits.rays.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (long long i = 0; i < total; ++i) {
    out.pixels[i] = internal::shade_pixel(scene, camera, hits.rays[i], detail, options);
  }
  return out;
}

GBuffer composite_image(const ShadedImage& shaded, const Camera& camera,
                        const RenderOptions& options) {
  GBuffer g = internal::allocate_gbuffer(shaded.width, shaded.height);
  g.field_evals = shaded.field_evals;
  const long long total = static_cast<long long>(shaded.pixels.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < total; ++i) {
    internal::composite_pixel(shaded.pixels[i], camera, options, g, static_cast<std::size_t>(i));
  }
  return g;
}

GBuffer render(const TriPlaneScene& scene, const Camera& camera, const RenderOptions& options,
               const DetailManifolds* detail) {
  const IntersectionSet hits = render_intersections(scene, camera, options);
  return composite_image(shade(scene, camera, hits, detail, options), camera, options);
}

GBuffer normal_map(const TriPlaneScene& scene, const Camera& camera, RenderOptions options,
                   const DetailManifolds* detail) {
  options.normals = true;
  return render(scene, camera, options, detail);
}

Image texture_strip(const TriPlaneScene& scene, std::span<const Camera> trajectory,
                    const Scanline& scanline, const RenderOptions& options,
                    const DetailManifolds* detail) {
  if (trajectory.empty()) throw std::invalid_argument("texture_strip: empty trajectory");
  if (scanline.row < 0 || scanline.row >= options.height || scanline.col_start < 0 ||
      scanline.col_end > options.width || scanline.col_start >= scanline.col_end) {
    throw std::out_of_range("texture_strip: scanline outside the image");
  }
  Image strip(scanline.col_end - scanline.col_start, static_cast<int>(trajectory.size()));
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const GBuffer g = render(scene, trajectory[k], options, detail);
    for (int u = scanline.col_start; u < scanline.col_end; ++u) {
      strip.set(u - scanline.col_start, static_cast<int>(k), g.color.pixel(u, scanline.row));
    }
  }
  return strip;
}

std::vector<std::vector<Feature>> shade_backward(const ShadedImage& shaded, const Mlp& decoder,
                                                 std::span<const double> grad_color,
                                                 const RenderOptions& options) {
  if (grad_color.size() != 3 * shaded.pixels.size()) {
    throw std::invalid_argument("shade_backward: gradient size does not match the image");
  }
  std::vector<std::vector<Feature>> grads(shaded.pixels.size());
  const long long total = static_cast<long long>(shaded.pixels.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (long long i = 0; i < total; ++i) {
    const Vec3 g(grad_color[3 * i], grad_color[3 * i + 1], grad_color[3 * i + 2]);
    grads[i] = internal::backward_pixel(shaded.pixels[i], decoder, g, options.background);
  }
  return grads;
}

void scatter_to_planes(const TriPlanes& planes, const ShadedImage& shaded,
                       const std::vector<std::vector<Feature>>& grad_inputs,
                       std::span<double> grad_planes) {
  if (grad_planes.size() != planes.data.size()) {
    throw std::invalid_argument("scatter_to_planes: gradient buffer has the wrong size");
  }
  for (std::size_t i = 0; i < shaded.pixels.size(); ++i) {
    const auto& hits = shaded.pixels[i];
    for (std::size_t k = 0; k < hits.size(); ++k) {
      triplane_scatter(triplane_taps(planes, hits[k].point), grad_inputs[i][k], grad_planes);
    }
  }
}

}  // namespace rmf
