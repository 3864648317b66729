#include "rmf/cache.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include <Eigen/Geometry>

#include "render_internal.hpp"
#include "rmf/detail.hpp"

namespace rmf {

int ManifoldCache::find_slot(int level, int crossing) const {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].level == level && slots[i].crossing == crossing) return static_cast<int>(i);
  }
  return -1;
}

std::array<const CacheNode*, 3> ManifoldCache::triangle(const CachedPoint& p) const {
  const int j = p.quad_x;
  const int k = p.quad_y;
  if (p.half == 0) {
    return {&node(p.slot, j, k), &node(p.slot, j + 1, k), &node(p.slot, j, k + 1)};
  }
  return {&node(p.slot, j + 1, k), &node(p.slot, j + 1, k + 1), &node(p.slot, j, k + 1)};
}

Vec3 ManifoldCache::point_at(const CachedPoint& p) const {
  const auto tri = triangle(p);
  return p.bary[0] * tri[0]->point + p.bary[1] * tri[1]->point + p.bary[2] * tri[2]->point;
}

Feature ManifoldCache::feature_at(const CachedPoint& p) const {
  const auto tri = triangle(p);
  return p.bary[0] * tri[0]->feature + p.bary[1] * tri[1]->feature + p.bary[2] * tri[2]->feature;
}

RadianceSample ManifoldCache::radiance_at(const CachedPoint& p,
                                          const DetailManifolds* detail) const {
  Feature input = feature_at(p);
  if (detail) input += detail->at(point_at(p), slots[static_cast<std::size_t>(p.slot)].level);
  return decode(decoder, input);
}

ManifoldCache cache_manifolds(const TriPlaneScene& scene, const Camera& camera_in, int width,
                              int height, int factor, const SolverParams& params) {
  ManifoldCache cache;
  cache.camera = camera_in;
  cache.width = width;
  cache.height = height;
  cache.factor = factor;
  cache.num_levels = scene.levels.size();
  cache.channels = scene.channels();
  cache.decoder = scene.decoder;
  cache.lowres =
      intersect_lowres_grid(camera_in, scene.field, scene.levels, width, height, factor, params);

  std::vector<std::pair<int, int>> keys;
  for (const HitList& hits : cache.lowres.rays) {
    for (const Hit& h : hits) keys.emplace_back(h.level, h.crossing);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  const std::size_t n = cache.lowres.rays.size();
  cache.slots.resize(keys.size());
  for (std::size_t s = 0; s < keys.size(); ++s) {
    cache.slots[s].level = keys[s].first;
    cache.slots[s].crossing = keys[s].second;
    cache.slots[s].nodes.assign(n, CacheNode{});
  }
  const long long total = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < total; ++i) {
    for (const Hit& h : cache.lowres.rays[i]) {
      const auto it = std::lower_bound(keys.begin(), keys.end(), std::pair(h.level, h.crossing));
      CacheNode& node = cache.slots[static_cast<std::size_t>(it - keys.begin())].nodes[i];
      node.valid = h.valid;
      node.point = h.point;
      node.t = h.t;
      node.feature = triplane_sample(scene.planes, h.point);
      node.radiance = decode(scene.decoder, node.feature);
    }
  }
  return cache;
}

namespace {

struct TriRef {
  int slot;
  int quad_x;
  int quad_y;
  int half;
};

struct Fragment {
  double t;
  TriRef tri;
  Vec3 bary;
};

constexpr double kEdgeSlack = 1e-12;
constexpr double kDuplicateT = 1e-9;

// Moller-Trumbore with inclusive edges.
bool intersect_triangle(const Ray& ray, const Vec3& v0, const Vec3& v1, const Vec3& v2, double& t,
                        Vec3& bary) {
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const Vec3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return false;
  const double inv = 1.0 / det;
  const Vec3 s = ray.origin - v0;
  const double b1 = s.dot(p) * inv;
  if (b1 < -kEdgeSlack || b1 > 1.0 + kEdgeSlack) return false;
  const Vec3 q = s.cross(e1);
  const double b2 = ray.direction.dot(q) * inv;
  if (b2 < -kEdgeSlack || b1 + b2 > 1.0 + kEdgeSlack) return false;
  t = e2.dot(q) * inv;
  bary = Vec3(1.0 - b1 - b2, b1, b2);
  return true;
}

}  // namespace

ShadedImage shade_cached(const ManifoldCache& cache, const Camera& camera,
                         const DetailManifolds* detail, const RenderOptions& options) {
  options.validate();
  camera.validate();
  if (options.normals) throw std::invalid_argument("normals are not available from a cache");
  if (detail && detail->channels() != cache.channels) {
    throw std::invalid_argument("detail channels must match the cached feature channels");
  }
  const int W = options.width;
  const int H = options.height;
  const int lw = cache.lowres_width();
  const int lh = cache.lowres_height();

  // Serial binning in a fixed order keeps per-pixel triangle lists stable.
  std::vector<std::vector<TriRef>> bins(static_cast<std::size_t>(W) * H);
  for (int s = 0; s < static_cast<int>(cache.slots.size()); ++s) {
    for (int k = 0; k + 1 < lh; ++k) {
      for (int j = 0; j + 1 < lw; ++j) {
        for (int half = 0; half < 2; ++half) {
          // Same coverage rule as the low-res upsample path: a cell is drawn
          // only when all four of its corner nodes are valid.
          if (!cache.node(s, j, k).valid || !cache.node(s, j + 1, k).valid ||
              !cache.node(s, j, k + 1).valid || !cache.node(s, j + 1, k + 1).valid) {
            continue;
          }
          const CachedPoint probe{s, j, k, half, Vec3::Zero()};
          const auto tri = cache.triangle(probe);
          double x0 = 0.0, x1 = W, y0 = 0.0, y1 = H;
          bool projected = true;
          Vec2 lo(INFINITY, INFINITY), hi(-INFINITY, -INFINITY);
          for (const CacheNode* n : tri) {
            const auto px = project_to_pixel(camera, n->point, W, H);
            if (!px) {
              projected = false;
              break;
            }
            lo = lo.cwiseMin(*px);
            hi = hi.cwiseMax(*px);
          }
          if (projected) {
            x0 = std::clamp(lo.x(), -1.0, W + 1.0);
            x1 = std::clamp(hi.x(), -1.0, W + 1.0);
            y0 = std::clamp(lo.y(), -1.0, H + 1.0);
            y1 = std::clamp(hi.y(), -1.0, H + 1.0);
          }
          // Pixel centers sit at u + 0.5; pad one pixel for edge rounding.
          const int u0 = std::max(0, static_cast<int>(std::ceil(x0 - 0.5)) - 1);
          const int u1 = std::min(W - 1, static_cast<int>(std::floor(x1 - 0.5)) + 1);
          const int v0 = std::max(0, static_cast<int>(std::ceil(y0 - 0.5)) - 1);
          const int v1 = std::min(H - 1, static_cast<int>(std::floor(y1 - 0.5)) + 1);
          for (int v = v0; v <= v1; ++v) {
            for (int u = u0; u <= u1; ++u) {
              bins[static_cast<std::size_t>(v) * W + u].push_back({s, j, k, half});
            }
          }
        }
      }
    }
  }

  const int last_level = cache.num_levels - 1;
  ShadedImage out;
  out.width = W;
  out.height = H;
  out.field_evals = 0;
  out.pixels.resize(bins.size());
  const long long total = static_cast<long long>(bins.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (long long i = 0; i < total; ++i) {
    const Ray ray = ray_for_pixel(camera, static_cast<int>(i % W), static_cast<int>(i / W), W, H);
    std::vector<Fragment> frags;
    for (const TriRef& ref : bins[i]) {
      const auto tri = cache.triangle({ref.slot, ref.quad_x, ref.quad_y, ref.half, Vec3::Zero()});
      double t = 0.0;
      Vec3 bary;
      if (!intersect_triangle(ray, tri[0]->point, tri[1]->point, tri[2]->point, t, bary)) continue;
      if (t < camera.near || t > camera.far) continue;
      frags.push_back({t, ref, bary});
    }
    std::sort(frags.begin(), frags.end(), [](const Fragment& a, const Fragment& b) {
      return std::tie(a.t, a.tri.slot, a.tri.quad_y, a.tri.quad_x, a.tri.half) <
             std::tie(b.t, b.tri.slot, b.tri.quad_y, b.tri.quad_x, b.tri.half);
    });
    std::vector<ShadedHit> hits;
    std::vector<std::pair<int, double>> seen;
    for (const Fragment& f : frags) {
      const bool duplicate = std::any_of(seen.begin(), seen.end(), [&](const auto& e) {
        return e.first == f.tri.slot && std::abs(e.second - f.t) <= kDuplicateT;
      });
      if (duplicate) continue;
      seen.emplace_back(f.tri.slot, f.t);
      const CachedPoint p{f.tri.slot, f.tri.quad_x, f.tri.quad_y, f.tri.half, f.bary};
      const CacheSlot& slot = cache.slots[static_cast<std::size_t>(f.tri.slot)];
      ShadedHit h;
      h.point = cache.point_at(p);
      h.depth = world2cam(camera, h.point).z();
      h.level = slot.level;
      h.crossing = slot.crossing;
      h.input = cache.feature_at(p);
      if (detail) h.input += detail->at(h.point, slot.level);
      h.radiance = decode(cache.decoder, h.input);
      h.opaque = options.background_manifold && slot.level == last_level;
      hits.push_back(std::move(h));
    }
    internal::sort_by_depth(hits);
    out.pixels[i] = std::move(hits);
  }
  return out;
}

GBuffer render_cached(const ManifoldCache& cache, const Camera& camera,
                      const RenderOptions& options, const DetailManifolds* detail) {
  return composite_image(shade_cached(cache, camera, detail, options), camera, options);
}

}  // namespace rmf
