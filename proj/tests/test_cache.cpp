#include <gtest/gtest.h>

#include <cmath>

#include "rmf/cache.hpp"
#include "rmf/detail.hpp"
#include "rmf/render.hpp"
#include "scenes.hpp"

namespace rmf {
namespace {

constexpr int kW = 48;
constexpr int kH = 40;

RenderOptions options(int w = kW, int h = kH) {
  RenderOptions o;
  o.width = w;
  o.height = h;
  o.factor = 4;
  return o;
}

TEST(Cache, SlotsMatchLowresHits) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const ManifoldCache cache = cache_manifolds(scene, cam, kW, kH, 4);
  EXPECT_EQ(cache.lowres_width(), 12);
  EXPECT_EQ(cache.lowres_height(), 10);
  EXPECT_EQ(cache.num_levels, 8);
  ASSERT_FALSE(cache.slots.empty());
  for (std::size_t s = 1; s < cache.slots.size(); ++s) {
    EXPECT_LT(std::pair(cache.slots[s - 1].level, cache.slots[s - 1].crossing),
              std::pair(cache.slots[s].level, cache.slots[s].crossing));
  }
  for (int k = 0; k < cache.lowres_height(); ++k) {
    for (int j = 0; j < cache.lowres_width(); ++j) {
      for (const Hit& h : cache.lowres.rays[static_cast<std::size_t>(k) * 12 + j]) {
        const CacheNode& n = cache.node(cache.find_slot(h.level, h.crossing), j, k);
        EXPECT_EQ(n.valid, h.valid);
        if (!h.valid) continue;
        EXPECT_EQ(n.point, h.point);
        EXPECT_EQ(n.feature, triplane_sample(scene.planes, h.point));
        EXPECT_EQ(n.radiance.color, decode(scene.decoder, n.feature).color);
      }
    }
  }
  EXPECT_EQ(cache.find_slot(99, 0), -1);
}

TEST(Cache, InputViewCoverageMatchesLowresRender) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const ManifoldCache cache = cache_manifolds(scene, cam, kW, kH, 4);
  const RenderOptions o = options();
  const ShadedImage direct = shade(scene, cam, render_intersections(scene, cam, o), nullptr, o);
  const ShadedImage cached = shade_cached(cache, cam, nullptr, o);
  for (std::size_t i = 0; i < direct.pixels.size(); ++i) {
    ASSERT_EQ(direct.pixels[i].size(), cached.pixels[i].size()) << "pixel " << i;
    for (std::size_t k = 0; k < direct.pixels[i].size(); ++k) {
      EXPECT_EQ(direct.pixels[i][k].level, cached.pixels[i][k].level);
      EXPECT_EQ(direct.pixels[i][k].crossing, cached.pixels[i][k].crossing);
    }
  }
}

TEST(Cache, InputViewColorsMatchWithinInterpolation) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const ManifoldCache cache = cache_manifolds(scene, cam, kW, kH, 4);
  const GBuffer direct = render(scene, cam, options());
  const GBuffer cached = render_cached(cache, cam, options());
  double sum = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < direct.color.data.size(); ++i) {
    const double d = std::abs(direct.color.data[i] - cached.color.data[i]);
    sum += d;
    worst = std::max(worst, d);
  }
  // Bilinear point resampling vs barycentric feature interpolation inside
  // a low-res cell. Measured: mean 2.2e-3, max 3.5e-2.
  EXPECT_LT(sum / static_cast<double>(direct.color.data.size()), 5e-3);
  EXPECT_LT(worst, 0.05);

  // Pixels whose rays are low-res rays see the cached nodes themselves.
  for (int k = 0; k < cache.lowres_height(); ++k) {
    for (int j = 0; j < cache.lowres_width(); ++j) {
      const double px = 0.5 + static_cast<double>(j * (kW - 1)) / (cache.lowres_width() - 1);
      const double py = 0.5 + static_cast<double>(k * (kH - 1)) / (cache.lowres_height() - 1);
      if (px != std::floor(px) + 0.5 || py != std::floor(py) + 0.5) continue;
      const Vec3 a = direct.color.pixel(static_cast<int>(px), static_cast<int>(py));
      const Vec3 b = cached.color.pixel(static_cast<int>(px), static_cast<int>(py));
      EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-9) << j << "," << k;
    }
  }
}

TEST(Cache, NovelViewRendersAreBitIdentical) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const ManifoldCache cache = cache_manifolds(scene, cam, kW, kH, 4);
  const Camera novel = orbit_about(cam, Vec3::Zero(), 0.35);
  const GBuffer a = render_cached(cache, novel, options());
  const GBuffer b = render_cached(cache, novel, options());
  EXPECT_EQ(a.color.data, b.color.data);
  EXPECT_EQ(a.z_surf, b.z_surf);
  EXPECT_EQ(a.residual, b.residual);
}

TEST(Cache, CachedRenderingEvaluatesNoField) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const ManifoldCache cache = cache_manifolds(scene, cam, kW, kH, 4);
  EXPECT_EQ(render_cached(cache, orbit_about(cam, Vec3::Zero(), -0.3), options()).field_evals,
            0u);
  EXPECT_GT(render(scene, cam, options()).field_evals, 0u);
}

TEST(Cache, NormalsAreRejected) {
  const ManifoldCache cache =
      cache_manifolds(testing::sphere_scene(), testing::front_camera(), kW, kH, 4);
  RenderOptions o = options();
  o.normals = true;
  EXPECT_THROW(render_cached(cache, testing::front_camera(), o), std::invalid_argument);
}

TEST(Cache, RadianceAtPointIgnoresCamera) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const ManifoldCache cache = cache_manifolds(scene, cam, kW, kH, 4);
  const CachedPoint p{cache.find_slot(4, 0), 5, 4, 1, Vec3(0.2, 0.3, 0.5)};
  ASSERT_GE(p.slot, 0);
  const RadianceSample r = cache.radiance_at(p, nullptr);
  EXPECT_EQ(r.color, decode(scene.decoder, cache.feature_at(p)).color);

  // Hits of both renders that land on the same cached point decode equally.
  const RenderOptions o = options();
  const ShadedImage a = shade_cached(cache, cam, nullptr, o);
  const ShadedImage b = shade_cached(cache, orbit_about(cam, Vec3::Zero(), 0.2), nullptr, o);
  for (const ShadedImage* s : {&a, &b}) {
    for (const auto& px : s->pixels) {
      for (const ShadedHit& h : px) {
        EXPECT_EQ(h.radiance.color, decode(scene.decoder, h.input).color);
      }
    }
  }
}

TEST(Cache, DetailChannelsMustMatch) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = testing::front_camera();
  const ManifoldCache cache = cache_manifolds(scene, cam, kW, kH, 4);
  TriPlaneScene other(TriPlanes::zeros(4, 3, 1.5), testing::random_decoder(3), scene.levels,
                      scene.field);
  const ManifoldCache small = cache_manifolds(other, cam, kW, kH, 4);
  const DetailManifolds d = build_detail(DetailVoxel::zeros(cam, 1.2, 4, 4, 4, 3), small);
  EXPECT_THROW(render_cached(cache, cam, options(), &d), std::invalid_argument);
}

}  // namespace
}  // namespace rmf
