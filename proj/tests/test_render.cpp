#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rmf/reference.hpp"
#include "rmf/render.hpp"
#include "scenes.hpp"

namespace rmf {
namespace {

using testing::constant_decoder;
using testing::front_camera;

// Textbook front-to-back loop, kept independent of composite().
CompositeResult composite_oracle(const std::vector<DepthSample>& s) {
  CompositeResult r;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double t = 1.0;
    for (std::size_t j = 0; j < i; ++j) t *= 1.0 - s[j].radiance.alpha;
    const double w = t * s[i].radiance.alpha;
    r.weights.push_back(w);
    r.color += w * s[i].radiance.color;
    r.z_surf += w * s[i].depth;
  }
  double t = 1.0;
  for (const DepthSample& d : s) t *= 1.0 - d.radiance.alpha;
  r.residual = t;
  return r;
}

DepthSample sample(double alpha, const Vec3& c, double depth) {
  return DepthSample{RadianceSample{c, alpha}, depth};
}

TEST(Composite, OpaqueFront) {
  const std::vector<DepthSample> s{sample(1.0, Vec3(1, 0, 0), 2.0)};
  const CompositeResult r = composite(s);
  EXPECT_EQ(r.color, Vec3(1, 0, 0));
  EXPECT_EQ(r.z_surf, 2.0);
  EXPECT_EQ(r.residual, 0.0);
}

TEST(Composite, TwoSampleArithmetic) {
  const std::vector<DepthSample> s{sample(0.5, Vec3(1, 1, 1), 1.0),
                                   sample(1.0, Vec3(0, 0, 0), 3.0)};
  const CompositeResult r = composite(s);
  EXPECT_EQ(r.color, Vec3(0.5, 0.5, 0.5));
  EXPECT_EQ(r.z_surf, 2.0);
  ASSERT_EQ(r.weights.size(), 2u);
  EXPECT_EQ(r.weights[0], 0.5);
  EXPECT_EQ(r.weights[1], 0.5);
}

TEST(Composite, MatchesLoopOracle) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<DepthSample> s(1 + trial % 8);
    double depth = 0.0;
    for (DepthSample& d : s) {
      depth += u(rng);
      d = sample(u(rng), Vec3(u(rng), u(rng), u(rng)), depth);
    }
    const CompositeResult a = composite(s);
    const CompositeResult b = composite_oracle(s);
    EXPECT_LE((a.color - b.color).norm(), 1e-12);
    EXPECT_NEAR(a.z_surf, b.z_surf, 1e-12);
    EXPECT_NEAR(a.residual, b.residual, 1e-12);
    double sum = a.residual;
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
      EXPECT_NEAR(a.weights[i], b.weights[i], 1e-12);
      sum += a.weights[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-10);
  }
}

TEST(Composite, TransmittanceNonIncreasing) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DepthSample> s;
  for (int i = 0; i < 12; ++i) s.push_back(sample(u(rng), Vec3::Ones(), i));
  const CompositeResult r = composite(s);
  double t = 1.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double next = t * (1.0 - s[i].radiance.alpha);
    EXPECT_LE(next, t);
    EXPECT_NEAR(r.weights[i], t * s[i].radiance.alpha, 1e-15);
    t = next;
  }
}

TEST(Composite, UnsortedThrows) {
  const std::vector<DepthSample> s{sample(0.5, Vec3::Ones(), 2.0), sample(0.5, Vec3::Ones(), 1.0)};
  EXPECT_THROW(composite(s), std::invalid_argument);
}

TEST(Composite, EmptyIsTransparent) {
  const CompositeResult r = composite({});
  EXPECT_EQ(r.color, Vec3::Zero());
  EXPECT_EQ(r.residual, 1.0);
}

RenderOptions small_options(int w = 32, int h = 32) {
  RenderOptions o;
  o.width = w;
  o.height = h;
  return o;
}

TEST(Render, ZeroOccupancyIsBackground) {
  const TriPlaneScene scene(TriPlanes::zeros(4, 8, 1.5),
                            constant_decoder(8, Vec3(0.2, 0.9, 0.4), -800.0),
                            IsoLevels::uniform(8, 0.6, 1.0), ScalarField::sphere(Vec3::Zero()));
  RenderOptions o = small_options();
  o.background = Vec3(0.25, 0.5, 0.75);
  const GBuffer g = render(scene, front_camera(), o);
  for (int v = 0; v < 32; ++v) {
    for (int u = 0; u < 32; ++u) EXPECT_EQ(g.color.pixel(u, v), o.background);
  }
}

TEST(Render, OpaquePlaneDepth) {
  const TriPlaneScene scene(TriPlanes::zeros(4, 8, 1.5), constant_decoder(8, Vec3::Ones() * 0.5, 40.0),
                            IsoLevels({0.3}), ScalarField::plane(Vec3(0, 0, 1)));
  const Camera cam = front_camera();
  for (IntersectMode mode : {IntersectMode::kExact, IntersectMode::kLowres}) {
    RenderOptions o = small_options();
    o.mode = mode;
    const GBuffer g = render(scene, cam, o);
    for (double z : g.z_surf) EXPECT_NEAR(z, 3.3, 1e-6);
  }
}

TEST(Render, ExactEqualsFactorOne) {
  const TriPlaneScene scene = testing::sphere_scene();
  RenderOptions exact = small_options(24, 16);
  exact.mode = IntersectMode::kExact;
  RenderOptions lr = exact;
  lr.mode = IntersectMode::kLowres;
  lr.factor = 1;
  const GBuffer a = render(scene, front_camera(), exact);
  const GBuffer b = render(scene, front_camera(), lr);
  EXPECT_EQ(a.color.data, b.color.data);
  EXPECT_EQ(a.z_surf, b.z_surf);
  EXPECT_EQ(a.field_evals, b.field_evals);
}

TEST(Render, WeightIdentityPerPixel) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = front_camera();
  const RenderOptions o = small_options();
  const ShadedImage shaded = shade(scene, cam, render_intersections(scene, cam, o), nullptr, o);
  const GBuffer g = composite_image(shaded, cam, o);
  for (std::size_t i = 0; i < shaded.pixels.size(); ++i) {
    std::vector<DepthSample> s;
    for (const ShadedHit& h : shaded.pixels[i]) s.push_back({h.radiance, h.depth});
    const CompositeResult r = composite(s);
    double sum = r.residual;
    for (double w : r.weights) sum += w;
    EXPECT_NEAR(sum, 1.0, 1e-10);
    EXPECT_EQ(g.residual[i], r.residual);
  }
}

TEST(Render, FrontOpaqueDominates) {
  const TriPlaneScene scene(TriPlanes::zeros(4, 8, 1.5), constant_decoder(8, Vec3(0.3, 0.6, 0.9), 40.0),
                            IsoLevels::uniform(4, 0.6, 1.0), ScalarField::sphere(Vec3::Zero()));
  RenderOptions o = small_options();
  o.background = Vec3(1, 0, 0);
  const GBuffer g = render(scene, front_camera(), o);
  const Vec3 expect = decode(scene.decoder, Feature::Zero(8)).color;
  EXPECT_EQ(g.color.pixel(16, 16), expect);
}

TEST(Render, BackgroundManifoldIsOpaque) {
  const TriPlaneScene scene(TriPlanes::zeros(4, 8, 1.5), constant_decoder(8, Vec3(0.3, 0.6, 0.9), -3.0),
                            IsoLevels::uniform(3, 0.6, 1.0), ScalarField::sphere(Vec3::Zero()));
  RenderOptions o = small_options();
  o.background_manifold = true;
  o.background = Vec3(1, 0, 0);
  const GBuffer g = render(scene, front_camera(), o);
  const std::size_t center = g.index(16, 16);
  EXPECT_EQ(g.residual[center], 0.0);
  EXPECT_EQ(g.residual[g.index(0, 0)], 1.0);  // ray misses every level
  EXPECT_EQ(g.color.pixel(0, 0), o.background);
}

TEST(Render, MissedPixelsGetFarDepth) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = front_camera();
  const GBuffer g = render(scene, cam, small_options());
  EXPECT_EQ(g.z_surf[g.index(0, 0)], cam.far);
}

TEST(Render, DeterministicAndMatchesReference) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = orbit_camera(0.3, -0.1, 0.0, 3.0, Vec3::Zero(), testing::intrinsics());
  for (IntersectMode mode : {IntersectMode::kExact, IntersectMode::kLowres}) {
    RenderOptions o = small_options(32, 24);
    o.mode = mode;
    o.normals = true;
    const GBuffer a = render(scene, cam, o);
    const GBuffer b = render(scene, cam, o);
    const GBuffer r = reference::render(scene, cam, o);
    EXPECT_EQ(a.color.data, b.color.data);
    EXPECT_EQ(a.color.data, r.color.data);
    EXPECT_EQ(a.z_surf, r.z_surf);
    EXPECT_EQ(a.normal, r.normal);
    EXPECT_EQ(a.degenerate, r.degenerate);
    EXPECT_EQ(a.field_evals, r.field_evals);
  }
}

TEST(NormalMap, RadialOccupancyPointsOutward) {
  const TriPlaneScene scene = testing::radial_occupancy_scene();
  RenderOptions o = small_options(33, 33);
  o.mode = IntersectMode::kExact;
  const GBuffer g = normal_map(scene, front_camera(3.0, 0.8), o);
  const Vec3 n = g.normal[g.index(16, 16)];
  EXPECT_EQ(g.degenerate[g.index(16, 16)], 0);
  EXPECT_LE((n - Vec3(0, 0, -1)).norm(), 1e-2);
}

TEST(NormalMap, ConstantAlphaIsDegenerate) {
  const TriPlaneScene scene(testing::random_planes(6, 8, 1.5, 3),
                            constant_decoder(8, Vec3::Ones() * 0.5, 0.3),
                            IsoLevels::uniform(4, 0.6, 1.0), ScalarField::sphere(Vec3::Zero()));
  const GBuffer g = normal_map(scene, front_camera(), small_options(16, 16));
  for (std::size_t i = 0; i < g.normal.size(); ++i) {
    EXPECT_EQ(g.degenerate[i], 1);
    EXPECT_EQ(g.normal[i], Vec3::Zero());
  }
}

TEST(NormalMap, UnitOrDegenerate) {
  const TriPlaneScene scene = testing::sphere_scene();
  const GBuffer g = normal_map(scene, front_camera(), small_options());
  int unit = 0;
  for (std::size_t i = 0; i < g.normal.size(); ++i) {
    if (g.degenerate[i]) {
      EXPECT_EQ(g.normal[i], Vec3::Zero());
    } else if (g.normal[i] != Vec3::Zero()) {
      EXPECT_NEAR(g.normal[i].norm(), 1.0, 1e-12);
      ++unit;
    }
  }
  EXPECT_GT(unit, 100);
}

TEST(NormalMap, DoesNotChangeColor) {
  const TriPlaneScene scene = testing::sphere_scene();
  const RenderOptions o = small_options();
  EXPECT_EQ(render(scene, front_camera(), o).color.data,
            normal_map(scene, front_camera(), o).color.data);
}

TEST(TextureStrip, RepeatedPoseGivesIdenticalRows) {
  const TriPlaneScene scene = testing::sphere_scene();
  const std::vector<Camera> poses(10, front_camera());
  const Image strip = texture_strip(scene, poses, Scanline{16, 4, 28}, small_options());
  ASSERT_EQ(strip.height, 10);
  ASSERT_EQ(strip.width, 24);
  for (int v = 1; v < 10; ++v) {
    for (int u = 0; u < 24; ++u) EXPECT_EQ(strip.pixel(u, v), strip.pixel(u, 0));
  }
  EXPECT_EQ(strip.data, texture_strip(scene, poses, Scanline{16, 4, 28}, small_options()).data);
}

TEST(TextureStrip, RejectsBadInput) {
  const TriPlaneScene scene = testing::sphere_scene();
  const std::vector<Camera> poses(1, front_camera());
  EXPECT_THROW(texture_strip(scene, {}, Scanline{0, 0, 4}, small_options()),
               std::invalid_argument);
  EXPECT_THROW(texture_strip(scene, poses, Scanline{32, 0, 4}, small_options()),
               std::out_of_range);
  EXPECT_THROW(texture_strip(scene, poses, Scanline{0, 4, 4}, small_options()),
               std::out_of_range);
  EXPECT_THROW(texture_strip(scene, poses, Scanline{0, 0, 33}, small_options()),
               std::out_of_range);
}

// Opaque plane z = 0 with stripes along x in feature channel 0.
TriPlaneScene striped_plane() {
  TriPlanes p = TriPlanes::zeros(65, 4, 2.0);
  for (int r = 0; r < 65; ++r) {
    for (int c = 0; c < 65; ++c) {
      const double x = -2.0 + 4.0 * c / 64;
      p.at(kPlaneXY, r, c, 0) = std::sin(2.0 * std::numbers::pi * x / 0.5);
    }
  }
  Mlp::Layer hidden{Eigen::MatrixXd::Zero(1, 4), Eigen::VectorXd::Zero(1)};
  hidden.weight(0, 0) = 1.0;
  Mlp::Layer out{Eigen::MatrixXd::Zero(4, 1), Eigen::VectorXd::Zero(4)};
  out.weight(0, 0) = 4.0;
  out.bias(3) = 40.0;
  return TriPlaneScene(p, Mlp({hidden, out}, Mlp::Output::kSigmoid), IsoLevels({0.0}),
                       ScalarField::plane(Vec3(0, 0, 1)));
}

int best_shift(const Image& strip, int a, int b, int max_shift) {
  int best = 0;
  double best_score = -1e300;
  for (int s = -max_shift; s <= max_shift; ++s) {
    double score = 0.0;
    int n = 0;
    for (int u = 0; u < strip.width; ++u) {
      const int w = u + s;
      if (w < 0 || w >= strip.width) continue;
      score += (strip.pixel(u, a).x() - 0.5) * (strip.pixel(w, b).x() - 0.5);
      ++n;
    }
    score /= n;
    if (score > best_score) {
      best_score = score;
      best = s;
    }
  }
  return best;
}

TEST(TextureStrip, LateralOrthographicMotionShearsStripes) {
  const TriPlaneScene scene = striped_plane();
  Camera base = testing::ortho_camera(3.0, 1.0);
  std::vector<Camera> poses;
  for (int k = 0; k < 10; ++k) {
    Camera c = base;
    c.position.x() += k / 16.0;  // one pixel per frame at 32 px over 2 units
    poses.push_back(c);
  }
  const Image strip = texture_strip(scene, poses, Scanline{16, 0, 32}, small_options());
  std::vector<int> shifts;
  for (int k = 1; k < 10; ++k) shifts.push_back(best_shift(strip, k - 1, k, 3));
  std::vector<int> sorted = shifts;
  std::sort(sorted.begin(), sorted.end());
  const int median = sorted[sorted.size() / 2];
  EXPECT_NE(median, 0);
  for (int s : shifts) EXPECT_LE(std::abs(s - median), 1);
}

}  // namespace
}  // namespace rmf
