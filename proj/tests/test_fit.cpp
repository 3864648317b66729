#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rmf/fit.hpp"
#include "rmf/metrics.hpp"
#include "scenes.hpp"

namespace rmf {
namespace {

using testing::front_camera;

FitConfig small_config(int size = 8, int iterations = 5) {
  FitConfig c;
  c.iterations = iterations;
  c.render.width = size;
  c.render.height = size;
  c.render.factor = 1;
  c.nv_poses = 2;
  c.seed = 5;
  return c;
}

LossReport quadratic(std::span<const double> p, std::vector<double>* grad) {
  LossReport r;
  r.recon_pixel = 0.0;
  for (double v : p) r.total += (v - 1.0) * (v - 1.0);
  if (grad) {
    grad->resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) (*grad)[i] = 2.0 * (p[i] - 1.0);
  }
  return r;
}

TEST(Descend, ConvergesOnQuadratic) {
  FitConfig c;
  c.iterations = 60;
  c.step = 0.1;
  std::vector<double> p{3.0, -2.0, 0.5};
  const FitTrace t = descend(p, quadratic, c);
  ASSERT_EQ(t.reports.size(), 60u);
  for (double v : p) EXPECT_NEAR(v, 1.0, 1e-8);
}

TEST(Descend, BackoffKeepsLossNonIncreasing) {
  FitConfig c;
  c.iterations = 30;
  c.step = 50.0;  // far too large: every early step needs halving
  std::vector<double> p{3.0, -2.0};
  const FitTrace t = descend(p, quadratic, c);
  double prev = t.initial.total;
  for (const LossReport& r : t.reports) {
    EXPECT_LE(r.total, prev);
    prev = r.total;
  }
  EXPECT_LT(prev, t.initial.total);
}

TEST(Descend, SkipsStepAfterMaxBackoffs) {
  FitConfig c;
  c.iterations = 3;
  c.max_backoffs = 2;
  int calls = 0;
  // Gradient points uphill: no step is ever accepted.
  const Objective uphill = [&](std::span<const double> p, std::vector<double>* g) {
    ++calls;
    LossReport r;
    r.total = p[0] * p[0];
    if (g) *g = {-2.0 * p[0]};
    return r;
  };
  std::vector<double> p{1.0};
  const FitTrace t = descend(p, uphill, c);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(calls, 1 + 3 * 3);
  for (const LossReport& r : t.reports) EXPECT_EQ(r.total, 1.0);
}

TEST(Descend, NonFiniteLossAborts) {
  FitConfig c;
  c.iterations = 2;
  const Objective bad = [](std::span<const double>, std::vector<double>* g) {
    LossReport r;
    r.total = std::numeric_limits<double>::quiet_NaN();
    if (g) *g = {0.0};
    return r;
  };
  std::vector<double> p{0.0};
  EXPECT_THROW(descend(p, bad, c), NonFiniteLoss);
}

TEST(Descend, ZeroIterationsLeavesParameters) {
  FitConfig c;
  c.iterations = 0;
  std::vector<double> p{3.0};
  const FitTrace t = descend(p, quadratic, c);
  EXPECT_EQ(p[0], 3.0);
  EXPECT_TRUE(t.reports.empty());
}

TEST(FitConfig, Validation) {
  FitConfig c;
  c.step = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = FitConfig{};
  c.iterations = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = FitConfig{};
  c.yaw_min = 1.0;
  c.yaw_max = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(GradFdOracle, QuadraticAndLinear) {
  const std::vector<double> p{0.3, -1.2, 2.0};
  const auto sq = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  const std::vector<double> g = grad_fd_oracle(sq, p, 1e-4);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(g[i], 2.0 * p[i], 1e-8);

  const auto lin = [](std::span<const double> x) { return 3.0 * x[0] - 2.0 * x[1] + 0.5 * x[2]; };
  const std::vector<double> q{10.0, -7.0, 4.0};
  const std::vector<std::size_t> coords{2, 0};
  const std::vector<double> a = grad_fd_oracle(lin, p, 1e-3, coords);
  const std::vector<double> b = grad_fd_oracle(lin, q, 1e-3, coords);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_NEAR(a[0], 0.5, 1e-9);
  EXPECT_NEAR(a[1], 3.0, 1e-9);
  EXPECT_NEAR(a[0], b[0], 1e-9);
  EXPECT_THROW(grad_fd_oracle(lin, p, 0.0), std::invalid_argument);
}

TEST(SampleYaws, SeededAndInRange) {
  FitConfig c;
  c.nv_poses = 16;
  c.seed = 9;
  const std::vector<double> a = sample_yaws(c);
  EXPECT_EQ(a, sample_yaws(c));
  for (double y : a) {
    EXPECT_GE(y, c.yaw_min);
    EXPECT_LE(y, c.yaw_max);
  }
  c.seed = 10;
  EXPECT_NE(a, sample_yaws(c));
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-6); }

TEST(LatentObjective, GradientMatchesFiniteDifferences) {
  const CoarseModel model = testing::sphere_model();
  const Camera cam = front_camera();
  FitConfig c = small_config();
  c.weights.latent = 1e-2;
  const Image target = render(model.scene(model.generator.sample_code(3)), cam, c.render).color;
  const LatentObjective obj(model, cam, target, c, model.generator.mean_code(100));
  std::vector<double> p = LatentObjective::flatten(model.generator.sample_code(1));
  std::vector<double> grad;
  obj.evaluate(p, &grad);
  const std::vector<std::size_t> coords{0, 5, 17, 33, 63};
  const std::vector<double> fd = grad_fd_oracle(
      [&](std::span<const double> x) { return obj.evaluate(x, nullptr).total; }, p, 1e-5, coords);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    EXPECT_LE(rel_err(grad[coords[k]], fd[k]), 1e-4) << coords[k];
  }
}

DetailVoxel small_voxel_shape() { return DetailVoxel::zeros(front_camera(), 1.0, 4, 4, 6, 8); }

TEST(DetailObjective, GradientMatchesFiniteDifferences) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = front_camera();
  FitConfig c = small_config();
  c.cache_factor = 2;  // at factor 4 the 2x2 low-res rays all miss the sphere
  Image target = render(scene, cam, c.render).color;
  for (std::size_t i = 0; i < target.data.size(); ++i) target.data[i] += 0.05 * std::sin(1.7 * i);
  const DetailObjective obj(scene, cam, target, c, small_voxel_shape());
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.3);
  std::vector<double> p(obj.parameter_count());
  for (double& v : p) v = n(rng);
  std::vector<double> grad;
  const LossReport r = obj.evaluate(p, &grad);
  EXPECT_GT(r.nv, 0.0);
  EXPECT_GT(r.depth_reg, 0.0);
  std::vector<std::size_t> coords;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (std::abs(grad[i]) > 1e-8) coords.push_back(i);
  }
  ASSERT_GT(coords.size(), 20u);
  coords.resize(20);
  const std::vector<double> fd = grad_fd_oracle(
      [&](std::span<const double> x) { return obj.evaluate(x, nullptr).total; }, p, 1e-5, coords);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    EXPECT_LE(rel_err(grad[coords[k]], fd[k]), 1e-4) << coords[k];
  }
}

TEST(FitLatent, ZeroIterationsReturnsMeanCode) {
  const CoarseModel model = testing::sphere_model();
  const Camera cam = front_camera();
  FitConfig c = small_config(8, 0);
  const Image target = render(model.scene(model.generator.sample_code(2)), cam, c.render).color;
  const LatentFit f = fit_latent(target, cam, model, c);
  EXPECT_EQ(f.code.w, model.generator.mean_code(10000).w);
  EXPECT_TRUE(f.trace.reports.empty());
}

TEST(FitLatent, DeterministicAndDescending) {
  const CoarseModel model = testing::sphere_model();
  const Camera cam = front_camera();
  FitConfig c = small_config(8, 8);
  c.weights.pixel = 1.0;
  const Image target = render(model.scene(model.generator.sample_code(2)), cam, c.render).color;
  const LatentFit a = fit_latent(target, cam, model, c);
  const LatentFit b = fit_latent(target, cam, model, c);
  EXPECT_EQ(a.code.w, b.code.w);
  ASSERT_EQ(a.trace.reports.size(), 8u);
  double prev = a.trace.initial.total;
  for (std::size_t i = 0; i < a.trace.reports.size(); ++i) {
    EXPECT_EQ(a.trace.reports[i], b.trace.reports[i]);
    EXPECT_LE(a.trace.reports[i].total, prev);
    prev = a.trace.reports[i].total;
  }
  EXPECT_LT(prev, a.trace.initial.total);
}

TEST(FitLatent, TargetSizeMustMatch) {
  const CoarseModel model = testing::sphere_model();
  EXPECT_THROW(fit_latent(Image(9, 8), front_camera(), model, small_config()),
               std::invalid_argument);
}

TEST(FitDetail, CoarseTargetKeepsVoxelSmall) {
  const TriPlaneScene scene = testing::sphere_scene();
  const Camera cam = front_camera();
  const FitConfig c = small_config(16, 10);
  const Image target = render(scene, cam, c.render).color;
  const DetailFit f = fit_detail(target, cam, scene, c, small_voxel_shape());
  double norm = 0.0;
  for (double v : f.voxel.data) norm += v * v;
  EXPECT_EQ(norm, 0.0);  // zero voxel is already optimal; the gradient vanishes
  EXPECT_LE(f.trace.reports.back().recon_pixel, f.trace.initial.recon_pixel);
  EXPECT_EQ(f.trace.final_psnr, 99.0);
}

TEST(FitDetail, FrozenCoarseAndDeterministic) {
  const TriPlaneScene scene = testing::sphere_scene();
  const std::vector<double> planes_before = scene.planes.data;
  const Camera cam = front_camera();
  const FitConfig c = small_config(16, 4);
  Image target = render(scene, cam, c.render).color;
  for (std::size_t i = 0; i < target.data.size(); ++i) target.data[i] += 0.1 * std::sin(0.9 * i);
  const DetailFit a = fit_detail(target, cam, scene, c, small_voxel_shape());
  const DetailFit b = fit_detail(target, cam, scene, c, small_voxel_shape());
  EXPECT_EQ(scene.planes.data, planes_before);
  EXPECT_EQ(a.voxel.data, b.voxel.data);
  for (std::size_t i = 0; i < a.trace.reports.size(); ++i) {
    EXPECT_EQ(a.trace.reports[i], b.trace.reports[i]);
  }
  EXPECT_LT(a.trace.reports.back().total, a.trace.initial.total);
}

TEST(FitDetail, ChannelMismatchThrows) {
  const TriPlaneScene scene = testing::sphere_scene();
  const FitConfig c = small_config();
  EXPECT_THROW(fit_detail(Image(8, 8), front_camera(), scene, c,
                          DetailVoxel::zeros(front_camera(), 1.0, 4, 4, 4, 3)),
               std::invalid_argument);
}

}  // namespace
}  // namespace rmf
