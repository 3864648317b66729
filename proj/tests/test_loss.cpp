#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rmf/loss.hpp"
#include "rmf/render.hpp"
#include "scenes.hpp"

namespace rmf {
namespace {

Image random_image(int w, int h, std::uint64_t seed) {
  Image img(w, h);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : img.data) v = u(rng);
  return img;
}

Image shifted(const Image& a, double d) {
  Image b = a;
  for (double& v : b.data) v += d;
  return b;
}

TEST(Recon, IdentityGivesZero) {
  const Image a = random_image(7, 5, 1);
  const ReconComponents r = recon_loss(a, a);
  EXPECT_EQ(r.pixel, 0.0);
  EXPECT_EQ(r.perceptual, 0.0);
  EXPECT_EQ(r.id, 0.0);
}

TEST(Recon, UniformOffsetGivesSquaredOffset) {
  const Image a = random_image(6, 4, 2);
  EXPECT_NEAR(recon_loss(a, shifted(a, 0.1)).pixel, 0.01, 1e-15);
}

TEST(Recon, PluginsOnlyWhenPresent) {
  const Image a = random_image(4, 4, 3);
  const Image b = random_image(4, 4, 4);
  ImagePlugin p;
  p.value = [](const Image&, const Image&) { return 0.75; };
  const ReconComponents r = recon_loss(a, b, p);
  EXPECT_EQ(r.perceptual, 0.75);
  EXPECT_EQ(r.id, 0.0);
  EXPECT_EQ(recon_loss(a, b, {}, p).id, 0.75);
}

TEST(Recon, DimensionMismatchThrows) {
  EXPECT_THROW(recon_loss(Image(4, 4), Image(4, 5)), std::invalid_argument);
  EXPECT_THROW(mse(Image(3, 4), Image(4, 3)), std::invalid_argument);
}

TEST(Recon, MseGradMatchesFiniteDifferences) {
  const Image a = random_image(3, 3, 5);
  const Image b = random_image(3, 3, 6);
  const std::vector<double> g = mse_grad(a, b);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    Image p = a;
    Image m = a;
    p.data[i] += 1e-6;
    m.data[i] -= 1e-6;
    EXPECT_NEAR(g[i], (mse(p, b) - mse(m, b)) / 2e-6, 1e-8);
  }
}

TEST(LossWeights, DefaultsAndTotal) {
  const LossWeights w;
  EXPECT_EQ(w.pixel, 1e-2);
  EXPECT_EQ(w.perceptual, 1.0);
  EXPECT_EQ(w.id, 4e-2);
  EXPECT_EQ(w.nv, 4.0);
  EXPECT_EQ(w.depth, 2e-4);
  LossReport r;
  r.recon_pixel = 2.0;
  r.recon_perceptual = 3.0;
  r.recon_id = 5.0;
  r.nv = 7.0;
  r.depth_reg = 11.0;
  r.latent_reg = 13.0;
  r.sum();
  EXPECT_DOUBLE_EQ(r.total, 1e-2 * 2 + 3 + 4e-2 * 5 + 4 * 7 + 11 + 1e-4 * 13);
}

TEST(NvMask, ExamplesFromThresholds) {
  const Vec3 lookat(0, 0, 1);
  const std::vector<Vec3> normals{Vec3(0, 0, -1), Vec3(std::sqrt(1 - 0.01), 0, -0.1),
                                  Vec3(1, 0, 0), Vec3(0, 0, 1)};
  const Mask m = nv_mask(normals, {}, lookat, 0.2);
  EXPECT_EQ(m, (Mask{0, 1, 1, 1}));
  EXPECT_EQ(nv_mask(normals, {}, lookat, 1.5), (Mask{1, 1, 1, 1}));
}

TEST(NvMask, DegenerateNormalsAreMasked) {
  const std::vector<Vec3> normals{Vec3(0, 0, -1), Vec3::Zero()};
  const std::vector<std::uint8_t> degenerate{1, 1};
  EXPECT_EQ(nv_mask(normals, degenerate, Vec3(0, 0, 1), 0.2), (Mask{1, 1}));
  const std::vector<std::uint8_t> wrong{1};
  EXPECT_THROW(nv_mask(normals, wrong, Vec3(0, 0, 1), 0.2), std::invalid_argument);
}

TEST(NvMask, MonotoneInTau) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  std::vector<Vec3> normals(500);
  for (Vec3& v : normals) v = Vec3(n(rng), n(rng), n(rng)).normalized();
  const Vec3 lookat = Vec3(0.2, -0.3, 1.0).normalized();
  Mask prev = nv_mask(normals, {}, lookat, -1.5);
  for (double tau = -1.4; tau <= 1.5; tau += 0.1) {
    const Mask cur = nv_mask(normals, {}, lookat, tau);
    for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_LE(prev[i], cur[i]);
    prev = cur;
  }
}

TEST(NvLoss, Examples) {
  const Image a = random_image(5, 4, 8);
  const Image b = random_image(5, 4, 9);
  const Mask ones(20, 1);
  const Mask zeros(20, 0);
  EXPECT_EQ(nv_loss(a, a, ones), 0.0);
  EXPECT_EQ(nv_loss(a, b, zeros), 0.0);
  EXPECT_DOUBLE_EQ(nv_loss(a, b, ones), mse(a, b));
  EXPECT_THROW(nv_loss(a, b, Mask(19, 1)), std::invalid_argument);
  EXPECT_THROW(nv_loss(a, Image(4, 5), ones), std::invalid_argument);
}

TEST(NvLoss, PluginSeesMaskedImages) {
  const Image a = random_image(3, 2, 10);
  const Image b = random_image(3, 2, 11);
  const Mask mask{1, 0, 0, 1, 0, 0};
  ImagePlugin p;
  p.value = [&](const Image& x, const Image& y) {
    for (int i : {1, 2, 4, 5}) {
      for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(x.data[3 * i + c], 0.0);
        EXPECT_EQ(y.data[3 * i + c], 0.0);
      }
    }
    EXPECT_EQ(x.data[0], a.data[0]);
    return 0.5;
  };
  EXPECT_EQ(nv_loss(a, b, mask, p), 0.5);
}

TEST(NvLoss, GradMatchesFiniteDifferences) {
  const Image a = random_image(4, 3, 12);
  const Image b = random_image(4, 3, 13);
  Mask mask(12);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = i % 3 != 0;
  const std::vector<double> g = nv_loss_grad(a, b, mask);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    Image p = a;
    Image m = a;
    p.data[i] += 1e-6;
    m.data[i] -= 1e-6;
    EXPECT_NEAR(g[i], (nv_loss(p, b, mask) - nv_loss(m, b, mask)) / 2e-6, 1e-8);
  }
}

ShadedImage hits_at_depths(const std::vector<std::vector<double>>& depths) {
  ShadedImage s;
  s.width = static_cast<int>(depths.size());
  s.height = 1;
  for (const auto& px : depths) {
    std::vector<ShadedHit> hits;
    for (double d : px) {
      ShadedHit h;
      h.depth = d;
      hits.push_back(h);
    }
    s.pixels.push_back(hits);
  }
  return s;
}

TEST(DepthReg, Examples) {
  const ShadedImage one = hits_at_depths({{2.0}});
  const std::vector<double> z{2.05};
  const std::vector<std::vector<Feature>> f{{Feature::Constant(4, 1.0)}};  // |f|^2 = 4
  EXPECT_EQ(depth_reg(one, f, z, 0.1, 2e-4), 0.0);
  EXPECT_NEAR(depth_reg(one, f, z, 0.01, 2e-4), 8e-4, 1e-18);
  const std::vector<std::vector<Feature>> zero{{Feature::Zero(4)}};
  EXPECT_EQ(depth_reg(one, zero, z, 0.01, 2e-4), 0.0);
}

TEST(DepthReg, MisalignmentThrows) {
  const ShadedImage s = hits_at_depths({{1.0, 2.0}, {}});
  const std::vector<double> z{1.0, 5.0};
  EXPECT_THROW(depth_reg(s, {{Feature::Zero(2)}, {}}, z, 0.1, 1.0), std::invalid_argument);
  EXPECT_THROW(depth_reg(s, {{Feature::Zero(2), Feature::Zero(2)}}, z, 0.1, 1.0),
               std::invalid_argument);
  EXPECT_THROW(depth_reg(s, {{Feature::Zero(2), Feature::Zero(2)}, {}}, std::vector<double>{1.0},
                         0.1, 1.0),
               std::invalid_argument);
}

TEST(DepthReg, MonotoneAsEpsilonShrinks) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  std::normal_distribution<double> n;
  std::vector<std::vector<double>> depths(30);
  std::vector<std::vector<Feature>> f(30);
  std::vector<double> z(30);
  for (int p = 0; p < 30; ++p) {
    z[p] = u(rng);
    for (int k = 0; k < 4; ++k) {
      depths[p].push_back(u(rng));
      Feature x(3);
      x << n(rng), n(rng), n(rng);
      f[p].push_back(x);
    }
  }
  const ShadedImage s = hits_at_depths(depths);
  double prev = 0.0;
  for (double eps = 3.0; eps > 1e-4; eps *= 0.7) {
    const double cur = depth_reg(s, f, z, eps, 2e-4);
    EXPECT_GE(cur, prev);
    prev = cur;
  }
  EXPECT_GT(prev, 0.0);
}

TEST(LatentReg, Examples) {
  LatentCode mean = LatentCode::zeros(3, 4);
  mean.w(1, 2) = 0.3;
  EXPECT_EQ(latent_reg(mean, mean), 0.0);
  LatentCode c = mean;
  c.w(2, 0) += 1.0;
  EXPECT_DOUBLE_EQ(latent_reg(c, mean), 1.0);
  c.w(2, 0) = 2.5;
  EXPECT_DOUBLE_EQ(latent_reg(c, mean), 6.25);
  EXPECT_THROW(latent_reg(LatentCode::zeros(3, 5), mean), std::invalid_argument);
}

TEST(Losses, NonNegative) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Image a = random_image(4, 4, 100 + s);
    const Image b = random_image(4, 4, 200 + s);
    EXPECT_GE(mse(a, b), 0.0);
    EXPECT_GE(nv_loss(a, b, Mask(16, 1)), 0.0);
  }
}

}  // namespace
}  // namespace rmf
