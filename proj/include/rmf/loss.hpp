#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rmf/image.hpp"
#include "rmf/radiance.hpp"
#include "rmf/render.hpp"

namespace rmf {

// Optional learned image distance (perceptual, identity). `grad` returns
// d value / d a in Image::data layout; fitting requires it.
struct ImagePlugin {
  std::function<double(const Image& a, const Image& b)> value;
  std::function<std::vector<double>(const Image& a, const Image& b)> grad;

  explicit operator bool() const { return static_cast<bool>(value); }
};

struct LossWeights {
  double pixel = 1e-2;
  double perceptual = 1.0;
  double id = 4e-2;
  double nv = 4.0;
  double depth = 2e-4;  // lambda, applied inside the depth term
  double latent = 1e-4;

  bool operator==(const LossWeights&) const = default;
};

struct LossReport {
  double recon_pixel = 0.0;
  double recon_perceptual = 0.0;
  double recon_id = 0.0;
  double nv = 0.0;
  double depth_reg = 0.0;  // already scaled by weights.depth
  double latent_reg = 0.0;
  double total = 0.0;
  LossWeights weights;

  /// Recomputes `total` from the components and weights.
  void sum();
  bool operator==(const LossReport&) const = default;
};

struct ReconComponents {
  double pixel = 0.0;
  double perceptual = 0.0;
  double id = 0.0;
};

/// Mean over every channel of every pixel.
double mse(const Image& a, const Image& b);

/// d mse(a, b) / d a.
std::vector<double> mse_grad(const Image& a, const Image& b);

ReconComponents recon_loss(const Image& rendered, const Image& target,
                           const ImagePlugin& perceptual = {}, const ImagePlugin& id = {});

using Mask = std::vector<std::uint8_t>;

/// 1 where -lookat . N < tau (surface not seen head-on by the input camera)
/// and where the normal is degenerate.
Mask nv_mask(std::span<const Vec3> normals, std::span<const std::uint8_t> degenerate,
             const Vec3& lookat_in, double tau);

/// Masked squared error, normalized by the full channel count 3 * W * H.
/// With a plugin, the plugin is applied to the two masked images.
double nv_loss(const Image& final_nv, const Image& coarse_nv, const Mask& mask,
               const ImagePlugin& distance = {});

/// d nv_loss / d final_nv for the default distance.
std::vector<double> nv_loss_grad(const Image& final_nv, const Image& coarse_nv, const Mask& mask);

/// Sum over hits of lambda * |f|^2 for hits whose depth is farther than
/// epsilon from their pixel's z_surf. `details` is aligned with
/// `hits.pixels`.
double depth_reg(const ShadedImage& hits, const std::vector<std::vector<Feature>>& details,
                 std::span<const double> z_surf, double epsilon, double lambda);

/// Squared Frobenius distance.
double latent_reg(const LatentCode& code, const LatentCode& mean);

}  // namespace rmf
