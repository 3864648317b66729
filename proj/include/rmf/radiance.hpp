#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rmf/field.hpp"
#include "rmf/mlp.hpp"
#include "rmf/types.hpp"

namespace rmf {

enum PlaneIndex : int { kPlaneXY = 0, kPlaneXZ = 1, kPlaneYZ = 2 };

// Three axis-aligned R x R feature grids covering [-extent, extent]^2.
// Storage order: [plane][row][col][channel]. XY indexes (col=x, row=y),
// XZ indexes (col=x, row=z), YZ indexes (col=y, row=z).
struct TriPlanes {
  int resolution = 0;
  int channels = 0;
  double extent = 1.0;
  std::vector<double> data;

  static TriPlanes zeros(int resolution, int channels, double extent);

  std::size_t index(int plane, int row, int col, int channel) const {
    const auto r = static_cast<std::size_t>(resolution);
    return ((static_cast<std::size_t>(plane) * r + row) * r + col) * channels + channel;
  }
  double& at(int plane, int row, int col, int channel) { return data[index(plane, row, col, channel)]; }
  double at(int plane, int row, int col, int channel) const {
    return data[index(plane, row, col, channel)];
  }

  void validate() const;
};

// Bilinear taps of one point on all three planes: offsets point at channel 0
// of each cell corner.
struct TriPlaneTaps {
  std::array<std::array<std::size_t, 4>, 3> offset{};
  std::array<std::array<double, 4>, 3> weight{};
};

TriPlaneTaps triplane_taps(const TriPlanes& planes, const Vec3& x);

/// Sum of the three bilinear plane samples (corner-aligned, clamp-to-edge).
Feature triplane_sample(const TriPlanes& planes, const Vec3& x);
Feature triplane_gather(const TriPlanes& planes, const TriPlaneTaps& taps);

/// Accumulates grad into the plane gradient buffer (same layout as data).
void triplane_scatter(const TriPlaneTaps& taps, const Feature& grad, std::span<double> grad_planes);

using FeatureJacobian = Eigen::Matrix<double, Eigen::Dynamic, 3, 0, kMaxChannels, 3>;

/// d feature / d x. Zero along an axis where the sample is clamped.
FeatureJacobian triplane_jacobian(const TriPlanes& planes, const Vec3& x);

struct RadianceSample {
  Vec3 color = Vec3::Zero();
  double alpha = 0.0;
};

/// Decoder m applied to (feature + detail). Output channels are (r, g, b, alpha).
RadianceSample decode(const Mlp& decoder, const Feature& feature, const Feature& detail);
RadianceSample decode(const Mlp& decoder, const Feature& input);

/// Gradient of <grad_color, c> + grad_alpha * alpha w.r.t. the decoder input.
Feature decode_vjp(const Mlp& decoder, const Feature& input, const Vec3& grad_color,
                   double grad_alpha);

// Coarse radiance generator: planes + decoder m + the manifolds they live on.
struct TriPlaneScene {
  TriPlanes planes;
  Mlp decoder;  // channels -> ... -> 4, sigmoid output
  IsoLevels levels;
  ScalarField field;

  TriPlaneScene(TriPlanes planes, Mlp decoder, IsoLevels levels, ScalarField field);

  int channels() const { return planes.channels; }
  void validate() const;
};

/// d alpha / d x through plane sampling and the decoder, with `detail`
/// held fixed.
Vec3 alpha_grad(const TriPlaneScene& scene, const Vec3& x, const Feature& detail);

// Per-layer latent vectors, one row per synthesis layer.
struct LatentCode {
  Eigen::MatrixXd w;

  static LatentCode zeros(int layers, int dim) { return {Eigen::MatrixXd::Zero(layers, dim)}; }
  int layers() const { return static_cast<int>(w.rows()); }
  int dim() const { return static_cast<int>(w.cols()); }
};

struct GeneratorShape {
  int resolution = 16;
  int channels = 8;
  double extent = 1.5;
  int latent_layers = 4;
  int latent_dim = 16;
  double gain = 1.0;

  void validate() const;
};

// Fixed seeded affine map from a latent code to plane values:
// planes = bias + sum_l A_l w_l. Layer l drives spatial patterns in a
// frequency band that doubles with l, coarse to fine.
class CoarseGenerator {
 public:
  CoarseGenerator(const GeneratorShape& shape, std::uint64_t seed);

  const GeneratorShape& shape() const { return shape_; }
  std::uint64_t seed() const { return seed_; }

  TriPlanes generate(const LatentCode& code) const;

  /// Transposed map: latent gradient from a plane gradient.
  LatentCode backprop(std::span<const double> grad_planes) const;

  /// Standard-normal code for sampling index z.
  LatentCode sample_code(std::uint64_t z) const;

  /// Average over `samples` sampled codes.
  LatentCode mean_code(int samples = 10000) const;

  const Eigen::VectorXd& bias() const { return bias_; }

 private:
  GeneratorShape shape_;
  std::uint64_t seed_;
  Eigen::MatrixXd basis_;  // plane values x (layers * dim)
  Eigen::VectorXd bias_;
};

}  // namespace rmf
