#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rmf/cache.hpp"
#include "rmf/detail.hpp"
#include "rmf/loss.hpp"
#include "rmf/radiance.hpp"
#include "rmf/render.hpp"

namespace rmf {

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitConfig {
  int iterations = 200;
  double step = 1.0;
  double step_growth = 1.25;  // applied after every accepted step
  int max_backoffs = 10;
  LossWeights weights;
  double tau = 0.2;
  double epsilon = -1.0;  // negative: one depth-slab width of the voxel
  int nv_poses = 3;
  double yaw_min = -0.4;
  double yaw_max = 0.4;
  Vec3 pivot = Vec3::Zero();
  std::uint64_t seed = 0;
  RenderOptions render;
  int cache_factor = 4;
  UpsampleOp upsample;
  ImagePlugin perceptual;
  ImagePlugin id;

  void validate() const;
};

struct FitTrace {
  LossReport initial;
  std::vector<LossReport> reports;  // one per iteration, after its update
  double final_psnr = 0.0;
  double seconds = 0.0;  // wall clock, excluded from reproducibility checks
};

// Frozen pieces of the coarse generator: the latent code is the only input.
struct CoarseModel {
  CoarseGenerator generator;
  Mlp decoder;
  IsoLevels levels;
  ScalarField field;

  TriPlaneScene scene(const LatentCode& code) const;
};

/// Objective value and, when `grad` is non-null, its gradient.
using Objective = std::function<LossReport(std::span<const double> params, std::vector<double>* grad)>;

/// Gradient descent with step halving: a step that raises the total is
/// retried at half length up to max_backoffs times, then skipped.
FitTrace descend(std::vector<double>& params, const Objective& objective, const FitConfig& config);

/// Central differences of f at params for the given coordinates (all when
/// empty).
std::vector<double> grad_fd_oracle(const std::function<double(std::span<const double>)>& f,
                                   std::span<const double> params, double h,
                                   std::span<const std::size_t> coords = {});

// Stage 1: recon_loss + latent_reg as a function of the flattened code.
class LatentObjective {
 public:
  LatentObjective(const CoarseModel& model, const Camera& camera_in, const Image& target,
                  const FitConfig& config, LatentCode mean);

  LossReport evaluate(std::span<const double> code, std::vector<double>* grad) const;
  const LatentCode& mean() const { return mean_; }
  LatentCode unflatten(std::span<const double> code) const;
  static std::vector<double> flatten(const LatentCode& code);

 private:
  const CoarseModel& model_;
  Camera camera_;
  Image target_;
  FitConfig config_;
  LatentCode mean_;
  IntersectionSet hits_;
};

// Stage 2: recon_loss at the input view, novel-view regularization over a
// fixed seeded pose pool, and depth regularization, as a function of the
// detail voxel entries. The coarse scene is frozen.
class DetailObjective {
 public:
  DetailObjective(const TriPlaneScene& coarse, const Camera& camera_in, const Image& target,
                  const FitConfig& config, const DetailVoxel& shape);

  LossReport evaluate(std::span<const double> voxel, std::vector<double>* grad) const;

  const ManifoldCache& cache() const { return cache_; }
  const std::vector<Camera>& novel_cameras() const { return novel_; }
  const GBuffer& coarse_input() const { return coarse_in_; }
  double epsilon() const { return epsilon_; }
  std::size_t parameter_count() const { return shape_.data.size(); }
  DetailVoxel voxel_from(std::span<const double> values) const;

 private:
  const TriPlaneScene& coarse_;
  Camera camera_;
  Image target_;
  FitConfig config_;
  DetailVoxel shape_;
  double epsilon_ = 0.0;
  ManifoldCache cache_;
  IntersectionSet hits_in_;
  GBuffer coarse_in_;
  std::vector<Camera> novel_;
  std::vector<IntersectionSet> hits_nv_;
  std::vector<GBuffer> coarse_nv_;
  std::vector<Mask> masks_;
};

/// Novel-view yaw offsets drawn from the config's seeded sampler.
std::vector<double> sample_yaws(const FitConfig& config);

struct LatentFit {
  LatentCode code;
  FitTrace trace;
};

/// Starts from the mean code (average of 10k sampled codes).
LatentFit fit_latent(const Image& target, const Camera& camera_in, const CoarseModel& model,
                     const FitConfig& config);

struct DetailFit {
  DetailVoxel voxel;
  FitTrace trace;
};

/// Starts from an all-zero voxel shaped like `shape`.
DetailFit fit_detail(const Image& target, const Camera& camera_in, const TriPlaneScene& coarse,
                     const FitConfig& config, const DetailVoxel& shape);

/// Masked squared error between the detailed and the coarse render at
/// `camera`, masked by the coarse normals as in the novel-view term.
double novel_view_divergence(const TriPlaneScene& coarse, const DetailVoxel& voxel,
                             const Camera& camera_in, const Camera& camera,
                             const FitConfig& config);

}  // namespace rmf
