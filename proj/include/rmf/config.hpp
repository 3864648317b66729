#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmf/cache.hpp"
#include "rmf/detail.hpp"
#include "rmf/field.hpp"
#include "rmf/fit.hpp"
#include "rmf/geometry.hpp"
#include "rmf/radiance.hpp"
#include "rmf/render.hpp"

namespace rmf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kConfigVersion = 1;

struct FieldSpec {
  std::string type = "sphere";  // sphere | plane | ellipsoid | mlp
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Mat3 matrix = Mat3::Identity();
  std::vector<int> hidden{16};  // mlp without a weights file
  std::uint64_t seed = 1;
  double gain = 1.0;
  std::string weights;  // optional mlp blob
};

struct LevelSpec {
  std::vector<double> values;  // explicit list wins over the uniform range
  int count = 8;
  double min = 0.6;
  double max = 1.0;
};

struct LatentSpec {
  std::string mode = "mean";  // mean | sample | file
  std::uint64_t index = 0;
  std::string file;
};

struct DecoderSpec {
  std::vector<int> hidden{32};
  std::uint64_t seed = 3;
  double gain = 1.0;
  std::string weights;
};

struct CameraSpec {
  Projection mode = Projection::kPinhole;
  double fov_y = 0.5;
  double near = 1.0;
  double far = 5.0;
  double ortho_half_height = 1.0;
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;
  double radius = 3.0;
  Vec3 target = Vec3::Zero();
};

struct DetailSpec {
  std::string file;  // empty: no detail
  int height = 32;
  int width = 32;
  int depth = 16;
  int channels = 8;
  std::string upsample = "bilinear";  // bilinear | conv
  std::string conv_weights;
};

struct StripSpec {
  int row = -1;  // -1: middle row
  int col_start = 0;
  int col_end = -1;  // -1: image width
  int frames = 16;
  double yaw_step = 0.02;
};

struct DollySpec {
  std::vector<double> distances{3.0, 3.5, 4.0};
  Vec3 subject = Vec3::Zero();
};

struct SceneConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 0;
  FieldSpec field;
  LevelSpec levels;
  GeneratorShape generator;
  std::uint64_t generator_seed = 7;
  LatentSpec latent;
  DecoderSpec decoder;
  CameraSpec camera;
  RenderOptions render;
  DetailSpec detail;
  FitConfig fit;  // render options are taken from `render`
  StripSpec strip;
  DollySpec dolly;
  std::filesystem::path base_dir;  // referenced files resolve against this
};

/// Throws ConfigError on unknown keys, wrong types or violated invariants.
SceneConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
SceneConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const SceneConfig& config);

/// Checks module invariants and that every referenced file exists.
void validate_config(const SceneConfig& config);

std::filesystem::path resolve(const SceneConfig& config, const std::string& file);

ScalarField build_field(const SceneConfig& config);
IsoLevels build_levels(const SceneConfig& config);
Mlp build_decoder(const SceneConfig& config);
CoarseModel build_model(const SceneConfig& config);
LatentCode build_latent(const SceneConfig& config, const CoarseModel& model);
TriPlaneScene build_scene(const SceneConfig& config);

/// The input camera; `yaw_pitch_roll` overrides the configured pose.
Camera build_camera(const SceneConfig& config,
                    const std::optional<Vec3>& yaw_pitch_roll = std::nullopt);

UpsampleOp build_upsample(const SceneConfig& config);

/// Detail manifolds from the configured voxel file, built against the
/// configured input camera. Empty when no file is configured.
std::optional<DetailManifolds> build_detail_from_config(const SceneConfig& config,
                                                        const TriPlaneScene& scene,
                                                        const std::string& voxel_file = {});

}  // namespace rmf
