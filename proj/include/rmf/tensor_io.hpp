#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "rmf/detail.hpp"
#include "rmf/mlp.hpp"
#include "rmf/radiance.hpp"

namespace rmf {

// Flat little-endian float64 blob plus a JSON descriptor next to it
// (same stem, ".json"): {"dtype": "float64", "shape": [...], "meta": {...}}.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t element_count() const;
};

std::filesystem::path descriptor_path(const std::filesystem::path& blob);

void write_tensor(const std::filesystem::path& blob, const Tensor& tensor);
/// Throws IoError for missing or malformed files.
Tensor read_tensor(const std::filesystem::path& blob);

void save_mlp(const std::filesystem::path& blob, const Mlp& net);
Mlp load_mlp(const std::filesystem::path& blob);

void save_latent(const std::filesystem::path& blob, const LatentCode& code);
LatentCode load_latent(const std::filesystem::path& blob);

/// Voxel entries only; the frustum comes from the scene's input camera.
void save_voxel(const std::filesystem::path& blob, const DetailVoxel& voxel);
DetailVoxel load_voxel(const std::filesystem::path& blob, const Camera& camera, double aspect);

void save_conv_stack(const std::filesystem::path& blob, const ConvStack& stack);
ConvStack load_conv_stack(const std::filesystem::path& blob);

}  // namespace rmf
