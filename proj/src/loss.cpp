#include "rmf/loss.hpp"

#include <stdexcept>

namespace rmf {

void LossReport::sum() {
  total = weights.pixel * recon_pixel + weights.perceptual * recon_perceptual +
          weights.id * recon_id + weights.nv * nv + depth_reg + weights.latent * latent_reg;
}

namespace {

void check_same(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b) || a.data.size() != b.data.size()) {
    throw std::invalid_argument(std::string(what) + ": image dimensions differ");
  }
}

void check_mask(const Image& a, const Mask& mask) {
  if (mask.size() != static_cast<std::size_t>(a.width) * a.height) {
    throw std::invalid_argument("nv_loss: mask size does not match the image");
  }
}

Image apply_mask(const Image& a, const Mask& mask) {
  Image out = a;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (mask[p]) continue;
    out.data[3 * p] = out.data[3 * p + 1] = out.data[3 * p + 2] = 0.0;
  }
  return out;
}

}  // namespace

double mse(const Image& a, const Image& b) {
  check_same(a, b, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

std::vector<double> mse_grad(const Image& a, const Image& b) {
  check_same(a, b, "mse_grad");
  std::vector<double> g(a.data.size());
  const double scale = 2.0 / static_cast<double>(a.data.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (a.data[i] - b.data[i]);
  return g;
}

ReconComponents recon_loss(const Image& rendered, const Image& target,
                           const ImagePlugin& perceptual, const ImagePlugin& id) {
  ReconComponents r;
  r.pixel = mse(rendered, target);
  if (perceptual) r.perceptual = perceptual.value(rendered, target);
  if (id) r.id = id.value(rendered, target);
  return r;
}

Mask nv_mask(std::span<const Vec3> normals, std::span<const std::uint8_t> degenerate,
             const Vec3& lookat_in, double tau) {
  if (!degenerate.empty() && degenerate.size() != normals.size()) {
    throw std::invalid_argument("nv_mask: normal and degenerate flags differ in size");
  }
  Mask mask(normals.size());
  for (std::size_t p = 0; p < normals.size(); ++p) {
    const bool flat = !degenerate.empty() && degenerate[p];
    mask[p] = flat || -lookat_in.dot(normals[p]) < tau ? 1 : 0;
  }
  return mask;
}

double nv_loss(const Image& final_nv, const Image& coarse_nv, const Mask& mask,
               const ImagePlugin& distance) {
  check_same(final_nv, coarse_nv, "nv_loss");
  check_mask(final_nv, mask);
  if (distance) return distance.value(apply_mask(final_nv, mask), apply_mask(coarse_nv, mask));
  double acc = 0.0;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = final_nv.data[3 * p + c] - coarse_nv.data[3 * p + c];
      acc += d * d;
    }
  }
  return acc / static_cast<double>(final_nv.data.size());
}

std::vector<double> nv_loss_grad(const Image& final_nv, const Image& coarse_nv, const Mask& mask) {
  check_same(final_nv, coarse_nv, "nv_loss_grad");
  check_mask(final_nv, mask);
  std::vector<double> g(final_nv.data.size(), 0.0);
  const double scale = 2.0 / static_cast<double>(final_nv.data.size());
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    for (int c = 0; c < 3; ++c) {
      g[3 * p + c] = scale * (final_nv.data[3 * p + c] - coarse_nv.data[3 * p + c]);
    }
  }
  return g;
}

double depth_reg(const ShadedImage& hits, const std::vector<std::vector<Feature>>& details,
                 std::span<const double> z_surf, double epsilon, double lambda) {
  if (details.size() != hits.pixels.size() || z_surf.size() != hits.pixels.size()) {
    throw std::invalid_argument("depth_reg: hits, details and z_surf are not aligned");
  }
  double acc = 0.0;
  for (std::size_t p = 0; p < hits.pixels.size(); ++p) {
    if (details[p].size() != hits.pixels[p].size()) {
      throw std::invalid_argument("depth_reg: per-hit detail count does not match");
    }
    for (std::size_t k = 0; k < hits.pixels[p].size(); ++k) {
      if (std::abs(hits.pixels[p][k].depth - z_surf[p]) > epsilon) {
        acc += lambda * details[p][k].squaredNorm();
      }
    }
  }
  return acc;
}

double latent_reg(const LatentCode& code, const LatentCode& mean) {
  if (code.w.rows() != mean.w.rows() || code.w.cols() != mean.w.cols()) {
    throw std::invalid_argument("latent_reg: code shapes differ");
  }
  return (code.w - mean.w).squaredNorm();
}

}  // namespace rmf
