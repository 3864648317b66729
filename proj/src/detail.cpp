#include "rmf/detail.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rmf/cache.hpp"

namespace rmf {

DetailVoxel DetailVoxel::zeros(const Camera& camera, double aspect, int height, int width,
                               int depth, int channels) {
  DetailVoxel v;
  v.height = height;
  v.width = width;
  v.depth = depth;
  v.channels = channels;
  v.camera = camera;
  v.aspect = aspect;
  v.validate_dims();
  v.data.assign(static_cast<std::size_t>(height) * width * depth * channels, 0.0);
  return v;
}

void DetailVoxel::validate_dims() const {
  if (height < 2 || width < 2 || depth < 2) {
    throw std::invalid_argument("detail voxel needs at least 2 nodes per axis");
  }
  if (channels < 1 || channels > kMaxChannels) {
    throw std::invalid_argument("detail voxel channel count out of range");
  }
  if (!(aspect > 0.0)) throw std::invalid_argument("detail voxel aspect must be positive");
  camera.validate();
}

void DetailVoxel::validate() const {
  validate_dims();
  if (data.size() != static_cast<std::size_t>(height) * width * depth * channels) {
    throw std::invalid_argument("detail voxel data size does not match its dimensions");
  }
  for (double d : data) {
    if (!std::isfinite(d)) throw std::invalid_argument("detail voxel has non-finite entries");
  }
}

namespace {

struct Axis {
  int i0 = 0;
  int i1 = 0;
  double frac = 0.0;
};

// Corner-aligned grid position g in [0, n-1] to a clamped interpolation cell.
Axis grid_axis(double g, int n) {
  Axis a;
  if (n <= 1) return a;
  g = std::clamp(g, 0.0, static_cast<double>(n - 1));
  a.i0 = std::min(static_cast<int>(std::floor(g)), n - 2);
  a.i1 = a.i0 + 1;
  a.frac = g - a.i0;
  return a;
}

}  // namespace

VoxelTaps voxel_taps(const DetailVoxel& voxel, const Vec3& x_world) {
  VoxelTaps taps;
  const Vec3 xc = world2cam(voxel.camera, x_world);
  const auto ndc = normalized_image_coords(voxel.camera, xc, voxel.aspect);
  if (!ndc) return taps;
  const double z = xc.z();
  const Camera& cam = voxel.camera;
  if (std::abs(ndc->x()) > 1.0 || std::abs(ndc->y()) > 1.0 || z < cam.near || z > cam.far) {
    return taps;
  }
  taps.inside = true;
  const Axis ax = grid_axis(0.5 * (ndc->x() + 1.0) * (voxel.width - 1), voxel.width);
  const Axis ay = grid_axis(0.5 * (ndc->y() + 1.0) * (voxel.height - 1), voxel.height);
  const Axis az = grid_axis((z - cam.near) / (cam.far - cam.near) * (voxel.depth - 1), voxel.depth);
  int n = 0;
  for (int dy = 0; dy < 2; ++dy) {
    const int y = dy ? ay.i1 : ay.i0;
    const double wy = dy ? ay.frac : 1.0 - ay.frac;
    for (int dx = 0; dx < 2; ++dx) {
      const int x = dx ? ax.i1 : ax.i0;
      const double wx = dx ? ax.frac : 1.0 - ax.frac;
      for (int dz = 0; dz < 2; ++dz) {
        const int zi = dz ? az.i1 : az.i0;
        const double wz = dz ? az.frac : 1.0 - az.frac;
        taps.offset[n] = voxel.index(y, x, zi, 0);
        taps.weight[n] = wy * wx * wz;
        ++n;
      }
    }
  }
  return taps;
}

VoxelSample sample_voxel(const DetailVoxel& voxel, const Vec3& x_world) {
  VoxelSample s;
  s.feature = zero_feature(voxel.channels);
  const VoxelTaps taps = voxel_taps(voxel, x_world);
  if (!taps.inside) return s;
  s.inside = true;
  for (int n = 0; n < 8; ++n) {
    const double* src = voxel.data.data() + taps.offset[n];
    for (int c = 0; c < voxel.channels; ++c) s.feature[c] += taps.weight[n] * src[c];
  }
  return s;
}

ManifoldFeatureMap ManifoldFeatureMap::zeros(int level, int width, int height, int channels,
                                             int grid_width, int grid_height) {
  if (width < 1 || height < 1 || channels < 1 || grid_width < 1 || grid_height < 1) {
    throw std::invalid_argument("feature map dimensions must be positive");
  }
  ManifoldFeatureMap m;
  m.level = level;
  m.width = width;
  m.height = height;
  m.channels = channels;
  m.grid_width = grid_width;
  m.grid_height = grid_height;
  m.data.assign(static_cast<std::size_t>(width) * height * channels, 0.0);
  return m;
}

Feature ManifoldFeatureMap::texel(int col, int row) const {
  Feature f(channels);
  const double* src = data.data() + index(col, row);
  for (int c = 0; c < channels; ++c) f[c] = src[c];
  return f;
}

namespace {

void check_cache_match(const DetailVoxel& voxel, const ManifoldCache& cache) {
  const double aspect = static_cast<double>(cache.width) / cache.height;
  if (!(voxel.camera == cache.camera) || std::abs(voxel.aspect - aspect) > 1e-12) {
    throw std::invalid_argument("detail voxel and manifold cache use different input cameras");
  }
  if (voxel.channels != cache.channels) {
    throw std::invalid_argument("detail voxel channels must match the cached feature channels");
  }
}

// The nearest crossing of `level` on a low-res ray, if it is valid.
const Hit* first_crossing(const HitList& hits, int level) {
  for (const Hit& h : hits) {
    if (h.level == level && h.crossing == 0) return h.valid ? &h : nullptr;
  }
  return nullptr;
}

}  // namespace

std::vector<ManifoldFeatureMap> flatten_manifolds(const DetailVoxel& voxel,
                                                  const ManifoldCache& cache) {
  check_cache_match(voxel, cache);
  const int lw = cache.lowres_width();
  const int lh = cache.lowres_height();
  std::vector<ManifoldFeatureMap> maps;
  maps.reserve(static_cast<std::size_t>(cache.num_levels));
  for (int level = 0; level < cache.num_levels; ++level) {
    ManifoldFeatureMap m =
        ManifoldFeatureMap::zeros(level, lw, lh, voxel.channels, cache.width, cache.height);
    const long long total = static_cast<long long>(lw) * lh;
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < total; ++i) {
      const Hit* h = first_crossing(cache.lowres.rays[i], level);
      if (!h) continue;
      const VoxelSample s = sample_voxel(voxel, h->point);
      for (int c = 0; c < voxel.channels; ++c) m.data[i * voxel.channels + c] = s.feature[c];
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

void flatten_backward(const DetailVoxel& voxel, const ManifoldCache& cache,
                      const std::vector<ManifoldFeatureMap>& grad_maps,
                      std::span<double> grad_voxel) {
  check_cache_match(voxel, cache);
  if (grad_voxel.size() != voxel.data.size()) {
    throw std::invalid_argument("flatten_backward: gradient buffer has the wrong size");
  }
  const int C = voxel.channels;
  for (const ManifoldFeatureMap& g : grad_maps) {
    for (std::size_t i = 0; i < cache.lowres.rays.size(); ++i) {
      const Hit* h = first_crossing(cache.lowres.rays[i], g.level);
      if (!h) continue;
      const VoxelTaps taps = voxel_taps(voxel, h->point);
      if (!taps.inside) continue;
      const double* src = g.data.data() + i * C;
      for (int n = 0; n < 8; ++n) {
        double* dst = grad_voxel.data() + taps.offset[n];
        for (int c = 0; c < C; ++c) dst[c] += taps.weight[n] * src[c];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Super-resolution

ConvStack ConvStack::identity(int channels) {
  ConvStack s;
  for (ConvLayer& layer : s.layers) {
    layer.in_channels = channels;
    layer.out_channels = channels;
    layer.weight.assign(static_cast<std::size_t>(channels) * channels * 9, 0.0);
    layer.bias.assign(static_cast<std::size_t>(channels), 0.0);
    for (int c = 0; c < channels; ++c) layer.weight[layer.index(c, c, 1, 1)] = 1.0;
  }
  return s;
}

void ConvStack::validate(int channels) const {
  int in = channels;
  for (const ConvLayer& layer : layers) {
    if (layer.in_channels != in || layer.out_channels < 1) {
      throw std::invalid_argument("conv stack layer channels do not chain");
    }
    if (layer.weight.size() != static_cast<std::size_t>(layer.out_channels) * layer.in_channels * 9 ||
        layer.bias.size() != static_cast<std::size_t>(layer.out_channels)) {
      throw std::invalid_argument("conv stack layer has mis-sized weights");
    }
    in = layer.out_channels;
  }
  if (in != channels) throw std::invalid_argument("conv stack must end with the input channel count");
}

namespace {

double resize_coord(int k, int in, int out) {
  if (in <= 1 || out <= 1) return 0.0;
  return static_cast<double>(static_cast<long long>(k) * (in - 1)) / (out - 1);
}

}  // namespace

ManifoldFeatureMap resize_bilinear(const ManifoldFeatureMap& map, int width, int height) {
  ManifoldFeatureMap out = ManifoldFeatureMap::zeros(map.level, width, height, map.channels,
                                                     map.grid_width, map.grid_height);
  const int C = map.channels;
  for (int row = 0; row < height; ++row) {
    const Axis ay = grid_axis(resize_coord(row, map.height, height), map.height);
    for (int col = 0; col < width; ++col) {
      const Axis ax = grid_axis(resize_coord(col, map.width, width), map.width);
      const double w00 = (1.0 - ax.frac) * (1.0 - ay.frac);
      const double w10 = ax.frac * (1.0 - ay.frac);
      const double w01 = (1.0 - ax.frac) * ay.frac;
      const double w11 = ax.frac * ay.frac;
      const double* p00 = map.data.data() + map.index(ax.i0, ay.i0);
      const double* p10 = map.data.data() + map.index(ax.i1, ay.i0);
      const double* p01 = map.data.data() + map.index(ax.i0, ay.i1);
      const double* p11 = map.data.data() + map.index(ax.i1, ay.i1);
      double* dst = out.data.data() + out.index(col, row);
      for (int c = 0; c < C; ++c) {
        dst[c] = w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c];
      }
    }
  }
  return out;
}

ManifoldFeatureMap resize_bilinear_backward(const ManifoldFeatureMap& grad_out, int width,
                                            int height) {
  ManifoldFeatureMap g = ManifoldFeatureMap::zeros(grad_out.level, width, height,
                                                   grad_out.channels, grad_out.grid_width,
                                                   grad_out.grid_height);
  const int C = grad_out.channels;
  for (int row = 0; row < grad_out.height; ++row) {
    const Axis ay = grid_axis(resize_coord(row, height, grad_out.height), height);
    for (int col = 0; col < grad_out.width; ++col) {
      const Axis ax = grid_axis(resize_coord(col, width, grad_out.width), width);
      const double w[4] = {(1.0 - ax.frac) * (1.0 - ay.frac), ax.frac * (1.0 - ay.frac),
                           (1.0 - ax.frac) * ay.frac, ax.frac * ay.frac};
      const std::size_t dst[4] = {g.index(ax.i0, ay.i0), g.index(ax.i1, ay.i0),
                                  g.index(ax.i0, ay.i1), g.index(ax.i1, ay.i1)};
      const double* src = grad_out.data.data() + grad_out.index(col, row);
      for (int n = 0; n < 4; ++n) {
        for (int c = 0; c < C; ++c) g.data[dst[n] + c] += w[n] * src[c];
      }
    }
  }
  return g;
}

namespace {

ManifoldFeatureMap conv3x3(const ManifoldFeatureMap& in, const ConvLayer& layer) {
  ManifoldFeatureMap out = ManifoldFeatureMap::zeros(in.level, in.width, in.height,
                                                     layer.out_channels, in.grid_width,
                                                     in.grid_height);
  for (int row = 0; row < in.height; ++row) {
    for (int col = 0; col < in.width; ++col) {
      double* dst = out.data.data() + out.index(col, row);
      for (int o = 0; o < layer.out_channels; ++o) dst[o] = layer.bias[o];
      for (int dy = 0; dy < 3; ++dy) {
        const int r = std::clamp(row + dy - 1, 0, in.height - 1);
        for (int dx = 0; dx < 3; ++dx) {
          const int c = std::clamp(col + dx - 1, 0, in.width - 1);
          const double* src = in.data.data() + in.index(c, r);
          for (int o = 0; o < layer.out_channels; ++o) {
            double acc = 0.0;
            for (int i = 0; i < layer.in_channels; ++i) acc += layer.weight[layer.index(o, i, dy, dx)] * src[i];
            dst[o] += acc;
          }
        }
      }
    }
  }
  return out;
}

ManifoldFeatureMap conv3x3_backward(const ManifoldFeatureMap& grad_out, const ConvLayer& layer) {
  ManifoldFeatureMap g = ManifoldFeatureMap::zeros(grad_out.level, grad_out.width,
                                                   grad_out.height, layer.in_channels,
                                                   grad_out.grid_width, grad_out.grid_height);
  for (int row = 0; row < grad_out.height; ++row) {
    for (int col = 0; col < grad_out.width; ++col) {
      const double* src = grad_out.data.data() + grad_out.index(col, row);
      for (int dy = 0; dy < 3; ++dy) {
        const int r = std::clamp(row + dy - 1, 0, g.height - 1);
        for (int dx = 0; dx < 3; ++dx) {
          const int c = std::clamp(col + dx - 1, 0, g.width - 1);
          double* dst = g.data.data() + g.index(c, r);
          for (int i = 0; i < layer.in_channels; ++i) {
            double acc = 0.0;
            for (int o = 0; o < layer.out_channels; ++o) acc += layer.weight[layer.index(o, i, dy, dx)] * src[o];
            dst[i] += acc;
          }
        }
      }
    }
  }
  return g;
}

void leaky_relu(ManifoldFeatureMap& m, double slope) {
  for (double& v : m.data) {
    if (v < 0.0) v *= slope;
  }
}

// Forward activations of the conv stack, kept for the backward pass.
struct StackTrace {
  std::array<ManifoldFeatureMap, 2> block_in;
  std::array<ManifoldFeatureMap, 2> pre_act;
  std::array<ManifoldFeatureMap, 2> conv2_out;
  ManifoldFeatureMap out;
};

StackTrace run_stack(const ManifoldFeatureMap& map, const ConvStack& stack) {
  StackTrace tr;
  ManifoldFeatureMap x = map;
  for (int b = 0; b < 2; ++b) {
    tr.block_in[b] = x;
    tr.pre_act[b] = conv3x3(x, stack.layers[2 * b]);
    ManifoldFeatureMap a = tr.pre_act[b];
    leaky_relu(a, stack.slope);
    tr.conv2_out[b] = conv3x3(a, stack.layers[2 * b + 1]);
    x = resize_bilinear(tr.conv2_out[b], 2 * x.width, 2 * x.height);
  }
  tr.out = std::move(x);
  return tr;
}

void check_factor(int factor) {
  if (factor != 4) throw std::invalid_argument("manifold super-resolution supports factor 4 only");
}

}  // namespace

ManifoldFeatureMap upsample(const ManifoldFeatureMap& map, const UpsampleOp& op, int factor) {
  check_factor(factor);
  if (op.kind == UpsampleOp::Kind::kBilinear) {
    return resize_bilinear(map, factor * map.width, factor * map.height);
  }
  op.stack.validate(map.channels);
  return run_stack(map, op.stack).out;
}

ManifoldFeatureMap upsample_backward(const ManifoldFeatureMap& map, const UpsampleOp& op,
                                     const ManifoldFeatureMap& grad_out) {
  if (grad_out.width != 4 * map.width || grad_out.height != 4 * map.height ||
      grad_out.channels != map.channels) {
    throw std::invalid_argument("upsample_backward: gradient shape does not match");
  }
  if (op.kind == UpsampleOp::Kind::kBilinear) {
    return resize_bilinear_backward(grad_out, map.width, map.height);
  }
  op.stack.validate(map.channels);
  const StackTrace tr = run_stack(map, op.stack);
  ManifoldFeatureMap g = grad_out;
  for (int b = 1; b >= 0; --b) {
    g = resize_bilinear_backward(g, tr.conv2_out[b].width, tr.conv2_out[b].height);
    g = conv3x3_backward(g, op.stack.layers[2 * b + 1]);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      if (tr.pre_act[b].data[i] < 0.0) g.data[i] *= op.stack.slope;
    }
    g = conv3x3_backward(g, op.stack.layers[2 * b]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Reprojection

MapTaps map_taps(const ManifoldFeatureMap& map, const Camera& camera_in, const Vec3& x) {
  MapTaps taps;
  const auto px = project_to_pixel(camera_in, x, map.grid_width, map.grid_height);
  if (!px) return taps;
  if (px->x() < 0.0 || px->x() > map.grid_width || px->y() < 0.0 || px->y() > map.grid_height) {
    return taps;
  }
  taps.inside = true;
  const auto texel = [](double p, int tex, int grid) {
    return grid <= 1 ? 0.0 : (p - 0.5) * (tex - 1) / (grid - 1);
  };
  Axis ax = grid_axis(texel(px->x(), map.width, map.grid_width), map.width);
  Axis ay = grid_axis(texel(px->y(), map.height, map.grid_height), map.height);
  if (map.width == 1) ax.i1 = 0;
  if (map.height == 1) ay.i1 = 0;
  taps.offset = {map.index(ax.i0, ay.i0), map.index(ax.i1, ay.i0), map.index(ax.i0, ay.i1),
                 map.index(ax.i1, ay.i1)};
  taps.weight = {(1.0 - ax.frac) * (1.0 - ay.frac), ax.frac * (1.0 - ay.frac),
                 (1.0 - ax.frac) * ay.frac, ax.frac * ay.frac};
  return taps;
}

Feature reproject(std::span<const ManifoldFeatureMap> maps, const Camera& camera_in,
                  const Vec3& x, int level) {
  if (level < 0 || level >= static_cast<int>(maps.size())) {
    throw std::out_of_range("reproject: no feature map for this level");
  }
  const ManifoldFeatureMap& m = maps[static_cast<std::size_t>(level)];
  Feature f = zero_feature(m.channels);
  const MapTaps taps = map_taps(m, camera_in, x);
  if (!taps.inside) return f;
  for (int n = 0; n < 4; ++n) {
    const double* src = m.data.data() + taps.offset[n];
    for (int c = 0; c < m.channels; ++c) f[c] += taps.weight[n] * src[c];
  }
  return f;
}

void reproject_scatter(std::span<ManifoldFeatureMap> grad_maps, const Camera& camera_in,
                       const Vec3& x, int level, const Feature& grad) {
  if (level < 0 || level >= static_cast<int>(grad_maps.size())) {
    throw std::out_of_range("reproject_scatter: no feature map for this level");
  }
  ManifoldFeatureMap& m = grad_maps[static_cast<std::size_t>(level)];
  const MapTaps taps = map_taps(m, camera_in, x);
  if (!taps.inside) return;
  for (int n = 0; n < 4; ++n) {
    double* dst = m.data.data() + taps.offset[n];
    for (int c = 0; c < m.channels; ++c) dst[c] += taps.weight[n] * grad[c];
  }
}

DetailManifolds::DetailManifolds(Camera camera_in, std::vector<ManifoldFeatureMap> lowres,
                                 std::vector<ManifoldFeatureMap> highres)
    : camera_(std::move(camera_in)), lowres_(std::move(lowres)), highres_(std::move(highres)) {
  if (highres_.empty()) throw std::invalid_argument("detail manifolds need at least one map");
  channels_ = highres_.front().channels;
  for (std::size_t i = 0; i < highres_.size(); ++i) {
    if (highres_[i].level != static_cast<int>(i) || highres_[i].channels != channels_) {
      throw std::invalid_argument("detail maps must be indexed by level with equal channels");
    }
  }
}

Feature DetailManifolds::at(const Vec3& x, int level) const {
  if (level < 0 || level >= static_cast<int>(highres_.size())) return zero_feature(channels_);
  return reproject(highres_, camera_, x, level);
}

DetailManifolds build_detail(const DetailVoxel& voxel, const ManifoldCache& cache,
                             const UpsampleOp& op) {
  std::vector<ManifoldFeatureMap> lowres = flatten_manifolds(voxel, cache);
  std::vector<ManifoldFeatureMap> highres;
  highres.reserve(lowres.size());
  for (const ManifoldFeatureMap& m : lowres) highres.push_back(upsample(m, op));
  return DetailManifolds(cache.camera, std::move(lowres), std::move(highres));
}

std::vector<ManifoldFeatureMap> zero_highres_grads(const DetailManifolds& built) {
  std::vector<ManifoldFeatureMap> grads;
  grads.reserve(built.highres().size());
  for (const ManifoldFeatureMap& m : built.highres()) {
    grads.push_back(ManifoldFeatureMap::zeros(m.level, m.width, m.height, m.channels,
                                              m.grid_width, m.grid_height));
  }
  return grads;
}

void highres_backward(const DetailVoxel& voxel, const ManifoldCache& cache, const UpsampleOp& op,
                      const DetailManifolds& built,
                      const std::vector<ManifoldFeatureMap>& grad_highres,
                      std::span<double> grad_voxel) {
  if (grad_highres.size() != built.lowres().size()) {
    throw std::invalid_argument("highres_backward: one gradient map per level expected");
  }
  std::vector<ManifoldFeatureMap> grad_lr;
  grad_lr.reserve(grad_highres.size());
  for (std::size_t i = 0; i < grad_highres.size(); ++i) {
    grad_lr.push_back(upsample_backward(built.lowres()[i], op, grad_highres[i]));
  }
  flatten_backward(voxel, cache, grad_lr, grad_voxel);
}

void detail_backward(const DetailVoxel& voxel, const ManifoldCache& cache, const UpsampleOp& op,
                     const DetailManifolds& built, std::span<const DetailHitGrad> hit_grads,
                     std::span<double> grad_voxel) {
  std::vector<ManifoldFeatureMap> grad_hr = zero_highres_grads(built);
  for (const DetailHitGrad& h : hit_grads) {
    if (h.level < 0 || h.level >= static_cast<int>(grad_hr.size())) continue;
    reproject_scatter(grad_hr, built.camera(), h.point, h.level, h.grad);
  }
  highres_backward(voxel, cache, op, built, grad_hr, grad_voxel);
}

}  // namespace rmf
