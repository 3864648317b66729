#include "rmf/radiance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace rmf {

TriPlanes TriPlanes::zeros(int resolution, int channels, double extent) {
  TriPlanes p;
  p.resolution = resolution;
  p.channels = channels;
  p.extent = extent;
  p.data.assign(3 * static_cast<std::size_t>(resolution) * resolution * channels, 0.0);
  p.validate();
  return p;
}

void TriPlanes::validate() const {
  if (resolution < 2) throw std::invalid_argument("tri-plane resolution must be >= 2");
  if (channels < 1 || channels > kMaxChannels) {
    throw std::invalid_argument("tri-plane channel count out of range");
  }
  if (!(extent > 0.0)) throw std::invalid_argument("tri-plane extent must be positive");
  if (data.size() != 3 * static_cast<std::size_t>(resolution) * resolution * channels) {
    throw std::invalid_argument("tri-plane data size does not match its shape");
  }
}

namespace {

struct AxisSample {
  int i0 = 0;
  double frac = 0.0;
  double dfrac = 0.0;  // d frac / d world coordinate, zero when clamped
};

AxisSample axis_sample(double p, double extent, int resolution) {
  const double scale = (resolution - 1) / (2.0 * extent);
  double g = (p + extent) * scale;
  AxisSample s;
  s.dfrac = scale;
  if (g <= 0.0) {
    g = 0.0;
    if ((p + extent) * scale < 0.0) s.dfrac = 0.0;
  } else if (g >= resolution - 1) {
    if (g > resolution - 1) s.dfrac = 0.0;
    g = resolution - 1;
  }
  s.i0 = std::min(static_cast<int>(std::floor(g)), resolution - 2);
  s.frac = g - s.i0;
  return s;
}

// (col coordinate, row coordinate) for each plane.
constexpr std::array<std::pair<int, int>, 3> kPlaneAxes = {{{0, 1}, {0, 2}, {1, 2}}};

}  // namespace

TriPlaneTaps triplane_taps(const TriPlanes& planes, const Vec3& x) {
  TriPlaneTaps taps;
  for (int p = 0; p < 3; ++p) {
    const auto [ca, ra] = kPlaneAxes[p];
    const AxisSample cs = axis_sample(x(ca), planes.extent, planes.resolution);
    const AxisSample rs = axis_sample(x(ra), planes.extent, planes.resolution);
    taps.offset[p] = {planes.index(p, rs.i0, cs.i0, 0), planes.index(p, rs.i0, cs.i0 + 1, 0),
                      planes.index(p, rs.i0 + 1, cs.i0, 0),
                      planes.index(p, rs.i0 + 1, cs.i0 + 1, 0)};
    taps.weight[p] = {(1.0 - cs.frac) * (1.0 - rs.frac), cs.frac * (1.0 - rs.frac),
                      (1.0 - cs.frac) * rs.frac, cs.frac * rs.frac};
  }
  return taps;
}

Feature triplane_gather(const TriPlanes& planes, const TriPlaneTaps& taps) {
  Feature f = Feature::Zero(planes.channels);
  for (int p = 0; p < 3; ++p) {
    for (int k = 0; k < 4; ++k) {
      const double w = taps.weight[p][k];
      const double* src = planes.data.data() + taps.offset[p][k];
      for (int c = 0; c < planes.channels; ++c) f(c) += w * src[c];
    }
  }
  return f;
}

Feature triplane_sample(const TriPlanes& planes, const Vec3& x) {
  return triplane_gather(planes, triplane_taps(planes, x));
}

void triplane_scatter(const TriPlaneTaps& taps, const Feature& grad, std::span<double> grad_planes) {
  const auto channels = grad.size();
  for (int p = 0; p < 3; ++p) {
    for (int k = 0; k < 4; ++k) {
      const double w = taps.weight[p][k];
      if (w == 0.0) continue;
      double* dst = grad_planes.data() + taps.offset[p][k];
      for (Eigen::Index c = 0; c < channels; ++c) dst[c] += w * grad(c);
    }
  }
}

FeatureJacobian triplane_jacobian(const TriPlanes& planes, const Vec3& x) {
  FeatureJacobian jac = FeatureJacobian::Zero(planes.channels, 3);
  for (int p = 0; p < 3; ++p) {
    const auto [ca, ra] = kPlaneAxes[p];
    const AxisSample cs = axis_sample(x(ca), planes.extent, planes.resolution);
    const AxisSample rs = axis_sample(x(ra), planes.extent, planes.resolution);
    for (int c = 0; c < planes.channels; ++c) {
      const double v00 = planes.at(p, rs.i0, cs.i0, c);
      const double v01 = planes.at(p, rs.i0, cs.i0 + 1, c);
      const double v10 = planes.at(p, rs.i0 + 1, cs.i0, c);
      const double v11 = planes.at(p, rs.i0 + 1, cs.i0 + 1, c);
      const double dcol = (1.0 - rs.frac) * (v01 - v00) + rs.frac * (v11 - v10);
      const double drow = (1.0 - cs.frac) * (v10 - v00) + cs.frac * (v11 - v01);
      jac(c, ca) += dcol * cs.dfrac;
      jac(c, ra) += drow * rs.dfrac;
    }
  }
  return jac;
}

RadianceSample decode(const Mlp& decoder, const Feature& input) {
  const Feature out = decoder.forward(input);
  return RadianceSample{Vec3(out(0), out(1), out(2)), out(3)};
}

RadianceSample decode(const Mlp& decoder, const Feature& feature, const Feature& detail) {
  if (feature.size() != detail.size()) {
    throw std::invalid_argument("detail feature dimension does not match coarse feature");
  }
  return decode(decoder, Feature(feature + detail));
}

Feature decode_vjp(const Mlp& decoder, const Feature& input, const Vec3& grad_color,
                   double grad_alpha) {
  Feature g(4);
  g << grad_color.x(), grad_color.y(), grad_color.z(), grad_alpha;
  return decoder.input_vjp(input, g);
}

TriPlaneScene::TriPlaneScene(TriPlanes planes_in, Mlp decoder_in, IsoLevels levels_in,
                             ScalarField field_in)
    : planes(std::move(planes_in)),
      decoder(std::move(decoder_in)),
      levels(std::move(levels_in)),
      field(std::move(field_in)) {
  validate();
}

void TriPlaneScene::validate() const {
  planes.validate();
  if (decoder.input_dim() != planes.channels) {
    throw std::invalid_argument("decoder input width must equal the plane channel count");
  }
  if (decoder.output_dim() != 4 || decoder.output() != Mlp::Output::kSigmoid) {
    throw std::invalid_argument("decoder must produce 4 sigmoid-squashed outputs");
  }
}

Vec3 alpha_grad(const TriPlaneScene& scene, const Vec3& x, const Feature& detail) {
  const Feature input = triplane_sample(scene.planes, x) + detail;
  const Feature g = decode_vjp(scene.decoder, input, Vec3::Zero(), 1.0);
  const FeatureJacobian jac = triplane_jacobian(scene.planes, x);
  return jac.transpose() * g;
}

void GeneratorShape::validate() const {
  if (resolution < 2) throw std::invalid_argument("generator resolution must be >= 2");
  if (channels < 1 || channels > kMaxChannels) throw std::invalid_argument("generator channels");
  if (!(extent > 0.0)) throw std::invalid_argument("generator extent must be positive");
  if (latent_layers < 1 || latent_dim < 1) throw std::invalid_argument("latent shape");
}

namespace {

// Plane-value column for one smooth random pattern: a plane wave per plane
// at `cycles` periods across the plane, mixed into channels with Gaussian
// coefficients.
void fill_pattern(const GeneratorShape& s, double cycles, double amplitude, std::mt19937_64& rng,
                  double* column) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  const int r = s.resolution;
  for (int p = 0; p < 3; ++p) {
    const double dir = angle(rng);
    const double phase = angle(rng);
    const double kx = cycles * std::cos(dir);
    const double ky = cycles * std::sin(dir);
    std::vector<double> mix(static_cast<std::size_t>(s.channels));
    for (double& m : mix) m = normal(rng);
    for (int row = 0; row < r; ++row) {
      for (int col = 0; col < r; ++col) {
        const double u = static_cast<double>(col) / (r - 1);
        const double v = static_cast<double>(row) / (r - 1);
        const double wave = std::cos(2.0 * std::numbers::pi * (kx * u + ky * v) + phase);
        for (int c = 0; c < s.channels; ++c) {
          const std::size_t idx =
              ((static_cast<std::size_t>(p) * r + row) * r + col) * s.channels + c;
          column[idx] = amplitude * mix[static_cast<std::size_t>(c)] * wave;
        }
      }
    }
  }
}

}  // namespace

CoarseGenerator::CoarseGenerator(const GeneratorShape& shape, std::uint64_t seed)
    : shape_(shape), seed_(seed) {
  shape_.validate();
  const int r = shape_.resolution;
  const Eigen::Index rows = 3 * static_cast<Eigen::Index>(r) * r * shape_.channels;
  const Eigen::Index cols = static_cast<Eigen::Index>(shape_.latent_layers) * shape_.latent_dim;
  basis_.resize(rows, cols);
  bias_.resize(rows);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.5, 1.0);
  const double max_cycles = std::max(0.5, (r - 1) / 4.0);
  const double amplitude = shape_.gain / std::sqrt(3.0 * static_cast<double>(cols));
  for (int l = 0; l < shape_.latent_layers; ++l) {
    const double band = std::min(std::ldexp(1.0, l), max_cycles);
    for (int k = 0; k < shape_.latent_dim; ++k) {
      fill_pattern(shape_, band * unit(rng), amplitude, rng,
                   basis_.col(static_cast<Eigen::Index>(l) * shape_.latent_dim + k).data());
    }
  }
  fill_pattern(shape_, 0.5 * unit(rng), 0.5 * shape_.gain, rng, bias_.data());
}

TriPlanes CoarseGenerator::generate(const LatentCode& code) const {
  if (code.layers() != shape_.latent_layers || code.dim() != shape_.latent_dim) {
    throw std::invalid_argument("latent code shape does not match the generator");
  }
  // Row-major flattening: column index l * dim + k.
  Eigen::VectorXd w(basis_.cols());
  for (int l = 0; l < code.layers(); ++l) {
    for (int k = 0; k < code.dim(); ++k) w(l * code.dim() + k) = code.w(l, k);
  }
  TriPlanes planes;
  planes.resolution = shape_.resolution;
  planes.channels = shape_.channels;
  planes.extent = shape_.extent;
  const Eigen::VectorXd values = bias_ + basis_ * w;
  planes.data.assign(values.data(), values.data() + values.size());
  return planes;
}

LatentCode CoarseGenerator::backprop(std::span<const double> grad_planes) const {
  if (static_cast<Eigen::Index>(grad_planes.size()) != basis_.rows()) {
    throw std::invalid_argument("plane gradient has wrong length");
  }
  const Eigen::Map<const Eigen::VectorXd> g(grad_planes.data(), basis_.rows());
  const Eigen::VectorXd gw = basis_.transpose() * g;
  LatentCode out = LatentCode::zeros(shape_.latent_layers, shape_.latent_dim);
  for (int l = 0; l < out.layers(); ++l) {
    for (int k = 0; k < out.dim(); ++k) out.w(l, k) = gw(l * out.dim() + k);
  }
  return out;
}

LatentCode CoarseGenerator::sample_code(std::uint64_t z) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(z), static_cast<std::uint32_t>(z >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentCode code = LatentCode::zeros(shape_.latent_layers, shape_.latent_dim);
  for (int l = 0; l < code.layers(); ++l) {
    for (int k = 0; k < code.dim(); ++k) code.w(l, k) = normal(rng);
  }
  return code;
}

LatentCode CoarseGenerator::mean_code(int samples) const {
  if (samples < 1) throw std::invalid_argument("mean code needs at least one sample");
  LatentCode mean = LatentCode::zeros(shape_.latent_layers, shape_.latent_dim);
  for (int z = 0; z < samples; ++z) mean.w += sample_code(static_cast<std::uint64_t>(z)).w;
  mean.w /= samples;
  return mean;
}

}  // namespace rmf
