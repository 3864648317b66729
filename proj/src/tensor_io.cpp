#include "rmf/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "rmf/image.hpp"

namespace rmf {

using nlohmann::json;

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::filesystem::path descriptor_path(const std::filesystem::path& blob) {
  std::filesystem::path p = blob;
  return p.replace_extension(".json");
}

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return out;
}

}  // namespace

void write_tensor(const std::filesystem::path& blob, const Tensor& tensor) {
  if (tensor.element_count() != tensor.data.size()) {
    throw std::invalid_argument("tensor shape does not match its data");
  }
  std::ofstream out(blob, std::ios::binary);
  if (!out) throw IoError("cannot open " + blob.string() + " for writing");
  for (double d : tensor.data) {
    std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw IoError("failed writing " + blob.string());

  const json desc = {{"dtype", "float64"}, {"shape", tensor.shape}, {"meta", tensor.meta}};
  std::ofstream dout(descriptor_path(blob));
  if (!dout) throw IoError("cannot open " + descriptor_path(blob).string() + " for writing");
  dout << desc.dump(2) << "\n";
}

Tensor read_tensor(const std::filesystem::path& blob) {
  const std::filesystem::path dpath = descriptor_path(blob);
  std::ifstream din(dpath);
  if (!din) throw IoError("cannot open tensor descriptor " + dpath.string());
  Tensor t;
  try {
    const json desc = json::parse(din);
    if (desc.at("dtype").get<std::string>() != "float64") {
      throw IoError(dpath.string() + ": only float64 tensors are supported");
    }
    t.shape = desc.at("shape").get<std::vector<int>>();
    if (desc.contains("meta")) t.meta = desc.at("meta");
  } catch (const json::exception& e) {
    throw IoError(dpath.string() + ": " + e.what());
  }
  for (int d : t.shape) {
    if (d < 0) throw IoError(dpath.string() + ": negative dimension");
  }
  std::ifstream in(blob, std::ios::binary);
  if (!in) throw IoError("cannot open tensor blob " + blob.string());
  t.data.resize(t.element_count());
  for (double& d : t.data) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw IoError(blob.string() + ": blob shorter than its shape");
    }
    d = std::bit_cast<double>(to_little(bits));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(blob.string() + ": blob longer than its shape");
  }
  return t;
}

void save_mlp(const std::filesystem::path& blob, const Mlp& net) {
  std::vector<int> widths{net.input_dim()};
  for (const auto& layer : net.layers()) widths.push_back(static_cast<int>(layer.weight.rows()));
  Tensor t;
  t.data = net.flatten();
  t.shape = {static_cast<int>(t.data.size())};
  t.meta = {{"kind", "mlp"},
            {"widths", widths},
            {"output", net.output() == Mlp::Output::kSigmoid ? "sigmoid" : "identity"}};
  write_tensor(blob, t);
}

Mlp load_mlp(const std::filesystem::path& blob) {
  const Tensor t = read_tensor(blob);
  try {
    const auto widths = t.meta.at("widths").get<std::vector<int>>();
    const std::string output = t.meta.at("output").get<std::string>();
    if (output != "sigmoid" && output != "identity") {
      throw IoError(blob.string() + ": unknown mlp output '" + output + "'");
    }
    Mlp net = Mlp::zeros(widths, output == "sigmoid" ? Mlp::Output::kSigmoid : Mlp::Output::kIdentity);
    if (net.parameter_count() != t.data.size()) {
      throw IoError(blob.string() + ": parameter count does not match the widths");
    }
    net.unflatten(t.data);
    return net;
  } catch (const json::exception& e) {
    throw IoError(blob.string() + ": " + e.what());
  }
}

void save_latent(const std::filesystem::path& blob, const LatentCode& code) {
  Tensor t;
  t.shape = {code.layers(), code.dim()};
  for (int l = 0; l < code.layers(); ++l) {
    for (int k = 0; k < code.dim(); ++k) t.data.push_back(code.w(l, k));
  }
  t.meta = {{"kind", "latent"}};
  write_tensor(blob, t);
}

LatentCode load_latent(const std::filesystem::path& blob) {
  const Tensor t = read_tensor(blob);
  if (t.shape.size() != 2) throw IoError(blob.string() + ": latent code must be 2-D");
  LatentCode c = LatentCode::zeros(t.shape[0], t.shape[1]);
  for (int l = 0; l < c.layers(); ++l) {
    for (int k = 0; k < c.dim(); ++k) c.w(l, k) = t.data[static_cast<std::size_t>(l) * c.dim() + k];
  }
  return c;
}

void save_voxel(const std::filesystem::path& blob, const DetailVoxel& voxel) {
  Tensor t;
  t.shape = {voxel.height, voxel.width, voxel.depth, voxel.channels};
  t.data = voxel.data;
  t.meta = {{"kind", "detail_voxel"}};
  write_tensor(blob, t);
}

DetailVoxel load_voxel(const std::filesystem::path& blob, const Camera& camera, double aspect) {
  const Tensor t = read_tensor(blob);
  if (t.shape.size() != 4) throw IoError(blob.string() + ": detail voxel must be 4-D");
  DetailVoxel v;
  try {
    v = DetailVoxel::zeros(camera, aspect, t.shape[0], t.shape[1], t.shape[2], t.shape[3]);
  } catch (const std::invalid_argument& e) {
    throw IoError(blob.string() + ": " + e.what());
  }
  v.data = t.data;
  return v;
}

void save_conv_stack(const std::filesystem::path& blob, const ConvStack& stack) {
  Tensor t;
  json layers = json::array();
  for (const ConvLayer& layer : stack.layers) {
    layers.push_back({layer.in_channels, layer.out_channels});
    t.data.insert(t.data.end(), layer.weight.begin(), layer.weight.end());
    t.data.insert(t.data.end(), layer.bias.begin(), layer.bias.end());
  }
  t.shape = {static_cast<int>(t.data.size())};
  t.meta = {{"kind", "conv_stack"}, {"layers", layers}, {"slope", stack.slope}};
  write_tensor(blob, t);
}

ConvStack load_conv_stack(const std::filesystem::path& blob) {
  const Tensor t = read_tensor(blob);
  ConvStack s;
  try {
    const auto layers = t.meta.at("layers").get<std::vector<std::array<int, 2>>>();
    if (layers.size() != s.layers.size()) throw IoError(blob.string() + ": expected 4 conv layers");
    s.slope = t.meta.at("slope").get<double>();
    std::size_t at = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      ConvLayer& layer = s.layers[i];
      layer.in_channels = layers[i][0];
      layer.out_channels = layers[i][1];
      if (layer.in_channels < 1 || layer.out_channels < 1) {
        throw IoError(blob.string() + ": conv layer channels must be positive");
      }
      const std::size_t nw = static_cast<std::size_t>(layer.in_channels) * layer.out_channels * 9;
      const std::size_t nb = static_cast<std::size_t>(layer.out_channels);
      if (at + nw + nb > t.data.size()) throw IoError(blob.string() + ": conv blob too short");
      layer.weight.assign(t.data.begin() + at, t.data.begin() + at + nw);
      at += nw;
      layer.bias.assign(t.data.begin() + at, t.data.begin() + at + nb);
      at += nb;
    }
    if (at != t.data.size()) throw IoError(blob.string() + ": conv blob too long");
  } catch (const json::exception& e) {
    throw IoError(blob.string() + ": " + e.what());
  }
  return s;
}

}  // namespace rmf
