#include "rmf/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace rmf {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Mlp::Mlp(std::vector<Layer> layers, Output output) : layers_(std::move(layers)), output_(output) {
  check();
}

void Mlp::check() const {
  if (layers_.empty()) throw std::invalid_argument("mlp needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rows() != l.bias.size()) {
      throw std::invalid_argument("mlp layer bias does not match weight rows");
    }
    if (l.weight.rows() > kMaxChannels || l.weight.cols() > kMaxChannels) {
      throw std::invalid_argument("mlp layer wider than kMaxChannels");
    }
    if (i > 0 && layers_[i - 1].weight.rows() != l.weight.cols()) {
      throw std::invalid_argument("mlp layer widths do not chain");
    }
  }
}

Mlp Mlp::random(std::span<const int> widths, std::uint64_t seed, double gain, Output output) {
  if (widths.size() < 2) throw std::invalid_argument("mlp needs input and output widths");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Layer l;
    l.weight.resize(widths[i + 1], widths[i]);
    const double scale = gain / std::sqrt(static_cast<double>(widths[i]));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = scale * normal(rng);
    }
    l.bias = Eigen::VectorXd::Zero(widths[i + 1]);
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers), output);
}

Mlp Mlp::zeros(std::span<const int> widths, Output output) {
  if (widths.size() < 2) throw std::invalid_argument("mlp needs input and output widths");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.push_back({Eigen::MatrixXd::Zero(widths[i + 1], widths[i]),
                      Eigen::VectorXd::Zero(widths[i + 1])});
  }
  return Mlp(std::move(layers), output);
}

int Mlp::input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
int Mlp::output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }

Feature Mlp::forward(const Feature& x) const {
  if (x.size() != input_dim()) throw std::invalid_argument("mlp input dimension mismatch");
  Feature h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Feature z = layers_[i].weight * h + layers_[i].bias;
    const bool last = i + 1 == layers_.size();
    if (!last) {
      h = z.array().tanh();
    } else if (output_ == Output::kSigmoid) {
      h = z.unaryExpr([](double v) { return sigmoid(v); });
    } else {
      h = z;
    }
  }
  return h;
}

Feature Mlp::input_vjp(const Feature& x, const Feature& grad_out) const {
  if (x.size() != input_dim()) throw std::invalid_argument("mlp input dimension mismatch");
  if (grad_out.size() != output_dim()) throw std::invalid_argument("mlp output gradient size");
  // activations[i] is the input to layer i; activations.back() is the output.
  std::vector<Feature> activations;
  activations.reserve(layers_.size() + 1);
  activations.push_back(x);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Feature z = layers_[i].weight * activations.back() + layers_[i].bias;
    const bool last = i + 1 == layers_.size();
    if (!last) {
      activations.push_back(z.array().tanh());
    } else if (output_ == Output::kSigmoid) {
      activations.push_back(z.unaryExpr([](double v) { return sigmoid(v); }));
    } else {
      activations.push_back(z);
    }
  }
  Feature g = grad_out;
  if (output_ == Output::kSigmoid) {
    const Feature& y = activations.back();
    g = g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
  }
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i].weight.transpose() * g;
    if (i > 0) {
      const Feature& a = activations[i];
      g = g.cwiseProduct((1.0 - a.array().square()).matrix());
    }
  }
  return g;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

void Mlp::unflatten(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw std::invalid_argument("mlp parameter blob has wrong length");
  }
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = values[k++];
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = values[k++];
  }
}

}  // namespace rmf
