#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rmf/types.hpp"

namespace rmf {

// Fully connected network with tanh on every hidden layer. The final layer
// is either left linear or squashed through a logistic sigmoid.
class Mlp {
 public:
  enum class Output { kIdentity, kSigmoid };

  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
  };

  Mlp() = default;
  Mlp(std::vector<Layer> layers, Output output);

  // Gaussian weights scaled by `gain / sqrt(fan_in)`, zero biases.
  static Mlp random(std::span<const int> widths, std::uint64_t seed, double gain, Output output);
  static Mlp zeros(std::span<const int> widths, Output output);

  int input_dim() const;
  int output_dim() const;
  Output output() const { return output_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Feature forward(const Feature& x) const;

  // Vector-Jacobian product: d<grad_out, forward(x)>/dx.
  Feature input_vjp(const Feature& x, const Feature& grad_out) const;

  // Flat parameter view, layer-major: weight (row-major) then bias.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);
  std::size_t parameter_count() const;

 private:
  void check() const;

  std::vector<Layer> layers_;
  Output output_ = Output::kIdentity;
};

double sigmoid(double x);

}  // namespace rmf
