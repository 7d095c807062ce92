#pragma once

// Dense feed-forward networks with hand-written backpropagation.
//
// Parameter layout (frozen; serialized in run manifests): layers in order,
// each layer contributes its weight matrix in row-major order
// (output_width rows x input_width columns) followed by its bias vector.
// Weight W[o][i] of layer k therefore lives at
//   offset(k) + o * input_width + i
// and bias b[o] at offset(k) + output_width * input_width + o.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "allact/rng.hpp"

namespace allact {

enum class Activation { kTanh, kIdentity };

std::string ToString(Activation activation);
Activation ActivationFromString(const std::string& name);

struct LayerSpec {
  std::size_t input_width = 1;
  std::size_t output_width = 1;
  Activation activation = Activation::kIdentity;

  std::size_t param_count() const { return input_width * output_width + output_width; }
  bool operator==(const LayerSpec&) const = default;
};

// Flat vector of doubles tagged with its role so that parameters and
// gradients cannot be mixed up by accident.
template <typename Tag>
class FlatVector {
 public:
  FlatVector() = default;
  explicit FlatVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit FlatVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool operator==(const FlatVector&) const = default;

 private:
  std::vector<double> values_;
};

using ParamVector = FlatVector<struct ParamTag>;
using GradVector = FlatVector<struct GradTag>;

// g += scale * other
void Axpy(double scale, const GradVector& other, GradVector& g);
// theta += step * g
void Ascend(double step, const GradVector& g, ParamVector& theta);
double Dot(const GradVector& a, const GradVector& b);
double SquaredNorm(const GradVector& g);
double SquaredDistance(const GradVector& a, const GradVector& b);
bool AllFinite(std::span<const double> v);

// A validated chain of layers.
class Architecture {
 public:
  explicit Architecture(std::vector<LayerSpec> layers);

  // tanh hidden layers of the given widths and an identity output layer.
  static Architecture Mlp(std::size_t input_width, std::span<const std::size_t> hidden,
                          std::size_t output_width);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t input_width() const { return layers_.front().input_width; }
  std::size_t output_width() const { return layers_.back().output_width; }
  std::size_t param_count() const { return offsets_.back(); }
  std::size_t offset(std::size_t layer) const { return offsets_[layer]; }

  bool operator==(const Architecture& other) const { return layers_ == other.layers_; }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<std::size_t> offsets_;
};

std::vector<double> MlpForward(const ParamVector& params, const Architecture& arch,
                               std::span<const double> x);

// Gradient of (upstream . output) with respect to the parameters.
GradVector MlpBackward(const ParamVector& params, const Architecture& arch,
                       std::span<const double> x, std::span<const double> upstream);

// Central differences, one coordinate at a time.
GradVector FiniteDiffGradient(const std::function<double(const ParamVector&)>& f,
                              const ParamVector& params, double h);

// Weights uniform in [-scale/sqrt(fan_in), scale/sqrt(fan_in)], biases zero.
ParamVector InitParams(const Architecture& arch, Rng& rng, double scale = 1.0);

struct LayerParams {
  std::vector<double> weights;  // row-major, output_width x input_width
  std::vector<double> bias;
};

std::vector<LayerParams> Unflatten(const ParamVector& params, const Architecture& arch);
ParamVector Flatten(std::span<const LayerParams> layers, const Architecture& arch);

// Architecture and parameters bundled; the unit every learner owns.
class Network {
 public:
  Network(Architecture arch, ParamVector params);

  const Architecture& arch() const { return arch_; }
  const ParamVector& params() const { return params_; }
  ParamVector& mutable_params() { return params_; }
  void set_params(ParamVector params);

  std::vector<double> Forward(std::span<const double> x) const {
    return MlpForward(params_, arch_, x);
  }
  GradVector Backward(std::span<const double> x, std::span<const double> upstream) const {
    return MlpBackward(params_, arch_, x, upstream);
  }
  // First output; the common case for value networks.
  double Scalar(std::span<const double> x) const;
  // Gradient of the first output.
  GradVector ScalarGradient(std::span<const double> x) const;

 private:
  Architecture arch_;
  ParamVector params_;
};

}  // namespace allact
