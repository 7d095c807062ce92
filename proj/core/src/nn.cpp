#include "allact/nn.hpp"

#include <cmath>
#include <string>

#include "allact/errors.hpp"

namespace allact {

std::string ToString(Activation activation) {
  return activation == Activation::kTanh ? "tanh" : "identity";
}

Activation ActivationFromString(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity" || name == "linear") return Activation::kIdentity;
  throw ArgumentError("unknown activation '" + name + "'");
}

void Axpy(double scale, const GradVector& other, GradVector& g) {
  if (other.size() != g.size()) throw ShapeError("gradient sizes differ");
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * other[i];
}

void Ascend(double step, const GradVector& g, ParamVector& theta) {
  if (g.size() != theta.size()) throw ShapeError("gradient and parameter sizes differ");
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += step * g[i];
}

double Dot(const GradVector& a, const GradVector& b) {
  if (a.size() != b.size()) throw ShapeError("gradient sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double SquaredNorm(const GradVector& g) { return Dot(g, g); }

double SquaredDistance(const GradVector& a, const GradVector& b) {
  if (a.size() != b.size()) throw ShapeError("gradient sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

bool AllFinite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Architecture::Architecture(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("architecture needs at least one layer");
  offsets_.reserve(layers_.size() + 1);
  offsets_.push_back(0);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const LayerSpec& l = layers_[k];
    if (l.input_width == 0 || l.output_width == 0) {
      throw ShapeError("layer " + std::to_string(k) + " has zero width", k);
    }
    if (k > 0 && layers_[k - 1].output_width != l.input_width) {
      throw ShapeError("layer " + std::to_string(k) + " input width " +
                           std::to_string(l.input_width) + " does not match previous output " +
                           std::to_string(layers_[k - 1].output_width),
                       k);
    }
    offsets_.push_back(offsets_.back() + l.param_count());
  }
}

Architecture Architecture::Mlp(std::size_t input_width, std::span<const std::size_t> hidden,
                               std::size_t output_width) {
  std::vector<LayerSpec> layers;
  std::size_t in = input_width;
  for (std::size_t h : hidden) {
    layers.push_back({in, h, Activation::kTanh});
    in = h;
  }
  layers.push_back({in, output_width, Activation::kIdentity});
  return Architecture(std::move(layers));
}

namespace {

void CheckParams(const ParamVector& params, const Architecture& arch) {
  if (params.size() != arch.param_count()) {
    throw ShapeError("parameter vector has " + std::to_string(params.size()) +
                     " entries, architecture needs " + std::to_string(arch.param_count()));
  }
}

void CheckInput(std::span<const double> x, const Architecture& arch) {
  if (x.size() != arch.input_width()) {
    throw ShapeError("input has width " + std::to_string(x.size()) + ", layer 0 expects " +
                         std::to_string(arch.input_width()),
                     0);
  }
}

// Applies layer k to `in`, writing post-activation values to `out`.
void ApplyLayer(const double* p, const LayerSpec& l, std::span<const double> in,
                std::vector<double>& out) {
  out.resize(l.output_width);
  const double* w = p;
  const double* b = p + l.output_width * l.input_width;
  for (std::size_t o = 0; o < l.output_width; ++o) {
    double z = b[o];
    const double* row = w + o * l.input_width;
    for (std::size_t i = 0; i < l.input_width; ++i) z += row[i] * in[i];
    out[o] = l.activation == Activation::kTanh ? std::tanh(z) : z;
  }
}

}  // namespace

std::vector<double> MlpForward(const ParamVector& params, const Architecture& arch,
                               std::span<const double> x) {
  CheckParams(params, arch);
  CheckInput(x, arch);
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  const auto& layers = arch.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    ApplyLayer(params.values().data() + arch.offset(k), layers[k], cur, next);
    cur.swap(next);
  }
  return cur;
}

GradVector MlpBackward(const ParamVector& params, const Architecture& arch,
                       std::span<const double> x, std::span<const double> upstream) {
  CheckParams(params, arch);
  CheckInput(x, arch);
  const auto& layers = arch.layers();
  if (upstream.size() != arch.output_width()) {
    throw ShapeError("upstream has width " + std::to_string(upstream.size()) +
                         ", output layer produces " + std::to_string(arch.output_width()),
                     layers.size() - 1);
  }

  // acts[k] is the input to layer k; acts.back() the network output.
  std::vector<std::vector<double>> acts(layers.size() + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    ApplyLayer(params.values().data() + arch.offset(k), layers[k], acts[k], acts[k + 1]);
  }

  GradVector grad(arch.param_count());
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> prev;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const LayerSpec& l = layers[k];
    if (l.activation == Activation::kTanh) {
      const auto& y = acts[k + 1];
      for (std::size_t o = 0; o < l.output_width; ++o) delta[o] *= 1.0 - y[o] * y[o];
    }
    const std::size_t off = arch.offset(k);
    const auto& in = acts[k];
    double* gw = grad.mutable_values().data() + off;
    double* gb = gw + l.output_width * l.input_width;
    for (std::size_t o = 0; o < l.output_width; ++o) {
      double* row = gw + o * l.input_width;
      for (std::size_t i = 0; i < l.input_width; ++i) row[i] = delta[o] * in[i];
      gb[o] = delta[o];
    }
    if (k == 0) break;
    const double* w = params.values().data() + off;
    prev.assign(l.input_width, 0.0);
    for (std::size_t o = 0; o < l.output_width; ++o) {
      const double* row = w + o * l.input_width;
      for (std::size_t i = 0; i < l.input_width; ++i) prev[i] += row[i] * delta[o];
    }
    delta.swap(prev);
  }
  return grad;
}

GradVector FiniteDiffGradient(const std::function<double(const ParamVector&)>& f,
                              const ParamVector& params, double h) {
  if (!(h > 0.0)) throw PreconditionError("finite-difference step must be positive");
  GradVector grad(params.size());
  ParamVector probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    probe[i] = params[i] + h;
    const double up = f(probe);
    probe[i] = params[i] - h;
    const double down = f(probe);
    probe[i] = params[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("non-finite function value at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

ParamVector InitParams(const Architecture& arch, Rng& rng, double scale) {
  ParamVector params(arch.param_count());
  const auto& layers = arch.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const LayerSpec& l = layers[k];
    const double bound = scale / std::sqrt(static_cast<double>(l.input_width));
    const std::size_t off = arch.offset(k);
    for (std::size_t j = 0; j < l.input_width * l.output_width; ++j) {
      params[off + j] = bound > 0.0 ? rng.Uniform(-bound, bound) : 0.0;
    }
  }
  return params;
}

std::vector<LayerParams> Unflatten(const ParamVector& params, const Architecture& arch) {
  CheckParams(params, arch);
  std::vector<LayerParams> out;
  const auto& layers = arch.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const LayerSpec& l = layers[k];
    const auto first = params.begin() + static_cast<std::ptrdiff_t>(arch.offset(k));
    const auto mid = first + static_cast<std::ptrdiff_t>(l.input_width * l.output_width);
    const auto last = mid + static_cast<std::ptrdiff_t>(l.output_width);
    out.push_back({std::vector<double>(first, mid), std::vector<double>(mid, last)});
  }
  return out;
}

ParamVector Flatten(std::span<const LayerParams> layers, const Architecture& arch) {
  if (layers.size() != arch.layers().size()) {
    throw ShapeError("layer count does not match architecture");
  }
  std::vector<double> values;
  values.reserve(arch.param_count());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const LayerSpec& l = arch.layers()[k];
    if (layers[k].weights.size() != l.input_width * l.output_width ||
        layers[k].bias.size() != l.output_width) {
      throw ShapeError("layer " + std::to_string(k) + " block has the wrong size", k);
    }
    values.insert(values.end(), layers[k].weights.begin(), layers[k].weights.end());
    values.insert(values.end(), layers[k].bias.begin(), layers[k].bias.end());
  }
  return ParamVector(std::move(values));
}

Network::Network(Architecture arch, ParamVector params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  CheckParams(params_, arch_);
}

void Network::set_params(ParamVector params) {
  CheckParams(params, arch_);
  params_ = std::move(params);
}

double Network::Scalar(std::span<const double> x) const { return Forward(x)[0]; }

GradVector Network::ScalarGradient(std::span<const double> x) const {
  std::vector<double> up(arch_.output_width(), 0.0);
  up[0] = 1.0;
  return Backward(x, up);
}

}  // namespace allact
