#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "allact/nn.hpp"
#include "allact/rng.hpp"

namespace allact {

using Vec = std::vector<double>;

// Closed per-dimension interval [low_i, high_i].
struct ActionBox {
  Vec low;
  Vec high;

  ActionBox() = default;
  ActionBox(Vec low, Vec high);

  std::size_t dim() const { return low.size(); }
  Vec Clip(std::span<const double> a) const;
  bool Contains(std::span<const double> a) const;
};

// Gradient of the policy mean with respect to the parameters at one state:
// rows[i] = d mean_i / d theta. Scores for many actions at the same state
// are linear combinations of these rows, which is how the all-action
// estimators avoid one backward pass per sampled action.
struct MeanJacobian {
  Vec mean;
  std::vector<GradVector> rows;

  // sum_i rows[i] * (a_i - mean_i) / sigma_i^2
  GradVector Score(std::span<const double> a, std::span<const double> sigma) const;
  // Accumulates scale * Score(a) into out without allocating.
  void AccumulateScore(std::span<const double> a, std::span<const double> sigma, double scale,
                       GradVector& out) const;
};

// Gaussian policy N(mean_net(s), diag(sigma^2)) with fixed sigma. Executed
// actions are clipped to the box; density and score are those of the
// unclipped Gaussian.
class GaussianPolicy {
 public:
  GaussianPolicy(Network mean_net, Vec sigma, ActionBox box);

  std::size_t state_dim() const { return mean_net_.arch().input_width(); }
  std::size_t action_dim() const { return sigma_.size(); }
  std::size_t param_dim() const { return mean_net_.params().size(); }

  const Network& mean_net() const { return mean_net_; }
  const ParamVector& params() const { return mean_net_.params(); }
  void set_params(ParamVector params) { mean_net_.set_params(std::move(params)); }
  ParamVector& mutable_params() { return mean_net_.mutable_params(); }

  const Vec& sigma() const { return sigma_; }
  const ActionBox& box() const { return box_; }

  // True when the mean is a single identity layer (mean = W s + b).
  bool IsLinear() const;

  Vec Mean(std::span<const double> s) const;
  double LogProb(std::span<const double> s, std::span<const double> a) const;
  GradVector Score(std::span<const double> s, std::span<const double> a) const;
  MeanJacobian Jacobian(std::span<const double> s) const;

  // Unclipped draw mean + sigma * eps.
  Vec SampleRaw(std::span<const double> s, Rng& rng) const;
  Vec SampleRawAround(std::span<const double> mean, Rng& rng) const;
  // Executed action: clip(mean + sigma * eps).
  Vec Sample(std::span<const double> s, Rng& rng) const;

  double Density(std::span<const double> mean, std::span<const double> a) const;

 private:
  Network mean_net_;
  Vec sigma_;
  ActionBox box_;
};

struct ScoreBound {
  enum class Method { kAnalytic, kGridMaximized };
  double m = 0.0;
  Method method = Method::kGridMaximized;
};

inline constexpr double kScoreBoundSafety = 1.1;

// max over states x (per-dimension grid spanning the box) of ||score||^2,
// times kScoreBoundSafety.
ScoreBound ScoreNormBound(const GaussianPolicy& policy, std::span<const Vec> states,
                          std::size_t grid_points = 64);

}  // namespace allact
