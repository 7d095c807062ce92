#include "allact/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "allact/errors.hpp"

namespace allact {

ActionBox::ActionBox(Vec lo, Vec hi) : low(std::move(lo)), high(std::move(hi)) {
  if (low.size() != high.size() || low.empty()) {
    throw ArgumentError("action box bounds must be nonempty and of equal length");
  }
  for (std::size_t i = 0; i < low.size(); ++i) {
    if (!(low[i] < high[i])) {
      throw ArgumentError("action box dimension " + std::to_string(i) + " has low >= high");
    }
  }
}

Vec ActionBox::Clip(std::span<const double> a) const {
  Vec out(a.begin(), a.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], low[i], high[i]);
  return out;
}

bool ActionBox::Contains(std::span<const double> a) const {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < low[i] || a[i] > high[i]) return false;
  }
  return true;
}

GradVector MeanJacobian::Score(std::span<const double> a, std::span<const double> sigma) const {
  GradVector out(rows.front().size());
  AccumulateScore(a, sigma, 1.0, out);
  return out;
}

void MeanJacobian::AccumulateScore(std::span<const double> a, std::span<const double> sigma,
                                   double scale, GradVector& out) const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double c = scale * (a[i] - mean[i]) / (sigma[i] * sigma[i]);
    if (c == 0.0) continue;
    Axpy(c, rows[i], out);
  }
}

GaussianPolicy::GaussianPolicy(Network mean_net, Vec sigma, ActionBox box)
    : mean_net_(std::move(mean_net)), sigma_(std::move(sigma)), box_(std::move(box)) {
  if (sigma_.empty()) throw ArgumentError("policy needs at least one action dimension");
  for (double s : sigma_) {
    if (!(s > 0.0)) throw ArgumentError("policy sigma must be positive");
  }
  if (box_.dim() != sigma_.size()) throw ShapeError("action box and sigma dimensions differ");
  if (mean_net_.arch().output_width() != sigma_.size()) {
    throw ShapeError("mean network output width does not match action dimension",
                     mean_net_.arch().layers().size() - 1);
  }
}

bool GaussianPolicy::IsLinear() const {
  const auto& layers = mean_net_.arch().layers();
  return layers.size() == 1 && layers[0].activation == Activation::kIdentity;
}

Vec GaussianPolicy::Mean(std::span<const double> s) const {
  Vec mu = mean_net_.Forward(s);
  if (!AllFinite(mu)) throw NumericError("policy mean is not finite");
  return mu;
}

double GaussianPolicy::Density(std::span<const double> mean, std::span<const double> a) const {
  double log_p = 0.0;
  for (std::size_t i = 0; i < sigma_.size(); ++i) {
    const double z = (a[i] - mean[i]) / sigma_[i];
    log_p -= 0.5 * z * z + std::log(sigma_[i]);
  }
  log_p -= 0.5 * static_cast<double>(sigma_.size()) * std::log(2.0 * std::numbers::pi);
  return std::exp(log_p);
}

double GaussianPolicy::LogProb(std::span<const double> s, std::span<const double> a) const {
  if (a.size() != action_dim()) throw ShapeError("action has the wrong dimension");
  const Vec mu = Mean(s);
  double log_p = 0.0;
  for (std::size_t i = 0; i < sigma_.size(); ++i) {
    const double d = a[i] - mu[i];
    log_p -= d * d / (2.0 * sigma_[i] * sigma_[i]) + std::log(sigma_[i]);
  }
  return log_p - 0.5 * static_cast<double>(sigma_.size()) * std::log(2.0 * std::numbers::pi);
}

GradVector GaussianPolicy::Score(std::span<const double> s, std::span<const double> a) const {
  if (a.size() != action_dim()) throw ShapeError("action has the wrong dimension");
  const Vec mu = Mean(s);
  Vec upstream(action_dim());
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    upstream[i] = (a[i] - mu[i]) / (sigma_[i] * sigma_[i]);
  }
  return mean_net_.Backward(s, upstream);
}

MeanJacobian GaussianPolicy::Jacobian(std::span<const double> s) const {
  MeanJacobian jac;
  jac.mean = Mean(s);
  Vec unit(action_dim(), 0.0);
  for (std::size_t i = 0; i < action_dim(); ++i) {
    unit[i] = 1.0;
    jac.rows.push_back(mean_net_.Backward(s, unit));
    unit[i] = 0.0;
  }
  return jac;
}

Vec GaussianPolicy::SampleRawAround(std::span<const double> mean, Rng& rng) const {
  Vec a(mean.begin(), mean.end());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += sigma_[i] * rng.Normal();
  return a;
}

Vec GaussianPolicy::SampleRaw(std::span<const double> s, Rng& rng) const {
  return SampleRawAround(Mean(s), rng);
}

Vec GaussianPolicy::Sample(std::span<const double> s, Rng& rng) const {
  return box_.Clip(SampleRaw(s, rng));
}

ScoreBound ScoreNormBound(const GaussianPolicy& policy, std::span<const Vec> states,
                          std::size_t grid_points) {
  if (states.empty()) throw ArgumentError("score bound needs at least one state");
  if (grid_points < 2) throw ArgumentError("score bound grid needs at least two points");
  const std::size_t da = policy.action_dim();
  const ActionBox& box = policy.box();
  std::size_t cells = 1;
  for (std::size_t i = 0; i < da; ++i) cells *= grid_points;

  double best = 0.0;
  Vec a(da);
  for (const Vec& s : states) {
    const MeanJacobian jac = policy.Jacobian(s);
    for (std::size_t c = 0; c < cells; ++c) {
      std::size_t rest = c;
      for (std::size_t i = 0; i < da; ++i) {
        const std::size_t k = rest % grid_points;
        rest /= grid_points;
        const double t = static_cast<double>(k) / static_cast<double>(grid_points - 1);
        a[i] = box.low[i] + t * (box.high[i] - box.low[i]);
      }
      best = std::max(best, SquaredNorm(jac.Score(a, policy.sigma())));
    }
  }
  return {kScoreBoundSafety * best, ScoreBound::Method::kGridMaximized};
}

}  // namespace allact
