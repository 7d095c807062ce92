#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace allact {

// Sample mean and its standard error.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Neumaier-compensated running sum; makes large reductions insensitive to
// accumulation order at the 1e-12 level.
class CompensatedSum {
 public:
  void Add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double Mean(std::span<const double> xs);
// Unbiased (n - 1) sample variance. Zero for fewer than two samples.
double SampleVariance(std::span<const double> xs);
MeanSe MeanWithSe(std::span<const double> xs);

// Upper quantile t_{p, dof} of Student's t distribution.
double StudentTQuantile(double p, double dof);

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares y ~ intercept + slope * x.
LineFit FitLine(std::span<const double> x, std::span<const double> y);

// Spearman rank correlation (average ranks for ties).
double SpearmanCorrelation(std::span<const double> x, std::span<const double> y);

}  // namespace allact
