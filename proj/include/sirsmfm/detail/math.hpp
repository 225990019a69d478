// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

namespace sirsmfm::detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)), exact at -inf.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return kNegInf;
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (hi == kNegInf || !std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

inline double poisson_log_pmf(std::int64_t k, double log_mean) {
  const double mean = std::exp(log_mean);
  return static_cast<double>(k) * log_mean - mean -
         std::lgamma(static_cast<double>(k) + 1.0);
}

inline double normal_log_pdf(double x, double mean, double variance) {
  constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
  const double r = x - mean;
  return -0.5 * (kLogTwoPi + std::log(variance) + r * r / variance);
}

// Shape/rate parameterisation.
inline double inverse_gamma_log_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - rate / x;
}

inline double gamma_log_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) +
         (shape - 1.0) * std::log(x) - rate * x;
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace sirsmfm::detail
