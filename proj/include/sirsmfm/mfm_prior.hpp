// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

/**
 * @file mfm_prior.hpp
 * @brief Mixture-of-finite-mixtures prior with k - 1 ~ Poisson(lambda) and a
 *        symmetric Dirichlet(1, ..., 1) on the weights.
 *
 * Besides the generative constructions this exposes the coefficients
 *
 *     V_n(t) = sum_{k >= t} k_(t) / k^(n) * p(k)
 *
 * (falling factorial over rising factorial) that drive the restaurant-process
 * form of the prior: with the other n - 1 items seated in t clusters, an item
 * joins cluster c with weight |c| + 1 and opens a new one with weight
 * V_n(t + 1) / V_n(t). The exchangeable partition probability is
 * V_n(t) * prod_c |c|!.
 */

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sirsmfm/detail/math.hpp"
#include "sirsmfm/partition.hpp"
#include "sirsmfm/random.hpp"

namespace sirsmfm {

struct MfmSpec {
  double lambda = 1.0;
  double eta = 1.0;
};

inline void validate(const MfmSpec& spec) {
  if (!(spec.lambda > 0.0) || !std::isfinite(spec.lambda))
    throw std::invalid_argument("MfmSpec: lambda must be positive and finite");
  if (spec.eta != 1.0) throw std::invalid_argument("MfmSpec: only eta = 1 is supported");
}

struct StickWeights {
  std::vector<double> pi;
};

/// Exponential-spacings construction: eta_j ~ Exp(lambda) until the running
/// sum reaches 1; the last weight takes the remainder.
inline std::pair<int, StickWeights> sample_mfm_weights(const MfmSpec& spec, Rng& rng) {
  validate(spec);
  std::exponential_distribution<double> spacing(spec.lambda);
  StickWeights w;
  double total = 0.0;
  for (;;) {
    const double e = spacing(rng);
    if (total + e >= 1.0) {
      w.pi.push_back(1.0 - total);
      break;
    }
    w.pi.push_back(e);
    total += e;
  }
  return {static_cast<int>(w.pi.size()), std::move(w)};
}

inline Partition sample_partition_generative(const MfmSpec& spec, std::size_t n, Rng& rng) {
  validate(spec);
  if (n < 1) throw std::invalid_argument("sample_partition_generative: n must be >= 1");
  const int k = 1 + static_cast<int>(std::poisson_distribution<int>(spec.lambda)(rng));
  std::vector<double> weights(k);
  std::exponential_distribution<double> unit(1.0);
  for (auto& v : weights) v = unit(rng);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::vector<int> labels(n);
  for (auto& z : labels) z = pick(rng);
  return Partition::from_labels(labels);
}

// ---------------------------------------------------------------------------
// Restaurant-process coefficients

namespace detail {

// log of the k-th series term of V_n(t) with eta = 1, k >= t.
inline double log_vn_term(int n, int t, int k, double lambda, double log_lambda) {
  return std::lgamma(k + 1.0) - std::lgamma(k - t + 1.0) - std::lgamma(k + static_cast<double>(n)) -
         lambda + (k - 1.0) * log_lambda;
}

}  // namespace detail

/// log V_n(t). The series is summed until the term ratio drops below 1/2
/// (after which it decreases monotonically, so the tail is bounded by the
/// last term) and the last term is below `tol` relative to the sum.
inline double log_vn(int n, int t, double lambda, double tol = 1e-12) {
  if (!(tol > 0.0)) throw std::invalid_argument("log_vn: tol must be positive");
  if (n < 1 || t < 1 || t > n) throw std::invalid_argument("log_vn: need 1 <= t <= n");
  if (!(lambda > 0.0)) throw std::invalid_argument("log_vn: lambda must be positive");
  const double log_lambda = std::log(lambda);
  const double log_tol = std::log(tol);
  double acc = detail::kNegInf;
  for (int k = t;; ++k) {
    const double term = detail::log_vn_term(n, t, k, lambda, log_lambda);
    acc = detail::log_add_exp(acc, term);
    // ratio term(k+1)/term(k) = lambda (k+1) / ((k+1-t)(k+n))
    const double ratio = lambda * (k + 1.0) / ((k + 1.0 - t) * (k + static_cast<double>(n)));
    if (ratio < 0.5 && term - acc < log_tol) break;
    if (k > 100000000) throw std::runtime_error("log_vn: series failed to converge");
  }
  return acc;
}

struct MfmCoefficients {
  std::vector<double> log_vn;  // entry t-1 holds log V_n(t)
  int n = 0;
  double lambda = 1.0;
  double tol = 1e-12;

  int t_max() const { return static_cast<int>(log_vn.size()); }
  double at(int t) const {
    if (t < 1 || t > t_max()) throw std::out_of_range("MfmCoefficients: t outside table");
    return log_vn[t - 1];
  }
};

inline MfmCoefficients log_vn_coefficients(int n, const MfmSpec& spec, int t_max, double tol = 1e-12) {
  validate(spec);
  if (!(tol > 0.0)) throw std::invalid_argument("log_vn_coefficients: tol must be positive");
  if (t_max < 1 || t_max > n) throw std::invalid_argument("log_vn_coefficients: need 1 <= t_max <= n");
  MfmCoefficients c{{}, n, spec.lambda, tol};
  c.log_vn.reserve(t_max);
  for (int t = 1; t <= t_max; ++t) c.log_vn.push_back(log_vn(n, t, spec.lambda, tol));
  return c;
}

/// Unnormalised log prior weights for seating one more item given the
/// partition of the others: one entry per existing cluster, then one for a
/// new cluster. `coeffs.n` must equal part_minus_i.size() + 1.
inline std::vector<double> seat_log_weights(const Partition& part_minus_i, const MfmCoefficients& coeffs) {
  if (static_cast<std::size_t>(coeffs.n) != part_minus_i.size() + 1)
    throw std::invalid_argument("seat_log_weights: coefficients built for a different n");
  const int t = part_minus_i.k();
  std::vector<double> w;
  w.reserve(t + 1);
  for (int size : part_minus_i.sizes()) w.push_back(std::log(size + 1.0));
  if (t == 0) {
    w.push_back(0.0);
    return w;
  }
  if (t + 1 > coeffs.t_max()) throw std::invalid_argument("seat_log_weights: t + 1 exceeds t_max");
  w.push_back(coeffs.at(t + 1) - coeffs.at(t));
  return w;
}

inline double log_partition_prior(const Partition& part, const MfmSpec& spec) {
  validate(spec);
  if (part.size() == 0) return 0.0;
  double total = log_vn(static_cast<int>(part.size()), part.k(), spec.lambda);
  for (int size : part.sizes()) total += std::lgamma(size + 1.0);
  return total;
}

/// Per-sampler cache of coefficient tables keyed by (n, lambda rounded to 12
/// significant digits). Not synchronised; each worker owns one.
class MfmCoefficientCache {
 public:
  const MfmCoefficients& get(int n, double lambda) {
    const auto key = std::make_pair(n, round_key(lambda));
    if (auto it = table_.find(key); it != table_.end()) return it->second;
    if (table_.size() >= kCapacity) table_.clear();
    auto [it, ok] = table_.emplace(key, log_vn_coefficients(n, MfmSpec{lambda}, n));
    return it->second;
  }

  std::size_t size() const { return table_.size(); }

 private:
  static constexpr std::size_t kCapacity = 64;

  static double round_key(double lambda) {
    const double scale = std::pow(10.0, 11 - std::floor(std::log10(lambda)));
    return std::round(lambda * scale) / scale;
  }

  std::map<std::pair<int, double>, MfmCoefficients> table_;
};

}  // namespace sirsmfm
