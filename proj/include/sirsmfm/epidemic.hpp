// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

/**
 * @file epidemic.hpp
 * @brief Discrete-time SIRS dynamics and the latent log-ratio state-space
 *        model for a single region.
 *
 * The hidden compartment probabilities (P_S, P_I, P_R) are tracked through
 * the log ratios W_S = log(P_S/P_R) and W_I = log(P_I/P_R). Each day the
 * log ratios follow the deterministic SIRS flow plus Gaussian innovations,
 * and the observed recovered/infectious counts are Poisson around N * P.
 */

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sirsmfm/detail/math.hpp"
#include "sirsmfm/random.hpp"

namespace sirsmfm {

struct CompartmentState {
  double s = 0.0;
  double i = 0.0;
  double r = 0.0;
  std::int64_t n = 1;
};

/// Per-day transmission, recovery and loss-of-immunity rates.
struct SirsParams {
  double beta = 0.0;
  double gamma = 0.0;
  double phi = 0.0;
};

struct ProbTriple {
  double p_s = 1.0 / 3.0;
  double p_i = 1.0 / 3.0;
  double p_r = 1.0 / 3.0;
};

struct LatentPoint {
  double w_s = 0.0;
  double w_i = 0.0;
};

struct LatentPath {
  std::vector<double> w_s;
  std::vector<double> w_i;

  std::size_t length() const { return w_s.size(); }
};

struct VarianceParams {
  double sigma2_s = 1.0;
  double sigma2_i = 1.0;
};

/// Observed recovereds (incl. deaths) and infectious counts of one region.
struct ObservedSeries {
  std::vector<std::int64_t> z_r;
  std::vector<std::int64_t> z_i;
  std::int64_t n = 1;

  std::size_t length() const { return z_r.size(); }
};

// ---------------------------------------------------------------------------
// Validation

inline void validate(const CompartmentState& state) {
  if (state.n <= 0) throw std::invalid_argument("CompartmentState: n must be positive");
  if (!(state.s >= 0.0 && state.i >= 0.0 && state.r >= 0.0))
    throw std::invalid_argument("CompartmentState: negative compartment");
  const double n = static_cast<double>(state.n);
  if (std::abs(state.s + state.i + state.r - n) > 1e-9 * n)
    throw std::invalid_argument("CompartmentState: s + i + r != n");
}

// Zero rates are admitted so the degenerate fixed-point dynamics can be
// expressed; the sampler's base measure keeps its values strictly inside (0,1).
inline void validate(const SirsParams& p) {
  auto ok = [](double v) { return v >= 0.0 && v < 1.0; };
  if (!ok(p.beta) || !ok(p.gamma) || !ok(p.phi))
    throw std::invalid_argument("SirsParams: rates must lie in [0,1)");
}

inline void validate(const ProbTriple& p) {
  auto inside = [](double v) { return v > 0.0 && v < 1.0; };
  if (!inside(p.p_s) || !inside(p.p_i) || !inside(p.p_r))
    throw std::domain_error("ProbTriple: components must lie strictly in (0,1)");
  if (std::abs(p.p_s + p.p_i + p.p_r - 1.0) > 1e-12)
    throw std::domain_error("ProbTriple: components must sum to 1");
}

inline void validate(const LatentPath& path) {
  if (path.w_s.size() != path.w_i.size())
    throw std::invalid_argument("LatentPath: w_s and w_i lengths differ");
  if (path.w_s.size() < 2) throw std::invalid_argument("LatentPath: length must be >= 2");
  for (std::size_t t = 0; t < path.w_s.size(); ++t)
    if (!std::isfinite(path.w_s[t]) || !std::isfinite(path.w_i[t]))
      throw std::invalid_argument("LatentPath: non-finite entry");
}

inline void validate(const VarianceParams& v) {
  if (!(v.sigma2_s > 0.0) || !(v.sigma2_i > 0.0))
    throw std::invalid_argument("VarianceParams: variances must be positive");
}

inline void validate(const ObservedSeries& series) {
  if (series.n <= 0) throw std::invalid_argument("ObservedSeries: n must be positive");
  if (series.z_r.size() != series.z_i.size())
    throw std::invalid_argument("ObservedSeries: z_r and z_i lengths differ");
  for (std::size_t t = 0; t < series.z_r.size(); ++t) {
    if (series.z_r[t] < 0 || series.z_i[t] < 0)
      throw std::invalid_argument("ObservedSeries: negative count");
    if (series.z_r[t] + series.z_i[t] > series.n)
      throw std::invalid_argument("ObservedSeries: z_r + z_i exceeds population at t=" +
                                  std::to_string(t));
  }
}

// ---------------------------------------------------------------------------
// Deterministic dynamics

inline CompartmentState step_deterministic(const CompartmentState& state, const SirsParams& params) {
  validate(state);
  const double n = static_cast<double>(state.n);
  const double infections = params.beta * state.s * state.i / n;
  const double recoveries = params.gamma * state.i;
  const double waning = params.phi * state.r;
  CompartmentState next{state.s - infections + waning, state.i + infections - recoveries,
                        state.r + recoveries - waning, state.n};
  if (next.s < 0.0 || next.i < 0.0 || next.r < 0.0)
    throw std::domain_error("step_deterministic: compartment would become negative");
  return next;
}

inline ProbTriple evolve_probs(const ProbTriple& p, const SirsParams& params) {
  validate(p);
  const double infections = params.beta * p.p_s * p.p_i;
  const double recoveries = params.gamma * p.p_i;
  const double waning = params.phi * p.p_r;
  ProbTriple next{p.p_s - infections + waning, p.p_i + infections - recoveries,
                  p.p_r + recoveries - waning};
  if (!(next.p_s > 0.0) || !(next.p_i > 0.0) || !(next.p_r > 0.0))
    throw std::domain_error("evolve_probs: flow leaves the probability simplex");
  return next;
}

// ---------------------------------------------------------------------------
// Log-ratio transforms

inline LatentPoint latent_from_probs(const ProbTriple& p) {
  validate(p);
  return {std::log(p.p_s / p.p_r), std::log(p.p_i / p.p_r)};
}

/// Log probabilities (log p_s, log p_i, log p_r) of a latent point, stable for
/// arbitrarily large |w|.
inline ProbTriple log_probs_from_latent(double w_s, double w_i) {
  const double hi = std::max({0.0, w_s, w_i});
  const double log_norm =
      hi + std::log(std::exp(-hi) + std::exp(w_s - hi) + std::exp(w_i - hi));
  return {w_s - log_norm, w_i - log_norm, -log_norm};
}

inline ProbTriple probs_from_latent(double w_s, double w_i) {
  const double hi = std::max({0.0, w_s, w_i});
  const double e_r = std::exp(-hi);
  const double e_s = std::exp(w_s - hi);
  const double e_i = std::exp(w_i - hi);
  const double total = e_r + e_s + e_i;
  return {e_s / total, e_i / total, e_r / total};
}

/// Deterministic one-day mean (mu_S, mu_I) of the latent log ratios.
///
/// Evaluated in the log domain so that extreme log ratios stay finite. Throws
/// std::domain_error when a log argument is not positive, i.e. when the flow
/// would leave the simplex (only possible for rates outside [0,1)).
inline LatentPoint latent_drift(double w_s, double w_i, const SirsParams& params) {
  using detail::kNegInf;
  using detail::log_add_exp;
  const ProbTriple p = probs_from_latent(w_s, w_i);

  // log(1 + phi e^{-w_s} - beta p_i)
  double log_a;
  const double a_rest = 1.0 - params.beta * p.p_i;
  if (a_rest > 0.0) {
    const double log_phi = params.phi > 0.0 ? std::log(params.phi) : kNegInf;
    log_a = log_add_exp(log_phi - w_s, std::log(a_rest));
  } else {
    const double a = params.phi * std::exp(-w_s) + a_rest;
    if (!(a > 0.0) || !std::isfinite(a))
      throw std::domain_error("latent_drift: susceptible flow leaves the simplex");
    log_a = std::log(a);
  }

  // log(1 - gamma + beta p_s)
  const double b = 1.0 - params.gamma + params.beta * p.p_s;
  if (!(b > 0.0)) throw std::domain_error("latent_drift: infectious flow leaves the simplex");
  const double log_b = std::log(b);

  // log(1 + gamma e^{w_i} - phi)
  double log_c;
  const double c_rest = 1.0 - params.phi;
  if (c_rest > 0.0) {
    const double log_gamma = params.gamma > 0.0 ? std::log(params.gamma) : kNegInf;
    log_c = log_add_exp(log_gamma + w_i, std::log(c_rest));
  } else {
    const double c = params.gamma * std::exp(w_i) + c_rest;
    if (!(c > 0.0) || !std::isfinite(c))
      throw std::domain_error("latent_drift: recovered flow leaves the simplex");
    log_c = std::log(c);
  }

  return {w_s + log_a - log_c, w_i + log_b - log_c};
}

// ---------------------------------------------------------------------------
// Densities

/// Poisson log-likelihood of one day's counts given the latent point.
inline double log_likelihood_point(std::int64_t z_r, std::int64_t z_i, std::int64_t n,
                                   double w_s, double w_i) {
  const ProbTriple lp = log_probs_from_latent(w_s, w_i);
  const double log_n = std::log(static_cast<double>(n));
  return detail::poisson_log_pmf(z_r, log_n + lp.p_r) + detail::poisson_log_pmf(z_i, log_n + lp.p_i);
}

inline double log_likelihood_obs(const ObservedSeries& series, const LatentPath& path) {
  if (series.length() != path.length() || path.w_s.size() != path.w_i.size())
    throw std::invalid_argument("log_likelihood_obs: series and path lengths differ");
  double total = 0.0;
  for (std::size_t t = 0; t < series.length(); ++t)
    total += log_likelihood_point(series.z_r[t], series.z_i[t], series.n, path.w_s[t], path.w_i[t]);
  return total;
}

/// Gaussian log density of the transition from `from` to `to`.
inline double log_transition_density(const LatentPoint& from, const LatentPoint& to,
                                     const SirsParams& params, const VarianceParams& var) {
  const LatentPoint mu = latent_drift(from.w_s, from.w_i, params);
  return detail::normal_log_pdf(to.w_s, mu.w_s, var.sigma2_s) +
         detail::normal_log_pdf(to.w_i, mu.w_i, var.sigma2_i);
}

/// Sum of transition densities over the path; the first point carries no
/// density of its own.
inline double log_density_path(const LatentPath& path, const SirsParams& params,
                               const VarianceParams& var) {
  if (path.w_s.size() != path.w_i.size() || path.length() < 2)
    throw std::invalid_argument("log_density_path: path must have two equal-length series, T >= 2");
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < path.length(); ++t)
    total += log_transition_density({path.w_s[t], path.w_i[t]}, {path.w_s[t + 1], path.w_i[t + 1]},
                                    params, var);
  return total;
}

// ---------------------------------------------------------------------------
// Simulation

struct SimulatedSeries {
  ObservedSeries series;
  LatentPath path;
};

/// Forward simulation. `init` is the state one day before the first
/// observation: w(1) = mu(init) + eps, and so on. Count draws that violate
/// z_r + z_i <= n are redrawn.
inline SimulatedSeries simulate_series(const SirsParams& params, const VarianceParams& var,
                                       const ProbTriple& init, std::int64_t n, std::size_t days,
                                       Rng& rng) {
  validate(params);
  validate(var);
  if (days < 2) throw std::invalid_argument("simulate_series: T must be >= 2");
  if (n <= 0) throw std::invalid_argument("simulate_series: population must be positive");
  const LatentPoint start = latent_from_probs(init);

  SimulatedSeries out;
  out.series.n = n;
  out.path.w_s.resize(days);
  out.path.w_i.resize(days);
  out.series.z_r.resize(days);
  out.series.z_i.resize(days);

  const double sd_s = std::sqrt(var.sigma2_s);
  const double sd_i = std::sqrt(var.sigma2_i);
  LatentPoint current = start;
  for (std::size_t t = 0; t < days; ++t) {
    const LatentPoint mu = latent_drift(current.w_s, current.w_i, params);
    current.w_s = mu.w_s + sd_s * draw_normal(rng);
    current.w_i = mu.w_i + sd_i * draw_normal(rng);
    out.path.w_s[t] = current.w_s;
    out.path.w_i[t] = current.w_i;

    const ProbTriple p = probs_from_latent(current.w_s, current.w_i);
    const double nn = static_cast<double>(n);
    std::poisson_distribution<std::int64_t> draw_r(nn * p.p_r);
    std::poisson_distribution<std::int64_t> draw_i(nn * p.p_i);
    int attempts = 0;
    for (;;) {
      const std::int64_t zr = draw_r(rng);
      const std::int64_t zi = draw_i(rng);
      if (zr + zi <= n) {
        out.series.z_r[t] = zr;
        out.series.z_i[t] = zi;
        break;
      }
      if (++attempts >= 1000)
        throw std::runtime_error("simulate_series: population too small for the rate regime");
    }
  }
  return out;
}

inline double basic_reproduction_number(double beta, double gamma) {
  if (!(gamma > 0.0)) throw std::domain_error("basic_reproduction_number: gamma must be positive");
  return beta / gamma;
}

/// Initial latent point from counts, with a 0.5 continuity correction on
/// zero compartments.
inline LatentPoint latent_from_counts(std::int64_t z_r, std::int64_t z_i, std::int64_t n) {
  auto corrected = [](double c) { return c > 0.0 ? c : 0.5; };
  const double r = corrected(static_cast<double>(z_r));
  const double i = corrected(static_cast<double>(z_i));
  const double s = corrected(static_cast<double>(n - z_r - z_i));
  return {std::log(s / r), std::log(i / r)};
}

inline LatentPath latent_path_from_counts(const ObservedSeries& series) {
  LatentPath path;
  path.w_s.resize(series.length());
  path.w_i.resize(series.length());
  for (std::size_t t = 0; t < series.length(); ++t) {
    const LatentPoint w = latent_from_counts(series.z_r[t], series.z_i[t], series.n);
    path.w_s[t] = w.w_s;
    path.w_i[t] = w.w_i;
  }
  return path;
}

}  // namespace sirsmfm
