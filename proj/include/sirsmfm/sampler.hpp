// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

/**
 * @file sampler.hpp
 * @brief Metropolis-within-Gibbs sampler for the hierarchical SIRS model with
 *        MFM priors on the per-region transmission, recovery and
 *        loss-of-immunity rates.
 *
 * One sweep runs, in order:
 *   - single-site Gaussian random-walk MH on every latent coordinate,
 *   - logit-scale random-walk MH on every cluster value (three families),
 *   - auxiliary-variable label updates with MFM seating weights (three families),
 *   - conjugate inverse-gamma draws for the per-region innovation variances,
 *   - log-scale random-walk MH on the three MFM rates lambda.
 *
 * Proposal scales may be tuned during burn-in only; the post-burn-in kernel is
 * fixed.
 */

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sirsmfm/detail/math.hpp"
#include "sirsmfm/epidemic.hpp"
#include "sirsmfm/mfm_prior.hpp"
#include "sirsmfm/partition.hpp"
#include "sirsmfm/random.hpp"

namespace sirsmfm {

enum class Family : int { beta = 0, gamma = 1, phi = 2 };

inline constexpr std::array<Family, 3> kFamilies{Family::beta, Family::gamma, Family::phi};

inline constexpr std::size_t index_of(Family f) { return static_cast<std::size_t>(f); }

inline const char* family_name(Family f) {
  switch (f) {
    case Family::beta: return "beta";
    case Family::gamma: return "gamma";
    case Family::phi: return "phi";
  }
  return "?";
}

inline Family family_from_name(const std::string& name) {
  for (Family f : kFamilies)
    if (name == family_name(f)) return f;
  throw std::invalid_argument("unknown parameter family: " + name);
}

struct RegionData {
  ObservedSeries series;
  std::string region_id;
};

inline void validate(const std::vector<RegionData>& data) {
  if (data.empty()) throw std::invalid_argument("dataset has no regions");
  std::set<std::string> ids;
  const std::size_t days = data.front().series.length();
  if (days < 2) throw std::invalid_argument("dataset: T must be >= 2");
  for (const auto& region : data) {
    if (region.region_id.empty()) throw std::invalid_argument("dataset: empty region id");
    if (!ids.insert(region.region_id).second)
      throw std::invalid_argument("dataset: duplicate region id " + region.region_id);
    if (region.series.length() != days)
      throw std::invalid_argument("dataset: region " + region.region_id + " has a different T");
    validate(region.series);
  }
}

struct ModelState {
  std::vector<LatentPath> paths;
  std::vector<VarianceParams> variances;
  std::array<Partition, 3> partitions;
  std::array<std::vector<double>, 3> cluster_values;
  std::array<double, 3> lambdas{1.0, 1.0, 1.0};

  std::size_t regions() const { return paths.size(); }

  double value(Family f, std::size_t region) const {
    const auto fi = index_of(f);
    return cluster_values[fi][partitions[fi].label(region) - 1];
  }

  SirsParams region_params(std::size_t region) const {
    return {value(Family::beta, region), value(Family::gamma, region), value(Family::phi, region)};
  }
};

inline void validate(const ModelState& state) {
  const std::size_t n = state.paths.size();
  if (state.variances.size() != n) throw std::invalid_argument("ModelState: variances size mismatch");
  for (const auto& path : state.paths) validate(path);
  for (const auto& v : state.variances) validate(v);
  for (Family f : kFamilies) {
    const auto fi = index_of(f);
    const auto& part = state.partitions[fi];
    if (part.size() != n) throw std::invalid_argument("ModelState: partition size mismatch");
    if (!is_canonical(part.labels())) throw std::invalid_argument("ModelState: partition not canonical");
    if (state.cluster_values[fi].size() != static_cast<std::size_t>(part.k()))
      throw std::invalid_argument("ModelState: cluster values do not match k");
    for (double v : state.cluster_values[fi])
      if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("ModelState: cluster value outside (0,1)");
    if (!(state.lambdas[fi] > 0.0)) throw std::invalid_argument("ModelState: lambda must be positive");
  }
}

/// Switches used by tests to isolate kernels; all on for real fits.
struct SamplerHooks {
  bool observation_likelihood = true;
  bool path_likelihood = true;
  bool update_paths = true;
  bool update_cluster_params = true;
  bool update_labels = true;
  bool update_variances = true;
  bool update_lambda = true;
};

struct SamplerConfig {
  int iterations = 15000;
  int burnin = 5000;
  int thin = 5;
  double proposal_sd_w = 0.1;
  double proposal_sd_param = 0.3;
  double proposal_sd_loglambda = 0.5;
  int aux_m = 1;
  std::uint64_t seed = 1;
  bool adapt = true;
  SamplerHooks hooks{};

  std::size_t stored_draws() const {
    return static_cast<std::size_t>((iterations - burnin) / thin);
  }
};

inline void validate(const SamplerConfig& c) {
  if (c.iterations <= 0) throw std::invalid_argument("sampler.iterations must be positive");
  if (c.burnin < 0 || c.burnin >= c.iterations)
    throw std::invalid_argument("sampler.burnin must satisfy 0 <= burnin < iterations");
  if (c.thin < 1) throw std::invalid_argument("sampler.thin must be >= 1");
  if (!(c.proposal_sd_w > 0.0)) throw std::invalid_argument("sampler.proposal_sd_w must be positive");
  if (!(c.proposal_sd_param > 0.0)) throw std::invalid_argument("sampler.proposal_sd_param must be positive");
  if (!(c.proposal_sd_loglambda > 0.0))
    throw std::invalid_argument("sampler.proposal_sd_loglambda must be positive");
  if (c.aux_m < 1) throw std::invalid_argument("sampler.aux_m must be >= 1");
}

/// One stored draw, with cluster values already mapped to regions.
struct ChainDraw {
  std::array<Partition, 3> partitions;
  std::array<std::vector<double>, 3> region_values;
  std::vector<VarianceParams> variances;
  std::array<double, 3> lambdas{};
  double log_posterior = 0.0;
};

struct AcceptanceRates {
  double latent = 0.0;
  std::array<double, 3> cluster_value{};
  std::array<double, 3> label_change{};
  std::array<double, 3> lambda{};
};

struct ChainOutput {
  std::vector<std::string> region_ids;
  SamplerConfig config;
  std::vector<ChainDraw> draws;
  AcceptanceRates acceptance;
  double wall_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Posterior

inline constexpr double kVarianceShape = 0.01;
inline constexpr double kVarianceRate = 0.01;

/// Unnormalised log posterior; -inf outside the support.
inline double log_posterior(const ModelState& state, const std::vector<RegionData>& data,
                            const SamplerHooks& hooks = {}) {
  if (state.regions() != data.size()) throw std::invalid_argument("log_posterior: region count mismatch");
  for (Family f : kFamilies) {
    const auto fi = index_of(f);
    if (state.partitions[fi].size() != data.size() ||
        state.cluster_values[fi].size() != static_cast<std::size_t>(state.partitions[fi].k()))
      throw std::invalid_argument("log_posterior: partition/cluster value mismatch");
    for (double v : state.cluster_values[fi])
      if (!(v > 0.0 && v < 1.0)) return detail::kNegInf;
    if (!(state.lambdas[fi] > 0.0)) return detail::kNegInf;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& var = state.variances[i];
    if (!(var.sigma2_s > 0.0) || !(var.sigma2_i > 0.0)) return detail::kNegInf;
    if (hooks.observation_likelihood) total += log_likelihood_obs(data[i].series, state.paths[i]);
    if (hooks.path_likelihood) {
      try {
        total += log_density_path(state.paths[i], state.region_params(i), var);
      } catch (const std::domain_error&) {
        return detail::kNegInf;
      }
    }
    total += detail::inverse_gamma_log_pdf(var.sigma2_s, kVarianceShape, kVarianceRate);
    total += detail::inverse_gamma_log_pdf(var.sigma2_i, kVarianceShape, kVarianceRate);
  }
  for (Family f : kFamilies) {
    const auto fi = index_of(f);
    total += log_partition_prior(state.partitions[fi], MfmSpec{state.lambdas[fi]});
    total += detail::gamma_log_pdf(state.lambdas[fi], 1.0, 1.0);
    // Uniform(0,1) base measure contributes log(1) = 0 on its support.
  }
  return total;
}

// ---------------------------------------------------------------------------
// Sampler

class Sampler {
 public:
  Sampler(std::vector<RegionData> data, SamplerConfig config, std::uint64_t stream = 0)
      : data_(std::move(data)), config_(config), rng_(make_rng(config.seed, stream)) {
    validate(data_);
    validate(config_);
    init_state();
    init_scales();
  }

  Sampler(std::vector<RegionData> data, SamplerConfig config, ModelState state, std::uint64_t stream = 0)
      : data_(std::move(data)), config_(config), rng_(make_rng(config.seed, stream)), state_(std::move(state)) {
    validate(data_);
    validate(config_);
    validate(state_);
    if (state_.regions() != data_.size()) throw std::invalid_argument("Sampler: state/data region mismatch");
    for (const auto& p : state_.paths)
      if (p.length() != days()) throw std::invalid_argument("Sampler: path length differs from data");
    init_scales();
    rebuild_caches();
  }

  const ModelState& state() const { return state_; }
  const std::vector<RegionData>& data() const { return data_; }
  const SamplerConfig& config() const { return config_; }
  Rng& rng() { return rng_; }

  double current_log_posterior() const { return log_posterior(state_, data_, config_.hooks); }

  // -------------------------------------------------------------------------
  void update_latent_paths() {
    const auto& hooks = config_.hooks;
    const std::size_t n = regions();
    const std::size_t days_ = days();
    for (std::size_t i = 0; i < n; ++i) {
      auto& path = state_.paths[i];
      auto& cache = caches_[i];
      const auto& series = data_[i].series;
      const SirsParams params = state_.region_params(i);
      const VarianceParams& var = state_.variances[i];
      for (std::size_t t = 0; t < days_; ++t) {
        for (int comp = 0; comp < 2; ++comp) {
          double& scale = latent_scale_[2 * i + comp];
          const double cur = comp == 0 ? path.w_s[t] : path.w_i[t];
          const double prop = cur + scale * draw_normal(rng_);
          const LatentPoint here{path.w_s[t], path.w_i[t]};
          LatentPoint moved = here;
          (comp == 0 ? moved.w_s : moved.w_i) = prop;

          double delta = 0.0;
          if (hooks.observation_likelihood)
            delta += log_likelihood_point(series.z_r[t], series.z_i[t], series.n, moved.w_s, moved.w_i) -
                     log_likelihood_point(series.z_r[t], series.z_i[t], series.n, here.w_s, here.w_i);
          LatentPoint new_mu{};
          if (hooks.path_likelihood) {
            if (t > 0) {
              const double mean = comp == 0 ? cache.mu_s[t - 1] : cache.mu_i[t - 1];
              const double v = comp == 0 ? var.sigma2_s : var.sigma2_i;
              delta += detail::normal_log_pdf(prop, mean, v) - detail::normal_log_pdf(cur, mean, v);
            }
            if (t + 1 < days_) {
              try {
                new_mu = latent_drift(moved.w_s, moved.w_i, params);
              } catch (const std::domain_error&) {
                count(latent_stats_[2 * i + comp], false);
                continue;
              }
              delta += detail::normal_log_pdf(path.w_s[t + 1], new_mu.w_s, var.sigma2_s) +
                       detail::normal_log_pdf(path.w_i[t + 1], new_mu.w_i, var.sigma2_i) -
                       detail::normal_log_pdf(path.w_s[t + 1], cache.mu_s[t], var.sigma2_s) -
                       detail::normal_log_pdf(path.w_i[t + 1], cache.mu_i[t], var.sigma2_i);
            }
          }
          const bool accept = std::isfinite(delta) && std::log(draw_uniform(rng_)) < delta;
          count(latent_stats_[2 * i + comp], accept);
          if (!accept) continue;
          (comp == 0 ? path.w_s[t] : path.w_i[t]) = prop;
          if (hooks.path_likelihood && t + 1 < days_) {
            cache.mu_s[t] = new_mu.w_s;
            cache.mu_i[t] = new_mu.w_i;
          }
        }
      }
      if (hooks.path_likelihood) cache.log_density = path_log_density_from_cache(i);
    }
  }

  // -------------------------------------------------------------------------
  void update_cluster_params(Family f) {
    const auto fi = index_of(f);
    const Partition& part = state_.partitions[fi];
    auto& values = state_.cluster_values[fi];
    std::vector<std::vector<std::size_t>> members(part.k());
    for (std::size_t i = 0; i < regions(); ++i) members[part.label(i) - 1].push_back(i);

    for (int c = 0; c < part.k(); ++c) {
      const double cur = values[c];
      const double x = detail::logit(cur);
      const double y = x + param_scale_[fi] * draw_normal(rng_);
      // A null step keeps the value exactly rather than via a lossy round trip.
      const double prop = y == x ? cur : detail::expit(y);
      if (!(prop > 0.0 && prop < 1.0)) {
        count(param_stats_[fi], false);
        continue;
      }
      double delta = std::log(prop) + std::log1p(-prop) - std::log(cur) - std::log1p(-cur);
      bool ok = true;
      if (config_.hooks.path_likelihood) {
        for (std::size_t i : members[c]) {
          SirsParams params = state_.region_params(i);
          set_family(params, f, prop);
          auto& scratch = scratch_[i];
          if (!fill_drift(i, params, scratch)) {
            ok = false;
            break;
          }
          scratch.log_density = path_log_density(i, scratch);
          delta += scratch.log_density - caches_[i].log_density;
        }
      }
      const bool accept = ok && std::isfinite(delta) && std::log(draw_uniform(rng_)) < delta;
      count(param_stats_[fi], accept);
      if (!accept) continue;
      values[c] = prop;
      if (config_.hooks.path_likelihood)
        for (std::size_t i : members[c]) std::swap(caches_[i], scratch_[i]);
    }
  }

  // -------------------------------------------------------------------------
  /// Auxiliary-variable label update: each region is removed from its
  /// cluster and reseated among the existing clusters and aux_m fresh
  /// Uniform(0,1) candidates, with MFM restaurant weights times the region's
  /// path likelihood under each candidate value.
  void update_labels(Family f) {
    const auto fi = index_of(f);
    const std::size_t n = regions();
    const int m = config_.aux_m;
    const MfmCoefficients& coeffs = coeff_cache_.get(static_cast<int>(n), state_.lambdas[fi]);

    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = state_.partitions[fi].label(i) - 1;
    std::vector<double> values = state_.cluster_values[fi];
    std::vector<int> sizes(state_.partitions[fi].sizes());

    std::vector<double> aux(m);
    std::vector<double> log_w;
    for (std::size_t i = 0; i < n; ++i) {
      const int old = labels[i];
      const double old_value = values[old];
      --sizes[old];
      int draw_from = 0;
      if (sizes[old] == 0) {
        // Singleton: its value becomes the first auxiliary candidate and the
        // cluster is dropped (the last cluster takes its index).
        aux[0] = values[old];
        draw_from = 1;
        const int last = static_cast<int>(values.size()) - 1;
        if (old != last) {
          values[old] = values[last];
          sizes[old] = sizes[last];
          for (auto& z : labels)
            if (z == last) z = old;
        }
        values.pop_back();
        sizes.pop_back();
      }
      for (int a = draw_from; a < m; ++a) aux[a] = draw_open_unit(rng_);

      const int t = static_cast<int>(values.size());
      const double log_new = (t == 0 ? 0.0 : coeffs.at(t + 1) - coeffs.at(t)) - std::log(static_cast<double>(m));
      log_w.assign(t + m, 0.0);
      SirsParams params = state_.region_params(i);
      for (int c = 0; c < t; ++c)
        log_w[c] = std::log(sizes[c] + 1.0) + candidate_log_density(i, params, f, values[c]);
      for (int a = 0; a < m; ++a) log_w[t + a] = log_new + candidate_log_density(i, params, f, aux[a]);

      const int pick = sample_log_weights(log_w);
      int chosen;
      if (pick < t) {
        chosen = pick;
      } else {
        values.push_back(aux[pick - t]);
        sizes.push_back(0);
        chosen = t;
      }
      ++sizes[chosen];
      count(label_stats_[fi], values[chosen] != old_value);
      labels[i] = chosen;
      // Keep the state's view consistent for the next region's params.
      set_family_state(fi, labels, values);
      refresh_cache(i);
    }
    set_family_state(fi, labels, values);
  }

  // -------------------------------------------------------------------------
  void update_variances() {
    const std::size_t days_ = days();
    for (std::size_t i = 0; i < regions(); ++i) {
      auto& var = state_.variances[i];
      if (!config_.hooks.path_likelihood) {
        var.sigma2_s = draw_inverse_gamma(rng_, kVarianceShape, kVarianceRate);
        var.sigma2_i = draw_inverse_gamma(rng_, kVarianceShape, kVarianceRate);
        continue;
      }
      const auto& path = state_.paths[i];
      const auto& cache = caches_[i];
      double ss_s = 0.0, ss_i = 0.0;
      for (std::size_t t = 0; t + 1 < days_; ++t) {
        const double rs = path.w_s[t + 1] - cache.mu_s[t];
        const double ri = path.w_i[t + 1] - cache.mu_i[t];
        ss_s += rs * rs;
        ss_i += ri * ri;
      }
      const double shape = kVarianceShape + 0.5 * static_cast<double>(days_ - 1);
      var.sigma2_s = draw_inverse_gamma(rng_, shape, kVarianceRate + 0.5 * ss_s);
      var.sigma2_i = draw_inverse_gamma(rng_, shape, kVarianceRate + 0.5 * ss_i);
      caches_[i].log_density = path_log_density_from_cache(i);
    }
  }

  // -------------------------------------------------------------------------
  void update_lambda(Family f) {
    const auto fi = index_of(f);
    const Partition& part = state_.partitions[fi];
    const int n = static_cast<int>(part.size());
    const double cur = state_.lambdas[fi];
    const double prop = cur * std::exp(lambda_scale_[fi] * draw_normal(rng_));
    if (!(prop > 0.0) || !std::isfinite(prop)) {
      count(lambda_stats_[fi], false);
      return;
    }
    // Gamma(1,1) prior, EPPF (only V_n(k) depends on lambda), log Jacobian.
    const double delta = (-prop + log_vn(n, part.k(), prop) + std::log(prop)) -
                         (-cur + log_vn(n, part.k(), cur) + std::log(cur));
    const bool accept = std::isfinite(delta) && std::log(draw_uniform(rng_)) < delta;
    count(lambda_stats_[fi], accept);
    if (accept) state_.lambdas[fi] = prop;
  }

  // -------------------------------------------------------------------------
  void sweep() {
    const auto& h = config_.hooks;
    if (h.update_paths) update_latent_paths();
    if (h.update_cluster_params)
      for (Family f : kFamilies) update_cluster_params(f);
    if (h.update_labels)
      for (Family f : kFamilies) update_labels(f);
    if (h.update_variances) update_variances();
    if (h.update_lambda)
      for (Family f : kFamilies) update_lambda(f);
  }

  ChainDraw snapshot() const {
    ChainDraw d;
    for (Family f : kFamilies) {
      const auto fi = index_of(f);
      d.partitions[fi] = state_.partitions[fi];
      d.region_values[fi].resize(regions());
      for (std::size_t i = 0; i < regions(); ++i) d.region_values[fi][i] = state_.value(f, i);
      d.lambdas[fi] = state_.lambdas[fi];
    }
    d.variances = state_.variances;
    d.log_posterior = current_log_posterior();
    return d;
  }

  ChainOutput run() {
    const auto start = std::chrono::steady_clock::now();
    ChainOutput out;
    out.config = config_;
    for (const auto& r : data_) out.region_ids.push_back(r.region_id);
    out.draws.reserve(config_.stored_draws());
    for (int it = 1; it <= config_.iterations; ++it) {
      if (it == config_.burnin + 1) reset_stats();
      sweep();
      if (it <= config_.burnin) {
        if (config_.adapt && it % kAdaptBatch == 0) adapt(it / kAdaptBatch);
      } else if ((it - config_.burnin) % config_.thin == 0) {
        out.draws.push_back(snapshot());
      }
    }
    out.acceptance = acceptance();
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

  /// Acceptance rates accumulated since the end of burn-in (or construction).
  AcceptanceRates acceptance() const {
    AcceptanceRates a;
    Stats latent{};
    for (const auto& s : latent_stats_) {
      latent.accepted += s.total_accepted;
      latent.proposed += s.total_proposed;
    }
    a.latent = rate(latent.accepted, latent.proposed);
    for (std::size_t f = 0; f < 3; ++f) {
      a.cluster_value[f] = rate(param_stats_[f].total_accepted, param_stats_[f].total_proposed);
      a.label_change[f] = rate(label_stats_[f].total_accepted, label_stats_[f].total_proposed);
      a.lambda[f] = rate(lambda_stats_[f].total_accepted, lambda_stats_[f].total_proposed);
    }
    return a;
  }

  double latent_scale(std::size_t region, int comp) const { return latent_scale_[2 * region + comp]; }
  double param_scale(Family f) const { return param_scale_[index_of(f)]; }
  double lambda_scale(Family f) const { return lambda_scale_[index_of(f)]; }

 private:
  static constexpr int kAdaptBatch = 50;
  static constexpr double kTargetAcceptance = 0.44;

  struct RegionCache {
    std::vector<double> mu_s;  // drift at t, mean of w(t+1)
    std::vector<double> mu_i;
    double log_density = 0.0;
  };

  struct Stats {
    long long accepted = 0;
    long long proposed = 0;
    long long total_accepted = 0;
    long long total_proposed = 0;
  };

  static double rate(long long a, long long p) { return p == 0 ? 0.0 : static_cast<double>(a) / p; }

  static void count(Stats& s, bool accepted) {
    ++s.proposed;
    ++s.total_proposed;
    if (accepted) {
      ++s.accepted;
      ++s.total_accepted;
    }
  }

  std::size_t regions() const { return data_.size(); }
  std::size_t days() const { return data_.front().series.length(); }

  static void set_family(SirsParams& p, Family f, double v) {
    switch (f) {
      case Family::beta: p.beta = v; break;
      case Family::gamma: p.gamma = v; break;
      case Family::phi: p.phi = v; break;
    }
  }

  void set_family_state(std::size_t fi, const std::vector<int>& labels, const std::vector<double>& values) {
    // Canonical relabelling by first appearance; values follow their labels.
    std::vector<int> remap(values.size(), -1);
    std::vector<double> ordered;
    ordered.reserve(values.size());
    std::vector<int> canon(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      int& r = remap[labels[i]];
      if (r < 0) {
        r = static_cast<int>(ordered.size());
        ordered.push_back(values[labels[i]]);
      }
      canon[i] = r + 1;
    }
    state_.partitions[fi] = Partition::from_labels(canon);
    state_.cluster_values[fi] = std::move(ordered);
  }

  void init_state() {
    const std::size_t n = regions();
    state_.paths.clear();
    for (const auto& r : data_) state_.paths.push_back(latent_path_from_counts(r.series));
    for (Family f : kFamilies) {
      const auto fi = index_of(f);
      state_.partitions[fi] = Partition::single_cluster(n);
      state_.cluster_values[fi] = {draw_open_unit(rng_)};
      state_.lambdas[fi] = 1.0;
    }
    state_.variances.assign(n, VarianceParams{1.0, 1.0});
    rebuild_caches();
    if (config_.hooks.path_likelihood) update_variances();
  }

  void init_scales() {
    latent_scale_.assign(2 * regions(), config_.proposal_sd_w);
    latent_stats_.assign(2 * regions(), Stats{});
    param_scale_.fill(config_.proposal_sd_param);
    lambda_scale_.fill(config_.proposal_sd_loglambda);
  }

  void reset_stats() {
    for (auto& s : latent_stats_) s = Stats{};
    for (auto* group : {&param_stats_, &label_stats_, &lambda_stats_})
      for (auto& s : *group) s = Stats{};
  }

  void adapt(int batch) {
    const double step = std::min(0.1, 1.0 / std::sqrt(static_cast<double>(batch)));
    auto tune = [&](double& scale, Stats& s) {
      if (s.proposed == 0) return;
      const double acc = rate(s.accepted, s.proposed);
      scale *= std::exp(acc > kTargetAcceptance ? step : -step);
      scale = std::clamp(scale, 1e-8, 1e3);
      s.accepted = s.proposed = 0;
    };
    for (std::size_t k = 0; k < latent_scale_.size(); ++k) tune(latent_scale_[k], latent_stats_[k]);
    for (std::size_t f = 0; f < 3; ++f) {
      tune(param_scale_[f], param_stats_[f]);
      tune(lambda_scale_[f], lambda_stats_[f]);
      label_stats_[f].accepted = label_stats_[f].proposed = 0;
    }
  }

  bool fill_drift(std::size_t i, const SirsParams& params, RegionCache& out) const {
    const auto& path = state_.paths[i];
    const std::size_t steps = path.length() - 1;
    out.mu_s.resize(steps);
    out.mu_i.resize(steps);
    try {
      for (std::size_t t = 0; t < steps; ++t) {
        const LatentPoint mu = latent_drift(path.w_s[t], path.w_i[t], params);
        out.mu_s[t] = mu.w_s;
        out.mu_i[t] = mu.w_i;
      }
    } catch (const std::domain_error&) {
      return false;
    }
    return true;
  }

  double path_log_density(std::size_t i, const RegionCache& c) const {
    const auto& path = state_.paths[i];
    const auto& var = state_.variances[i];
    double total = 0.0;
    for (std::size_t t = 0; t < c.mu_s.size(); ++t)
      total += detail::normal_log_pdf(path.w_s[t + 1], c.mu_s[t], var.sigma2_s) +
               detail::normal_log_pdf(path.w_i[t + 1], c.mu_i[t], var.sigma2_i);
    return total;
  }

  double path_log_density_from_cache(std::size_t i) const { return path_log_density(i, caches_[i]); }

  void refresh_cache(std::size_t i) {
    auto& c = caches_[i];
    if (!fill_drift(i, state_.region_params(i), c)) {
      c.log_density = detail::kNegInf;
      return;
    }
    c.log_density = path_log_density(i, c);
  }

  void rebuild_caches() {
    caches_.assign(regions(), RegionCache{});
    scratch_.assign(regions(), RegionCache{});
    for (std::size_t i = 0; i < regions(); ++i) refresh_cache(i);
  }

  double candidate_log_density(std::size_t i, SirsParams params, Family f, double v) {
    if (!config_.hooks.path_likelihood) return 0.0;
    set_family(params, f, v);
    auto& scratch = scratch_[i];
    if (!fill_drift(i, params, scratch)) return detail::kNegInf;
    return path_log_density(i, scratch);
  }

  int sample_log_weights(const std::vector<double>& log_w) {
    const double norm = detail::log_sum_exp(log_w);
    double u = draw_uniform(rng_);
    for (std::size_t c = 0; c < log_w.size(); ++c) {
      u -= std::exp(log_w[c] - norm);
      if (u < 0.0) return static_cast<int>(c);
    }
    // Round-off: fall back to the last candidate with positive mass.
    for (std::size_t c = log_w.size(); c-- > 0;)
      if (log_w[c] > detail::kNegInf) return static_cast<int>(c);
    return 0;
  }

  std::vector<RegionData> data_;
  SamplerConfig config_;
  Rng rng_;
  ModelState state_;
  std::vector<RegionCache> caches_;
  std::vector<RegionCache> scratch_;
  MfmCoefficientCache coeff_cache_;

  std::vector<double> latent_scale_;
  std::vector<Stats> latent_stats_;
  std::array<double, 3> param_scale_{};
  std::array<double, 3> lambda_scale_{};
  std::array<Stats, 3> param_stats_{};
  std::array<Stats, 3> label_stats_{};
  std::array<Stats, 3> lambda_stats_{};
};

inline ChainOutput run_chain(std::vector<RegionData> data, const SamplerConfig& config, std::uint64_t stream = 0) {
  Sampler sampler(std::move(data), config, stream);
  return sampler.run();
}

}  // namespace sirsmfm
