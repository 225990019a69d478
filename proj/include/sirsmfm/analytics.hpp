// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sirsmfm/epidemic.hpp"
#include "sirsmfm/partition.hpp"
#include "sirsmfm/sampler.hpp"

namespace sirsmfm {

/// Co-membership matrix of a partition, stored row-major.
class MembershipMatrix {
 public:
  explicit MembershipMatrix(const Partition& part) : n_(part.size()), b_(n_ * n_) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) b_[i * n_ + j] = part.same_cluster(i, j) ? 1 : 0;
  }

  std::size_t size() const { return n_; }
  std::uint8_t operator()(std::size_t i, std::size_t j) const { return b_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<std::uint8_t> b_;
};

struct DahlEstimate {
  std::size_t index = 0;  // zero-based draw index
  Partition partition;
  double loss = 0.0;
};

/// Least-squares modal clustering: the draw whose membership matrix is
/// closest to the mean membership matrix. Ties go to the earliest draw.
inline DahlEstimate dahl_estimate(std::span<const Partition> draws) {
  if (draws.empty()) throw std::invalid_argument("dahl_estimate: no draws");
  const std::size_t n = draws.front().size();
  for (const auto& p : draws)
    if (p.size() != n) throw std::invalid_argument("dahl_estimate: partitions over different n");

  // Loss is kept in integers scaled by M^2 so tied draws compare exactly.
  std::vector<long long> together(n * n, 0);
  for (const auto& p : draws)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (p.same_cluster(i, j)) ++together[i * n + j];
  const auto m = static_cast<long long>(draws.size());

  DahlEstimate best;
  long long best_loss = -1;
  for (std::size_t t = 0; t < draws.size(); ++t) {
    long long loss = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const long long d = (draws[t].same_cluster(i, j) ? m : 0) - together[i * n + j];
        loss += d * d;
      }
    if (best_loss < 0 || loss < best_loss) {
      best_loss = loss;
      best.index = t;
    }
  }
  best.loss = static_cast<double>(best_loss) / (static_cast<double>(m) * static_cast<double>(m));
  best.partition = draws[best.index];
  return best;
}

struct HpdInterval {
  double lower = 0.0;
  double upper = 0.0;
  double mass = 0.95;
};

/// Empirical narrowest interval covering ceil(mass * M) sorted samples.
inline HpdInterval hpd_interval(std::span<const double> samples, double mass) {
  if (samples.size() < 2) throw std::invalid_argument("hpd_interval: need at least two samples");
  if (!(mass > 0.0 && mass < 1.0)) throw std::invalid_argument("hpd_interval: mass must lie in (0,1)");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  // The small slack keeps e.g. 0.95 * 100 from rounding up to 96.
  auto count = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(m) - 1e-9));
  count = std::clamp<std::size_t>(count, 1, m);
  std::size_t best = 0;
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t lo = 0; lo + count <= m; ++lo) {
    const double w = sorted[lo + count - 1] - sorted[lo];
    if (w < width) {
      width = w;
      best = lo;
    }
  }
  return {sorted[best], sorted[best + count - 1], mass};
}

inline double rand_index(const Partition& a, const Partition& b) {
  if (a.size() != b.size()) throw std::invalid_argument("rand_index: partitions differ in size");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("rand_index: need at least two items");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (a.same_cluster(i, j) == b.same_cluster(i, j)) ++agree;
  return static_cast<double>(agree) / static_cast<double>(n * (n - 1) / 2);
}

// ---------------------------------------------------------------------------
// Chain summary

struct ClusterEstimate {
  int cluster = 1;
  int members = 0;
  double point = 0.0;       // posterior mean pooled over member regions
  double dahl_value = 0.0;  // value at the Dahl-selected draw
  HpdInterval hpd;
};

struct FamilySummary {
  Family family = Family::beta;
  std::size_t dahl_index = 0;
  Partition partition;
  int k = 0;
  std::vector<ClusterEstimate> clusters;
};

struct RegionR0 {
  std::string region_id;
  double r0 = 0.0;            // ratio of posterior means
  double r0_draw_mean = 0.0;  // posterior mean of the draw-wise ratio
  HpdInterval r0_hpd;
};

struct PosteriorSummary {
  std::vector<std::string> region_ids;
  std::array<FamilySummary, 3> families;
  std::vector<RegionR0> r0;
  double mass = 0.95;
};

namespace detail {

// HPD that degrades to (v, v) when there is a single sample.
inline HpdInterval hpd_or_point(const std::vector<double>& samples, double mass) {
  if (samples.size() == 1) return {samples.front(), samples.front(), mass};
  return hpd_interval(samples, mass);
}

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace detail

inline PosteriorSummary summarize(const ChainOutput& chain, double mass = 0.95) {
  if (chain.draws.empty()) throw std::invalid_argument("summarize: chain has no draws");
  const std::size_t n = chain.region_ids.size();
  PosteriorSummary out;
  out.region_ids = chain.region_ids;
  out.mass = mass;

  for (Family f : kFamilies) {
    const auto fi = index_of(f);
    std::vector<Partition> parts;
    parts.reserve(chain.draws.size());
    for (const auto& d : chain.draws) parts.push_back(d.partitions[fi]);
    const DahlEstimate dahl = dahl_estimate(parts);

    FamilySummary fs;
    fs.family = f;
    fs.dahl_index = dahl.index;
    fs.partition = dahl.partition;
    fs.k = dahl.partition.k();
    for (int c = 1; c <= fs.k; ++c) {
      std::vector<double> pooled;
      ClusterEstimate est;
      est.cluster = c;
      for (std::size_t i = 0; i < n; ++i) {
        if (dahl.partition.label(i) != c) continue;
        if (est.members == 0) est.dahl_value = chain.draws[dahl.index].region_values[fi][i];
        ++est.members;
        for (const auto& d : chain.draws) pooled.push_back(d.region_values[fi][i]);
      }
      est.point = detail::mean_of(pooled);
      est.hpd = detail::hpd_or_point(pooled, mass);
      fs.clusters.push_back(est);
    }
    out.families[fi] = std::move(fs);
  }

  const auto bi = index_of(Family::beta);
  const auto gi = index_of(Family::gamma);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> beta, gamma, ratio;
    for (const auto& d : chain.draws) {
      beta.push_back(d.region_values[bi][i]);
      gamma.push_back(d.region_values[gi][i]);
      ratio.push_back(basic_reproduction_number(beta.back(), gamma.back()));
    }
    RegionR0 r;
    r.region_id = chain.region_ids[i];
    r.r0 = basic_reproduction_number(detail::mean_of(beta), detail::mean_of(gamma));
    r.r0_draw_mean = detail::mean_of(ratio);
    r.r0_hpd = detail::hpd_or_point(ratio, mass);
    out.r0.push_back(r);
  }
  return out;
}

}  // namespace sirsmfm
