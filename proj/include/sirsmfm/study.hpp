// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

/**
 * @file study.hpp
 * @brief Simulation study: clustered synthetic SIRS data, replicate chains and
 *        the estimation/grouping metrics (MB, MSD, MRI, K-hat).
 */

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sirsmfm/analytics.hpp"
#include "sirsmfm/epidemic.hpp"
#include "sirsmfm/partition.hpp"
#include "sirsmfm/random.hpp"
#include "sirsmfm/sampler.hpp"

namespace sirsmfm {

struct FamilyTruth {
  std::vector<double> values;  // one per cluster label
  Partition partition;
};

struct ScenarioSpec {
  std::size_t n = 0;
  std::size_t days = 30;
  std::vector<std::string> region_ids;
  std::vector<std::int64_t> populations;
  std::array<FamilyTruth, 3> truth;
  VarianceParams variances{0.01, 0.01};
  ProbTriple init{0.98, 0.015, 0.005};
  int replicates = 100;
  std::uint64_t base_seed = 2020;

  double true_value(Family f, std::size_t region) const {
    const auto& t = truth[index_of(f)];
    return t.values[t.partition.label(region) - 1];
  }
};

inline void validate(const ScenarioSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("scenario.n must be >= 1");
  if (spec.days < 2) throw std::invalid_argument("scenario.T must be >= 2");
  if (spec.populations.size() != spec.n) throw std::invalid_argument("scenario.populations must have n entries");
  if (spec.region_ids.size() != spec.n) throw std::invalid_argument("scenario.region_ids must have n entries");
  for (auto p : spec.populations)
    if (p <= 0) throw std::invalid_argument("scenario.populations must be positive");
  for (Family f : kFamilies) {
    const auto& t = spec.truth[index_of(f)];
    if (t.partition.size() != spec.n)
      throw std::invalid_argument(std::string("scenario.truth.") + family_name(f) + ".labels must have n entries");
    if (t.values.size() != static_cast<std::size_t>(t.partition.k()))
      throw std::invalid_argument(std::string("scenario.truth.") + family_name(f) +
                                  ".values must match the number of labels");
    for (double v : t.values)
      if (!(v > 0.0 && v < 1.0))
        throw std::invalid_argument(std::string("scenario.truth.") + family_name(f) + ".values must lie in (0,1)");
  }
  validate(spec.variances);
  validate(spec.init);
  if (spec.replicates < 1) throw std::invalid_argument("scenario.replicates must be >= 1");
}

/// 2019 resident population estimates for the 50 states and DC.
struct StatePopulation {
  const char* name;
  std::int64_t population;
};

inline constexpr std::array<StatePopulation, 51> kStatePopulations{{
    {"Alabama", 4903185},        {"Alaska", 731545},         {"Arizona", 7278717},
    {"Arkansas", 3017804},       {"California", 39512223},   {"Colorado", 5758736},
    {"Connecticut", 3565287},    {"Delaware", 973764},       {"District of Columbia", 705749},
    {"Florida", 21477737},       {"Georgia", 10617423},      {"Hawaii", 1415872},
    {"Idaho", 1787065},          {"Illinois", 12671821},     {"Indiana", 6732219},
    {"Iowa", 3155070},           {"Kansas", 2913314},        {"Kentucky", 4467673},
    {"Louisiana", 4648794},      {"Maine", 1344212},         {"Maryland", 6045680},
    {"Massachusetts", 6892503},  {"Michigan", 9986857},      {"Minnesota", 5639632},
    {"Mississippi", 2976149},    {"Missouri", 6137428},      {"Montana", 1068778},
    {"Nebraska", 1934408},       {"Nevada", 3080156},        {"New Hampshire", 1359711},
    {"New Jersey", 8882190},     {"New Mexico", 2096829},    {"New York", 19453561},
    {"North Carolina", 10488084}, {"North Dakota", 762062},  {"Ohio", 11689100},
    {"Oklahoma", 3956971},       {"Oregon", 4217737},        {"Pennsylvania", 12801989},
    {"Rhode Island", 1059361},   {"South Carolina", 5148714}, {"South Dakota", 884659},
    {"Tennessee", 6829174},      {"Texas", 28995881},        {"Utah", 3205958},
    {"Vermont", 623989},         {"Virginia", 8535519},      {"Washington", 7614893},
    {"West Virginia", 1792147},  {"Wisconsin", 5822434},     {"Wyoming", 578759},
}};

/// Two groups per family with values (low, high), labels drawn once from
/// base_seed and held fixed over replicates. Regions take state names and
/// populations in table order.
inline ScenarioSpec make_two_group_scenario(std::size_t n, std::size_t days, int replicates,
                                            std::uint64_t base_seed, double low = 0.06, double high = 0.6) {
  if (n < 2) throw std::invalid_argument("make_two_group_scenario: need n >= 2");
  ScenarioSpec spec;
  spec.n = n;
  spec.days = days;
  spec.replicates = replicates;
  spec.base_seed = base_seed;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = kStatePopulations[i % kStatePopulations.size()];
    spec.region_ids.push_back(i < kStatePopulations.size() ? std::string(s.name)
                                                           : std::string(s.name) + " " + std::to_string(i));
    spec.populations.push_back(s.population);
  }
  Rng rng = make_rng(base_seed, 0xABCDEFull);
  for (Family f : kFamilies) {
    std::vector<int> group(n);
    for (;;) {
      int highs = 0;
      for (auto& g : group) {
        g = draw_uniform(rng) < 0.5 ? 0 : 1;
        highs += g;
      }
      if (highs > 0 && highs < static_cast<int>(n)) break;
    }
    auto& t = spec.truth[index_of(f)];
    t.partition = Partition::from_labels(group);
    t.values.assign(t.partition.k(), 0.0);
    for (std::size_t i = 0; i < n; ++i) t.values[t.partition.label(i) - 1] = group[i] == 0 ? low : high;
  }
  return spec;
}

inline std::vector<RegionData> generate_replicate(const ScenarioSpec& spec, int replicate) {
  validate(spec);
  std::vector<RegionData> data;
  data.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Rng rng = make_rng(spec.base_seed, (static_cast<std::uint64_t>(replicate) << 32) | i);
    const SirsParams params{spec.true_value(Family::beta, i), spec.true_value(Family::gamma, i),
                            spec.true_value(Family::phi, i)};
    auto sim = simulate_series(params, spec.variances, spec.init, spec.populations[i], spec.days, rng);
    data.push_back({std::move(sim.series), spec.region_ids[i]});
  }
  return data;
}

// ---------------------------------------------------------------------------
// Metrics

struct FamilyReplicate {
  Partition partition;  // Dahl partition
  int k_hat = 0;
  double rand_index = 0.0;
  std::vector<double> dahl_estimate;   // per region, at the Dahl draw
  std::vector<double> posterior_mean;  // per region
};

struct ReplicateRecord {
  int replicate = 0;
  std::array<FamilyReplicate, 3> families;
};

struct ParameterMetrics {
  Family family = Family::beta;
  int cluster = 1;
  double truth = 0.0;
  int members = 0;
  double mb = 0.0;  // reported as both MB and MAB
  double msd = 0.0;
};

struct GroupingMetrics {
  Family family = Family::beta;
  double mri = 0.0;
  double sd_ri = 0.0;
  double mean_k = 0.0;
  double sd_k = 0.0;
};

struct MetricsReport {
  std::vector<ParameterMetrics> parameters;
  std::array<GroupingMetrics, 3> grouping;
  std::vector<ReplicateRecord> replicates;
};

namespace detail {

inline double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

/// MB_c = mean over replicates of the region-averaged signed bias over the
/// regions whose true cluster is c; MSD_c = root of the replicate- and
/// region-averaged squared deviation from each region's across-replicate
/// mean estimate.
inline MetricsReport compute_metrics(const ScenarioSpec& spec, std::vector<ReplicateRecord> records) {
  if (records.empty()) throw std::invalid_argument("compute_metrics: no replicates");
  std::sort(records.begin(), records.end(),
            [](const ReplicateRecord& a, const ReplicateRecord& b) { return a.replicate < b.replicate; });
  MetricsReport report;
  const double reps = static_cast<double>(records.size());
  for (Family f : kFamilies) {
    const auto fi = index_of(f);
    const auto& truth = spec.truth[fi];

    std::vector<double> across_mean(spec.n, 0.0);
    for (const auto& rec : records)
      for (std::size_t i = 0; i < spec.n; ++i) across_mean[i] += rec.families[fi].dahl_estimate[i] / reps;

    for (int c = 1; c <= truth.partition.k(); ++c) {
      ParameterMetrics pm;
      pm.family = f;
      pm.cluster = c;
      pm.truth = truth.values[c - 1];
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < spec.n; ++i)
        if (truth.partition.label(i) == c) members.push_back(i);
      pm.members = static_cast<int>(members.size());
      double bias = 0.0, sq = 0.0;
      for (const auto& rec : records) {
        double b = 0.0, s = 0.0;
        for (std::size_t i : members) {
          const double est = rec.families[fi].dahl_estimate[i];
          b += est - pm.truth;
          s += (est - across_mean[i]) * (est - across_mean[i]);
        }
        bias += b / static_cast<double>(members.size());
        sq += s / static_cast<double>(members.size());
      }
      pm.mb = bias / reps;
      pm.msd = std::sqrt(sq / reps);
      report.parameters.push_back(pm);
    }

    std::vector<double> ri, k;
    for (const auto& rec : records) {
      ri.push_back(rec.families[fi].rand_index);
      k.push_back(static_cast<double>(rec.families[fi].k_hat));
    }
    report.grouping[fi] = {f, detail::mean_of(ri), detail::sample_sd(ri), detail::mean_of(k), detail::sample_sd(k)};
  }
  report.replicates = std::move(records);
  return report;
}

inline ReplicateRecord analyse_replicate(const ScenarioSpec& spec, const ChainOutput& chain, int replicate) {
  ReplicateRecord rec;
  rec.replicate = replicate;
  for (Family f : kFamilies) {
    const auto fi = index_of(f);
    std::vector<Partition> parts;
    parts.reserve(chain.draws.size());
    for (const auto& d : chain.draws) parts.push_back(d.partitions[fi]);
    const DahlEstimate dahl = dahl_estimate(parts);
    auto& fr = rec.families[fi];
    fr.partition = dahl.partition;
    fr.k_hat = dahl.partition.k();
    fr.rand_index = spec.n >= 2 ? rand_index(dahl.partition, spec.truth[fi].partition) : 1.0;
    fr.dahl_estimate = chain.draws[dahl.index].region_values[fi];
    fr.posterior_mean.assign(spec.n, 0.0);
    for (const auto& d : chain.draws)
      for (std::size_t i = 0; i < spec.n; ++i)
        fr.posterior_mean[i] += d.region_values[fi][i] / static_cast<double>(chain.draws.size());
  }
  return rec;
}

/// Runs every replicate (concurrently when threads > 1; each replicate owns
/// RNG stream `replicate` of config.seed). `on_replicate` is called, under a
/// lock, as each replicate finishes.
inline MetricsReport run_study(const ScenarioSpec& spec, const SamplerConfig& config, unsigned threads = 1,
                               const std::function<void(const ReplicateRecord&)>& on_replicate = {}) {
  validate(spec);
  validate(config);
  if (config.stored_draws() == 0) throw std::invalid_argument("run_study: sampler stores no draws");
  const int reps = spec.replicates;
  std::vector<ReplicateRecord> records(reps);
  std::atomic<int> next{0};
  std::mutex lock;
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= reps) return;
      try {
        ChainOutput chain = run_chain(generate_replicate(spec, r), config, static_cast<std::uint64_t>(r));
        records[r] = analyse_replicate(spec, chain, r);
        std::lock_guard<std::mutex> g(lock);
        if (on_replicate) on_replicate(records[r]);
      } catch (...) {
        std::lock_guard<std::mutex> g(lock);
        if (!failure) failure = std::current_exception();
        next = reps;
      }
    }
  };

  threads = std::max(1u, std::min(threads, static_cast<unsigned>(reps)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return compute_metrics(spec, std::move(records));
}

}  // namespace sirsmfm
