// Apache License, Version 2.0, refer to LICENSE.txt

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "sirsmfm/study.hpp"

using namespace sirsmfm;

namespace {

Partition p(std::vector<int> labels) { return Partition::from_labels(labels); }

ScenarioSpec three_region_spec() {
  ScenarioSpec spec;
  spec.n = 3;
  spec.days = 10;
  spec.region_ids = {"A", "B", "C"};
  spec.populations = {100000, 200000, 300000};
  spec.truth[0] = {{0.1, 0.5}, p({1, 1, 2})};
  spec.truth[1] = {{0.2}, p({1, 1, 1})};
  spec.truth[2] = {{0.3, 0.4, 0.5}, p({1, 2, 3})};
  spec.replicates = 2;
  return spec;
}

ReplicateRecord record(int r, const std::array<std::vector<double>, 3>& est, const std::array<Partition, 3>& parts,
                       const ScenarioSpec& spec) {
  ReplicateRecord rec;
  rec.replicate = r;
  for (std::size_t f = 0; f < 3; ++f) {
    rec.families[f].partition = parts[f];
    rec.families[f].k_hat = parts[f].k();
    rec.families[f].rand_index = rand_index(parts[f], spec.truth[f].partition);
    rec.families[f].dahl_estimate = est[f];
    rec.families[f].posterior_mean = est[f];
  }
  return rec;
}

}  // namespace

TEST(Scenario, TwoGroupDesign) {
  const auto spec = make_two_group_scenario(51, 30, 100, 2020);
  EXPECT_NO_THROW(validate(spec));
  EXPECT_EQ(spec.n, 51u);
  EXPECT_EQ(spec.region_ids.front(), "Alabama");
  for (Family f : kFamilies) {
    const auto& t = spec.truth[index_of(f)];
    EXPECT_EQ(t.partition.k(), 2);
    std::vector<double> v = t.values;
    std::sort(v.begin(), v.end());
    EXPECT_EQ(v, (std::vector<double>{0.06, 0.6}));
  }
  const auto again = make_two_group_scenario(51, 30, 100, 2020);
  for (Family f : kFamilies) EXPECT_EQ(again.truth[index_of(f)].partition, spec.truth[index_of(f)].partition);
}

TEST(Scenario, ReplicatesShareTruthAndAreReproducible) {
  const auto spec = make_two_group_scenario(6, 30, 3, 9);
  const auto a = generate_replicate(spec, 1);
  const auto b = generate_replicate(spec, 1);
  const auto c = generate_replicate(spec, 2);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].series.z_r, b[i].series.z_r);
    EXPECT_EQ(a[i].series.z_i, b[i].series.z_i);
    EXPECT_EQ(a[i].series.length(), 30u);
    EXPECT_EQ(a[i].region_id, spec.region_ids[i]);
  }
  EXPECT_NE(a[0].series.z_i, c[0].series.z_i);
}

TEST(Scenario, ValidationNamesFields) {
  auto spec = three_region_spec();
  spec.truth[0].values = {0.1, 1.5};
  try {
    validate(spec);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("scenario.truth.beta.values"), std::string::npos);
  }
}

TEST(Metrics, HandWorkedTwoReplicates) {
  const auto spec = three_region_spec();
  const std::array<Partition, 3> exact{spec.truth[0].partition, spec.truth[1].partition, spec.truth[2].partition};
  auto parts1 = exact;
  parts1[0] = p({1, 2, 3});
  const auto r0 = record(0, {std::vector<double>{0.12, 0.10, 0.45}, {0.2, 0.2, 0.2}, {0.3, 0.4, 0.5}}, exact, spec);
  const auto r1 = record(1, {std::vector<double>{0.08, 0.14, 0.55}, {0.2, 0.2, 0.2}, {0.3, 0.4, 0.5}}, parts1, spec);
  const auto m = compute_metrics(spec, {r0, r1});

  ASSERT_EQ(m.parameters.size(), 6u);
  const auto& low = m.parameters[0];
  EXPECT_EQ(low.members, 2);
  EXPECT_NEAR(low.mb, 0.01, 1e-12);
  EXPECT_NEAR(low.msd, 0.02, 1e-12);
  const auto& high = m.parameters[1];
  EXPECT_NEAR(high.mb, 0.0, 1e-12);
  EXPECT_NEAR(high.msd, 0.05, 1e-12);

  // {1,2,3} vs {1,1,2}: only the pair (A,B) disagrees.
  EXPECT_NEAR(m.grouping[0].mri, (1.0 + 2.0 / 3.0) / 2.0, 1e-12);
  EXPECT_NEAR(m.grouping[0].sd_ri, std::sqrt(2 * std::pow(1.0 / 6.0, 2)), 1e-12);
  EXPECT_NEAR(m.grouping[0].mean_k, 2.5, 1e-12);
  EXPECT_NEAR(m.grouping[0].sd_k, std::sqrt(0.5), 1e-12);
  for (std::size_t k = 2; k < m.parameters.size(); ++k) {
    EXPECT_NEAR(m.parameters[k].mb, 0.0, 1e-12);
    EXPECT_NEAR(m.parameters[k].msd, 0.0, 1e-12);
  }
  EXPECT_EQ(m.grouping[1].mri, 1.0);
  EXPECT_EQ(m.grouping[2].sd_k, 0.0);
}

TEST(Metrics, SingleReplicateHasZeroSpread) {
  const auto spec = three_region_spec();
  const std::array<Partition, 3> exact{spec.truth[0].partition, spec.truth[1].partition, spec.truth[2].partition};
  const auto m = compute_metrics(spec, {record(0, {std::vector<double>{0.3, 0.1, 0.45}, {0.2, 0.2, 0.2},
                                                   {0.3, 0.4, 0.5}}, exact, spec)});
  for (const auto& pm : m.parameters) EXPECT_EQ(pm.msd, 0.0);
  for (const auto& g : m.grouping) {
    EXPECT_EQ(g.sd_ri, 0.0);
    EXPECT_EQ(g.sd_k, 0.0);
  }
  EXPECT_NEAR(m.parameters[0].mb, 0.1, 1e-12);
}

TEST(Metrics, InvariantToReplicateOrder) {
  const auto spec = three_region_spec();
  const std::array<Partition, 3> exact{spec.truth[0].partition, spec.truth[1].partition, spec.truth[2].partition};
  std::vector<ReplicateRecord> recs;
  for (int r = 0; r < 5; ++r)
    recs.push_back(record(r, {std::vector<double>{0.1 + 0.01 * r, 0.1 - 0.005 * r, 0.5 + 0.02 * r * r}, {0.2, 0.21, 0.2},
                              {0.3, 0.4, 0.5}}, exact, spec));
  const auto a = compute_metrics(spec, recs);
  std::reverse(recs.begin(), recs.end());
  std::swap(recs[0], recs[2]);
  const auto b = compute_metrics(spec, recs);
  for (std::size_t k = 0; k < a.parameters.size(); ++k) {
    EXPECT_EQ(a.parameters[k].mb, b.parameters[k].mb);
    EXPECT_EQ(a.parameters[k].msd, b.parameters[k].msd);
  }
}

TEST(RunStudy, DeterministicAndThreadIndependent) {
  auto spec = make_two_group_scenario(4, 10, 3, 5);
  SamplerConfig cfg;
  cfg.iterations = 300;
  cfg.burnin = 100;
  cfg.thin = 5;
  int seen = 0;
  const auto a = run_study(spec, cfg, 1, [&](const ReplicateRecord&) { ++seen; });
  const auto b = run_study(spec, cfg, 3);
  EXPECT_EQ(seen, 3);
  ASSERT_EQ(a.replicates.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(a.replicates[r].replicate, static_cast<int>(r));
    for (std::size_t f = 0; f < 3; ++f) {
      EXPECT_EQ(a.replicates[r].families[f].partition, b.replicates[r].families[f].partition);
      EXPECT_EQ(a.replicates[r].families[f].dahl_estimate, b.replicates[r].families[f].dahl_estimate);
    }
  }
  for (std::size_t k = 0; k < a.parameters.size(); ++k) EXPECT_EQ(a.parameters[k].mb, b.parameters[k].mb);
}
