// Apache License, Version 2.0, refer to LICENSE.txt

// Acceptance checks, one PASS/FAIL line per criterion.
//   acceptance               criteria 1-7, 10, 11
//   acceptance --study-only  criteria 8 and 9 (reduced simulation study)
//   acceptance --all         everything

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sirsmfm/analytics.hpp"
#include "sirsmfm/cli.hpp"
#include "sirsmfm/epidemic.hpp"
#include "sirsmfm/mfm_prior.hpp"
#include "sirsmfm/sampler.hpp"
#include "sirsmfm/study.hpp"
#include "test_support.hpp"

using namespace sirsmfm;
namespace st = sirsmfm::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const Outcome& o) {
  std::printf("criterion %2d %s: %s | %s\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> shifted_poisson_pmf(double lambda, int k_max) {
  std::vector<double> p(k_max + 1, 0.0);
  p[1] = std::exp(-lambda);
  for (int k = 2; k <= k_max; ++k) p[k] = p[k - 1] * lambda / (k - 1);
  return p;
}

// ---------------------------------------------------------------------------

Outcome drift_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> w(-6.0, 6.0), r(0.001, 0.999);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double ws = w(rng), wi = w(rng);
    const SirsParams p{r(rng), r(rng), r(rng)};
    const auto mu = latent_drift(ws, wi, p);
    const auto oracle = latent_from_probs(evolve_probs(probs_from_latent(ws, wi), p));
    worst = std::max({worst, std::abs(mu.w_s - oracle.w_s), std::abs(mu.w_i - oracle.w_i)});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 5.0,
          fmt("max |diff| %.3g over 1e4 draws (tol 1e-10), %.3f s (limit 5 s)", worst, secs)};
}

Outcome conservation() {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(0.0, 1.0), r(0.0, 0.999);
  double worst_state = 0.0, worst_prob = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(u(rng) * 1e8);
    const double a = u(rng), b = u(rng) * (1 - a);
    const CompartmentState s{a * n, b * n, n - a * n - b * n, n};
    const SirsParams p{r(rng), r(rng), r(rng)};
    const auto next = step_deterministic(s, p);
    worst_state = std::max(worst_state, std::abs(next.s + next.i + next.r - n) / n);

    double x = u(rng) + 1e-9, y = u(rng) + 1e-9, z = u(rng) + 1e-9;
    const double tot = x + y + z;
    const auto q = evolve_probs({x / tot, y / tot, 1.0 - x / tot - y / tot}, p);
    worst_prob = std::max(worst_prob, std::abs(q.p_s + q.p_i + q.p_r - 1.0));
  }
  return {worst_state <= 1e-9 && worst_prob <= 1e-12,
          fmt("max |S+I+R-N|/N %.3g (tol 1e-9), max |sum p - 1| %.3g (tol 1e-12), 1e4 inputs", worst_state,
              worst_prob)};
}

Outcome mfm_law() {
  Outcome o;
  for (double lambda : {0.5, 1.0, 3.0}) {
    Rng rng = make_rng(103, static_cast<std::uint64_t>(lambda * 10));
    const int draws = 100000;
    std::map<int, double> freq;
    for (int k = 0; k < draws; ++k) freq[sample_mfm_weights({lambda}, rng).first] += 1.0 / draws;
    const auto pmf = shifted_poisson_pmf(lambda, 80);
    double tv = 0.0;
    for (int k = 1; k <= 80; ++k) tv += 0.5 * std::abs(freq[k] - pmf[k]);
    for (const auto& [k, f] : freq)
      if (k > 80) tv += 0.5 * f;
    o.pass &= tv < 0.02;
    o.detail += fmt("TV(lambda=%g) %.4f; ", lambda, tv);
    if (lambda == 1.0) {
      o.pass &= std::abs(freq[1] - 0.3679) <= 0.005;
      o.detail += fmt("P(k=1) %.4f; ", freq[1]);
    }
  }
  o.detail += "tol TV < 0.02, P(k=1) in 0.3679 +- 0.005";
  return o;
}

Outcome eppf() {
  Outcome o;
  Rng rng = make_rng(104);
  const int draws = 1000000;
  double worst_sum = 0.0, worst_z = 0.0;
  for (std::size_t n : {2u, 3u, 4u}) {
    const auto parts = enumerate_partitions(n);
    double total = 0.0;
    for (const auto& p : parts) total += std::exp(log_partition_prior(p, {1.0}));
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    std::map<std::vector<int>, int> counts;
    for (int k = 0; k < draws; ++k) ++counts[sample_partition_generative({1.0}, n, rng).labels()];
    for (const auto& p : parts) {
      const double prob = std::exp(log_partition_prior(p, {1.0}));
      const double se = std::sqrt(prob * (1 - prob) / draws);
      worst_z = std::max(worst_z, std::abs(counts[p.labels()] / static_cast<double>(draws) - prob) / se);
    }
  }
  o.pass = worst_sum <= 1e-8 && worst_z <= 3.0;
  o.detail = fmt("max |sum - 1| %.3g (tol 1e-8), max |freq - p|/se %.2f over 1e6 draws (tol 3)", worst_sum, worst_z);
  return o;
}

Outcome variance_update() {
  // Fixed path with known residuals; only the variance kernel runs.
  const SirsParams p{0.3, 0.1, 0.05};
  const std::size_t days = 301;
  std::mt19937_64 noise(105);
  std::normal_distribution<double> eps(0.0, 0.05);
  LatentPath path;
  LatentPoint w = latent_from_probs({0.9, 0.07, 0.03});
  for (std::size_t t = 0; t < days; ++t) {
    path.w_s.push_back(w.w_s);
    path.w_i.push_back(w.w_i);
    const auto mu = latent_drift(w.w_s, w.w_i, p);
    w = {mu.w_s + eps(noise), mu.w_i + eps(noise)};
  }
  double ss[2] = {0.0, 0.0};
  for (std::size_t t = 0; t + 1 < days; ++t) {
    const auto mu = latent_drift(path.w_s[t], path.w_i[t], p);
    ss[0] += std::pow(path.w_s[t + 1] - mu.w_s, 2);
    ss[1] += std::pow(path.w_i[t + 1] - mu.w_i, 2);
  }
  std::vector<RegionData> data{{{std::vector<std::int64_t>(days, 10), std::vector<std::int64_t>(days, 10), 1000}, "A"}};
  ModelState s;
  s.paths = {path};
  s.variances = {{1.0, 1.0}};
  for (Family f : kFamilies) s.partitions[index_of(f)] = Partition::single_cluster(1);
  s.cluster_values = {std::vector<double>{p.beta}, {p.gamma}, {p.phi}};
  SamplerConfig cfg;
  cfg.seed = 105;
  cfg.hooks.update_paths = cfg.hooks.update_cluster_params = cfg.hooks.update_labels = cfg.hooks.update_lambda = false;
  Sampler sampler(data, cfg, s);

  const int draws = 100000;
  std::vector<double> xs[2];
  for (int k = 0; k < draws; ++k) {
    sampler.update_variances();
    xs[0].push_back(sampler.state().variances[0].sigma2_s);
    xs[1].push_back(sampler.state().variances[0].sigma2_i);
  }
  Outcome o;
  const double a = 0.01 + 0.5 * (days - 1);
  for (int c = 0; c < 2; ++c) {
    const double b = 0.01 + 0.5 * ss[c];
    const double mean = b / (a - 1), var = b * b / ((a - 1) * (a - 1) * (a - 2));
    double m = 0.0, v = 0.0;
    for (double x : xs[c]) m += x / draws;
    for (double x : xs[c]) v += (x - m) * (x - m) / (draws - 1);
    const double em = std::abs(m / mean - 1), ev = std::abs(v / var - 1);
    o.pass &= em <= 0.01 && ev <= 0.01;
    o.detail += fmt("%s: mean rel err %.4f, var rel err %.4f; ", c == 0 ? "sigma2_s" : "sigma2_i", em, ev);
  }
  o.detail += "IG(a,b) analytic, tol 1%, 1e5 draws";
  return o;
}

Outcome prior_recovery() {
  Outcome o;
  const auto data = st::simulated_regions({{0.3, 0.1, 0.05}, {0.2, 0.1, 0.1}, {0.5, 0.2, 0.05}}, 5, 106);
  auto base_state = [&](VarianceParams var) {
    ModelState s;
    for (const auto& r : data) {
      s.paths.push_back(latent_path_from_counts(r.series));
      s.variances.push_back(var);
    }
    for (Family f : kFamilies) s.partitions[index_of(f)] = Partition::single_cluster(data.size());
    s.cluster_values = {std::vector<double>{0.3}, {0.1}, {0.05}};
    return s;
  };

  // Labels and cluster values with both likelihood terms off; lambda held at 1.
  {
    SamplerConfig cfg;
    cfg.seed = 106;
    cfg.hooks.observation_likelihood = cfg.hooks.path_likelihood = false;
    cfg.hooks.update_paths = cfg.hooks.update_variances = cfg.hooks.update_lambda = false;
    Sampler sampler(data, cfg, base_state({0.01, 0.01}));
    std::array<std::map<std::vector<int>, double>, 3> freq;
    const int sweeps = 100000;
    for (int k = 0; k < sweeps; ++k) {
      sampler.sweep();
      for (Family f : kFamilies) freq[index_of(f)][sampler.state().partitions[index_of(f)].labels()] += 1.0 / sweeps;
    }
    for (Family f : kFamilies) {
      double tv = 0.0;
      for (const auto& p : enumerate_partitions(3))
        tv += 0.5 * std::abs(freq[index_of(f)][p.labels()] - std::exp(log_partition_prior(p, {1.0})));
      o.pass &= tv < 0.03;
      o.detail += fmt("TV %s %.4f; ", family_name(f), tv);
    }
  }
  // Latent paths with the observation term off: innovations follow the
  // transition Gaussians.
  {
    SamplerConfig cfg;
    cfg.seed = 107;
    cfg.proposal_sd_w = 0.8;
    cfg.hooks.observation_likelihood = false;
    cfg.hooks.update_cluster_params = cfg.hooks.update_labels = false;
    cfg.hooks.update_variances = cfg.hooks.update_lambda = false;
    const VarianceParams var{0.25, 0.25};
    Sampler sampler(data, cfg, base_state(var));
    const SirsParams p{0.3, 0.1, 0.05};
    std::vector<double> zs, zi;
    const int thin = 20;
    for (int k = 0; k < 10000 * thin; ++k) {
      sampler.update_latent_paths();
      if (k % thin != thin - 1) continue;
      const auto& path = sampler.state().paths[0];
      const auto mu = latent_drift(path.w_s[1], path.w_i[1], p);
      zs.push_back((path.w_s[2] - mu.w_s) / std::sqrt(var.sigma2_s));
      zi.push_back((path.w_i[2] - mu.w_i) / std::sqrt(var.sigma2_i));
    }
    const double ps = st::ks_p_value(st::ks_statistic(zs, st::standard_normal_cdf), zs.size());
    const double pi = st::ks_p_value(st::ks_statistic(zi, st::standard_normal_cdf), zi.size());
    o.pass &= ps > 0.01 && pi > 0.01;
    o.detail += fmt("KS p (eps_S) %.3f, KS p (eps_I) %.3f; ", ps, pi);
  }
  o.detail += "tol TV < 0.03 over 1e5 sweeps, KS p > 0.01 over 1e4 thinned draws";
  return o;
}

Outcome analytics_oracles() {
  std::mt19937_64 rng(108);
  auto random_partition = [&](std::size_t n, int max_k) {
    std::uniform_int_distribution<int> lab(1, max_k);
    std::vector<int> labels(n);
    for (auto& v : labels) v = lab(rng);
    return Partition::from_labels(labels);
  };

  int dahl_bad = 0;
  for (int chain = 0; chain < 100; ++chain) {
    const std::size_t n = 2 + chain % 12;
    std::vector<Partition> draws;
    for (int d = 0; d < 60; ++d) draws.push_back(random_partition(n, 3));
    // Exhaustive scan: squared distance of every draw to the mean membership,
    // in integers scaled by M^2.
    const long long m = static_cast<long long>(draws.size());
    std::size_t best = 0;
    long long best_loss = -1;
    for (std::size_t t = 0; t < draws.size(); ++t) {
      long long loss = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          long long together = 0;
          for (const auto& d : draws) together += d.same_cluster(i, j);
          const long long diff = m * draws[t].same_cluster(i, j) - together;
          loss += diff * diff;
        }
      if (best_loss < 0 || loss < best_loss) {
        best_loss = loss;
        best = t;
      }
    }
    dahl_bad += dahl_estimate(draws).index != best;
  }

  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> xs(1000);
  for (auto& x : xs) x = g(rng);
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t need = static_cast<std::size_t>(std::ceil(0.95 * xs.size() - 1e-9));
  double lo = 0, hi = 0, width = INFINITY;
  for (std::size_t a = 0; a < sorted.size(); ++a)
    for (std::size_t b = a; b < sorted.size(); ++b) {
      std::size_t inside = 0;
      for (double x : xs) inside += x >= sorted[a] && x <= sorted[b];
      if (inside >= need) {
        if (sorted[b] - sorted[a] < width) {
          width = sorted[b] - sorted[a];
          lo = sorted[a];
          hi = sorted[b];
        }
        break;
      }
    }
  const auto h = hpd_interval(xs, 0.95);
  const bool hpd_ok = h.lower == lo && h.upper == hi;

  int ri_bad = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 2 + rep % 25;
    const auto a = random_partition(n, 4), b = random_partition(n, 4);
    std::size_t agree = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        ++pairs;
        agree += (a.label(i) == a.label(j)) == (b.label(i) == b.label(j));
      }
    ri_bad += rand_index(a, b) != static_cast<double>(agree) / pairs;
  }
  const double third = rand_index(Partition::from_labels(std::vector<int>{1, 1, 2}),
                                  Partition::from_labels(std::vector<int>{1, 2, 2}));
  return {dahl_bad == 0 && hpd_ok && ri_bad == 0 && third == 1.0 / 3.0,
          fmt("Dahl mismatches %d/100 chains; HPD [%.6f, %.6f] vs brute force [%.6f, %.6f]; RI mismatches %d/500; "
              "RI({1,1,2},{1,2,2}) = %.6f",
              dahl_bad, h.lower, h.upper, lo, hi, ri_bad, third)};
}

Outcome r0_arithmetic() {
  const double r0 = basic_reproduction_number(0.0042, 0.0381);
  const double rounded = std::round(r0 * 1e4) / 1e4;
  return {rounded == 0.1102, fmt("beta/gamma = %.6f, 4 d.p. %.4f (expected 0.1102)", r0, rounded)};
}

Outcome determinism() {
  const auto dir = st::scratch_dir("acceptance_determinism");
  {
    std::ofstream(dir / "sim.json") << R"({"output": "sim", "scenario": {"n": 4, "T": 20, "base_seed": 11}})";
    std::ofstream(dir / "fit.json") << R"({"input": "sim/raw.csv", "output": "fit",
        "window": "2020-04-01,2020-04-20", "clamp_nonmonotone": false,
        "sampler": {"iterations": 600, "burnin": 200, "thin": 4, "seed": 5}})";
    std::ofstream(dir / "study.json") << R"({"output": "study", "threads": 2,
        "scenario": {"n": 4, "T": 15, "replicates": 3, "base_seed": 12},
        "sampler": {"iterations": 400, "burnin": 100, "thin": 5, "seed": 6}})";
  }
  cli::run(cli::load_run_config(cli::Mode::simulate, dir / "sim.json"));
  Outcome o;
  for (auto [mode, file, out] : {std::tuple{cli::Mode::fit, "fit.json", "fit"},
                                 std::tuple{cli::Mode::study, "study.json", "study"}}) {
    const auto config = cli::load_run_config(mode, dir / file);
    cli::run(config);
    const auto first = st::snapshot_dir(dir / out);
    cli::run(config);
    const auto second = st::snapshot_dir(dir / out);
    const bool same = first == second && !first.empty();
    o.pass &= same;
    o.detail += fmt("%s: %zu files %s; ", out, first.size(), same ? "identical" : "DIFFER");
  }
  o.detail += "compared byte-for-byte with timestamp fields removed";
  return o;
}

void study_criteria(unsigned threads) {
  const auto spec = make_two_group_scenario(20, 30, 10, 2020);
  SamplerConfig cfg;  // 15000 / 5000 / 5
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = run_study(spec, cfg, threads, [&](const ReplicateRecord& r) {
    std::printf("  replicate %d done (%.0f s)\n", r.replicate, seconds_since(t0));
    std::fflush(stdout);
  });
  const double secs = seconds_since(t0);

  Outcome grouping;
  for (const auto& g : rep.grouping) {
    grouping.pass &= g.mri >= 0.75 && g.mean_k >= 1.5 && g.mean_k <= 3.0;
    grouping.detail += fmt("%s MRI %.3f K %.2f; ", family_name(g.family), g.mri, g.mean_k);
  }
  grouping.detail += fmt("tol MRI >= 0.75, K in [1.5, 3.0]; n=20 T=30 10 replicates, %.0f s", secs);
  report(8, "reduced simulation study grouping", grouping);

  Outcome bias;
  for (const auto& p : rep.parameters) {
    if (p.truth != 0.06) continue;
    bias.pass &= std::abs(p.mb) <= 0.05;
    bias.detail += fmt("%s MB %.4f; ", family_name(p.family), p.mb);
  }
  bias.detail += "tol |MB| <= 0.05 for 0.06-truth clusters";
  report(9, "reduced simulation study bias", bias);
}

}  // namespace

int main(int argc, char** argv) {
  bool fast = true, study = false;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  for (int k = 1; k < argc; ++k) {
    const std::string arg = argv[k];
    if (arg == "--study-only") {
      fast = false;
      study = true;
    } else if (arg == "--all") {
      study = true;
    } else if (arg == "--threads" && k + 1 < argc) {
      threads = static_cast<unsigned>(std::stoul(argv[++k]));
    } else {
      std::fprintf(stderr, "usage: acceptance [--study-only | --all] [--threads N]\n");
      return 2;
    }
  }

  auto guarded = [](int id, const char* title, Outcome (*check)()) {
    try {
      report(id, title, check());
    } catch (const std::exception& e) {
      report(id, title, {false, std::string("exception: ") + e.what()});
    }
  };
  if (fast) {
    guarded(1, "drift formula oracle", drift_oracle);
    guarded(2, "conservation", conservation);
    guarded(3, "MFM construction law", mfm_law);
    guarded(4, "EPPF correctness", eppf);
    guarded(5, "conjugate variance update", variance_update);
    guarded(6, "prior recovery MCMC", prior_recovery);
    guarded(7, "Dahl/HPD/RI oracles", analytics_oracles);
    guarded(10, "R0 arithmetic", r0_arithmetic);
    guarded(11, "end-to-end determinism", determinism);
  }
  if (study) {
    try {
      study_criteria(threads);
    } catch (const std::exception& e) {
      report(8, "reduced simulation study grouping", {false, std::string("exception: ") + e.what()});
      report(9, "reduced simulation study bias", {false, "not run"});
    }
  }
  std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
