// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

/**
 * @file cli.hpp
 * @brief Run configuration and the four commands (fit, simulate, study,
 *        summarize). The executable in tools/ only parses flags and calls
 *        into here.
 */

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sirsmfm/analytics.hpp"
#include "sirsmfm/io.hpp"
#include "sirsmfm/sampler.hpp"
#include "sirsmfm/study.hpp"

namespace sirsmfm::cli {

enum class Mode { fit, simulate, study, summarize };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::fit: return "fit";
    case Mode::simulate: return "simulate";
    case Mode::study: return "study";
    case Mode::summarize: return "summarize";
  }
  return "?";
}

inline Mode mode_from_name(const std::string& name) {
  for (Mode m : {Mode::fit, Mode::simulate, Mode::study, Mode::summarize})
    if (name == mode_name(m)) return m;
  throw std::invalid_argument("config field 'mode' must be one of fit, simulate, study, summarize");
}

struct RunConfig {
  Mode mode = Mode::fit;
  fs::path input;
  fs::path populations;
  fs::path output;
  std::optional<DateWindow> window;
  std::vector<std::string> regions;
  bool clamp_nonmonotone = true;
  double hpd_mass = 0.95;
  SamplerConfig sampler;
  std::optional<ScenarioSpec> scenario;
  unsigned threads = 1;
  int simulate_replicate = 0;
  Day start_date = parse_iso_date("2020-04-01");
};

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::string> input;
  std::optional<std::string> output;
  std::optional<std::string> window;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<int> burnin;
  std::optional<int> thin;
  std::optional<unsigned> threads;
};

inline json to_json(const RunConfig& c) {
  json j{{"mode", mode_name(c.mode)},
         {"input", c.input.generic_string()},
         {"populations", c.populations.generic_string()},
         {"output", c.output.generic_string()},
         {"regions", c.regions},
         {"clamp_nonmonotone", c.clamp_nonmonotone},
         {"hpd_mass", c.hpd_mass},
         {"sampler", to_json(c.sampler)},
         {"threads", c.threads}};
  j["window"] = c.window ? json(format_window(*c.window)) : json(nullptr);
  j["scenario"] = c.scenario ? to_json(*c.scenario) : json(nullptr);
  j["simulate"] = {{"replicate", c.simulate_replicate}, {"start_date", format_iso_date(c.start_date)}};
  return j;
}

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

/// Validates mode-required fields; every error names the field.
inline void validate(const RunConfig& c) {
  auto need_file = [](const fs::path& p, const char* field) {
    if (p.empty()) throw std::invalid_argument(std::string("config field '") + field + "' is required for this mode");
    if (!fs::exists(p)) throw std::invalid_argument(std::string("config field '") + field + "': no such file " + p.string());
  };
  if (c.output.empty()) throw std::invalid_argument("config field 'output' is required");
  if (!(c.hpd_mass > 0.0 && c.hpd_mass < 1.0)) throw std::invalid_argument("config field 'hpd_mass' must lie in (0,1)");
  switch (c.mode) {
    case Mode::fit:
      need_file(c.input, "input");
      if (!c.populations.empty()) need_file(c.populations, "populations");
      if (!c.window) throw std::invalid_argument("config field 'window' is required for mode fit");
      validate(c.sampler);
      break;
    case Mode::simulate:
      if (!c.scenario) throw std::invalid_argument("config field 'scenario' is required for mode simulate");
      if (c.simulate_replicate < 0) throw std::invalid_argument("config field 'simulate.replicate' must be >= 0");
      break;
    case Mode::study:
      if (!c.scenario) throw std::invalid_argument("config field 'scenario' is required for mode study");
      validate(c.sampler);
      if (c.sampler.stored_draws() == 0)
        throw std::invalid_argument("config field 'sampler': iterations - burnin must leave at least one draw");
      break;
    case Mode::summarize:
      need_file(c.input, "input");
      break;
  }
}

/// Builds a RunConfig from parsed JSON. Relative paths in the file resolve
/// against `base_dir`; override paths are taken as given.
inline RunConfig parse_run_config(Mode mode, const json& j, const fs::path& base_dir, const Overrides& o = {}) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  RunConfig c;
  c.mode = mode;
  if (j.contains("mode") && mode_from_name(j.at("mode").get<std::string>()) != mode)
    throw std::invalid_argument("config field 'mode' does not match the subcommand");

  auto str = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_string()) throw std::invalid_argument(std::string("config field '") + key + "' must be a string");
    return j.at(key).get<std::string>();
  };
  if (auto v = str("input")) c.input = detail::resolve(base_dir, *v);
  if (auto v = str("populations")) c.populations = detail::resolve(base_dir, *v);
  if (auto v = str("output")) c.output = detail::resolve(base_dir, *v);
  if (auto v = str("window")) c.window = parse_window(*v);
  sirsmfm::detail::read_field(j, "regions", c.regions, "");
  sirsmfm::detail::read_field(j, "clamp_nonmonotone", c.clamp_nonmonotone, "");
  sirsmfm::detail::read_field(j, "hpd_mass", c.hpd_mass, "");
  sirsmfm::detail::read_field(j, "threads", c.threads, "");
  if (j.contains("sampler")) c.sampler = sampler_config_from_json(j.at("sampler"));
  if (j.contains("scenario") && !j.at("scenario").is_null()) c.scenario = scenario_from_json(j.at("scenario"));
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    sirsmfm::detail::read_field(s, "replicate", c.simulate_replicate, "simulate.");
    if (s.contains("start_date")) c.start_date = parse_iso_date(s.at("start_date").get<std::string>());
  }

  if (o.input) c.input = *o.input;
  if (o.output) c.output = *o.output;
  if (o.window) c.window = parse_window(*o.window);
  if (o.seed) c.sampler.seed = *o.seed;
  if (o.iterations) c.sampler.iterations = *o.iterations;
  if (o.burnin) c.sampler.burnin = *o.burnin;
  if (o.thin) c.sampler.thin = *o.thin;
  if (o.threads) c.threads = *o.threads;
  if (c.threads == 0) c.threads = std::max(1u, std::thread::hardware_concurrency());
  validate(c);
  return c;
}

inline RunConfig load_run_config(Mode mode, const std::optional<fs::path>& config_path, const Overrides& o = {}) {
  json j = json::object();
  fs::path base;
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw std::invalid_argument("cannot open config " + config_path->string());
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw std::invalid_argument("config " + config_path->string() + ": " + e.what());
    }
    base = config_path->parent_path();
  }
  return parse_run_config(mode, j, base, o);
}

// ---------------------------------------------------------------------------
// Commands

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline void run_fit(const RunConfig& c) {
  const auto t0 = Clock::now();
  IngestOptions opts;
  opts.window = *c.window;
  if (!c.populations.empty()) opts.populations = c.populations;
  opts.regions = c.regions;
  opts.clamp_nonmonotone = c.clamp_nonmonotone;
  IngestResult data = ingest(c.input, opts);

  fs::create_directories(c.output);
  write_ingest_warnings(c.output / "ingest_warnings.csv", data.warnings);
  const ChainOutput chain = run_chain(std::move(data.regions), c.sampler);
  write_chain(c.output / "chain.jsonl", chain);
  emit_results(summarize(chain, c.hpd_mass), c.output);
  write_manifest(c.output / "manifest.json", "fit", to_json(c), c.sampler.seed, seconds_since(t0));
}

inline void run_simulate(const RunConfig& c) {
  const auto t0 = Clock::now();
  const ScenarioSpec& spec = *c.scenario;
  const auto data = generate_replicate(spec, c.simulate_replicate);
  fs::create_directories(c.output);
  write_raw_dataset(c.output / "raw.csv", data, c.start_date);
  write_population_table(c.output / "populations.csv", data);
  {
    auto out = open_table(c.output / "truth.csv");
    out << "region,family,cluster,value\n";
    for (Family f : kFamilies)
      for (std::size_t i = 0; i < spec.n; ++i)
        out << sirsmfm::detail::quote_field(spec.region_ids[i]) << ',' << family_name(f) << ','
            << spec.truth[index_of(f)].partition.label(i) << ',' << fmt6(spec.true_value(f, i)) << '\n';
  }
  write_manifest(c.output / "manifest.json", "simulate", to_json(c), spec.base_seed, seconds_since(t0));
}

inline MetricsReport run_study_command(const RunConfig& c) {
  const auto t0 = Clock::now();
  const ScenarioSpec& spec = *c.scenario;
  fs::create_directories(c.output);
  const fs::path per_rep = c.output / "replicates";
  MetricsReport report = run_study(spec, c.sampler, c.threads, [&](const ReplicateRecord& rec) {
    write_replicate_record(rec, spec.region_ids, per_rep);
  });
  emit_results(report, c.output);
  write_manifest(c.output / "manifest.json", "study", to_json(c), c.sampler.seed, seconds_since(t0));
  return report;
}

inline void run_summarize(const RunConfig& c) {
  const auto t0 = Clock::now();
  const ChainOutput chain = read_chain(c.input);
  emit_results(summarize(chain, c.hpd_mass), c.output);
  write_manifest(c.output / "manifest.json", "summarize", to_json(c), chain.config.seed, seconds_since(t0));
}

inline void run(const RunConfig& c) {
  switch (c.mode) {
    case Mode::fit: run_fit(c); break;
    case Mode::simulate: run_simulate(c); break;
    case Mode::study: run_study_command(c); break;
    case Mode::summarize: run_summarize(c); break;
  }
}

}  // namespace sirsmfm::cli
