// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

/**
 * @file io.hpp
 * @brief Dataset ingestion, chain storage and result tables.
 *
 * Input data is comma-delimited UTF-8 text with a header row. Chains are
 * stored as JSON lines: a versioned header object followed by one object per
 * stored draw. Result tables are comma-delimited with fixed column order and
 * six significant digits.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sirsmfm/analytics.hpp"
#include "sirsmfm/sampler.hpp"
#include "sirsmfm/study.hpp"

namespace sirsmfm {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kChainFormat = "sirsmfm-chain";
inline constexpr int kChainFormatVersion = 1;

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Dates

using Day = std::chrono::sys_days;

inline Day parse_iso_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3)
    throw std::invalid_argument("invalid ISO-8601 date: '" + text + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date: '" + text + "'");
  return Day{ymd};
}

inline std::string format_iso_date(Day day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

struct DateWindow {
  Day start;
  Day end;  // inclusive

  std::size_t days() const { return static_cast<std::size_t>((end - start).count() + 1); }
};

/// "YYYY-MM-DD,YYYY-MM-DD", both ends inclusive.
inline DateWindow parse_window(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("window must be 'start,end'");
  DateWindow w{parse_iso_date(text.substr(0, comma)), parse_iso_date(text.substr(comma + 1))};
  if (w.end < w.start) throw std::invalid_argument("empty window: end precedes start");
  return w;
}

inline std::string format_window(const DateWindow& w) {
  return format_iso_date(w.start) + "," + format_iso_date(w.end);
}

// ---------------------------------------------------------------------------
// Delimited text

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    return std::nullopt;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

inline std::int64_t parse_count(const std::string& text, const std::string& field, std::size_t line) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (text.empty() || used != text.size())
    throw std::invalid_argument("line " + std::to_string(line) + ": non-numeric " + field + " '" + text + "'");
  if (v < 0) throw std::invalid_argument("line " + std::to_string(line) + ": negative " + field);
  return v;
}

inline std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size())
      throw std::invalid_argument(path.string() + " line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(table.header.size()) + " fields");
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) throw std::invalid_argument(path.string() + ": missing header row");
  return table;
}

/// Six significant digits, the precision of every emitted table.
inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Ingestion

struct RawCovidRow {
  Day date;
  std::string region;
  std::int64_t cumulative_positive = 0;
  std::int64_t cumulative_recovered = 0;
  std::int64_t cumulative_death = 0;
  std::optional<std::int64_t> population;
};

struct IngestOptions {
  DateWindow window;
  std::optional<fs::path> populations;  // side table: region,population
  std::vector<std::string> regions;     // empty: every region in the file
  bool clamp_nonmonotone = true;
};

struct IngestWarning {
  std::string region;
  std::string date;
  std::string message;
};

struct IngestResult {
  std::vector<RegionData> regions;
  std::vector<IngestWarning> warnings;
};

inline std::vector<RawCovidRow> read_raw_rows(const fs::path& path) {
  const CsvTable table = read_csv(path);
  auto need = [&](const char* name) {
    auto c = table.column(name);
    if (!c) throw std::invalid_argument(path.string() + ": header lacks column '" + name + "'");
    return *c;
  };
  const auto c_date = need("date");
  const auto c_region = need("region");
  const auto c_pos = need("cumulative_positive");
  const auto c_rec = need("cumulative_recovered");
  const auto c_death = need("cumulative_death");
  const auto c_pop = table.column("population");

  std::vector<RawCovidRow> rows;
  rows.reserve(table.rows.size());
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const auto& f = table.rows[k];
    const std::size_t line = table.line_numbers[k];
    RawCovidRow row;
    try {
      row.date = parse_iso_date(f[c_date]);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(line) + ": " + e.what());
    }
    row.region = f[c_region];
    if (row.region.empty()) throw std::invalid_argument("line " + std::to_string(line) + ": empty region");
    row.cumulative_positive = detail::parse_count(f[c_pos], "cumulative_positive", line);
    row.cumulative_recovered = detail::parse_count(f[c_rec], "cumulative_recovered", line);
    row.cumulative_death = detail::parse_count(f[c_death], "cumulative_death", line);
    if (c_pop && !f[*c_pop].empty()) {
      row.population = detail::parse_count(f[*c_pop], "population", line);
      if (*row.population <= 0) throw std::invalid_argument("line " + std::to_string(line) + ": population must be positive");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::map<std::string, std::int64_t> read_population_table(const fs::path& path) {
  const CsvTable table = read_csv(path);
  const auto c_region = table.column("region");
  const auto c_pop = table.column("population");
  if (!c_region || !c_pop) throw std::invalid_argument(path.string() + ": needs columns region,population");
  std::map<std::string, std::int64_t> out;
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const auto v = detail::parse_count(table.rows[k][*c_pop], "population", table.line_numbers[k]);
    if (v <= 0) throw std::invalid_argument("population must be positive for " + table.rows[k][*c_region]);
    out[table.rows[k][*c_region]] = v;
  }
  return out;
}

/// Builds per-region observed series on the window's daily grid:
/// Z_R = recovered + death and Z_I = positive - Z_R (floored at 0). Days
/// without a row carry the last cumulative values forward.
inline IngestResult ingest(const fs::path& path, const IngestOptions& options) {
  const auto rows = read_raw_rows(path);
  std::map<std::string, std::int64_t> side;
  if (options.populations) side = read_population_table(*options.populations);

  std::map<std::string, std::vector<const RawCovidRow*>> by_region;
  for (const auto& r : rows) by_region[r.region].push_back(&r);

  std::vector<std::string> selected = options.regions;
  if (selected.empty())
    for (const auto& [name, _] : by_region) selected.push_back(name);
  for (const auto& name : selected)
    if (!by_region.count(name)) throw std::invalid_argument("unknown region: " + name);

  const std::size_t days = options.window.days();
  IngestResult result;
  for (const auto& name : selected) {
    auto list = by_region.at(name);
    std::stable_sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->date < b->date; });

    std::optional<std::int64_t> population;
    if (auto it = side.find(name); it != side.end()) population = it->second;
    for (const auto* r : list)
      if (!population && r->population) population = r->population;
    if (!population) throw std::invalid_argument("population missing for region " + name);

    // Cumulative columns: optionally clamp to the running maximum.
    struct Cum {
      std::int64_t pos = 0, rec = 0, death = 0;
    };
    std::vector<std::pair<Day, Cum>> cleaned;
    Cum running{};
    bool seen = false;
    for (const auto* r : list) {
      Cum c{r->cumulative_positive, r->cumulative_recovered, r->cumulative_death};
      if (seen && options.clamp_nonmonotone) {
        if (c.pos < running.pos || c.rec < running.rec || c.death < running.death)
          result.warnings.push_back({name, format_iso_date(r->date), "non-monotone cumulative value clamped"});
        c.pos = std::max(c.pos, running.pos);
        c.rec = std::max(c.rec, running.rec);
        c.death = std::max(c.death, running.death);
      }
      running = c;
      seen = true;
      if (!cleaned.empty() && cleaned.back().first == r->date) {
        result.warnings.push_back({name, format_iso_date(r->date), "duplicate date; last row kept"});
        cleaned.back().second = c;
      } else {
        cleaned.emplace_back(r->date, c);
      }
    }

    RegionData region;
    region.region_id = name;
    region.series.n = *population;
    region.series.z_r.resize(days);
    region.series.z_i.resize(days);
    std::size_t cursor = 0;
    std::optional<Cum> last;
    bool any_in_window = false;
    for (std::size_t t = 0; t < days; ++t) {
      const Day day = options.window.start + std::chrono::days{static_cast<int>(t)};
      while (cursor < cleaned.size() && cleaned[cursor].first <= day) {
        if (cleaned[cursor].first >= options.window.start) any_in_window = true;
        last = cleaned[cursor].second;
        ++cursor;
      }
      Cum c{};
      if (last) c = *last;
      else result.warnings.push_back({name, format_iso_date(day), "no data on or before day; zeros used"});
      const std::int64_t zr = c.rec + c.death;
      std::int64_t zi = c.pos - zr;
      if (zi < 0) {
        result.warnings.push_back({name, format_iso_date(day), "recovered + death exceeds positive; Z_I set to 0"});
        zi = 0;
      }
      if (zr + zi > *population)
        throw std::invalid_argument("region " + name + ": counts exceed population on " + format_iso_date(day));
      region.series.z_r[t] = zr;
      region.series.z_i[t] = zi;
    }
    if (!any_in_window && !last) throw std::invalid_argument("empty window for region " + name);
    result.regions.push_back(std::move(region));
  }
  if (result.regions.empty()) throw std::invalid_argument("empty window: no regions");
  return result;
}

inline void write_ingest_warnings(const fs::path& path, const std::vector<IngestWarning>& warnings) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "region,date,message\n";
  for (const auto& w : warnings)
    out << detail::quote_field(w.region) << ',' << w.date << ',' << detail::quote_field(w.message) << '\n';
}

/// Raw feed rows for one dataset, all series starting at `start`. Z_R is
/// split into recovered and death (every twentieth recovered counted as a
/// death) so both columns are exercised.
inline void write_raw_dataset(const fs::path& path, const std::vector<RegionData>& data, Day start) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "date,region,cumulative_positive,cumulative_recovered,cumulative_death,population\n";
  for (const auto& r : data)
    for (std::size_t t = 0; t < r.series.length(); ++t) {
      const std::int64_t zr = r.series.z_r[t];
      const std::int64_t death = zr / 20;
      out << format_iso_date(start + std::chrono::days{static_cast<int>(t)}) << ','
          << detail::quote_field(r.region_id) << ',' << zr + r.series.z_i[t] << ',' << zr - death << ',' << death << ','
          << r.series.n << '\n';
    }
}

inline void write_population_table(const fs::path& path, const std::vector<RegionData>& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "region,population\n";
  for (const auto& r : data) out << detail::quote_field(r.region_id) << ',' << r.series.n << '\n';
}

// ---------------------------------------------------------------------------
// JSON forms

inline json to_json(const SamplerConfig& c) {
  return json{{"iterations", c.iterations},
              {"burnin", c.burnin},
              {"thin", c.thin},
              {"proposal_sd_w", c.proposal_sd_w},
              {"proposal_sd_param", c.proposal_sd_param},
              {"proposal_sd_loglambda", c.proposal_sd_loglambda},
              {"aux_m", c.aux_m},
              {"seed", c.seed},
              {"adapt", c.adapt}};
}

namespace detail {

template <class T>
void read_field(const json& j, const char* key, T& out, const std::string& prefix) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config field '" + prefix + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Fields absent from `j` keep the values already in `base`.
inline SamplerConfig sampler_config_from_json(const json& j, SamplerConfig base = {}) {
  if (!j.is_object()) throw std::invalid_argument("config field 'sampler' must be an object");
  const std::string p = "sampler.";
  detail::read_field(j, "iterations", base.iterations, p);
  detail::read_field(j, "burnin", base.burnin, p);
  detail::read_field(j, "thin", base.thin, p);
  detail::read_field(j, "proposal_sd_w", base.proposal_sd_w, p);
  detail::read_field(j, "proposal_sd_param", base.proposal_sd_param, p);
  detail::read_field(j, "proposal_sd_loglambda", base.proposal_sd_loglambda, p);
  detail::read_field(j, "aux_m", base.aux_m, p);
  detail::read_field(j, "seed", base.seed, p);
  detail::read_field(j, "adapt", base.adapt, p);
  return base;
}

inline json to_json(const ScenarioSpec& s) {
  json truth = json::object();
  for (Family f : kFamilies) {
    const auto& t = s.truth[index_of(f)];
    truth[family_name(f)] = {{"labels", t.partition.labels()}, {"values", t.values}};
  }
  return json{{"n", s.n},
              {"T", s.days},
              {"region_ids", s.region_ids},
              {"populations", s.populations},
              {"truth", truth},
              {"variances", {{"sigma2_s", s.variances.sigma2_s}, {"sigma2_i", s.variances.sigma2_i}}},
              {"init", {s.init.p_s, s.init.p_i, s.init.p_r}},
              {"replicates", s.replicates},
              {"base_seed", s.base_seed}};
}

/// Scenario from config. Starts from the two-group design (values `low`
/// and `high`, default 0.06 and 0.6) and applies any explicit overrides.
inline ScenarioSpec scenario_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config field 'scenario' must be an object");
  const std::string p = "scenario.";
  std::size_t n = 0, days = 30;
  int replicates = 100;
  std::uint64_t base_seed = 2020;
  double low = 0.06, high = 0.6;
  if (!j.contains("n")) throw std::invalid_argument("config field 'scenario.n' is required");
  detail::read_field(j, "n", n, p);
  detail::read_field(j, "T", days, p);
  detail::read_field(j, "replicates", replicates, p);
  detail::read_field(j, "base_seed", base_seed, p);
  detail::read_field(j, "low", low, p);
  detail::read_field(j, "high", high, p);
  ScenarioSpec spec = make_two_group_scenario(n, days, replicates, base_seed, low, high);
  detail::read_field(j, "region_ids", spec.region_ids, p);
  detail::read_field(j, "populations", spec.populations, p);
  if (j.contains("variances")) {
    detail::read_field(j["variances"], "sigma2_s", spec.variances.sigma2_s, p + "variances.");
    detail::read_field(j["variances"], "sigma2_i", spec.variances.sigma2_i, p + "variances.");
  }
  if (j.contains("init")) {
    std::vector<double> init;
    detail::read_field(j, "init", init, p);
    if (init.size() != 3) throw std::invalid_argument("config field 'scenario.init' needs [p_s, p_i, p_r]");
    spec.init = {init[0], init[1], init[2]};
  }
  if (j.contains("truth")) {
    for (Family f : kFamilies) {
      if (!j["truth"].contains(family_name(f))) continue;
      const json& t = j["truth"][family_name(f)];
      const std::string tp = p + "truth." + family_name(f) + ".";
      std::vector<int> labels;
      std::vector<double> values;
      detail::read_field(t, "labels", labels, tp);
      detail::read_field(t, "values", values, tp);
      auto& truth = spec.truth[index_of(f)];
      if (!labels.empty()) {
        if (!is_canonical(labels))
          throw std::invalid_argument("config field '" + tp + "labels' must be canonical (1..k, first appearance)");
        truth.partition = Partition::from_labels(labels);
      }
      if (!values.empty()) truth.values = values;
    }
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// Chain storage

namespace detail {

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_from(const json& j) {
  return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace detail

inline json chain_header(const ChainOutput& chain) {
  json acc{{"latent", chain.acceptance.latent},
           {"cluster_value", chain.acceptance.cluster_value},
           {"label_change", chain.acceptance.label_change},
           {"lambda", chain.acceptance.lambda}};
  return json{{"format", kChainFormat},
              {"version", kChainFormatVersion},
              {"regions", chain.region_ids},
              {"config", to_json(chain.config)},
              {"acceptance", acc},
              {"draws", chain.draws.size()},
              {"timestamp", {{"wall_seconds", chain.wall_seconds}}}};
}

inline json draw_to_json(const ChainDraw& d) {
  json j = json::object();
  for (Family f : kFamilies) {
    const auto fi = index_of(f);
    j[family_name(f)] = {{"labels", d.partitions[fi].labels()}, {"values", d.region_values[fi]}};
  }
  std::vector<double> s, i;
  for (const auto& v : d.variances) {
    s.push_back(v.sigma2_s);
    i.push_back(v.sigma2_i);
  }
  j["sigma2_s"] = s;
  j["sigma2_i"] = i;
  j["lambda"] = d.lambdas;
  j["log_posterior"] = detail::number_or_null(d.log_posterior);
  return j;
}

inline void write_chain(const fs::path& path, const ChainOutput& chain) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << chain_header(chain).dump() << '\n';
  for (const auto& d : chain.draws) out << draw_to_json(d).dump() << '\n';
  if (!out) throw std::runtime_error("error writing " + path.string());
}

inline ChainOutput read_chain(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": empty chain file");
  ChainOutput chain;
  try {
    const json head = json::parse(line);
    if (head.value("format", "") != kChainFormat) throw std::invalid_argument(path.string() + ": not a chain file");
    if (head.value("version", 0) != kChainFormatVersion)
      throw std::invalid_argument(path.string() + ": unsupported chain version");
    chain.region_ids = head.at("regions").get<std::vector<std::string>>();
    chain.config = sampler_config_from_json(head.at("config"));
    const json& acc = head.at("acceptance");
    chain.acceptance.latent = acc.at("latent").get<double>();
    chain.acceptance.cluster_value = acc.at("cluster_value").get<std::array<double, 3>>();
    chain.acceptance.label_change = acc.at("label_change").get<std::array<double, 3>>();
    chain.acceptance.lambda = acc.at("lambda").get<std::array<double, 3>>();
    if (head.contains("timestamp")) chain.wall_seconds = head["timestamp"].value("wall_seconds", 0.0);

    const std::size_t n = chain.region_ids.size();
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      const json j = json::parse(line);
      ChainDraw d;
      for (Family f : kFamilies) {
        const auto fi = index_of(f);
        const auto labels = j.at(family_name(f)).at("labels").get<std::vector<int>>();
        if (labels.size() != n || !is_canonical(labels))
          throw std::invalid_argument(path.string() + ": malformed partition in draw");
        d.partitions[fi] = Partition::from_labels(labels);
        d.region_values[fi] = j.at(family_name(f)).at("values").get<std::vector<double>>();
        if (d.region_values[fi].size() != n) throw std::invalid_argument(path.string() + ": malformed values in draw");
      }
      const auto s = j.at("sigma2_s").get<std::vector<double>>();
      const auto i = j.at("sigma2_i").get<std::vector<double>>();
      if (s.size() != n || i.size() != n) throw std::invalid_argument(path.string() + ": malformed variances");
      for (std::size_t k = 0; k < n; ++k) d.variances.push_back({s[k], i[k]});
      d.lambdas = j.at("lambda").get<std::array<double, 3>>();
      d.log_posterior = detail::number_from(j.at("log_posterior"));
      chain.draws.push_back(std::move(d));
    }
    if (head.at("draws").get<std::size_t>() != chain.draws.size())
      throw std::invalid_argument(path.string() + ": draw count does not match header");
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return chain;
}

// ---------------------------------------------------------------------------
// Result tables

struct EmittedFiles {
  std::vector<fs::path> paths;
};

inline std::ofstream open_table(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

/// assignments.csv, clusters.csv and r0.csv for a posterior summary.
inline EmittedFiles emit_results(const PosteriorSummary& summary, const fs::path& outdir) {
  fs::create_directories(outdir);
  EmittedFiles files;

  {
    const auto path = outdir / "assignments.csv";
    auto out = open_table(path);
    out << "region,family,cluster\n";
    for (Family f : kFamilies)
      for (std::size_t i = 0; i < summary.region_ids.size(); ++i)
        out << detail::quote_field(summary.region_ids[i]) << ',' << family_name(f) << ','
            << summary.families[index_of(f)].partition.label(i) << '\n';
    files.paths.push_back(path);
  }
  {
    const auto path = outdir / "clusters.csv";
    auto out = open_table(path);
    out << "family,cluster,point,hpd_lo,hpd_hi\n";
    for (Family f : kFamilies)
      for (const auto& c : summary.families[index_of(f)].clusters)
        out << family_name(f) << ',' << c.cluster << ',' << fmt6(c.point) << ',' << fmt6(c.hpd.lower) << ','
            << fmt6(c.hpd.upper) << '\n';
    files.paths.push_back(path);
  }
  {
    const auto path = outdir / "r0.csv";
    auto out = open_table(path);
    out << "region,r0,r0_draw_mean,r0_hpd_lo,r0_hpd_hi\n";
    for (const auto& r : summary.r0)
      out << detail::quote_field(r.region_id) << ',' << fmt6(r.r0) << ',' << fmt6(r.r0_draw_mean) << ','
          << fmt6(r.r0_hpd.lower) << ',' << fmt6(r.r0_hpd.upper) << '\n';
    files.paths.push_back(path);
  }
  return files;
}

/// metrics.csv (per cluster-level parameter), grouping.csv (per family) and
/// replicates.csv (per replicate and family).
inline EmittedFiles emit_results(const MetricsReport& report, const fs::path& outdir) {
  fs::create_directories(outdir);
  EmittedFiles files;
  {
    const auto path = outdir / "metrics.csv";
    auto out = open_table(path);
    out << "family,cluster,truth,members,mb,mab,msd\n";
    for (const auto& p : report.parameters)
      out << family_name(p.family) << ',' << p.cluster << ',' << fmt6(p.truth) << ',' << p.members << ','
          << fmt6(p.mb) << ',' << fmt6(p.mb) << ',' << fmt6(p.msd) << '\n';
    files.paths.push_back(path);
  }
  {
    const auto path = outdir / "grouping.csv";
    auto out = open_table(path);
    out << "family,mri,sd_ri,mean_k,sd_k\n";
    for (const auto& g : report.grouping)
      out << family_name(g.family) << ',' << fmt6(g.mri) << ',' << fmt6(g.sd_ri) << ',' << fmt6(g.mean_k) << ','
          << fmt6(g.sd_k) << '\n';
    files.paths.push_back(path);
  }
  {
    const auto path = outdir / "replicates.csv";
    auto out = open_table(path);
    out << "replicate,family,rand_index,k_hat\n";
    for (const auto& r : report.replicates)
      for (Family f : kFamilies) {
        const auto& fr = r.families[index_of(f)];
        out << r.replicate << ',' << family_name(f) << ',' << fmt6(fr.rand_index) << ',' << fr.k_hat << '\n';
      }
    files.paths.push_back(path);
  }
  return files;
}

/// Per-replicate record written as soon as a replicate finishes.
inline fs::path write_replicate_record(const ReplicateRecord& rec, const std::vector<std::string>& region_ids,
                                       const fs::path& dir) {
  fs::create_directories(dir);
  char name[48];
  std::snprintf(name, sizeof name, "replicate_%04d.csv", rec.replicate);
  const auto path = dir / name;
  auto out = open_table(path);
  out << "replicate,region,family,cluster,dahl_estimate,posterior_mean\n";
  for (Family f : kFamilies) {
    const auto& fr = rec.families[index_of(f)];
    for (std::size_t i = 0; i < region_ids.size(); ++i)
      out << rec.replicate << ',' << detail::quote_field(region_ids[i]) << ',' << family_name(f) << ','
          << fr.partition.label(i) << ',' << fmt6(fr.dahl_estimate[i]) << ',' << fmt6(fr.posterior_mean[i]) << '\n';
  }
  return path;
}

/// Run manifest; wall time and clock time live under "timestamp".
inline void write_manifest(const fs::path& path, const std::string& mode, const json& config, std::uint64_t seed,
                           double wall_seconds) {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  json m{{"tool", "sirsmfm"},
         {"version", kVersion},
         {"mode", mode},
         {"seed", seed},
         {"config", config},
         {"timestamp", {{"unix_seconds", secs}, {"wall_seconds", wall_seconds}}}};
  auto out = open_table(path);
  out << m.dump(2) << '\n';
}

}  // namespace sirsmfm
