// Apache License, Version 2.0, refer to LICENSE.txt

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sirsmfm/cli.hpp"

namespace {

struct Flags {
  std::string config;
  sirsmfm::cli::Overrides overrides;
};

CLI::App* add_mode(CLI::App& app, const char* name, const char* help, Flags& flags) {
  CLI::App* sub = app.add_subcommand(name, help);
  auto& o = flags.overrides;
  sub->add_option("--config", flags.config, "JSON run configuration");
  sub->add_option("--input", o.input, "input file (raw data for fit, chain file for summarize)");
  sub->add_option("--out", o.output, "output directory");
  sub->add_option("--window", o.window, "date window start,end (inclusive, YYYY-MM-DD)");
  sub->add_option("--seed", o.seed, "sampler seed");
  sub->add_option("--iterations", o.iterations, "total MCMC iterations");
  sub->add_option("--burnin", o.burnin, "burn-in iterations");
  sub->add_option("--thin", o.thin, "thinning interval");
  sub->add_option("--threads", o.threads, "worker threads for study replicates (0: all cores)");
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  using sirsmfm::cli::Mode;
  CLI::App app{"Bayesian heterogeneity learning for the SIRS model with MFM priors"};
  app.require_subcommand(1);
  Flags flags;
  const std::pair<Mode, CLI::App*> modes[] = {
      {Mode::fit, add_mode(app, "fit", "fit the model to a raw data file and summarise the posterior", flags)},
      {Mode::simulate, add_mode(app, "simulate", "write a synthetic raw data file for a scenario", flags)},
      {Mode::study, add_mode(app, "study", "run the replicated simulation study", flags)},
      {Mode::summarize, add_mode(app, "summarize", "summarise a stored chain", flags)},
  };
  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [mode, sub] : modes) {
      if (!sub->parsed()) continue;
      std::optional<std::filesystem::path> config;
      if (!flags.config.empty()) config = flags.config;
      const auto run_config = sirsmfm::cli::load_run_config(mode, config, flags.overrides);
      sirsmfm::cli::run(run_config);
      std::printf("%s: wrote %s\n", sirsmfm::cli::mode_name(mode), run_config.output.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
