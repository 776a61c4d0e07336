#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace esqpt::cli;
  CLI::App app{"Extended Rabi model: spectra, ramps, trajectories and diagnostics"};
  app.require_subcommand(1);

  Invocation inv;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double tolerance_scale = 1.0;
  for (const std::string& name : subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", inv.config, "JSON or TOML run configuration")->required();
    sub->add_option("--out", inv.out, "output directory")->required();
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--workers", workers, "worker threads, 0 = hardware concurrency");
    sub->add_option("--tolerance-scale", tolerance_scale, "multiplies integrator tolerances")
        ->check(CLI::PositiveNumber);
    sub->callback([&, name, sub] {
      inv.subcommand = name;
      if (sub->count("--seed")) inv.overrides.seed = seed;
      if (sub->count("--workers")) inv.overrides.workers = workers;
      if (sub->count("--tolerance-scale")) inv.overrides.tolerance_scale = tolerance_scale;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigFailure;
  }
  return run(inv, std::cout);
}
