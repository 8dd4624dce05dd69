#include <CLI11.hpp>

#include <iostream>
#include <thread>

#include "oddcert/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sector certificates for odd-function state feedback"};
  app.require_subcommand(1, 1);

  std::string config;
  std::string out_dir;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::uint64_t seed = 0;
  bool strict_energy = false;
  double region_cap = 0.0;

  for (const char* name : {"certify", "compare", "simulate", "sweep"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "analysis config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--workers", workers, "parallel workers")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "seed (overrides the config seed)");
    sub->add_flag("--strict-energy", strict_energy, "use f_bar^2 in the chi f terms");
    sub->add_option("--region-cap", region_cap, "substitute for an unbounded x_hi")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : oddcert::cli::kExitInputError;
  }

  const auto* sub = app.get_subcommands().front();
  oddcert::cli::Overrides ov;
  if (sub->count("--seed")) ov.seed = seed;
  if (sub->count("--region-cap")) ov.region_cap = region_cap;
  if (sub->count("--out")) ov.out_dir = out_dir;
  ov.strict_energy = strict_energy;
  return oddcert::cli::run_command(sub->get_name(), config, ov, workers, std::cerr);
}
