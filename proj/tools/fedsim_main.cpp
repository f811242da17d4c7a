#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/runner.hpp"
#include "fedsim/version.hpp"

namespace {

int run_command(const std::string& config, const std::optional<std::string>& output_dir,
                const std::optional<std::uint64_t>& seed) {
  const fedsim::ExperimentFile file = fedsim::parse_config(config, seed);
  fedsim::RunOptions options;
  if (output_dir) options.output_dir = *output_dir;
  options.log = [](const std::string& line) { std::cerr << line << '\n'; };
  for (const auto& path : fedsim::run_experiments(file, options)) std::cout << path.string() << '\n';
  return 0;
}

int validate_command(const std::string& config, const std::optional<std::uint64_t>& seed) {
  const fedsim::ExperimentFile file = fedsim::parse_config(config, seed);
  if (file.experiments.empty()) std::cerr << "warning: the config defines no experiments\n";
  for (const auto& s : file.experiments) {
    std::cout << s.name << ": " << fedsim::to_string(s.federation.strategy) << ", " << s.federation.rounds
              << " rounds, " << s.federation.client_count << " clients, " << s.federation.attack_assignments.size()
              << " attacked\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated-learning simulator with FedBayes aggregation"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run every experiment in a config file");
  run->add_option("config", config, "Experiment config file")->required();
  run->add_option("--output-dir", output_dir, "Write outputs here instead of each section's output_dir");
  run->add_option("--seed", seed, "Replace every master_seed");

  auto* validate = app.add_subcommand("validate", "Parse and check a config file without running it");
  validate->add_option("config", config, "Experiment config file")->required();
  validate->add_option("--seed", seed, "Replace every master_seed");

  app.add_subcommand("version", "Print the version");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config, output_dir, seed);
    if (validate->parsed()) return validate_command(config, seed);
    std::cout << "fedsim " << fedsim::kVersion << '\n';
    return 0;
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
