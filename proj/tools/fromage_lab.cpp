#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fromage/config.hpp"
#include "fromage/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Layerwise-relative optimization lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::filesystem::path out = "runs";
  std::uint64_t seed = 0;
  for (const std::string& name : fromage::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "INI run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output root (default: runs)");
    sub->add_option("--seed", seed, "Override the config seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : fromage::kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const bool seed_given = app.get_subcommands().front()->count("--seed") > 0;
  try {
    fromage::Config config = fromage::Config::load(config_path);
    if (seed_given) config.set("seed", std::to_string(seed));
    return fromage::run_command(command, config, out, std::cout);
  } catch (const fromage::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fromage::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fromage::kExitFailure;
  }
}
