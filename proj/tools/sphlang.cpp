#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sphlang/experiment.hpp"

namespace {

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw sphlang::ConfigError("values", "not a number: \"" + item + "\"");
    out.push_back(v);
  }
  return out;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sphlang::IoError("cannot read " + path);
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.contains("config") && j.contains("version") && j.contains("seeds")) return j.at("config");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw sphlang::ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Averaged spherical Langevin dynamics experiments"};
  app.set_version_flag("--version", std::string(sphlang::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  sphlang::RunOptions options;
  options.log = &std::cerr;
  app.add_option("--workers", options.workers, "Seeds run concurrently")->check(CLI::PositiveNumber);
  app.add_option("--seed-offset", options.seed_offset, "Added to every seed in the config");
  app.add_flag("--large", options.large, "Allow runs whose memory estimate exceeds 1 GiB");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run every seed of a config (or manifest) and write CSVs + manifest.json");
  run->add_option("config", config_path, "Config JSON or a previous manifest.json")->required();

  std::string sweep_config, param, values;
  auto* sweep = app.add_subcommand("sweep", "Vary one numeric field and write a long-format summary table");
  sweep->add_option("config", sweep_config, "Base config JSON")->required();
  sweep->add_option("--param", param, "Field to vary, e.g. eta or online_sgd.eta")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();

  std::string oracle_config;
  auto* oracle = app.add_subcommand("oracle", "Monte-Carlo stationary averages for each seed's instance");
  oracle->add_option("config", oracle_config, "Config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto result = sphlang::run(sphlang::ExperimentConfig::from_json(read_json(config_path)), options);
      std::cout << (result.config.output_dir / "manifest.json").string() << "\n";
      return result.all_ok() ? 0 : 1;
    }
    if (*sweep) {
      const auto runs = sphlang::sweep(read_json(sweep_config), param, parse_values(values), options);
      bool ok = true;
      for (const auto& r : runs) ok = ok && r.all_ok();
      std::cout << (runs.front().config.output_dir.parent_path() / ("sweep_" + param + ".csv")).string() << "\n";
      return ok ? 0 : 1;
    }
    if (*oracle) {
      const auto cfg = sphlang::ExperimentConfig::from_json(read_json(oracle_config));
      sphlang::oracle(cfg, options);
      std::cout << (cfg.output_dir / "oracle.json").string() << "\n";
      return 0;
    }
  } catch (const sphlang::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sphlang::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
