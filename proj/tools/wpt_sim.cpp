// Command-line front end: run an experiment, run a parameter sweep, or check
// a configuration file.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "wpt/config.hpp"
#include "wpt/error.hpp"
#include "wpt/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "results";
  std::size_t workers = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "Configuration file (JSON); defaults if omitted");
  cmd->add_option("-s,--seed", o.seeds, "Seed override (repeatable)");
  cmd->add_option("-o,--out", o.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("-j,--workers", o.workers, "Worker threads (overrides config)");
}

wpt::Config load(const CommonOptions& o) {
  wpt::Config c = o.config_path.empty() ? wpt::parse_config(nlohmann::json::object())
                                        : wpt::load_config(o.config_path);
  if (!o.seeds.empty()) c.experiment.seeds = o.seeds;
  if (o.workers > 0) c.experiment.workers = o.workers;
  c.validate();
  return c;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solar-powered AP transmit-power control simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  std::string checkpoint_dir;
  auto* run = app.add_subcommand("run", "Run every configured agent and seed");
  add_common(run, run_opts);
  run->add_option("--checkpoints", checkpoint_dir,
                  "Write each DQN run's final network to this directory");

  CommonOptions sweep_opts;
  std::string axis;
  std::vector<double> values;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep panel area, device or user distance");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--axis", axis, "panel_area | device_distance | user_distance");
  sweep_cmd->add_option("--values", values, "Axis values")->delimiter(',');

  std::string validate_path;
  auto* validate = app.add_subcommand("validate-config", "Parse and check a configuration file");
  validate->add_option("config", validate_path, "Configuration file")->required();

  auto* dump = app.add_subcommand("print-config", "Print the default configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      wpt::load_config(validate_path);
      std::cout << validate_path << ": ok\n";
      return 0;
    }
    if (*dump) {
      std::cout << wpt::to_json(wpt::parse_config(nlohmann::json::object())).dump(2) << '\n';
      return 0;
    }
    if (*run) {
      const auto config = load(run_opts);
      fs::create_directories(run_opts.out_dir);
      const auto result = wpt::run_experiment(config);
      auto episodes = open_out(fs::path(run_opts.out_dir) / "episodes.csv");
      wpt::write_episode_csv(episodes, result);
      auto summary = open_out(fs::path(run_opts.out_dir) / "summary.csv");
      wpt::write_summary_csv(summary, result);
      const auto table = wpt::summary_table(result);
      auto text = open_out(fs::path(run_opts.out_dir) / "summary.txt");
      text << table;
      std::cout << table;
      if (!checkpoint_dir.empty()) {
        fs::create_directories(checkpoint_dir);
        for (const auto& r : result.runs) {
          if (!r.network) continue;
          auto out = open_out(fs::path(checkpoint_dir) /
                              ("dqn_seed" + std::to_string(r.seed) + ".mlp"));
          r.network->save(out);
        }
      }
      return 0;
    }
    if (*sweep_cmd) {
      auto config = load(sweep_opts);
      if (!axis.empty()) config.experiment.sweep.axis = wpt::parse_axis(axis);
      if (!values.empty()) config.experiment.sweep.values = values;
      fs::create_directories(sweep_opts.out_dir);
      const auto result =
          wpt::sweep(config, config.experiment.sweep.axis, config.experiment.sweep.values);
      auto out = open_out(fs::path(sweep_opts.out_dir) / "sweep.csv");
      wpt::write_sweep_csv(out, result);
      std::cout << "wrote " << result.rows.size() << " rows to "
                << (fs::path(sweep_opts.out_dir) / "sweep.csv").string() << '\n';
      return 0;
    }
  } catch (const wpt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
