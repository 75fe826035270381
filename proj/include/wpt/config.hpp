#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "wpt/agents.hpp"
#include "wpt/env.hpp"
#include "wpt/mpc.hpp"

namespace wpt {

enum class AgentKind { kDqn, kTrl, kMpc, kGreedy, kRandom, kNoPolicy };

std::string to_string(AgentKind kind);
AgentKind parse_agent(const std::string& name);

enum class SweepAxis { kPanelArea, kDeviceDistance, kUserDistance };

std::string to_string(SweepAxis axis);
SweepAxis parse_axis(const std::string& name);

struct SweepConfig {
  SweepAxis axis = SweepAxis::kPanelArea;
  std::vector<double> values;
};

struct ExperimentConfig {
  Objective objective = Objective::kSatisfaction;
  std::vector<AgentKind> agents{AgentKind::kDqn,    AgentKind::kTrl,    AgentKind::kMpc,
                                AgentKind::kGreedy, AgentKind::kRandom, AgentKind::kNoPolicy};
  std::size_t total_slots = 150'000;
  std::size_t episode_length = 3'000;
  std::size_t collection_slot = 120'000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t workers = 1;
  SweepConfig sweep;

  void validate() const;
};

struct Config {
  EnvParams env;
  DqnConfig dqn;
  TabularConfig trl;
  mpc::MpcConfig mpc;
  ExperimentConfig experiment;

  void validate() const;
};

// Strict parse: unknown keys and type mismatches raise ConfigError naming the
// key path (for example "dqn.learning_rte"). Missing keys keep defaults.
Config parse_config(const nlohmann::json& doc);
Config load_config(const std::filesystem::path& path);

nlohmann::json to_json(const Config& config);

}  // namespace wpt
