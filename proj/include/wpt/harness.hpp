#pragma once

// Seeded multi-run experiments: every (agent, seed) pair runs for T slots,
// metrics are tallied over tumbling episodes, and results are merged in a
// fixed order so output does not depend on the worker count.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wpt/config.hpp"
#include "wpt/nn.hpp"

namespace wpt {

struct EpisodeMetrics {
  std::size_t episode = 0;
  double activated_devices = 0.0;   // mean n_t
  double satisfied_fraction = 0.0;  // mean J_t
  double energy_efficiency = 0.0;   // mean eta_t (1/W)
  double reward = 0.0;              // mean I_t * J_t
};

inline constexpr std::array<const char*, 4> kMetricNames{
    "activated_devices", "satisfied_fraction", "energy_efficiency", "reward"};

double metric_value(const EpisodeMetrics& m, std::size_t metric);

struct RunResult {
  AgentKind agent = AgentKind::kGreedy;
  std::uint64_t seed = 0;
  std::vector<EpisodeMetrics> episodes;
  // Mean over episodes starting at or after the collection slot; nullopt-like
  // when there are none (has_summary false).
  EpisodeMetrics summary;
  bool has_summary = false;
  // Final evaluation network of a DQN run.
  std::optional<nn::Mlp> network;
};

struct ExperimentResult {
  std::vector<RunResult> runs;  // config agent order, then seed order
};

using SlotObserver = std::function<void(const EnvState& before, const SlotOutcome& outcome)>;

std::unique_ptr<Policy> make_policy(AgentKind kind, const Config& config, const Environment& env,
                                    std::uint64_t seed);

// Throws std::runtime_error if a metric turns non-finite.
RunResult run_single(const Config& config, AgentKind agent, std::uint64_t seed,
                     const SlotObserver& observer = {});

// Runs `tasks` calls of `fn(i)` on up to `workers` threads.
void parallel_for(std::size_t tasks, std::size_t workers, const std::function<void(std::size_t)>& fn);

ExperimentResult run_experiment(const Config& config);

void write_episode_csv(std::ostream& out, const ExperimentResult& result);
// agent, metric, mean, stderr, runs over per-seed post-collection summaries.
void write_summary_csv(std::ostream& out, const ExperimentResult& result);
std::string summary_table(const ExperimentResult& result);

struct SweepRow {
  double axis_value;
  AgentKind agent;
  std::uint64_t seed;
  std::size_t metric;
  double value;
};

struct SweepResult {
  SweepAxis axis;
  std::vector<SweepRow> rows;
};

// Copy of `config` with the sweep axis set to `value`. device_distance moves
// the device ring's outer radius keeping its width; user_distance sets d_max.
Config with_axis_value(const Config& config, SweepAxis axis, double value);

SweepResult sweep(const Config& config, SweepAxis axis, const std::vector<double>& values);

void write_sweep_csv(std::ostream& out, const SweepResult& result);

}  // namespace wpt
