#include "wpt/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "wpt/error.hpp"

namespace wpt {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct EpisodeTally {
  double activated = 0.0;
  double satisfied = 0.0;
  double efficiency = 0.0;
  double reward = 0.0;
  std::size_t slots = 0;

  void add(const SlotOutcome& o) {
    activated += static_cast<double>(o.activated);
    satisfied += o.user_satisfied ? 1.0 : 0.0;
    efficiency += o.efficiency;
    reward += (o.devices_satisfied && o.user_satisfied) ? 1.0 : 0.0;
    ++slots;
  }

  EpisodeMetrics close(std::size_t episode) const {
    const double n = static_cast<double>(slots);
    return {episode, activated / n, satisfied / n, efficiency / n, reward / n};
  }
};

}  // namespace

double metric_value(const EpisodeMetrics& m, std::size_t metric) {
  switch (metric) {
    case 0: return m.activated_devices;
    case 1: return m.satisfied_fraction;
    case 2: return m.energy_efficiency;
    case 3: return m.reward;
    default: throw ContractViolation("metric index out of range");
  }
}

std::unique_ptr<Policy> make_policy(AgentKind kind, const Config& config, const Environment& env,
                                    std::uint64_t seed) {
  const auto objective = config.experiment.objective;
  switch (kind) {
    case AgentKind::kDqn:
      return std::make_unique<DqnAgent>(env.params(), config.dqn, objective, seed);
    case AgentKind::kTrl:
      return std::make_unique<TabularAgent>(env.params(), config.trl, objective, seed);
    case AgentKind::kMpc:
      return std::make_unique<mpc::MpcPolicy>(env.params(), env.state(), config.mpc, objective);
    case AgentKind::kGreedy:
      return std::make_unique<GreedyPolicy>(env.params());
    case AgentKind::kRandom:
      return std::make_unique<RandomPolicy>(env.params(), seed);
    case AgentKind::kNoPolicy:
      return std::make_unique<NoPolicy>(env.params());
  }
  throw ContractViolation("unhandled agent kind");
}

RunResult run_single(const Config& config, AgentKind agent, std::uint64_t seed,
                     const SlotObserver& observer) {
  Environment env(config.env, seed);
  auto policy = make_policy(agent, config, env, seed);
  const auto& x = config.experiment;

  RunResult result;
  result.agent = agent;
  result.seed = seed;
  EpisodeTally tally;
  for (std::size_t t = 0; t < x.total_slots; ++t) {
    const EnvState before = env.state();
    const double power = policy->act(before);
    const SlotOutcome outcome = env.step(power);
    policy->learn(before, outcome, env.state());
    if (observer) observer(before, outcome);
    tally.add(outcome);
    if (tally.slots == x.episode_length) {
      const auto m = tally.close(result.episodes.size());
      for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        if (!std::isfinite(metric_value(m, k))) {
          throw std::runtime_error("non-finite " + std::string(kMetricNames[k]) + " for agent " +
                                   to_string(agent) + " seed " + std::to_string(seed) +
                                   " episode " + std::to_string(m.episode));
        }
      }
      result.episodes.push_back(m);
      tally = {};
    }
  }

  const std::size_t first = x.collection_slot / x.episode_length;
  if (first < result.episodes.size()) {
    EpisodeMetrics s;
    const double n = static_cast<double>(result.episodes.size() - first);
    for (std::size_t e = first; e < result.episodes.size(); ++e) {
      s.activated_devices += result.episodes[e].activated_devices / n;
      s.satisfied_fraction += result.episodes[e].satisfied_fraction / n;
      s.energy_efficiency += result.episodes[e].energy_efficiency / n;
      s.reward += result.episodes[e].reward / n;
    }
    s.episode = first;
    result.summary = s;
    result.has_summary = true;
  }
  if (const auto* dqn = dynamic_cast<const DqnAgent*>(policy.get())) {
    result.network = dqn->evaluation();
  }
  return result;
}

void parallel_for(std::size_t tasks, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, tasks));
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

ExperimentResult run_experiment(const Config& config) {
  config.validate();
  const auto& x = config.experiment;
  ExperimentResult result;
  result.runs.resize(x.agents.size() * x.seeds.size());
  parallel_for(result.runs.size(), x.workers, [&](std::size_t i) {
    const auto agent = x.agents[i / x.seeds.size()];
    const auto seed = x.seeds[i % x.seeds.size()];
    result.runs[i] = run_single(config, agent, seed);
  });
  return result;
}

void write_episode_csv(std::ostream& out, const ExperimentResult& result) {
  out << "episode_index,agent,seed,activated_devices,satisfied_fraction,energy_efficiency,reward\n";
  for (const auto& run : result.runs) {
    for (const auto& e : run.episodes) {
      out << e.episode << ',' << to_string(run.agent) << ',' << run.seed << ','
          << fmt_double(e.activated_devices) << ',' << fmt_double(e.satisfied_fraction) << ','
          << fmt_double(e.energy_efficiency) << ',' << fmt_double(e.reward) << '\n';
    }
  }
}

namespace {

struct AgentSummary {
  AgentKind agent;
  std::array<double, 4> mean{};
  std::array<double, 4> stderr_{};
  std::size_t runs = 0;
};

std::vector<AgentSummary> summarize(const ExperimentResult& result) {
  std::vector<AgentSummary> out;
  for (const auto& run : result.runs) {
    if (!run.has_summary) continue;
    if (out.empty() || out.back().agent != run.agent) out.push_back({run.agent});
  }
  for (auto& s : out) {
    std::vector<const EpisodeMetrics*> xs;
    for (const auto& run : result.runs) {
      if (run.agent == s.agent && run.has_summary) xs.push_back(&run.summary);
    }
    s.runs = xs.size();
    const double n = static_cast<double>(xs.size());
    for (std::size_t k = 0; k < 4; ++k) {
      double mean = 0.0;
      for (const auto* m : xs) mean += metric_value(*m, k);
      mean /= n;
      double ss = 0.0;
      for (const auto* m : xs) ss += std::pow(metric_value(*m, k) - mean, 2);
      s.mean[k] = mean;
      s.stderr_[k] = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    }
  }
  return out;
}

}  // namespace

void write_summary_csv(std::ostream& out, const ExperimentResult& result) {
  out << "agent,metric,mean,stderr,runs\n";
  for (const auto& s : summarize(result)) {
    for (std::size_t k = 0; k < 4; ++k) {
      out << to_string(s.agent) << ',' << kMetricNames[k] << ',' << fmt_double(s.mean[k]) << ','
          << fmt_double(s.stderr_[k]) << ',' << s.runs << '\n';
    }
  }
}

std::string summary_table(const ExperimentResult& result) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %18s %18s %18s %18s\n", "agent", "activated",
                "satisfied", "efficiency", "reward");
  out << line;
  for (const auto& s : summarize(result)) {
    std::array<std::string, 4> cells;
    for (std::size_t k = 0; k < 4; ++k) {
      char cell[64];
      std::snprintf(cell, sizeof cell, "%.4f +- %.4f", s.mean[k], s.stderr_[k]);
      cells[k] = cell;
    }
    std::snprintf(line, sizeof line, "%-10s %18s %18s %18s %18s\n", to_string(s.agent).c_str(),
                  cells[0].c_str(), cells[1].c_str(), cells[2].c_str(), cells[3].c_str());
    out << line;
  }
  return out.str();
}

Config with_axis_value(const Config& config, SweepAxis axis, double value) {
  if (!(value > 0.0)) throw ConfigError("sweep value must be positive");
  Config c = config;
  switch (axis) {
    case SweepAxis::kPanelArea:
      c.env.solar.panel_area_cm2 = value;
      break;
    case SweepAxis::kDeviceDistance: {
      const double width = c.env.device_distance_max_m - c.env.device_distance_min_m;
      if (value - width <= 0.0) throw ConfigError("device_distance sweep value below ring width");
      c.env.device_distance_min_m = value - width;
      c.env.device_distance_max_m = value;
      break;
    }
    case SweepAxis::kUserDistance:
      if (value < c.env.user_distance_min_m) {
        throw ConfigError("user_distance sweep value below user_distance_min_m");
      }
      c.env.user_distance_max_m = value;
      break;
  }
  return c;
}

SweepResult sweep(const Config& config, SweepAxis axis, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("experiment.sweep.values: must be nonempty");
  std::vector<Config> configs;
  for (double v : values) {
    configs.push_back(with_axis_value(config, axis, v));
    configs.back().validate();
  }
  const auto& x = config.experiment;
  const std::size_t per_value = x.agents.size() * x.seeds.size();
  std::vector<RunResult> runs(values.size() * per_value);
  parallel_for(runs.size(), x.workers, [&](std::size_t i) {
    const std::size_t v = i / per_value;
    const std::size_t r = i % per_value;
    runs[i] = run_single(configs[v], x.agents[r / x.seeds.size()], x.seeds[r % x.seeds.size()]);
  });

  SweepResult result{axis, {}};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i].has_summary) continue;
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
      result.rows.push_back({values[i / per_value], runs[i].agent, runs[i].seed, k,
                             metric_value(runs[i].summary, k)});
    }
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << to_string(result.axis) << ",agent,seed,metric,value\n";
  for (const auto& r : result.rows) {
    out << fmt_double(r.axis_value) << ',' << to_string(r.agent) << ',' << r.seed << ','
        << kMetricNames[r.metric] << ',' << fmt_double(r.value) << '\n';
  }
}

}  // namespace wpt
