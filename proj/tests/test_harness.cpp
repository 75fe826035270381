#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <string>

#include "wpt/error.hpp"
#include "wpt/harness.hpp"

using namespace wpt;
using nlohmann::json;

namespace {

Config small_config() {
  Config c;
  auto& x = c.experiment;
  x.agents = {AgentKind::kTrl, AgentKind::kMpc, AgentKind::kGreedy, AgentKind::kRandom,
              AgentKind::kNoPolicy};
  x.total_slots = 1'500;
  x.episode_length = 300;
  x.collection_slot = 900;
  x.seeds = {1, 2, 3};
  c.dqn.hidden = {8};
  c.dqn.minibatch = 16;
  c.dqn.replay_start = 300;
  return c;
}

std::string episodes_csv(const ExperimentResult& r) {
  std::ostringstream out;
  write_episode_csv(out, r);
  return out.str();
}

std::string summary_csv(const ExperimentResult& r) {
  std::ostringstream out;
  write_summary_csv(out, r);
  return out.str();
}

std::size_t lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

}  // namespace

TEST_CASE("zero-slot dry run") {
  Config c = small_config();
  c.experiment.total_slots = 0;
  c.experiment.collection_slot = 0;
  const auto r = run_experiment(c);
  CHECK(r.runs.size() == c.experiment.agents.size() * c.experiment.seeds.size());
  for (const auto& run : r.runs) {
    CHECK(run.episodes.empty());
    CHECK_FALSE(run.has_summary);
  }
  CHECK(lines(episodes_csv(r)) == 1);
  CHECK(lines(summary_csv(r)) == 1);
}

TEST_CASE("episode CSV schema and row count") {
  Config c = small_config();
  c.experiment.agents.insert(c.experiment.agents.begin(), AgentKind::kDqn);
  const auto r = run_experiment(c);
  const auto csv = episodes_csv(r);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "episode_index,agent,seed,activated_devices,satisfied_fraction,energy_efficiency,reward");
  const std::size_t episodes = c.experiment.total_slots / c.experiment.episode_length;
  const std::size_t rows = episodes * c.experiment.agents.size() * c.experiment.seeds.size();
  CHECK(lines(csv) == rows + 1);
  // Each row carries one value per metric.
  std::string row;
  std::size_t values = 0;
  while (std::getline(in, row)) values += std::count(row.begin(), row.end(), ',') - 2;
  CHECK(values == rows * kMetricNames.size());
  CHECK(csv.find('\r') == std::string::npos);

  const auto sum = summary_csv(r);
  CHECK(sum.rfind("agent,metric,mean,stderr,runs\n", 0) == 0);
  CHECK(lines(sum) == 1 + c.experiment.agents.size() * kMetricNames.size());
  CHECK(summary_table(r).find("no_policy") != std::string::npos);
}

TEST_CASE("metric ranges and identities") {
  Config c = small_config();
  const auto r = run_experiment(c);
  for (const auto& run : r.runs) {
    for (const auto& e : run.episodes) {
      CHECK(e.satisfied_fraction >= 0.0);
      CHECK(e.satisfied_fraction <= 1.0);
      CHECK(e.activated_devices >= 0.0);
      CHECK(e.activated_devices <= double(c.env.num_devices));
      CHECK(e.reward >= 0.0);
      CHECK(e.reward <= e.satisfied_fraction + 1e-12);
    }
  }
}

TEST_CASE("reward is bounded by the device and user indicators") {
  Config c = small_config();
  for (auto agent : c.experiment.agents) {
    double i_sum = 0.0, j_sum = 0.0, r_sum = 0.0;
    const auto run = run_single(c, agent, 4, [&](const EnvState&, const SlotOutcome& o) {
      i_sum += o.devices_satisfied;
      j_sum += o.user_satisfied;
      r_sum += o.devices_satisfied && o.user_satisfied;
    });
    double reward = 0.0;
    for (const auto& e : run.episodes) reward += e.reward * c.experiment.episode_length;
    CHECK(reward == doctest::Approx(r_sum));
    CHECK(r_sum <= std::min(i_sum, j_sum));
  }
}

TEST_CASE("summary averages the episodes after the collection slot") {
  Config c = small_config();
  const auto run = run_single(c, AgentKind::kRandom, 2);
  REQUIRE(run.has_summary);
  double mean = 0.0;
  for (std::size_t e = 3; e < 5; ++e) mean += run.episodes[e].energy_efficiency / 2.0;
  CHECK(run.summary.energy_efficiency == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("same config twice gives identical CSV") {
  Config c = small_config();
  c.experiment.agents.push_back(AgentKind::kDqn);
  const auto a = episodes_csv(run_experiment(c));
  const auto b = episodes_csv(run_experiment(c));
  CHECK(a == b);
}

TEST_CASE("worker count does not change output") {
  Config c = small_config();
  const auto serial = run_experiment(c);
  c.experiment.workers = 4;
  const auto parallel = run_experiment(c);
  CHECK(episodes_csv(serial) == episodes_csv(parallel));
  CHECK(summary_csv(serial) == summary_csv(parallel));
}

TEST_CASE("agents share environment randomness per seed") {
  Config c = small_config();
  std::vector<double> arrivals_a, arrivals_b;
  run_single(c, AgentKind::kGreedy, 5,
             [&](const EnvState&, const SlotOutcome& o) { arrivals_a.push_back(o.user_gain); });
  run_single(c, AgentKind::kRandom, 5,
             [&](const EnvState&, const SlotOutcome& o) { arrivals_b.push_back(o.user_gain); });
  CHECK(arrivals_a == arrivals_b);
}

TEST_CASE("greedy scores exactly 5 per watt when both user types are satisfied") {
  Config c = small_config();
  c.env.unlimited_energy = true;
  std::size_t full = 0;
  run_single(c, AgentKind::kGreedy, 1, [&](const EnvState&, const SlotOutcome& o) {
    CHECK(o.power_mw == 200.0);
    if (o.devices_satisfied && o.user_satisfied) {
      CHECK(o.efficiency == 5.0);
      ++full;
    }
  });
  CHECK(full > 0);
}

TEST_CASE("no-policy satisfies every user it can reach") {
  Config c = small_config();
  c.env.unlimited_energy = true;
  const auto& p = c.env;
  std::size_t reachable = 0, served = 0, slots = 0;
  const auto run = run_single(c, AgentKind::kNoPolicy, 1, [&](const EnvState& s, const SlotOutcome& o) {
    ++slots;
    const double need = p.ap.noise_w * (std::exp2(p.rate_min_bps / p.ap.bandwidth_hz) - 1.0) /
                        s.user_gain * 1e3;
    if (need <= p.ap.max_power_mw) {
      ++reachable;
      served += o.user_satisfied;
    }
  });
  CHECK(served == reachable);
  CHECK(double(reachable) / double(slots) > 0.99);
}

TEST_CASE("non-finite metrics abort the run") {
  Config c = small_config();
  c.env.unlimited_energy = true;
  c.env.ap.max_power_mw = 0.0;  // invalid on purpose: validation rejects it first
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
}

TEST_CASE("single-value sweep matches run_experiment") {
  Config c = small_config();
  c.experiment.agents = {AgentKind::kGreedy, AgentKind::kMpc};
  const auto sw = sweep(c, SweepAxis::kPanelArea, {c.env.solar.panel_area_cm2});
  const auto r = run_experiment(c);
  std::size_t k = 0;
  for (const auto& run : r.runs) {
    for (std::size_t m = 0; m < kMetricNames.size(); ++m, ++k) {
      REQUIRE(k < sw.rows.size());
      CHECK(sw.rows[k].agent == run.agent);
      CHECK(sw.rows[k].seed == run.seed);
      CHECK(sw.rows[k].value == metric_value(run.summary, m));
    }
  }
  CHECK(k == sw.rows.size());
  std::ostringstream out;
  write_sweep_csv(out, sw);
  CHECK(out.str().rfind("panel_area,agent,seed,metric,value\n", 0) == 0);
}

TEST_CASE("sweep axes edit the right parameters") {
  Config c;
  CHECK(with_axis_value(c, SweepAxis::kPanelArea, 21.0).env.solar.panel_area_cm2 == 21.0);
  const auto d = with_axis_value(c, SweepAxis::kDeviceDistance, 20.0).env;
  CHECK(d.device_distance_max_m == 20.0);
  CHECK(d.device_distance_min_m == 19.0);
  CHECK(with_axis_value(c, SweepAxis::kUserDistance, 26.0).env.user_distance_max_m == 26.0);
  CHECK_THROWS_AS(with_axis_value(c, SweepAxis::kPanelArea, 0.0), ConfigError);
  CHECK_THROWS_AS(sweep(c, SweepAxis::kPanelArea, {}), ConfigError);
}

TEST_CASE("config parsing") {
  const auto c = parse_config(json::parse(R"({
    "model": {"num_devices": 3, "max_power_mw": 150},
    "harvester": {"points": [[0.01, 0.0], [1.0, 0.5]], "sensitivity_mw": 0.01},
    "dqn": {"learning_rate": 0.001, "hidden": [32, 32], "epsilon_time_scale": 100},
    "mpc": {"horizon": 3, "device_gain_mode": "expected"},
    "experiment": {"scenario": "unlimited_energy", "objective": "efficiency",
                   "agents": ["greedy", "no_policy"], "seeds": [7],
                   "total_slots": 6000, "collection_slot": 3000,
                   "sweep": {"axis": "user_distance", "values": [20, 22]}}
  })"));
  CHECK(c.env.num_devices == 3);
  CHECK(c.env.ap.max_power_mw == 150.0);
  CHECK(c.env.harvester.points.size() == 2);
  CHECK(c.env.unlimited_energy);
  CHECK(c.dqn.learning_rate == 0.001);
  CHECK(c.dqn.hidden == std::vector<std::size_t>{32, 32});
  CHECK(c.dqn.epsilon.time_scale == 100.0);
  CHECK(c.trl.epsilon.time_scale == 100.0);
  CHECK(c.dqn.features == FeatureScale::kLog);
  CHECK(parse_config(json::parse(R"({"dqn": {"features": "linear"}})")).dqn.features ==
        FeatureScale::kLinear);
  CHECK(c.mpc.horizon == 3);
  CHECK(c.mpc.device_gains == mpc::DeviceGainMode::kExpected);
  CHECK(c.experiment.objective == Objective::kEfficiency);
  CHECK(c.experiment.agents == std::vector<AgentKind>{AgentKind::kGreedy, AgentKind::kNoPolicy});
  CHECK(c.experiment.sweep.axis == SweepAxis::kUserDistance);
  CHECK(c.experiment.sweep.values == std::vector<double>{20.0, 22.0});
}

TEST_CASE("config round-trips through JSON") {
  Config c = small_config();
  c.env.solar.panel_area_cm2 = 18.0;
  c.mpc.search.grid_points = 32;
  const auto back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.env.solar.panel_area_cm2 == 18.0);
}

TEST_CASE("unknown keys are rejected with their path") {
  auto message = [](const char* text) -> std::string {
    try {
      parse_config(json::parse(text));
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message(R"({"dqn": {"learning_rte": 0.1}})").find("dqn.learning_rte") != std::string::npos);
  CHECK(message(R"({"modle": {}})").find("modle") != std::string::npos);
  CHECK(message(R"({"experiment": {"sweep": {"axes": "x"}}})").find("experiment.sweep.axes") !=
        std::string::npos);
  CHECK(message(R"({"model": {"num_devices": "five"}})").find("model.num_devices") !=
        std::string::npos);
  CHECK(message(R"({"experiment": {"agents": ["dqn", "sarsa"]}})").find("sarsa") !=
        std::string::npos);
  CHECK(message(R"({"experiment": {"total_slots": 1000}})").find("total_slots") !=
        std::string::npos);
  CHECK(message(R"({"solar": {"panel_area_cm2": 0}})").find("panel_area_cm2") !=
        std::string::npos);
  CHECK(message(R"({"dqn": {"features": "cubic"}})").find("dqn.features") != std::string::npos);
}

TEST_CASE("DQN runs keep their final network") {
  Config c = small_config();
  const auto dqn = run_single(c, AgentKind::kDqn, 1);
  REQUIRE(dqn.network.has_value());
  CHECK(dqn.network->input_size() == 2);
  CHECK(dqn.network->output_size() == c.dqn.num_actions);
  std::stringstream buf;
  dqn.network->save(buf);
  CHECK(nn::Mlp::load(buf) == *dqn.network);
  CHECK_FALSE(run_single(c, AgentKind::kGreedy, 1).network.has_value());
}
