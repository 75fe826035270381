#include "wpt/config.hpp"

#include <fstream>
#include <set>

#include "wpt/error.hpp"

namespace wpt {

using nlohmann::json;

namespace {

const std::vector<std::pair<AgentKind, std::string>> kAgentNames{
    {AgentKind::kDqn, "dqn"},       {AgentKind::kTrl, "trl"},       {AgentKind::kMpc, "mpc"},
    {AgentKind::kGreedy, "greedy"}, {AgentKind::kRandom, "random"}, {AgentKind::kNoPolicy, "no_policy"}};

const std::vector<std::pair<SweepAxis, std::string>> kAxisNames{
    {SweepAxis::kPanelArea, "panel_area"},
    {SweepAxis::kDeviceDistance, "device_distance"},
    {SweepAxis::kUserDistance, "user_distance"}};

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string path) : path_(std::move(path)) {
    if (!doc.is_object()) throw ConfigError(path_ + ": expected an object");
    doc_ = &doc;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    const auto it = doc_->find(key);
    if (it == doc_->end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name(key) + ": wrong type");
    }
  }

  bool has(const std::string& key) const { return doc_->contains(key); }

  Section child(const std::string& key) {
    used_.insert(key);
    return Section(doc_->at(key), name(key));
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : doc_->items()) {
      if (!used_.count(item.key())) throw ConfigError("unknown key '" + name(item.key()) + "'");
    }
  }

 private:
  const json* doc_ = nullptr;
  std::string path_;
  std::set<std::string> used_;
};

void read_model(Section s, Config& c) {
  auto& e = c.env;
  s.read("num_devices", e.num_devices);
  s.read("device_distance_min_m", e.device_distance_min_m);
  s.read("device_distance_max_m", e.device_distance_max_m);
  s.read("num_users", e.num_users);
  s.read("user_distance_min_m", e.user_distance_min_m);
  s.read("user_distance_max_m", e.user_distance_max_m);
  s.read("battery_capacity_mj", e.ap.battery_capacity_mj);
  s.read("device_capacity_mj", e.device_capacity_mj);
  s.read("max_power_mw", e.ap.max_power_mw);
  s.read("bandwidth_hz", e.ap.bandwidth_hz);
  s.read("noise_w", e.ap.noise_w);
  s.read("sample_cost_mj", e.sample_cost_mj);
  s.read("rate_min_bps", e.rate_min_bps);
  s.read("initial_ap_battery_mj", e.initial_ap_battery_mj);
  s.read("initial_device_battery_mj", e.initial_device_battery_mj);
  s.finish();
}

void read_channel(Section s, Config& c) {
  s.read("mean", c.env.channel.mean);
  s.read("variance", c.env.channel.variance);
  s.finish();
}

void read_solar(Section s, Config& c) {
  auto& m = c.env.solar;
  s.read("panel_area_cm2", m.panel_area_cm2);
  s.read("conversion_efficiency", m.conversion_efficiency);
  s.read("transition", m.transition);
  s.read("mean_mj", m.mean_mj);
  s.read("stddev_mj", m.stddev_mj);
  s.finish();
}

void read_harvester(Section s, Config& c) {
  auto& h = c.env.harvester;
  s.read("sensitivity_mw", h.sensitivity_mw);
  if (s.has("points")) {
    std::vector<std::array<double, 2>> pts;
    s.read("points", pts);
    h.points.clear();
    for (const auto& p : pts) h.points.push_back({p[0], p[1]});
  }
  s.finish();
}

void read_dqn(Section s, Config& c) {
  auto& d = c.dqn;
  s.read("hidden", d.hidden);
  s.read("negative_slope", d.negative_slope);
  s.read("learning_rate", d.learning_rate);
  s.read("discount", d.discount);
  s.read("num_actions", d.num_actions);
  s.read("memory_size", d.memory_size);
  s.read("minibatch", d.minibatch);
  s.read("train_interval", d.train_interval);
  s.read("target_sync", d.target_sync);
  s.read("replay_start", d.replay_start);
  s.read("epsilon_initial", d.epsilon.initial);
  s.read("epsilon_final", d.epsilon.final);
  s.read("epsilon_exponent", d.epsilon.exponent);
  s.read("epsilon_time_scale", d.epsilon.time_scale);
  std::string features = d.features == FeatureScale::kLog ? "log" : "linear";
  s.read("features", features);
  if (features == "log") {
    d.features = FeatureScale::kLog;
  } else if (features == "linear") {
    d.features = FeatureScale::kLinear;
  } else {
    throw ConfigError(s.name("features") + ": expected 'log' or 'linear'");
  }
  s.finish();
}

void read_trl(Section s, Config& c) {
  s.read("gain_bins", c.trl.gain_bins);
  s.read("battery_bins", c.trl.battery_bins);
  s.read("learning_rate", c.trl.learning_rate);
  s.read("discount", c.trl.discount);
  s.finish();
}

void read_mpc(Section s, Config& c) {
  auto& m = c.mpc;
  s.read("horizon", m.horizon);
  s.read("window", m.window);
  s.read("precision", m.search.precision);
  s.read("grid_points", m.search.grid_points);
  std::string mode = m.device_gains == mpc::DeviceGainMode::kExpected ? "expected" : "reported";
  s.read("device_gain_mode", mode);
  if (mode == "reported") {
    m.device_gains = mpc::DeviceGainMode::kReported;
  } else if (mode == "expected") {
    m.device_gains = mpc::DeviceGainMode::kExpected;
  } else {
    throw ConfigError(s.name("device_gain_mode") + ": expected 'reported' or 'expected'");
  }
  s.read("gpr_length_scale", m.gpr.length_scale);
  s.read("gpr_noise_ratio", m.gpr.noise_ratio);
  s.read("gpr_jitter_ratio", m.gpr.jitter_ratio);
  s.read("gpr_standardize", m.gpr.standardize);
  s.finish();
}

void read_experiment(Section s, Config& c) {
  auto& x = c.experiment;
  std::string scenario = c.env.unlimited_energy ? "unlimited_energy" : "solar";
  s.read("scenario", scenario);
  if (scenario == "solar") {
    c.env.unlimited_energy = false;
  } else if (scenario == "unlimited_energy") {
    c.env.unlimited_energy = true;
  } else {
    throw ConfigError(s.name("scenario") + ": expected 'solar' or 'unlimited_energy'");
  }
  std::string objective = x.objective == Objective::kEfficiency ? "efficiency" : "satisfaction";
  s.read("objective", objective);
  if (objective == "satisfaction") {
    x.objective = Objective::kSatisfaction;
  } else if (objective == "efficiency") {
    x.objective = Objective::kEfficiency;
  } else {
    throw ConfigError(s.name("objective") + ": expected 'satisfaction' or 'efficiency'");
  }
  if (s.has("agents")) {
    std::vector<std::string> names;
    s.read("agents", names);
    x.agents.clear();
    for (const auto& n : names) {
      try {
        x.agents.push_back(parse_agent(n));
      } catch (const ConfigError&) {
        throw ConfigError(s.name("agents") + ": unknown agent '" + n + "'");
      }
    }
  }
  s.read("total_slots", x.total_slots);
  s.read("episode_length", x.episode_length);
  s.read("collection_slot", x.collection_slot);
  s.read("seeds", x.seeds);
  s.read("workers", x.workers);
  if (s.has("sweep")) {
    Section sw = s.child("sweep");
    std::string axis = to_string(x.sweep.axis);
    sw.read("axis", axis);
    try {
      x.sweep.axis = parse_axis(axis);
    } catch (const ConfigError&) {
      throw ConfigError(sw.name("axis") + ": unknown axis '" + axis + "'");
    }
    sw.read("values", x.sweep.values);
    sw.finish();
  }
  s.finish();
}

}  // namespace

std::string to_string(AgentKind kind) {
  for (const auto& [k, n] : kAgentNames) {
    if (k == kind) return n;
  }
  return "?";
}

AgentKind parse_agent(const std::string& name) {
  for (const auto& [k, n] : kAgentNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown agent '" + name + "'");
}

std::string to_string(SweepAxis axis) {
  for (const auto& [a, n] : kAxisNames) {
    if (a == axis) return n;
  }
  return "?";
}

SweepAxis parse_axis(const std::string& name) {
  for (const auto& [a, n] : kAxisNames) {
    if (n == name) return a;
  }
  throw ConfigError("unknown sweep axis '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (agents.empty()) throw ConfigError("experiment.agents: at least one agent is required");
  if (seeds.empty()) throw ConfigError("experiment.seeds: at least one seed is required");
  if (episode_length == 0) throw ConfigError("experiment.episode_length: must be positive");
  if (total_slots % episode_length != 0) {
    throw ConfigError("experiment.total_slots: must be a multiple of episode_length");
  }
  if (collection_slot % episode_length != 0) {
    throw ConfigError("experiment.collection_slot: must be a multiple of episode_length");
  }
  if (collection_slot > total_slots) {
    throw ConfigError("experiment.collection_slot: must not exceed total_slots");
  }
  if (workers == 0) throw ConfigError("experiment.workers: must be positive");
  for (double v : sweep.values) {
    if (!(v > 0.0)) throw ConfigError("experiment.sweep.values: must be positive");
  }
}

void Config::validate() const {
  env.validate();
  dqn.validate();
  trl.validate();
  mpc.validate();
  experiment.validate();
}

Config parse_config(const json& doc) {
  Config c;
  Section root(doc, "");
  if (root.has("model")) read_model(root.child("model"), c);
  if (root.has("channel")) read_channel(root.child("channel"), c);
  if (root.has("solar")) read_solar(root.child("solar"), c);
  if (root.has("harvester")) read_harvester(root.child("harvester"), c);
  if (root.has("dqn")) read_dqn(root.child("dqn"), c);
  if (root.has("trl")) read_trl(root.child("trl"), c);
  if (root.has("mpc")) read_mpc(root.child("mpc"), c);
  if (root.has("experiment")) read_experiment(root.child("experiment"), c);
  root.finish();
  // Tabular RL shares the DQN's action space and exploration schedule.
  c.trl.num_actions = c.dqn.num_actions;
  c.trl.epsilon = c.dqn.epsilon;
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const Config& c) {
  const auto& e = c.env;
  json pts = json::array();
  for (const auto& p : e.harvester.points) pts.push_back({p.input_mw, p.efficiency});
  std::vector<std::string> agents;
  for (auto a : c.experiment.agents) agents.push_back(to_string(a));
  return {
      {"model",
       {{"num_devices", e.num_devices},
        {"device_distance_min_m", e.device_distance_min_m},
        {"device_distance_max_m", e.device_distance_max_m},
        {"num_users", e.num_users},
        {"user_distance_min_m", e.user_distance_min_m},
        {"user_distance_max_m", e.user_distance_max_m},
        {"battery_capacity_mj", e.ap.battery_capacity_mj},
        {"device_capacity_mj", e.device_capacity_mj},
        {"max_power_mw", e.ap.max_power_mw},
        {"bandwidth_hz", e.ap.bandwidth_hz},
        {"noise_w", e.ap.noise_w},
        {"sample_cost_mj", e.sample_cost_mj},
        {"rate_min_bps", e.rate_min_bps},
        {"initial_ap_battery_mj", e.initial_ap_battery_mj},
        {"initial_device_battery_mj", e.initial_device_battery_mj}}},
      {"channel", {{"mean", e.channel.mean}, {"variance", e.channel.variance}}},
      {"solar",
       {{"panel_area_cm2", e.solar.panel_area_cm2},
        {"conversion_efficiency", e.solar.conversion_efficiency},
        {"transition", e.solar.transition},
        {"mean_mj", e.solar.mean_mj},
        {"stddev_mj", e.solar.stddev_mj}}},
      {"harvester", {{"sensitivity_mw", e.harvester.sensitivity_mw}, {"points", pts}}},
      {"dqn",
       {{"hidden", c.dqn.hidden},
        {"negative_slope", c.dqn.negative_slope},
        {"learning_rate", c.dqn.learning_rate},
        {"discount", c.dqn.discount},
        {"num_actions", c.dqn.num_actions},
        {"memory_size", c.dqn.memory_size},
        {"minibatch", c.dqn.minibatch},
        {"train_interval", c.dqn.train_interval},
        {"target_sync", c.dqn.target_sync},
        {"replay_start", c.dqn.replay_start},
        {"epsilon_initial", c.dqn.epsilon.initial},
        {"epsilon_final", c.dqn.epsilon.final},
        {"epsilon_exponent", c.dqn.epsilon.exponent},
        {"epsilon_time_scale", c.dqn.epsilon.time_scale},
        {"features", c.dqn.features == FeatureScale::kLog ? "log" : "linear"}}},
      {"trl",
       {{"gain_bins", c.trl.gain_bins},
        {"battery_bins", c.trl.battery_bins},
        {"learning_rate", c.trl.learning_rate},
        {"discount", c.trl.discount}}},
      {"mpc",
       {{"horizon", c.mpc.horizon},
        {"window", c.mpc.window},
        {"precision", c.mpc.search.precision},
        {"grid_points", c.mpc.search.grid_points},
        {"device_gain_mode",
         c.mpc.device_gains == mpc::DeviceGainMode::kExpected ? "expected" : "reported"},
        {"gpr_length_scale", c.mpc.gpr.length_scale},
        {"gpr_noise_ratio", c.mpc.gpr.noise_ratio},
        {"gpr_jitter_ratio", c.mpc.gpr.jitter_ratio},
        {"gpr_standardize", c.mpc.gpr.standardize}}},
      {"experiment",
       {{"scenario", e.unlimited_energy ? "unlimited_energy" : "solar"},
        {"objective", c.experiment.objective == Objective::kEfficiency ? "efficiency" : "satisfaction"},
        {"agents", agents},
        {"total_slots", c.experiment.total_slots},
        {"episode_length", c.experiment.episode_length},
        {"collection_slot", c.experiment.collection_slot},
        {"seeds", c.experiment.seeds},
        {"workers", c.experiment.workers},
        {"sweep",
         {{"axis", to_string(c.experiment.sweep.axis)}, {"values", c.experiment.sweep.values}}}}}};
}

}  // namespace wpt
