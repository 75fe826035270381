#include "wpt/env.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "wpt/error.hpp"

namespace wpt {

namespace {

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

}  // namespace

SolarModel SolarModel::defaults() {
  SolarModel m;
  for (std::size_t i = 0; i < kSolarStates; ++i) {
    for (std::size_t j = 0; j < kSolarStates; ++j) {
      m.transition[i][j] = i == j ? 0.7 : 0.1;
    }
  }
  m.mean_mj = {100.0, 60.0, 30.0, 10.0};
  m.stddev_mj = {15.0, 10.0, 6.0, 3.0};
  return m;
}

void SolarModel::validate() const {
  for (std::size_t i = 0; i < kSolarStates; ++i) {
    double sum = 0.0;
    for (double p : transition[i]) {
      require(p >= 0.0 && p <= 1.0, "solar.transition", "probabilities must lie in [0, 1]");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "solar.transition",
            "row " + std::to_string(i) + " does not sum to 1");
    require(std::isfinite(mean_mj[i]), "solar.mean_mj", "must be finite");
    require(stddev_mj[i] >= 0.0, "solar.stddev_mj", "must be non-negative");
  }
  require(panel_area_cm2 > 0.0, "solar.panel_area_cm2", "must be positive");
  require(conversion_efficiency >= 0.0 && conversion_efficiency <= 1.0,
          "solar.conversion_efficiency", "must lie in [0, 1]");
}

double SolarModel::stationary_mean_arrival() const {
  // Power iteration; the chain is small and the defaults mix quickly.
  std::array<double, kSolarStates> pi{};
  pi.fill(1.0 / kSolarStates);
  for (int it = 0; it < 10'000; ++it) {
    std::array<double, kSolarStates> next{};
    for (std::size_t i = 0; i < kSolarStates; ++i) {
      for (std::size_t j = 0; j < kSolarStates; ++j) next[j] += pi[i] * transition[i][j];
    }
    pi = next;
  }
  double mean = 0.0;
  for (std::size_t j = 0; j < kSolarStates; ++j) mean += pi[j] * mean_mj[j];
  return mean * panel_area_cm2 * conversion_efficiency;
}

void ApConfig::validate() const {
  require(battery_capacity_mj > 0.0, "model.battery_capacity_mj", "must be positive");
  require(max_power_mw > 0.0, "model.max_power_mw", "must be positive");
  require(bandwidth_hz > 0.0, "model.bandwidth_hz", "must be positive");
  require(noise_w > 0.0, "model.noise_w", "must be positive");
}

double ChannelModel::sample_power(Rng& rng) const {
  std::normal_distribution<double> component(0.0, std::sqrt(variance / 2.0));
  const double re = mean + component(rng);
  const double im = component(rng);
  return re * re + im * im;
}

double ChannelModel::expected_gain(double distance_m) const {
  return second_moment() / (distance_m * distance_m);
}

void ChannelModel::validate() const {
  require(std::isfinite(mean), "channel.mean", "must be finite");
  require(variance >= 0.0, "channel.variance", "must be non-negative");
}

HarvesterCurve HarvesterCurve::defaults() {
  HarvesterCurve c;
  c.points = {{dbm_to_mw(-20.0), 0.0},
              {dbm_to_mw(-10.0), 0.40},
              {dbm_to_mw(0.0), 0.80},
              {dbm_to_mw(10.0), 0.85}};
  c.sensitivity_mw = dbm_to_mw(-20.0);
  return c;
}

void HarvesterCurve::validate() const {
  require(!points.empty(), "harvester.points", "needs at least one breakpoint");
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(points[i].input_mw >= 0.0, "harvester.points", "input power must be non-negative");
    require(points[i].efficiency >= 0.0 && points[i].efficiency <= 1.0, "harvester.points",
            "efficiency must lie in [0, 1]");
    if (i > 0) {
      require(points[i].input_mw > points[i - 1].input_mw, "harvester.points",
              "input powers must be strictly increasing");
    }
  }
  require(sensitivity_mw >= 0.0, "harvester.sensitivity_mw", "must be non-negative");
}

double HarvesterCurve::efficiency(double incident_mw) const {
  if (incident_mw < sensitivity_mw || points.empty()) return 0.0;
  if (incident_mw <= points.front().input_mw) return points.front().efficiency;
  if (incident_mw >= points.back().input_mw) return points.back().efficiency;
  const auto upper = std::upper_bound(
      points.begin(), points.end(), incident_mw,
      [](double p, const HarvesterPoint& pt) { return p < pt.input_mw; });
  const auto lower = upper - 1;
  const double w = (incident_mw - lower->input_mw) / (upper->input_mw - lower->input_mw);
  return lower->efficiency + w * (upper->efficiency - lower->efficiency);
}

void EnvParams::validate() const {
  ap.validate();
  solar.validate();
  channel.validate();
  harvester.validate();
  require(num_devices > 0, "model.num_devices", "must be positive");
  require(device_distance_min_m > 0.0, "model.device_distance_min_m", "must be positive");
  require(device_distance_max_m >= device_distance_min_m, "model.device_distance_max_m",
          "must be >= device_distance_min_m");
  require(device_capacity_mj > 0.0, "model.device_capacity_mj", "must be positive");
  require(sample_cost_mj >= 0.0, "model.sample_cost_mj", "must be non-negative");
  require(num_users > 0, "model.num_users", "must be positive");
  require(user_distance_min_m > 0.0, "model.user_distance_min_m", "must be positive");
  require(user_distance_max_m >= user_distance_min_m, "model.user_distance_max_m",
          "must be >= user_distance_min_m");
  require(rate_min_bps >= 0.0, "model.rate_min_bps", "must be non-negative");
  require(initial_ap_battery_mj >= 0.0 && initial_ap_battery_mj <= ap.battery_capacity_mj,
          "model.initial_ap_battery_mj", "must lie in [0, battery_capacity_mj]");
  require(initial_device_battery_mj >= 0.0 && initial_device_battery_mj <= device_capacity_mj,
          "model.initial_device_battery_mj", "must lie in [0, device_capacity_mj]");
}

EnergyArrival sample_energy_arrival(const SolarModel& model, std::size_t state, Rng& rng) {
  expects(state < kSolarStates, "solar state out of range");
  const double u = uniform01(rng);
  std::size_t next = kSolarStates - 1;
  double cumulative = 0.0;
  for (std::size_t j = 0; j < kSolarStates; ++j) {
    cumulative += model.transition[state][j];
    if (u < cumulative) {
      next = j;
      break;
    }
  }
  double x = model.mean_mj[next];
  if (model.stddev_mj[next] > 0.0) {
    std::normal_distribution<double> draw(model.mean_mj[next], model.stddev_mj[next]);
    x = draw(rng);
  }
  x = std::max(0.0, x);
  return {next, x * model.panel_area_cm2 * model.conversion_efficiency};
}

double channel_gain(double distance_m, double fading_power) {
  if (!(distance_m > 0.0)) throw ConfigError("distance must be positive");
  return fading_power / (distance_m * distance_m);
}

double sample_channel_gain(double distance_m, const ChannelModel& channel, Rng& rng) {
  if (!(distance_m > 0.0)) throw ConfigError("distance must be positive");
  return channel_gain(distance_m, channel.sample_power(rng));
}

double ap_battery_step(double battery_mj, double power_mw, double arrival_mj,
                       double capacity_mj) {
  expects(power_mw >= 0.0 && power_mw <= battery_mj, "transmit power exceeds AP battery");
  return std::clamp(battery_mj - power_mw + arrival_mj, 0.0, capacity_mj);
}

double harvester_beta(double incident_mw, const HarvesterCurve& curve) {
  return curve.efficiency(incident_mw);
}

DeviceStep device_battery_step(double battery_mj, double harvested_mj, double capacity_mj,
                               double sample_cost_mj) {
  const double charged = std::min(capacity_mj, battery_mj + harvested_mj);
  if (charged >= sample_cost_mj) return {charged - sample_cost_mj, true};
  return {charged, false};
}

DeviceStep device_step(const IotDevice& device, double incident_mw, const HarvesterCurve& curve) {
  expects(incident_mw >= 0.0, "incident power must be non-negative");
  const double harvested = incident_mw * harvester_beta(incident_mw, curve);
  return device_battery_step(device.battery_mj, harvested, device.capacity_mj,
                             device.sample_cost_mj);
}

double data_rate(double power_mw, double gain, double bandwidth_hz, double noise_w) {
  const double received_w = power_mw * 1e-3 * gain;
  return bandwidth_hz * std::log2(1.0 + received_w / noise_w);
}

double energy_efficiency(bool devices_satisfied, bool user_satisfied, double power_mw) {
  if (power_mw <= 0.0) return 0.0;
  return (devices_satisfied && user_satisfied) ? 1.0 / (power_mw * 1e-3) : 0.0;
}

double feasible_power(const EnvParams& params, double battery_mj) {
  return std::min(params.ap.max_power_mw, battery_mj);
}

SlotOutcome resolve_slot(const EnvParams& params, EnvState& state, double power_mw) {
  expects(power_mw >= 0.0 && power_mw <= feasible_power(params, state.ap_battery_mj),
          "transmit power outside [0, min(P_max, B_t)]");
  SlotOutcome out;
  out.power_mw = power_mw;
  out.user_gain = state.user_gain;
  out.device_gains = state.device_gains;
  out.rate_bps = data_rate(power_mw, state.user_gain, params.ap.bandwidth_hz, params.ap.noise_w);
  out.user_satisfied = out.rate_bps >= params.rate_min_bps;
  for (std::size_t i = 0; i < state.devices.size(); ++i) {
    auto& device = state.devices[i];
    const auto step = device_step(device, power_mw * state.device_gains[i], params.harvester);
    device.battery_mj = step.battery_mj;
    if (step.activated) ++out.activated;
  }
  out.devices_satisfied = out.activated == state.devices.size();
  out.efficiency = energy_efficiency(out.devices_satisfied, out.user_satisfied, power_mw);
  return out;
}

namespace {

void draw_channel(const EnvParams& params, EnvState& state, EnvStreams& streams) {
  std::uniform_int_distribution<std::size_t> pick(0, state.users.size() - 1);
  state.current_user = pick(streams.user);
  state.user_gain =
      sample_channel_gain(state.users[state.current_user].distance_m, params.channel, streams.channel);
  state.device_gains.resize(state.devices.size());
  for (std::size_t i = 0; i < state.devices.size(); ++i) {
    state.device_gains[i] =
        sample_channel_gain(state.devices[i].distance_m, params.channel, streams.channel);
  }
}

}  // namespace

EnvStreams make_env_streams(std::uint64_t seed) {
  return {make_stream(seed, Stream::kSolar), make_stream(seed, Stream::kChannel),
          make_stream(seed, Stream::kUserSelection)};
}

EnvState initial_state(const EnvParams& params, std::uint64_t seed, EnvStreams& streams) {
  params.validate();
  Rng geometry = make_stream(seed, Stream::kGeometry);
  EnvState state;
  state.devices.resize(params.num_devices);
  for (auto& d : state.devices) {
    d.distance_m = params.device_distance_min_m +
                   uniform01(geometry) * (params.device_distance_max_m - params.device_distance_min_m);
    d.battery_mj = params.initial_device_battery_mj;
    d.capacity_mj = params.device_capacity_mj;
    d.sample_cost_mj = params.sample_cost_mj;
  }
  state.users.resize(params.num_users);
  for (auto& u : state.users) {
    u.distance_m = params.user_distance_min_m +
                   uniform01(geometry) * (params.user_distance_max_m - params.user_distance_min_m);
  }
  state.solar_state = static_cast<std::size_t>(uniform01(streams.solar) * kSolarStates);
  state.ap_battery_mj =
      params.unlimited_energy ? params.ap.battery_capacity_mj : params.initial_ap_battery_mj;
  draw_channel(params, state, streams);
  return state;
}

SlotOutcome env_step(const EnvParams& params, EnvState& state, double power_mw,
                     EnvStreams& streams) {
  SlotOutcome out = resolve_slot(params, state, power_mw);
  const auto arrival = sample_energy_arrival(params.solar, state.solar_state, streams.solar);
  state.solar_state = arrival.next_state;
  out.arrival_mj = arrival.energy_mj;
  state.ap_battery_mj = params.unlimited_energy
                            ? params.ap.battery_capacity_mj
                            : ap_battery_step(state.ap_battery_mj, power_mw, arrival.energy_mj,
                                              params.ap.battery_capacity_mj);
  ++state.slot;
  draw_channel(params, state, streams);
  return out;
}

Environment::Environment(EnvParams params, std::uint64_t seed)
    : params_(std::move(params)), streams_(make_env_streams(seed)) {
  state_ = initial_state(params_, seed, streams_);
}

SlotOutcome Environment::step(double power_mw) {
  return env_step(params_, state_, power_mw, streams_);
}

ExogenousPath Environment::peek(std::size_t horizon) const {
  EnvState state = state_;
  EnvStreams streams = streams_;
  ExogenousPath path;
  path.device_gains.assign(state.devices.size(), {});
  auto record_gains = [&] {
    path.user_gains.push_back(state.user_gain);
    for (std::size_t i = 0; i < state.devices.size(); ++i) {
      path.device_gains[i].push_back(state.device_gains[i]);
    }
  };
  record_gains();
  for (std::size_t h = 0; h < horizon; ++h) {
    const auto out = env_step(params_, state, 0.0, streams);
    path.arrivals_mj.push_back(out.arrival_mj);
    record_gains();
  }
  return path;
}

}  // namespace wpt
