#pragma once

// Slotted model of a solar-powered access point that serves legacy data users
// and, through the same transmissions, charges RF-harvesting IoT devices.
//
// Units: one slot is one second, so a transmit power of x mW spends x mJ per
// slot. Energies are mJ, powers mW, noise W, bandwidth Hz, distances m.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wpt/random.hpp"

namespace wpt {

inline constexpr std::size_t kSolarStates = 4;

struct SolarModel {
  std::array<std::string, kSolarStates> state_names{"Excellent", "Good", "Fair", "Poor"};
  std::array<std::array<double, kSolarStates>, kSolarStates> transition{};
  // Per-state Normal parameters of the raw arrival x (mJ per cm^2 of panel).
  std::array<double, kSolarStates> mean_mj{};
  std::array<double, kSolarStates> stddev_mj{};
  double panel_area_cm2 = 15.0;
  double conversion_efficiency = 0.15;

  // Illustrative defaults: 0.7 self-transition, means spanning an order of
  // magnitude. These are not measured values.
  static SolarModel defaults();
  void validate() const;
  // Long-run mean of the harvested energy per slot, x * area * efficiency.
  double stationary_mean_arrival() const;
};

struct ApConfig {
  double battery_capacity_mj = 100'000.0;
  double max_power_mw = 200.0;
  double bandwidth_hz = 20e6;
  double noise_w = 1e-6;

  void validate() const;
};

struct IotDevice {
  double distance_m = 9.5;
  double battery_mj = 0.0;
  double capacity_mj = 50.0;
  double sample_cost_mj = 1.38;
};

struct LegacyUser {
  double distance_m = 15.0;
};

// Z ~ CN(mean, variance): E[Z] = mean, E|Z - mean|^2 = variance, real mean.
struct ChannelModel {
  double mean = 1.0;
  double variance = 0.1;

  double second_moment() const { return mean * mean + variance; }
  double sample_power(Rng& rng) const;  // |Z|^2
  double expected_gain(double distance_m) const;
  void validate() const;
};

struct HarvesterPoint {
  double input_mw;
  double efficiency;
};

// Piecewise-linear conversion efficiency over incident power (linear in mW).
struct HarvesterCurve {
  std::vector<HarvesterPoint> points;
  double sensitivity_mw = 0.0;

  static HarvesterCurve defaults();
  void validate() const;
  double efficiency(double incident_mw) const;
};

struct EnvParams {
  ApConfig ap;
  SolarModel solar = SolarModel::defaults();
  ChannelModel channel;
  HarvesterCurve harvester = HarvesterCurve::defaults();

  std::size_t num_devices = 5;
  double device_distance_min_m = 9.0;
  double device_distance_max_m = 10.0;
  double device_capacity_mj = 50.0;
  double sample_cost_mj = 1.38;

  std::size_t num_users = 20;
  double user_distance_min_m = 5.0;
  double user_distance_max_m = 25.0;
  double rate_min_bps = 133e6;

  bool unlimited_energy = false;
  double initial_ap_battery_mj = 0.0;
  double initial_device_battery_mj = 0.0;

  void validate() const;
};

struct EnvState {
  std::size_t slot = 0;
  double ap_battery_mj = 0.0;
  std::size_t solar_state = 0;
  std::vector<IotDevice> devices;
  std::vector<LegacyUser> users;
  // Channel realization of the current slot. The user's gain is known to the
  // AP before it transmits; device gains are only reported afterwards.
  std::size_t current_user = 0;
  double user_gain = 0.0;
  std::vector<double> device_gains;
};

struct SlotOutcome {
  bool devices_satisfied = false;  // I_t: every device sampled this slot
  bool user_satisfied = false;     // J_t: r_u >= r_min
  std::size_t activated = 0;       // n_t
  double efficiency = 0.0;         // eta_t in 1/W
  double arrival_mj = 0.0;         // energy harvested into the next slot's battery
  double power_mw = 0.0;
  double rate_bps = 0.0;
  double user_gain = 0.0;
  std::vector<double> device_gains;  // realized this slot, reported at its end
};

struct EnvStreams {
  Rng solar;
  Rng channel;
  Rng user;
};

struct EnergyArrival {
  std::size_t next_state;
  double energy_mj;
};

EnergyArrival sample_energy_arrival(const SolarModel& model, std::size_t state, Rng& rng);

double sample_channel_gain(double distance_m, const ChannelModel& channel, Rng& rng);

// Gain from a fixed |Z|^2, the deterministic part of sample_channel_gain.
double channel_gain(double distance_m, double fading_power);

double ap_battery_step(double battery_mj, double power_mw, double arrival_mj, double capacity_mj);

double harvester_beta(double incident_mw, const HarvesterCurve& curve);

struct DeviceStep {
  double battery_mj;
  bool activated;
};

// Battery arithmetic of one device slot given the harvested energy: harvest,
// cap at capacity, then sample if the post-harvest level covers the cost.
DeviceStep device_battery_step(double battery_mj, double harvested_mj, double capacity_mj,
                               double sample_cost_mj);

DeviceStep device_step(const IotDevice& device, double incident_mw, const HarvesterCurve& curve);

double data_rate(double power_mw, double gain, double bandwidth_hz, double noise_w);

double energy_efficiency(bool devices_satisfied, bool user_satisfied, double power_mw);

// Largest power the AP may use this slot.
double feasible_power(const EnvParams& params, double battery_mj);

// Resolves the current slot for a given power without consuming randomness:
// device batteries in `state` are advanced and the outcome returned. The AP
// battery and channel are left untouched.
SlotOutcome resolve_slot(const EnvParams& params, EnvState& state, double power_mw);

EnvStreams make_env_streams(std::uint64_t seed);

// Places devices and users and draws the first slot's channel.
EnvState initial_state(const EnvParams& params, std::uint64_t seed, EnvStreams& streams);

// One slot: serve with `power_mw`, charge devices, draw the next arrival and
// the next slot's channel.
SlotOutcome env_step(const EnvParams& params, EnvState& state, double power_mw,
                     EnvStreams& streams);

struct ExogenousPath {
  std::vector<double> arrivals_mj;                 // arrivals into slots t+1..t+h
  std::vector<double> user_gains;                  // slots t..t+h
  std::vector<std::vector<double>> device_gains;   // [device][slots t..t+h]
};

class Environment {
 public:
  Environment(EnvParams params, std::uint64_t seed);

  const EnvParams& params() const { return params_; }
  const EnvState& state() const { return state_; }

  SlotOutcome step(double power_mw);

  // Future arrivals and gains over the next `horizon` slots. The real stream
  // state is left untouched; actions do not influence these quantities.
  ExogenousPath peek(std::size_t horizon) const;

 private:
  EnvParams params_;
  EnvState state_;
  EnvStreams streams_;
};

}  // namespace wpt
