#pragma once

// Receding-horizon power control. Each slot, per-parameter GPR forecasters
// predict the AP's energy arrivals and the channel gains over the next L
// slots; a virtual copy of the slot dynamics scores a constant candidate
// power over slots t..t+L, and the best power is applied for slot t only.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wpt/agents.hpp"
#include "wpt/env.hpp"
#include "wpt/gpr.hpp"

namespace wpt::mpc {

struct Forecast {
  std::vector<double> arrivals_mj;                // into slots t+1..t+L
  std::vector<double> user_gains;                 // slots t..t+L, slot t observed
  std::vector<std::vector<double>> device_gains;  // [device][slots t..t+L]

  std::size_t horizon() const { return user_gains.empty() ? 0 : user_gains.size() - 1; }
};

Forecast oracle_forecast(const Environment& env, std::size_t horizon);

struct RolloutResult {
  double value = 0.0;
  // Bit tau set when both user types are satisfied in virtual slot tau.
  std::uint64_t signature = 0;
};

// Average performance index of holding `power_mw` over slots t..t+L, the
// virtual AP battery clamping the executed power each slot.
RolloutResult rollout(double power_mw, double battery_mj, std::span<const double> device_batteries,
                      const Forecast& forecast, const EnvParams& params, Objective objective);

double rollout_value(double power_mw, double battery_mj, std::span<const double> device_batteries,
                     const Forecast& forecast, const EnvParams& params, Objective objective);

struct SearchOptions {
  double precision = 1e-31;  // requested bisection precision (mW)
  std::size_t grid_points = 64;
};

// The requested precision floored at 1e-6 * P_max.
double effective_precision(const SearchOptions& options, double max_power_mw);

// Maximizes `evaluate` over [0, upper]. A coarse grid brackets every change of
// the satisfaction signature, bisection pins each change point to the
// effective precision, `extra_points` are scored as well, and the best point
// wins with ties going to the lowest power.
double maximize(double upper, const std::function<RolloutResult(double)>& evaluate,
                const SearchOptions& options, double max_power_mw,
                std::span<const double> extra_points = {});

// Powers in [0, min(P_max, B)] where some threshold inside the rollout is
// crossed (user rate, harvester breakpoints, device sampling and capacity,
// AP battery clamping), each with its two close neighbours. Device
// activation is not monotone in power, so the satisfied region can be a band
// narrower than any fixed grid cell; between consecutive breakpoints the
// signature is constant and the efficiency index is convex, so these points
// contain the maximizer.
std::vector<double> rollout_breakpoints(double battery_mj, std::span<const double> device_batteries,
                                        const Forecast& forecast, const EnvParams& params);

double optimize_power(double battery_mj, std::span<const double> device_batteries,
                      const Forecast& forecast, const EnvParams& params, Objective objective,
                      const SearchOptions& options);

// Sliding-window GPR forecaster for one scalar parameter.
class Forecaster {
 public:
  Forecaster(std::size_t window, double fallback);

  void observe(double slot, double value);
  // Predictions at the given slots; with fewer than two observations repeats
  // the last one (or the fallback when there is none).
  std::vector<double> predict(std::span<const double> slots,
                              const gpr::Hyperparameters& hyper) const;
  const gpr::SlidingWindow& window() const { return window_; }

 private:
  gpr::SlidingWindow window_;
  double fallback_;
};

enum class DeviceGainMode { kReported, kExpected };

// Gains are i.i.d. across slots, so the forecaster smooths rather than
// interpolates: noise variance equal to the signal variance.
inline gpr::Hyperparameters default_forecast_hyperparameters() {
  gpr::Hyperparameters h;
  h.noise_ratio = 1.0;
  return h;
}

struct MpcConfig {
  std::size_t horizon = 4;  // L
  std::size_t window = 20;  // k
  SearchOptions search;
  DeviceGainMode device_gains = DeviceGainMode::kReported;
  gpr::Hyperparameters gpr = default_forecast_hyperparameters();

  void validate() const;
};

// One forecaster per tracked parameter: the AP arrival, the served user's
// gain and every device gain.
class Forecasters {
 public:
  Forecasters(const EnvParams& params, const EnvState& initial, const MpcConfig& config);

  // Feeds the observations of the slot that just finished.
  void update(const EnvState& before, const SlotOutcome& outcome);
  Forecast forecast(const EnvState& state) const;

  const Forecaster& arrival() const { return arrival_; }
  const Forecaster& user() const { return user_; }
  const std::vector<Forecaster>& devices() const { return devices_; }

 private:
  MpcConfig config_;
  Forecaster arrival_;
  Forecaster user_;
  std::vector<Forecaster> devices_;
  std::vector<double> expected_device_gains_;
};

class MpcPolicy final : public Policy {
 public:
  MpcPolicy(const EnvParams& params, const EnvState& initial, const MpcConfig& config,
            Objective objective);
  // Perfect-forecast variant reading the future from `env` (test oracle).
  MpcPolicy(const EnvParams& params, const Environment& env, const MpcConfig& config,
            Objective objective);

  std::string name() const override { return oracle_ ? "mpc_oracle" : "mpc"; }
  double act(const EnvState& state) override;
  void learn(const EnvState& before, const SlotOutcome& outcome, const EnvState& after) override;

  const Forecasters& forecasters() const { return forecasters_; }

 private:
  EnvParams params_;
  MpcConfig config_;
  Objective objective_;
  Forecasters forecasters_;
  const Environment* oracle_ = nullptr;
};

}  // namespace wpt::mpc
