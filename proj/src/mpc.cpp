#include "wpt/mpc.hpp"

#include <algorithm>
#include <cmath>

#include "wpt/error.hpp"

namespace wpt::mpc {

Forecast oracle_forecast(const Environment& env, std::size_t horizon) {
  auto path = env.peek(horizon);
  return {std::move(path.arrivals_mj), std::move(path.user_gains), std::move(path.device_gains)};
}

RolloutResult rollout(double power_mw, double battery_mj, std::span<const double> device_batteries,
                      const Forecast& forecast, const EnvParams& params, Objective objective) {
  const std::size_t horizon = forecast.horizon();
  expects(forecast.arrivals_mj.size() >= horizon, "forecast is missing arrivals");
  expects(forecast.device_gains.size() == device_batteries.size(),
          "forecast and device battery counts differ");
  expects(horizon < 64, "horizon too long for the signature");

  std::vector<double> batteries(device_batteries.begin(), device_batteries.end());
  double battery = params.unlimited_energy ? params.ap.battery_capacity_mj : battery_mj;
  RolloutResult result;
  double total = 0.0;
  for (std::size_t tau = 0; tau <= horizon; ++tau) {
    const double p = std::clamp(power_mw, 0.0, feasible_power(params, battery));
    const bool user_ok = data_rate(p, forecast.user_gains[tau], params.ap.bandwidth_hz,
                                   params.ap.noise_w) >= params.rate_min_bps;
    std::size_t activated = 0;
    for (std::size_t i = 0; i < batteries.size(); ++i) {
      const double incident = p * std::max(0.0, forecast.device_gains[i][tau]);
      const double harvested = incident * harvester_beta(incident, params.harvester);
      const auto step = device_battery_step(batteries[i], harvested, params.device_capacity_mj,
                                            params.sample_cost_mj);
      batteries[i] = step.battery_mj;
      if (step.activated) ++activated;
    }
    const bool devices_ok = activated == batteries.size();
    if (devices_ok && user_ok) result.signature |= std::uint64_t{1} << tau;
    total += objective == Objective::kEfficiency ? energy_efficiency(devices_ok, user_ok, p)
                                                 : (devices_ok && user_ok ? 1.0 : 0.0);
    if (tau < horizon && !params.unlimited_energy) {
      battery = ap_battery_step(battery, p, std::max(0.0, forecast.arrivals_mj[tau]),
                                params.ap.battery_capacity_mj);
    }
  }
  result.value = total / static_cast<double>(horizon + 1);
  return result;
}

double rollout_value(double power_mw, double battery_mj, std::span<const double> device_batteries,
                     const Forecast& forecast, const EnvParams& params, Objective objective) {
  return rollout(power_mw, battery_mj, device_batteries, forecast, params, objective).value;
}

double effective_precision(const SearchOptions& options, double max_power_mw) {
  return std::max(options.precision, 1e-6 * max_power_mw);
}

double maximize(double upper, const std::function<RolloutResult(double)>& evaluate,
                const SearchOptions& options, double max_power_mw,
                std::span<const double> extra_points) {
  expects(options.grid_points >= 2, "search grid needs at least two points");
  if (!(upper > 0.0)) return 0.0;
  const double psi = effective_precision(options, max_power_mw);

  double best_u = 0.0;
  double best_v = -1.0;
  auto consider = [&](double u, const RolloutResult& r) {
    if (r.value > best_v || (r.value == best_v && u < best_u)) {
      best_v = r.value;
      best_u = u;
    }
  };

  const std::size_t g = options.grid_points;
  std::vector<double> grid(g);
  std::vector<RolloutResult> values(g);
  for (std::size_t i = 0; i < g; ++i) {
    grid[i] = i + 1 == g ? upper : upper * static_cast<double>(i) / static_cast<double>(g - 1);
    values[i] = evaluate(grid[i]);
    consider(grid[i], values[i]);
  }

  // Within each cell, peel signature changes off from the right: bisect for
  // the leftmost point sharing the right end's signature, record it, then
  // continue with what lies left of it.
  constexpr int kMaxChangesPerCell = 16;
  for (std::size_t i = 1; i < g; ++i) {
    const double lo = grid[i - 1];
    const std::uint64_t lo_sig = values[i - 1].signature;
    double hi = grid[i];
    RolloutResult hi_r = values[i];
    for (int change = 0; change < kMaxChangesPerCell && hi_r.signature != lo_sig; ++change) {
      double a = lo;
      double b = hi;
      RolloutResult b_r = hi_r;
      while (b - a > psi) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        const RolloutResult r = evaluate(m);
        if (r.signature == hi_r.signature) {
          b = m;
          b_r = r;
        } else {
          a = m;
        }
      }
      consider(b, b_r);
      if (a <= lo) break;
      hi = a;
      hi_r = evaluate(a);
      consider(a, hi_r);
    }
  }

  for (double u : extra_points) {
    if (u >= 0.0 && u <= upper) consider(u, evaluate(u));
  }
  return best_u;
}

namespace {

// a + b u + c u^2, the local form of a rollout quantity around the current
// candidate power. Powers are affine in u and harvests quadratic, so device
// batteries (sums of harvests) stay quadratic.
struct Quad {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double at(double u) const { return a + u * (b + u * c); }
  Quad operator+(const Quad& o) const { return {a + o.a, b + o.b, c + o.c}; }
  Quad operator-(const Quad& o) const { return {a - o.a, b - o.b, c - o.c}; }
  Quad operator*(double k) const { return {a * k, b * k, c * k}; }
  Quad operator+(double k) const { return {a + k, b, c}; }
};

Quad square(const Quad& x) { return {x.a * x.a, 2.0 * x.a * x.b, x.b * x.b}; }

// Smallest root of q(u) = level in (lo, hi), or hi when there is none.
double first_crossing(const Quad& q, double level, double lo, double hi) {
  const double a = q.c;
  const double b = q.b;
  const double c = q.a - level;
  double best = hi;
  auto take = [&](double r) {
    if (std::isfinite(r) && r > lo && r < best) best = r;
  };
  if (a == 0.0) {
    if (b != 0.0) take(-c / b);
    return best;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return best;
  const double s = std::sqrt(disc);
  const double q2 = -0.5 * (b + std::copysign(s, b));
  if (q2 != 0.0) {
    take(q2 / a);
    take(c / q2);
  } else {
    take(0.0);
  }
  return best;
}

// Efficiency of the harvester as a + g x over the piece containing x, plus
// the incident powers where the piece changes.
struct BetaPiece {
  double offset = 0.0;
  double slope = 0.0;
};

BetaPiece beta_piece(double x, const HarvesterCurve& curve) {
  if (x < curve.sensitivity_mw || curve.points.empty()) return {};
  const auto& pts = curve.points;
  if (x <= pts.front().input_mw) return {pts.front().efficiency, 0.0};
  if (x >= pts.back().input_mw) return {pts.back().efficiency, 0.0};
  const auto upper = std::upper_bound(
      pts.begin(), pts.end(), x, [](double p, const HarvesterPoint& pt) { return p < pt.input_mw; });
  const auto lower = upper - 1;
  const double slope =
      (upper->efficiency - lower->efficiency) / (upper->input_mw - lower->input_mw);
  return {lower->efficiency - slope * lower->input_mw, slope};
}

// Next power above `u` where any comparison inside the rollout changes
// outcome; between two such points the satisfaction signature is constant
// and every executed power is affine in u.
double next_breakpoint(double u, double upper, double battery_mj,
                       std::span<const double> device_batteries, const Forecast& forecast,
                       const EnvParams& params) {
  const std::size_t horizon = forecast.horizon();
  const double lo = u;
  double next = upper;
  auto watch = [&](const Quad& q, double level) { next = first_crossing(q, level, lo, next); };

  std::vector<Quad> batteries;
  for (double b : device_batteries) batteries.push_back({b, 0.0, 0.0});
  Quad battery{params.unlimited_energy ? params.ap.battery_capacity_mj : battery_mj, 0.0, 0.0};
  const Quad power_u{0.0, 1.0, 0.0};
  const double r_gain = std::exp2(params.rate_min_bps / params.ap.bandwidth_hz) - 1.0;

  for (std::size_t tau = 0; tau <= horizon; ++tau) {
    const double battery_now = battery.at(u);
    watch(battery - power_u, 0.0);
    const Quad p = u <= battery_now ? power_u : battery;

    const double gu = forecast.user_gains[tau];
    if (gu > 0.0 && params.rate_min_bps > 0.0) {
      watch(p, params.ap.noise_w * r_gain / gu * 1e3);
    }

    for (std::size_t i = 0; i < batteries.size(); ++i) {
      const double g = std::max(0.0, forecast.device_gains[i][tau]);
      const Quad x = p * g;
      const double x_now = x.at(u);
      if (g > 0.0) {
        watch(x, params.harvester.sensitivity_mw);
        for (const auto& pt : params.harvester.points) watch(x, pt.input_mw);
      }
      const BetaPiece piece = beta_piece(x_now, params.harvester);
      const Quad harvested = x * piece.offset + square(x) * piece.slope;
      const Quad charged = batteries[i] + harvested;
      watch(charged, params.device_capacity_mj);
      Quad level = charged;
      if (charged.at(u) >= params.device_capacity_mj) level = {params.device_capacity_mj, 0.0, 0.0};
      watch(level, params.sample_cost_mj);
      if (level.at(u) >= params.sample_cost_mj) level = level + (-params.sample_cost_mj);
      batteries[i] = level;
    }

    if (tau < horizon && !params.unlimited_energy) {
      const Quad after = battery - p + std::max(0.0, forecast.arrivals_mj[tau]);
      watch(after, params.ap.battery_capacity_mj);
      battery = after.at(u) >= params.ap.battery_capacity_mj
                    ? Quad{params.ap.battery_capacity_mj, 0.0, 0.0}
                    : after;
    }
  }
  return next;
}

}  // namespace

std::vector<double> rollout_breakpoints(double battery_mj, std::span<const double> device_batteries,
                                        const Forecast& forecast, const EnvParams& params) {
  const double upper = feasible_power(params, battery_mj);
  std::vector<double> out;
  if (!(upper > 0.0)) return out;
  constexpr int kMaxBreakpoints = 4096;
  double u = 0.0;
  for (int k = 0; k < kMaxBreakpoints; ++k) {
    const double step = 1e-11 * std::max(1.0, u);
    const double e = next_breakpoint(u + step, upper, battery_mj, device_batteries, forecast, params);
    if (e >= upper) break;
    const double d = 1e-11 * std::max(1.0, e);
    out.push_back(std::max(0.0, e - d));
    out.push_back(e);
    out.push_back(std::min(upper, e + d));
    u = e + d;
  }
  return out;
}

double optimize_power(double battery_mj, std::span<const double> device_batteries,
                      const Forecast& forecast, const EnvParams& params, Objective objective,
                      const SearchOptions& options) {
  const double upper = feasible_power(params, battery_mj);
  const auto breakpoints = rollout_breakpoints(battery_mj, device_batteries, forecast, params);
  return maximize(
      upper,
      [&](double u) {
        return rollout(u, battery_mj, device_batteries, forecast, params, objective);
      },
      options, params.ap.max_power_mw, breakpoints);
}

Forecaster::Forecaster(std::size_t window, double fallback) : window_(window), fallback_(fallback) {}

void Forecaster::observe(double slot, double value) { window_.push({slot, value}); }

std::vector<double> Forecaster::predict(std::span<const double> slots,
                                        const gpr::Hyperparameters& hyper) const {
  std::vector<double> out(slots.size());
  if (window_.size() < 2) {
    std::fill(out.begin(), out.end(), window_.empty() ? fallback_ : window_.back().value);
    return out;
  }
  const auto data = window_.snapshot();
  const auto model = gpr::GprModel::fit(data, hyper);
  for (std::size_t i = 0; i < slots.size(); ++i) out[i] = std::max(0.0, model.predict(slots[i]));
  return out;
}

void MpcConfig::validate() const {
  if (horizon >= 63) throw ConfigError("mpc.horizon: must be below 63");
  if (window == 0) throw ConfigError("mpc.window: must be positive");
  if (search.grid_points < 2) throw ConfigError("mpc.grid_points: must be at least 2");
  if (!(search.precision > 0.0)) throw ConfigError("mpc.precision: must be positive");
  if (!(gpr.length_scale > 0.0)) throw ConfigError("gpr.length_scale: must be positive");
  if (gpr.noise_ratio < 0.0) throw ConfigError("gpr.noise_ratio: must be non-negative");
}

namespace {

double mean_user_gain(const EnvParams& params, const EnvState& state) {
  double s = 0.0;
  for (const auto& u : state.users) s += params.channel.expected_gain(u.distance_m);
  return state.users.empty() ? 0.0 : s / static_cast<double>(state.users.size());
}

}  // namespace

Forecasters::Forecasters(const EnvParams& params, const EnvState& initial, const MpcConfig& config)
    : config_(config),
      arrival_(config.window, params.solar.stationary_mean_arrival()),
      user_(config.window, mean_user_gain(params, initial)) {
  config_.validate();
  for (const auto& d : initial.devices) {
    const double expected = params.channel.expected_gain(d.distance_m);
    expected_device_gains_.push_back(expected);
    devices_.emplace_back(config.window, expected);
  }
}

void Forecasters::update(const EnvState& before, const SlotOutcome& outcome) {
  const auto t = static_cast<double>(before.slot);
  arrival_.observe(t + 1.0, outcome.arrival_mj);
  user_.observe(t, outcome.user_gain);
  for (std::size_t i = 0; i < devices_.size(); ++i) devices_[i].observe(t, outcome.device_gains[i]);
}

Forecast Forecasters::forecast(const EnvState& state) const {
  const std::size_t horizon = config_.horizon;
  const auto t = static_cast<double>(state.slot);
  std::vector<double> now_and_ahead(horizon + 1);
  for (std::size_t k = 0; k <= horizon; ++k) now_and_ahead[k] = t + static_cast<double>(k);
  const std::span<const double> ahead(now_and_ahead.data() + 1, horizon);

  Forecast f;
  f.arrivals_mj = arrival_.predict(ahead, config_.gpr);
  f.user_gains.push_back(state.user_gain);
  const auto users = user_.predict(ahead, config_.gpr);
  f.user_gains.insert(f.user_gains.end(), users.begin(), users.end());
  for (std::size_t i = 0; i < devices_.size(); ++i) {
    if (config_.device_gains == DeviceGainMode::kExpected) {
      f.device_gains.emplace_back(horizon + 1, expected_device_gains_[i]);
    } else {
      f.device_gains.push_back(devices_[i].predict(now_and_ahead, config_.gpr));
    }
  }
  return f;
}

MpcPolicy::MpcPolicy(const EnvParams& params, const EnvState& initial, const MpcConfig& config,
                     Objective objective)
    : params_(params), config_(config), objective_(objective),
      forecasters_(params, initial, config) {}

MpcPolicy::MpcPolicy(const EnvParams& params, const Environment& env, const MpcConfig& config,
                     Objective objective)
    : MpcPolicy(params, env.state(), config, objective) {
  oracle_ = &env;
}

double MpcPolicy::act(const EnvState& state) {
  const Forecast f = oracle_ ? oracle_forecast(*oracle_, config_.horizon)
                             : forecasters_.forecast(state);
  std::vector<double> batteries;
  batteries.reserve(state.devices.size());
  for (const auto& d : state.devices) batteries.push_back(d.battery_mj);
  return optimize_power(state.ap_battery_mj, batteries, f, params_, objective_, config_.search);
}

void MpcPolicy::learn(const EnvState& before, const SlotOutcome& outcome, const EnvState&) {
  if (!oracle_) forecasters_.update(before, outcome);
}

}  // namespace wpt::mpc
