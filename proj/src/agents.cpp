#include "wpt/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "wpt/error.hpp"

namespace wpt {

double reward(const SlotOutcome& outcome, Objective objective) {
  if (objective == Objective::kEfficiency) return outcome.efficiency;
  return (outcome.devices_satisfied && outcome.user_satisfied) ? 1.0 : 0.0;
}

double EpsilonSchedule::at(std::size_t slot) const {
  const double t = static_cast<double>(slot) / time_scale;
  const double value = final + (initial - final) / std::pow(t + 1.0, exponent);
  return std::clamp(value, final, 1.0);
}

double epsilon(std::size_t slot, double initial, double final) {
  return EpsilonSchedule{initial, final}.at(slot);
}

ActionSpace::ActionSpace(std::size_t levels, double max_power_mw)
    : levels_(levels), max_power_mw_(max_power_mw) {
  expects(levels >= 2, "action space needs at least two levels");
  expects(max_power_mw > 0.0, "maximum power must be positive");
}

double ActionSpace::power(std::size_t index) const {
  expects(index < levels_, "action index out of range");
  if (index + 1 == levels_) return max_power_mw_;
  return max_power_mw_ * static_cast<double>(index) / static_cast<double>(levels_ - 1);
}

std::size_t ActionSpace::index_of(double power_mw) const {
  const double scaled = power_mw / max_power_mw_ * static_cast<double>(levels_ - 1);
  const double rounded = std::round(std::clamp(scaled, 0.0, static_cast<double>(levels_ - 1)));
  return static_cast<std::size_t>(rounded);
}

std::size_t argmax_lowest(const double* values, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double greedy_power(double battery_mj, double max_power_mw) {
  return std::max(0.0, std::min(max_power_mw, battery_mj));
}

double random_power(double battery_mj, double max_power_mw, Rng& rng) {
  return std::min(uniform01(rng) * max_power_mw, std::max(0.0, battery_mj));
}

double no_policy_power(double user_gain, double rate_min_bps, double bandwidth_hz, double noise_w,
                       double max_power_mw, double battery_mj) {
  if (rate_min_bps <= 0.0 || user_gain <= 0.0) return 0.0;
  double p = noise_w * (std::exp2(rate_min_bps / bandwidth_hz) - 1.0) / user_gain * 1e3;
  // Rounding can leave the inverted power short of the rate. At low SNR one
  // ulp of 1 + SNR spans many ulps of p, so the step doubles until it lands.
  double step = std::nextafter(p, std::numeric_limits<double>::infinity()) - p;
  for (int i = 0; i < 64 && data_rate(p, user_gain, bandwidth_hz, noise_w) < rate_min_bps; ++i) {
    p += step;
    step *= 2.0;
  }
  return std::clamp(p, 0.0, std::max(0.0, std::min(max_power_mw, battery_mj)));
}

double GreedyPolicy::act(const EnvState& state) {
  return greedy_power(state.ap_battery_mj, params_.ap.max_power_mw);
}

RandomPolicy::RandomPolicy(const EnvParams& params, std::uint64_t seed)
    : params_(params), rng_(make_stream(seed, Stream::kExploration)) {}

double RandomPolicy::act(const EnvState& state) {
  return random_power(state.ap_battery_mj, params_.ap.max_power_mw, rng_);
}

double NoPolicy::act(const EnvState& state) {
  if (state.user_gain <= 0.0) {
    ++unservable_;
    return 0.0;
  }
  return no_policy_power(state.user_gain, params_.rate_min_bps, params_.ap.bandwidth_hz,
                         params_.ap.noise_w, params_.ap.max_power_mw, state.ap_battery_mj);
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  expects(capacity > 0, "replay capacity must be positive");
  data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayMemory::push(const Transition& t) {
  if (data_.size() < capacity_) {
    data_.push_back(t);
    return;
  }
  data_[head_] = t;
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayMemory::at(std::size_t i) const {
  expects(i < data_.size(), "replay index out of range");
  return data_[(head_ + i) % data_.size()];
}

std::vector<std::size_t> ReplayMemory::sample(std::size_t count, Rng& rng) const {
  const std::size_t n = data_.size();
  count = std::min(count, n);
  // Floyd's algorithm: distinct indices in O(count).
  std::vector<std::size_t> out;
  out.reserve(count);
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(count * 2);
  for (std::size_t j = n - count; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    std::size_t k = pick(rng);
    if (!chosen.insert(k).second) {
      k = j;
      chosen.insert(k);
    }
    out.push_back(k);
  }
  return out;
}

void DqnConfig::validate() const {
  if (learning_rate < 0.0) throw ConfigError("dqn.learning_rate: must be non-negative");
  if (discount < 0.0 || discount > 1.0) throw ConfigError("dqn.discount: must lie in [0, 1]");
  if (num_actions < 2) throw ConfigError("dqn.num_actions: must be at least 2");
  if (memory_size == 0) throw ConfigError("dqn.memory_size: must be positive");
  if (minibatch == 0) throw ConfigError("dqn.minibatch: must be positive");
  if (train_interval == 0) throw ConfigError("dqn.train_interval: must be positive");
  if (target_sync == 0) throw ConfigError("dqn.target_sync: must be positive");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("dqn.hidden: layer sizes must be positive");
  }
  if (!(epsilon.final >= 0.0 && epsilon.final <= epsilon.initial && epsilon.initial <= 1.0)) {
    throw ConfigError("dqn.epsilon: need 0 <= final <= initial <= 1");
  }
  if (epsilon.time_scale <= 0.0) throw ConfigError("dqn.epsilon_time_scale: must be positive");
}

Features agent_features(const EnvParams& params, double user_gain, double battery_mj,
                        FeatureScale scale) {
  const double g_ref = 1.0 / (params.user_distance_min_m * params.user_distance_min_m);
  if (scale == FeatureScale::kLinear) {
    return {user_gain / g_ref, battery_mj / params.ap.battery_capacity_mj};
  }
  const double pmax = params.ap.max_power_mw;
  return {1.0 + std::log10(std::max(user_gain, 1e-12) / g_ref) / 3.0,
          std::log1p(battery_mj / pmax) / std::log1p(params.ap.battery_capacity_mj / pmax)};
}

DqnAgent::DqnAgent(const EnvParams& params, const DqnConfig& config, Objective objective,
                   std::uint64_t seed)
    : params_(params),
      config_(config),
      objective_(objective),
      actions_(config.num_actions, params.ap.max_power_mw),
      memory_(config.memory_size),
      explore_(make_stream(seed, Stream::kExploration)) {
  config_.validate();
  std::vector<std::size_t> sizes{2};
  sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
  sizes.push_back(config_.num_actions);
  Rng init = make_stream(seed, Stream::kPolicyInit);
  eval_ = nn::Mlp(sizes, config_.negative_slope, init);
  target_ = eval_;
}

std::size_t DqnAgent::best_action(const Features& features) const {
  const Eigen::VectorXd q = eval_.forward(features);
  return argmax_lowest(q.data(), static_cast<std::size_t>(q.size()));
}

double DqnAgent::act(const EnvState& state) {
  std::size_t index;
  if (uniform01(explore_) < config_.epsilon.at(state.slot)) {
    std::uniform_int_distribution<std::size_t> pick(0, actions_.size() - 1);
    index = pick(explore_);
  } else {
    index = best_action(
        agent_features(params_, state.user_gain, state.ap_battery_mj, config_.features));
  }
  return std::min(actions_.power(index), feasible_power(params_, state.ap_battery_mj));
}

void DqnAgent::learn(const EnvState& before, const SlotOutcome& outcome, const EnvState& after) {
  observe({agent_features(params_, before.user_gain, before.ap_battery_mj, config_.features),
           actions_.index_of(outcome.power_mw), reward(outcome, objective_),
           agent_features(params_, after.user_gain, after.ap_battery_mj, config_.features)},
          before.slot);
}

void DqnAgent::observe(const Transition& transition, std::size_t slot) {
  memory_.push(transition);
  if (slot >= config_.replay_start && (slot - config_.replay_start) % config_.train_interval == 0) {
    train_once();
  }
  if ((slot + 1) % config_.target_sync == 0) target_ = eval_;
}

std::vector<double> DqnAgent::targets(const std::vector<Transition>& batch) const {
  Eigen::MatrixXd next(2, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    next(0, static_cast<Eigen::Index>(j)) = batch[j].next_state[0];
    next(1, static_cast<Eigen::Index>(j)) = batch[j].next_state[1];
  }
  const Eigen::MatrixXd q = target_.forward_batch(next);
  std::vector<double> y(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    y[j] = batch[j].reward + config_.discount * q.col(static_cast<Eigen::Index>(j)).maxCoeff();
  }
  return y;
}

double DqnAgent::train_once() {
  if (memory_.size() == 0) return 0.0;
  const auto picks = memory_.sample(config_.minibatch, explore_);
  std::vector<Transition> batch;
  batch.reserve(picks.size());
  for (auto i : picks) batch.push_back(memory_.at(i));
  const auto y = targets(batch);

  nn::Minibatch mb;
  mb.inputs.resize(2, static_cast<Eigen::Index>(batch.size()));
  mb.targets.resize(static_cast<Eigen::Index>(batch.size()));
  mb.actions.resize(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    mb.inputs(0, c) = batch[j].state[0];
    mb.inputs(1, c) = batch[j].state[1];
    mb.actions[j] = batch[j].action;
    mb.targets(c) = y[j];
  }
  ++train_steps_;
  return nn::sgd_step(eval_, mb, config_.learning_rate);
}

TabularQ::TabularQ(std::size_t states, std::size_t actions, double learning_rate, double discount)
    : states_(states),
      actions_(actions),
      learning_rate_(learning_rate),
      discount_(discount),
      table_(states * actions, 0.0) {
  expects(states > 0 && actions > 0, "Q-table needs at least one state and one action");
}

double TabularQ::max_value(std::size_t s) const {
  return table_[s * actions_ + best_action(s)];
}

std::size_t TabularQ::best_action(std::size_t s) const {
  expects(s < states_, "state index out of range");
  return argmax_lowest(&table_[s * actions_], actions_);
}

void TabularQ::update(std::size_t s, std::size_t a, double r, std::size_t next_s) {
  expects(s < states_ && next_s < states_ && a < actions_, "Q-table index out of range");
  double& q = table_[s * actions_ + a];
  q += learning_rate_ * (r + discount_ * max_value(next_s) - q);
}

void TabularConfig::validate() const {
  if (gain_bins == 0 || battery_bins == 0) throw ConfigError("trl: bin counts must be positive");
  if (learning_rate <= 0.0 || learning_rate > 1.0) {
    throw ConfigError("trl.learning_rate: must lie in (0, 1]");
  }
  if (discount < 0.0 || discount > 1.0) throw ConfigError("trl.discount: must lie in [0, 1]");
  if (num_actions < 2) throw ConfigError("trl.num_actions: must be at least 2");
}

TabularAgent::TabularAgent(const EnvParams& params, const TabularConfig& config,
                           Objective objective, std::uint64_t seed)
    : params_(params),
      config_(config),
      objective_(objective),
      actions_(config.num_actions, params.ap.max_power_mw),
      table_(config.gain_bins * config.battery_bins, config.num_actions, config.learning_rate,
             config.discount),
      explore_(make_stream(seed, Stream::kExploration)) {
  config_.validate();
  // Gain range: deep fade at the cell edge up to a strong draw at d_min.
  const double m2 = params.channel.second_moment();
  log_gain_lo_ = std::log10(0.05 * m2 / (params.user_distance_max_m * params.user_distance_max_m));
  log_gain_hi_ = std::log10(3.0 * m2 / (params.user_distance_min_m * params.user_distance_min_m));
}

std::size_t TabularAgent::state_index(double user_gain, double battery_mj) const {
  auto bin = [](double x, std::size_t bins) {
    const double b = std::floor(std::clamp(x, 0.0, 1.0) * static_cast<double>(bins));
    return std::min(static_cast<std::size_t>(b), bins - 1);
  };
  const double lg = std::log10(std::max(user_gain, 1e-300));
  const std::size_t g = bin((lg - log_gain_lo_) / (log_gain_hi_ - log_gain_lo_), config_.gain_bins);
  const std::size_t b = bin(battery_mj / params_.ap.battery_capacity_mj, config_.battery_bins);
  return g * config_.battery_bins + b;
}

double TabularAgent::act(const EnvState& state) {
  std::size_t index;
  if (uniform01(explore_) < config_.epsilon.at(state.slot)) {
    std::uniform_int_distribution<std::size_t> pick(0, actions_.size() - 1);
    index = pick(explore_);
  } else {
    index = table_.best_action(state_index(state.user_gain, state.ap_battery_mj));
  }
  return std::min(actions_.power(index), feasible_power(params_, state.ap_battery_mj));
}

void TabularAgent::learn(const EnvState& before, const SlotOutcome& outcome,
                         const EnvState& after) {
  table_.update(state_index(before.user_gain, before.ap_battery_mj),
                actions_.index_of(outcome.power_mw), reward(outcome, objective_),
                state_index(after.user_gain, after.ap_battery_mj));
}

}  // namespace wpt
