#pragma once

// Transmit-power controllers. Every controller sees the slot through the same
// Policy interface and must return a power in [0, min(P_max, B_t)]. Policies
// only read what the AP can observe: its battery, the current user's gain and,
// for model-based control, the levels and gains devices report back.

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "wpt/env.hpp"
#include "wpt/nn.hpp"
#include "wpt/random.hpp"

namespace wpt {

// Reward-1 (both user types satisfied) or Reward-2 (energy efficiency).
enum class Objective { kSatisfaction, kEfficiency };

double reward(const SlotOutcome& outcome, Objective objective);

struct EpsilonSchedule {
  double initial = 1.0;
  double final = 0.01;
  double exponent = 2.0;
  double time_scale = 1.0;  // slots per unit of decay time

  // clamp(final + (initial - final) / (t / time_scale + 1)^exponent, final, 1)
  double at(std::size_t slot) const;
};

double epsilon(std::size_t slot, double initial, double final);

class ActionSpace {
 public:
  ActionSpace(std::size_t levels, double max_power_mw);

  std::size_t size() const { return levels_; }
  double power(std::size_t index) const;
  // Nearest level to an executed (possibly battery-clamped) power.
  std::size_t index_of(double power_mw) const;

 private:
  std::size_t levels_;
  double max_power_mw_;
};

// Lowest index among maximal entries.
std::size_t argmax_lowest(const double* values, std::size_t n);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual double act(const EnvState& state) = 0;
  virtual void learn(const EnvState& /*before*/, const SlotOutcome& /*outcome*/,
                     const EnvState& /*after*/) {}
};

double greedy_power(double battery_mj, double max_power_mw);
double random_power(double battery_mj, double max_power_mw, Rng& rng);
// Smallest power meeting r_min for the given gain, clamped to the feasible
// range. Zero gain or zero requirement gives zero.
double no_policy_power(double user_gain, double rate_min_bps, double bandwidth_hz, double noise_w,
                       double max_power_mw, double battery_mj);

class GreedyPolicy final : public Policy {
 public:
  explicit GreedyPolicy(const EnvParams& params) : params_(params) {}
  std::string name() const override { return "greedy"; }
  double act(const EnvState& state) override;

 private:
  EnvParams params_;
};

class RandomPolicy final : public Policy {
 public:
  RandomPolicy(const EnvParams& params, std::uint64_t seed);
  std::string name() const override { return "random"; }
  double act(const EnvState& state) override;

 private:
  EnvParams params_;
  Rng rng_;
};

class NoPolicy final : public Policy {
 public:
  explicit NoPolicy(const EnvParams& params) : params_(params) {}
  std::string name() const override { return "no_policy"; }
  double act(const EnvState& state) override;
  std::size_t unservable_slots() const { return unservable_; }

 private:
  EnvParams params_;
  std::size_t unservable_ = 0;
};

using Features = std::array<double, 2>;

struct Transition {
  Features state;
  std::size_t action;
  double reward;
  Features next_state;
};

class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  // i-th oldest stored transition
  const Transition& at(std::size_t i) const;
  // `count` distinct indices (fewer if the memory is smaller), uniform.
  std::vector<std::size_t> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot that the next push overwrites once full
  std::vector<Transition> data_;
};

// How the network sees the state. kLinear is (g_u / g_ref, B_t / B_max).
// kLog compresses both: gains span three decades and the battery mostly sits
// far below B_max, so linear features crowd the decision boundary near zero.
enum class FeatureScale { kLinear, kLog };

struct DqnConfig {
  std::vector<std::size_t> hidden{64, 64};
  double negative_slope = 0.01;
  double learning_rate = 1e-5;
  double discount = 0.4;
  std::size_t num_actions = 100;
  std::size_t memory_size = 50'000;
  std::size_t minibatch = 200;
  std::size_t train_interval = 2;   // K
  std::size_t target_sync = 400;    // K'
  std::size_t replay_start = 3'000;
  // Decays over about a thousand slots, so exploration overlaps the replay warm-up.
  EpsilonSchedule epsilon{.time_scale = 1000.0};
  FeatureScale features = FeatureScale::kLog;

  void validate() const;
};

// g_ref = 1 / d_min^2. Log scale: 1 + log10(g_u / g_ref) / 3 and
// log(1 + B_t / P_max) / log(1 + B_max / P_max).
Features agent_features(const EnvParams& params, double user_gain, double battery_mj,
                        FeatureScale scale = FeatureScale::kLinear);

class DqnAgent final : public Policy {
 public:
  DqnAgent(const EnvParams& params, const DqnConfig& config, Objective objective,
           std::uint64_t seed);

  std::string name() const override { return "dqn"; }
  double act(const EnvState& state) override;
  void learn(const EnvState& before, const SlotOutcome& outcome, const EnvState& after) override;

  // Appends a transition and runs the training/sync schedule for `slot`.
  void observe(const Transition& transition, std::size_t slot);
  // One SGD step on a sampled minibatch; no-op on an empty memory. Returns
  // the pre-step loss (0 when skipped).
  double train_once();

  const nn::Mlp& evaluation() const { return eval_; }
  const nn::Mlp& target() const { return target_; }
  nn::Mlp& evaluation() { return eval_; }
  const ReplayMemory& memory() const { return memory_; }
  const ActionSpace& actions() const { return actions_; }
  std::size_t training_steps() const { return train_steps_; }

  // Greedy action index for given features.
  std::size_t best_action(const Features& features) const;
  // Targets y = r + gamma * max_a' Q'(s', a') for the given transitions.
  std::vector<double> targets(const std::vector<Transition>& batch) const;

 private:
  EnvParams params_;
  DqnConfig config_;
  Objective objective_;
  ActionSpace actions_;
  nn::Mlp eval_;
  nn::Mlp target_;
  ReplayMemory memory_;
  Rng explore_;
  std::size_t train_steps_ = 0;
};

// Q-table over integer states and actions with the one-step Q-learning update.
class TabularQ {
 public:
  TabularQ(std::size_t states, std::size_t actions, double learning_rate, double discount);

  double value(std::size_t s, std::size_t a) const { return table_[s * actions_ + a]; }
  double max_value(std::size_t s) const;
  std::size_t best_action(std::size_t s) const;
  void update(std::size_t s, std::size_t a, double r, std::size_t next_s);

  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }

 private:
  std::size_t states_;
  std::size_t actions_;
  double learning_rate_;
  double discount_;
  std::vector<double> table_;
};

struct TabularConfig {
  std::size_t gain_bins = 20;
  std::size_t battery_bins = 20;
  double learning_rate = 0.1;
  double discount = 0.4;
  std::size_t num_actions = 100;
  EpsilonSchedule epsilon{.time_scale = 1000.0};

  void validate() const;
};

class TabularAgent final : public Policy {
 public:
  TabularAgent(const EnvParams& params, const TabularConfig& config, Objective objective,
               std::uint64_t seed);

  std::string name() const override { return "trl"; }
  double act(const EnvState& state) override;
  void learn(const EnvState& before, const SlotOutcome& outcome, const EnvState& after) override;

  // Gain is binned on a log scale, battery linearly over [0, B_max].
  std::size_t state_index(double user_gain, double battery_mj) const;
  const TabularQ& table() const { return table_; }

 private:
  EnvParams params_;
  TabularConfig config_;
  Objective objective_;
  ActionSpace actions_;
  TabularQ table_;
  Rng explore_;
  double log_gain_lo_;
  double log_gain_hi_;
};

}  // namespace wpt
