#pragma once

// Dense feed-forward network with leaky-ReLU hidden layers and a linear
// output layer, trained by plain minibatch SGD on a squared error restricted
// to one output per sample (the taken action's Q-value).

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "wpt/random.hpp"

namespace wpt::nn {

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

class Mlp {
 public:
  Mlp() = default;

  // Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(const std::vector<std::size_t>& sizes, double negative_slope, Rng& rng);

  static Mlp zeros(const std::vector<std::size_t>& sizes, double negative_slope);

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::vector<std::size_t> sizes() const;
  double negative_slope() const { return slope_; }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Eigen::VectorXd forward(std::span<const double> input) const;
  // One sample per column.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  std::size_t parameter_count() const;
  // Layer by layer: weight (column-major), then bias.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  // Text format, see README ("Network checkpoints").
  void save(std::ostream& out) const;
  static Mlp load(std::istream& in);

  bool operator==(const Mlp& other) const;

 private:
  std::vector<Layer> layers_;
  double slope_ = 0.01;
};

struct Minibatch {
  Eigen::MatrixXd inputs;            // in x batch
  std::vector<std::size_t> actions;  // output index that carries the loss
  Eigen::VectorXd targets;           // batch
};

// mean over the batch of (Q(x, a) - y)^2
double loss(const Mlp& net, const Minibatch& batch);

// Gradient of `loss` with respect to every layer's weight and bias. Returns
// the loss evaluated on the way.
double gradient(const Mlp& net, const Minibatch& batch, std::vector<Layer>& grads);

// One SGD step in place. Returns the loss before the step. Throws
// NumericalError if the gradient is not finite; `net` is unchanged then.
double sgd_step(Mlp& net, const Minibatch& batch, double learning_rate);

}  // namespace wpt::nn
