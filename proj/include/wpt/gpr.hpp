#pragma once

// Gaussian process regression with a squared-exponential (RBF) kernel over a
// one-dimensional input, used as a per-parameter time-series forecaster.

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace wpt::gpr {

struct Observation {
  double input;
  double value;
};

struct Hyperparameters {
  double length_scale = 3.0;              // in input units (slots)
  std::optional<double> signal_variance;  // default: sample variance of the targets
  double noise_ratio = 1e-2;              // noise variance = noise_ratio * signal variance
  std::optional<double> noise_variance;   // overrides noise_ratio when set
  double jitter_ratio = 1e-8;
  bool standardize = true;                // zero-mean, unit-variance inputs and targets
};

double rbf_kernel(double a, double b, double length_scale, double signal_variance);

class GprModel {
 public:
  // Throws wpt::NumericalError if the regularized kernel matrix is not
  // positive definite, wpt::ContractViolation on an empty window or bad
  // hyperparameters.
  static GprModel fit(std::span<const Observation> window, const Hyperparameters& hyper);

  double predict(double input) const;
  double variance(double input) const;  // latent-function posterior variance

  // Kernel matrix without the noise and jitter terms, in standardized units.
  const Eigen::MatrixXd& kernel_matrix() const { return kernel_; }
  double signal_variance() const { return signal_variance_; }
  double noise_variance() const { return noise_variance_; }
  std::size_t size() const { return static_cast<std::size_t>(inputs_.size()); }

 private:
  Eigen::VectorXd inputs_;  // scaled
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd kernel_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  double input_mean_ = 0.0;
  double input_scale_ = 1.0;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;
  double length_scale_ = 1.0;  // scaled
  double signal_variance_ = 1.0;
  double noise_variance_ = 0.0;
};

// Most recent `capacity` observations, oldest first.
class SlidingWindow {
 public:
  explicit SlidingWindow(std::size_t capacity);

  void push(Observation obs);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  const Observation& back() const { return data_.back(); }
  std::vector<Observation> snapshot() const { return {data_.begin(), data_.end()}; }

 private:
  std::size_t capacity_;
  std::deque<Observation> data_;
};

}  // namespace wpt::gpr
