#include "wpt/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <utility>

#include "wpt/error.hpp"

namespace wpt::gpr {

double rbf_kernel(double a, double b, double length_scale, double signal_variance) {
  const double d = (a - b) / length_scale;
  return signal_variance * std::exp(-0.5 * d * d);
}

namespace {

std::pair<double, double> mean_and_scale(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

}  // namespace

GprModel GprModel::fit(std::span<const Observation> window, const Hyperparameters& hyper) {
  expects(!window.empty(), "GPR window is empty");
  expects(hyper.length_scale > 0.0, "length scale must be positive");
  expects(!hyper.signal_variance || *hyper.signal_variance > 0.0,
          "signal variance must be positive");
  expects(hyper.noise_ratio >= 0.0 && hyper.jitter_ratio >= 0.0,
          "noise and jitter ratios must be non-negative");

  const auto n = static_cast<Eigen::Index>(window.size());
  Eigen::VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = window[static_cast<std::size_t>(i)].input;
    y(i) = window[static_cast<std::size_t>(i)].value;
  }

  GprModel m;
  if (hyper.standardize) {
    std::tie(m.input_mean_, m.input_scale_) = mean_and_scale(x);
    std::tie(m.target_mean_, m.target_scale_) = mean_and_scale(y);
  }
  m.inputs_ = (x.array() - m.input_mean_) / m.input_scale_;
  const Eigen::VectorXd targets = (y.array() - m.target_mean_) / m.target_scale_;
  m.length_scale_ = hyper.length_scale / m.input_scale_;

  if (hyper.signal_variance) {
    m.signal_variance_ = *hyper.signal_variance;
  } else {
    const double var = (targets.array() - targets.mean()).square().mean();
    m.signal_variance_ = var > 0.0 ? var : 1.0;
  }
  m.noise_variance_ = hyper.noise_variance ? *hyper.noise_variance
                                           : hyper.noise_ratio * m.signal_variance_;
  expects(m.noise_variance_ >= 0.0, "noise variance must be non-negative");

  m.kernel_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      m.kernel_(i, j) = m.kernel_(j, i) =
          rbf_kernel(m.inputs_(i), m.inputs_(j), m.length_scale_, m.signal_variance_);
    }
  }
  Eigen::MatrixXd regularized = m.kernel_;
  regularized.diagonal().array() += m.noise_variance_ + hyper.jitter_ratio * m.signal_variance_;
  m.factor_.compute(regularized);
  if (m.factor_.info() != Eigen::Success) {
    throw NumericalError("GPR kernel matrix is not positive definite");
  }
  m.alpha_ = m.factor_.solve(targets);
  if (!m.alpha_.allFinite()) throw NumericalError("GPR solve produced non-finite weights");
  return m;
}

double GprModel::predict(double input) const {
  const double x = (input - input_mean_) / input_scale_;
  double s = 0.0;
  for (Eigen::Index i = 0; i < inputs_.size(); ++i) {
    s += rbf_kernel(x, inputs_(i), length_scale_, signal_variance_) * alpha_(i);
  }
  return target_mean_ + target_scale_ * s;
}

double GprModel::variance(double input) const {
  const double x = (input - input_mean_) / input_scale_;
  Eigen::VectorXd k(inputs_.size());
  for (Eigen::Index i = 0; i < inputs_.size(); ++i) {
    k(i) = rbf_kernel(x, inputs_(i), length_scale_, signal_variance_);
  }
  const double v = signal_variance_ - k.dot(factor_.solve(k));
  return std::max(0.0, v) * target_scale_ * target_scale_;
}

SlidingWindow::SlidingWindow(std::size_t capacity) : capacity_(capacity) {
  expects(capacity > 0, "window capacity must be positive");
}

void SlidingWindow::push(Observation obs) {
  data_.push_back(obs);
  while (data_.size() > capacity_) data_.pop_front();
}

}  // namespace wpt::gpr
