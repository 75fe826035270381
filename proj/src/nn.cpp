#include "wpt/nn.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "wpt/error.hpp"

namespace wpt::nn {

namespace {

constexpr const char* kMagic = "wpt-mlp";
constexpr int kFormatVersion = 1;

Eigen::MatrixXd leaky(const Eigen::MatrixXd& z, double slope) {
  return z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Eigen::MatrixXd leaky_derivative(const Eigen::MatrixXd& z, double slope) {
  return z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

void check_sizes(const std::vector<std::size_t>& sizes) {
  expects(sizes.size() >= 2, "network needs an input and an output layer");
  for (auto s : sizes) expects(s > 0, "layer sizes must be positive");
}

}  // namespace

Mlp::Mlp(const std::vector<std::size_t>& sizes, double negative_slope, Rng& rng)
    : slope_(negative_slope) {
  check_sizes(sizes);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes[l]);
    const auto out = static_cast<Eigen::Index>(sizes[l + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (Eigen::Index c = 0; c < in; ++c) {
      for (Eigen::Index r = 0; r < out; ++r) layer.weight(r, c) = bound * (2.0 * uniform01(rng) - 1.0);
    }
    for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = bound * (2.0 * uniform01(rng) - 1.0);
    layers_.push_back(std::move(layer));
  }
}

Mlp Mlp::zeros(const std::vector<std::size_t>& sizes, double negative_slope) {
  check_sizes(sizes);
  Mlp net;
  net.slope_ = negative_slope;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes[l]);
    const auto out = static_cast<Eigen::Index>(sizes[l + 1]);
    net.layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  return net;
}

std::size_t Mlp::input_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t Mlp::output_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::vector<std::size_t> Mlp::sizes() const {
  std::vector<std::size_t> s;
  if (layers_.empty()) return s;
  s.push_back(input_size());
  for (const auto& l : layers_) s.push_back(static_cast<std::size_t>(l.weight.rows()));
  return s;
}

Eigen::VectorXd Mlp::forward(std::span<const double> input) const {
  expects(input.size() == input_size(), "input length does not match the network");
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(input.data(),
                                                        static_cast<Eigen::Index>(input.size()));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weight * a + layers_[l].bias;
    a = l + 1 < layers_.size() ? Eigen::VectorXd(leaky(z, slope_)) : z;
  }
  return a;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  expects(static_cast<std::size_t>(inputs.rows()) == input_size(),
          "input rows do not match the network");
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    a = l + 1 < layers_.size() ? leaky(z, slope_) : z;
  }
  return a;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers_) {
    flat.insert(flat.end(), l.weight.data(), l.weight.data() + l.weight.size());
    flat.insert(flat.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return flat;
}

void Mlp::assign(std::span<const double> flat) {
  expects(flat.size() == parameter_count(), "flat parameter vector has the wrong length");
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = flat[k++];
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = flat[k++];
  }
}

void Mlp::save(std::ostream& out) const {
  const auto s = sizes();
  out << kMagic << ' ' << kFormatVersion << '\n' << s.size();
  for (auto v : s) out << ' ' << v;
  out << '\n';
  out.precision(17);
  out << slope_ << '\n';
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out << (c ? " " : "") << l.weight(r, c);
      out << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out << (r ? " " : "") << l.bias(r);
    out << '\n';
  }
}

Mlp Mlp::load(std::istream& in) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version >> count) || magic != kMagic) {
    throw ConfigError("not a network checkpoint");
  }
  if (version != kFormatVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  }
  std::vector<std::size_t> s(count);
  for (auto& v : s) in >> v;
  double slope = 0.0;
  in >> slope;
  if (!in || count < 2) throw ConfigError("truncated checkpoint header");
  Mlp net = zeros(s, slope);
  for (auto& l : net.layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) in >> l.weight(r, c);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) in >> l.bias(r);
  }
  if (!in) throw ConfigError("truncated checkpoint body");
  return net;
}

bool Mlp::operator==(const Mlp& other) const {
  if (slope_ != other.slope_ || layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weight != other.layers_[l].weight || layers_[l].bias != other.layers_[l].bias) {
      return false;
    }
  }
  return true;
}

namespace {

void check_batch(const Mlp& net, const Minibatch& batch) {
  const auto n = batch.inputs.cols();
  expects(n > 0, "minibatch is empty");
  expects(static_cast<std::size_t>(batch.actions.size()) == static_cast<std::size_t>(n) &&
              batch.targets.size() == n,
          "minibatch fields disagree in length");
  for (auto a : batch.actions) expects(a < net.output_size(), "action index out of range");
}

}  // namespace

double loss(const Mlp& net, const Minibatch& batch) {
  check_batch(net, batch);
  const Eigen::MatrixXd q = net.forward_batch(batch.inputs);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const double e = q(static_cast<Eigen::Index>(batch.actions[j]), j) - batch.targets(j);
    sum += e * e;
  }
  return sum / static_cast<double>(q.cols());
}

double gradient(const Mlp& net, const Minibatch& batch, std::vector<Layer>& grads) {
  check_batch(net, batch);
  const auto& layers = net.layers();
  const double slope = net.negative_slope();
  const auto n = batch.inputs.cols();

  // Forward pass keeping pre-activations.
  std::vector<Eigen::MatrixXd> activations{batch.inputs};
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weight * activations.back();
    z.colwise() += layers[l].bias;
    pre.push_back(z);
    activations.push_back(l + 1 < layers.size() ? leaky(z, slope) : z);
  }

  const Eigen::MatrixXd& q = activations.back();
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), n);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto a = static_cast<Eigen::Index>(batch.actions[j]);
    const double e = q(a, j) - batch.targets(j);
    sum += e * e;
    delta(a, j) = 2.0 * e / static_cast<double>(n);
  }

  grads.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    grads[l].weight = delta * activations[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) {
      delta = (layers[l].weight.transpose() * delta).cwiseProduct(leaky_derivative(pre[l - 1], slope));
    }
  }
  return sum / static_cast<double>(n);
}

double sgd_step(Mlp& net, const Minibatch& batch, double learning_rate) {
  expects(learning_rate >= 0.0, "learning rate must be non-negative");
  std::vector<Layer> grads;
  const double before = gradient(net, batch, grads);
  for (const auto& g : grads) {
    if (!g.weight.allFinite() || !g.bias.allFinite()) {
      throw NumericalError("non-finite gradient in SGD step");
    }
  }
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight -= learning_rate * grads[l].weight;
    layers[l].bias -= learning_rate * grads[l].bias;
  }
  return before;
}

}  // namespace wpt::nn
