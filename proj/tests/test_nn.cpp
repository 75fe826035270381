#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "wpt/error.hpp"
#include "wpt/nn.hpp"

using namespace wpt;
using nn::Mlp;
using nn::Minibatch;

namespace {

// Plain loops over the layer tables, independent of the Eigen code path.
std::vector<double> reference_forward(const Mlp& net, std::vector<double> x) {
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weight;
    std::vector<double> y(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double s = layers[l].bias(r);
      for (Eigen::Index c = 0; c < w.cols(); ++c) s += w(r, c) * x[static_cast<std::size_t>(c)];
      if (l + 1 < layers.size() && s < 0.0) s *= net.negative_slope();
      y[static_cast<std::size_t>(r)] = s;
    }
    x = y;
  }
  return x;
}

Minibatch random_batch(const Mlp& net, std::size_t n, Rng& rng) {
  Minibatch b;
  b.inputs.resize(static_cast<Eigen::Index>(net.input_size()), static_cast<Eigen::Index>(n));
  b.targets.resize(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < b.inputs.rows(); ++i) {
      b.inputs(i, static_cast<Eigen::Index>(j)) = 2.0 * uniform01(rng) - 1.0;
    }
    b.actions.push_back(static_cast<std::size_t>(uniform01(rng) * net.output_size()));
    b.targets(static_cast<Eigen::Index>(j)) = 2.0 * uniform01(rng) - 1.0;
  }
  return b;
}

double max_gradient_error(Mlp net, const Minibatch& batch) {
  std::vector<nn::Layer> grads;
  nn::gradient(net, batch, grads);
  std::vector<double> analytic;
  for (const auto& g : grads) {
    analytic.insert(analytic.end(), g.weight.data(), g.weight.data() + g.weight.size());
    analytic.insert(analytic.end(), g.bias.data(), g.bias.data() + g.bias.size());
  }
  auto theta = net.flatten();
  REQUIRE(theta.size() == analytic.size());
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = theta[k];
    theta[k] = saved + h;
    net.assign(theta);
    const double up = nn::loss(net, batch);
    theta[k] = saved - h;
    net.assign(theta);
    const double down = nn::loss(net, batch);
    theta[k] = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[k]) / scale);
  }
  net.assign(theta);
  return worst;
}

}  // namespace

TEST_CASE("zero network outputs zeros") {
  const auto net = Mlp::zeros({2, 8, 8, 5}, 0.01);
  const auto y = net.forward(std::vector<double>{0.3, -2.0});
  REQUIRE(y.size() == 5);
  CHECK(y.isZero(0.0));
}

TEST_CASE("identity net passes positive inputs") {
  auto net = Mlp::zeros({3, 3}, 0.01);
  net.layers()[0].weight = Eigen::MatrixXd::Identity(3, 3);
  const std::vector<double> x{0.5, 1.5, 2.5};
  const auto y = net.forward(x);
  for (int i = 0; i < 3; ++i) CHECK(y(i) == x[static_cast<std::size_t>(i)]);

  // With a hidden identity layer the leaky slope applies to negatives only.
  auto deep = Mlp::zeros({1, 1, 1}, 0.1);
  deep.layers()[0].weight(0, 0) = 1.0;
  deep.layers()[1].weight(0, 0) = 1.0;
  CHECK(deep.forward(std::vector<double>{2.0})(0) == 2.0);
  CHECK(deep.forward(std::vector<double>{-2.0})(0) == doctest::Approx(-0.2));
}

TEST_CASE("forward matches a loop re-evaluation") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    Mlp net({2, 16, 4}, 0.01, rng);
    const std::vector<double> x{2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0};
    const auto y = net.forward(x);
    const auto ref = reference_forward(net, x);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(y(static_cast<Eigen::Index>(i)) - ref[i]) <= 1e-12);
    }
  }
}

TEST_CASE("batched forward equals per-sample forward") {
  Rng rng(3);
  Mlp net({2, 64, 64, 10}, 0.01, rng);
  Eigen::MatrixXd x(2, 7);
  for (Eigen::Index j = 0; j < 7; ++j) x.col(j) << uniform01(rng), uniform01(rng);
  const auto q = net.forward_batch(x);
  for (Eigen::Index j = 0; j < 7; ++j) {
    const std::vector<double> in{x(0, j), x(1, j)};
    CHECK((q.col(j) - net.forward(in)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("forward is pure") {
  Rng rng(8);
  const Mlp net({2, 16, 16, 6}, 0.01, rng);
  const std::vector<double> x{0.2, 0.9};
  const auto a = net.forward(x);
  const auto b = net.forward(x);
  CHECK(a == b);
}

TEST_CASE("dimension mismatch is a contract violation") {
  Rng rng(1);
  const Mlp net({2, 4, 3}, 0.01, rng);
  CHECK_THROWS_AS(net.forward(std::vector<double>{1.0}), ContractViolation);
  Minibatch b;
  b.inputs = Eigen::MatrixXd::Zero(2, 1);
  b.actions = {3};
  b.targets = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(nn::loss(net, b), ContractViolation);
}

TEST_CASE("seeded initialization is reproducible and bounded") {
  Rng a(5), b(5);
  const Mlp x({2, 32, 4}, 0.01, a);
  const Mlp y({2, 32, 4}, 0.01, b);
  CHECK(x == y);
  const double bound0 = 1.0 / std::sqrt(2.0);
  CHECK(x.layers()[0].weight.cwiseAbs().maxCoeff() <= bound0);
  const double bound1 = 1.0 / std::sqrt(32.0);
  CHECK(x.layers()[1].weight.cwiseAbs().maxCoeff() <= bound1);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Rng rng(2);
  Mlp net({2, 8, 4}, 0.01, rng);
  const Mlp before = net;
  const auto batch = random_batch(net, 16, rng);
  nn::sgd_step(net, batch, 0.0);
  CHECK(net == before);
}

TEST_CASE("repeated steps on one sample decrease the loss") {
  Rng rng(17);
  Mlp net({2, 8, 4}, 0.01, rng);
  Minibatch b;
  b.inputs = Eigen::MatrixXd(2, 1);
  b.inputs << 0.4, -0.7;
  b.actions = {2};
  b.targets = Eigen::VectorXd::Constant(1, 3.0);
  double prev = nn::loss(net, b);
  for (int i = 0; i < 100; ++i) {
    nn::sgd_step(net, b, 1e-2);
    const double now = nn::loss(net, b);
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("only the taken action carries gradient at the output") {
  Rng rng(4);
  const Mlp net({2, 8, 5}, 0.01, rng);
  Minibatch b;
  b.inputs = Eigen::MatrixXd::Constant(2, 1, 0.5);
  b.actions = {3};
  b.targets = Eigen::VectorXd::Constant(1, 1.0);
  std::vector<nn::Layer> grads;
  nn::gradient(net, b, grads);
  const auto& out = grads.back();
  for (Eigen::Index r = 0; r < 5; ++r) {
    if (r == 3) continue;
    CHECK(out.weight.row(r).isZero(0.0));
    CHECK(out.bias(r) == 0.0);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(11);
  Mlp net({2, 8, 4}, 0.01, rng);
  const auto batch = random_batch(net, 5, rng);
  CHECK(max_gradient_error(net, batch) < 1e-4);

  Mlp deep({2, 6, 5, 3}, 0.2, rng);
  CHECK(max_gradient_error(deep, random_batch(deep, 4, rng)) < 1e-4);
}

TEST_CASE("non-finite gradients are reported and the net is untouched") {
  Rng rng(6);
  Mlp net({2, 4, 2}, 0.01, rng);
  const Mlp before = net;
  Minibatch b;
  b.inputs = Eigen::MatrixXd::Constant(2, 1, 1.0);
  b.actions = {0};
  b.targets = Eigen::VectorXd::Constant(1, std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(nn::sgd_step(net, b, 0.1), NumericalError);
  CHECK(net == before);
}

TEST_CASE("copies evaluate identically") {
  Rng rng(10);
  const Mlp net({2, 16, 16, 8}, 0.01, rng);
  Mlp copy = Mlp::zeros(net.sizes(), 0.01);
  copy.assign(net.flatten());
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> x{uniform01(rng), uniform01(rng)};
    CHECK(net.forward(x) == copy.forward(x));
  }
}

TEST_CASE("save then load round-trips exactly") {
  Rng rng(12);
  const Mlp net({2, 16, 7}, 0.05, rng);
  std::stringstream buf;
  net.save(buf);
  CHECK(buf.str().rfind("wpt-mlp 1", 0) == 0);
  const Mlp back = Mlp::load(buf);
  CHECK(back == net);
  CHECK(back.negative_slope() == 0.05);

  std::stringstream bad("not-a-checkpoint 3");
  CHECK_THROWS(Mlp::load(bad));
}
