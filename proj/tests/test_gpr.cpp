#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "wpt/error.hpp"
#include "wpt/gpr.hpp"
#include "wpt/random.hpp"

using namespace wpt;
using namespace wpt::gpr;

namespace {

std::vector<Observation> series(int from, int count, double (*f)(double)) {
  std::vector<Observation> w;
  for (int q = from; q < from + count; ++q) w.push_back({double(q), f(double(q))});
  return w;
}

double wave(double q) { return std::sin(0.3 * q); }

}  // namespace

TEST_CASE("single observation, raw units") {
  Hyperparameters h;
  h.standardize = false;
  h.signal_variance = 2.0;
  h.noise_variance = 0.5;
  h.jitter_ratio = 0.0;
  const std::vector<Observation> w{{0.0, 5.0}};
  const auto m = GprModel::fit(w, h);
  CHECK(m.predict(0.0) == doctest::Approx(5.0 * 2.0 / 2.5).epsilon(1e-14));
  // One length scale away the kernel weight is exp(-1/2).
  CHECK(m.predict(3.0) == doctest::Approx(5.0 * 2.0 / 2.5 * std::exp(-0.5)).epsilon(1e-14));
  CHECK(m.variance(0.0) == doctest::Approx(2.0 - 4.0 / 2.5).epsilon(1e-14));
}

TEST_CASE("constant window reproduces the constant") {
  std::vector<Observation> w;
  for (int q = 0; q < 20; ++q) w.push_back({double(q), 7.25});
  Hyperparameters h;
  h.noise_ratio = 1e-9;
  const auto m = GprModel::fit(w, h);
  for (int q = 0; q < 25; ++q) CHECK(std::abs(m.predict(q) - 7.25) <= 1e-6);
}

TEST_CASE("kernel matrix is symmetric with the signal variance on the diagonal") {
  Rng rng(3);
  std::vector<Observation> w;
  for (int q = 0; q < 15; ++q) w.push_back({double(q), uniform01(rng)});
  const auto m = GprModel::fit(w, {});
  const auto& k = m.kernel_matrix();
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd unit = k / m.signal_variance();
  for (Eigen::Index i = 0; i < unit.rows(); ++i) CHECK(unit(i, i) == doctest::Approx(1.0));
  CHECK(m.noise_variance() == doctest::Approx(1e-2 * m.signal_variance()));
}

TEST_CASE("near-noiseless fit interpolates the training points") {
  Rng rng(5);
  std::vector<Observation> w;
  for (int q = 0; q < 20; ++q) w.push_back({double(q), 10.0 * uniform01(rng)});
  Hyperparameters h;
  h.length_scale = 1.0;
  h.noise_ratio = 1e-9;
  const auto m = GprModel::fit(w, h);
  for (const auto& o : w) CHECK(std::abs(m.predict(o.input) - o.value) < 1e-3);
}

TEST_CASE("training error shrinks with the noise ratio") {
  const auto w = series(0, 20, wave);
  double prev = 1e9;
  for (double ratio : {1e-1, 1e-3, 1e-5, 1e-7}) {
    Hyperparameters h;
    h.noise_ratio = ratio;
    const auto m = GprModel::fit(w, h);
    double err = 0.0;
    for (const auto& o : w) err = std::max(err, std::abs(m.predict(o.input) - o.value));
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("far from the window the prediction returns to the mean") {
  Rng rng(9);
  std::vector<Observation> w;
  double mean = 0.0;
  for (int q = 0; q < 20; ++q) {
    w.push_back({double(q), 3.0 + uniform01(rng)});
    mean += w.back().value / 20.0;
  }
  const auto m = GprModel::fit(w, {});
  CHECK(m.predict(1e4) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("one-step-ahead forecast of a sine") {
  Hyperparameters h;
  h.length_scale = 5.0;
  h.noise_ratio = 1e-6;
  double ss = 0.0;
  int n = 0;
  for (int start = 0; start < 200; ++start) {
    const auto w = series(start, 20, wave);
    const auto m = GprModel::fit(w, h);
    const double e = m.predict(start + 20) - wave(start + 20);
    ss += e * e;
    ++n;
  }
  CHECK(std::sqrt(ss / n) < 0.05);
}

TEST_CASE("shifting every input leaves predictions unchanged") {
  const auto w = series(0, 20, wave);
  auto shifted = w;
  for (auto& o : shifted) o.input += 12345.0;
  const auto a = GprModel::fit(w, {});
  const auto b = GprModel::fit(shifted, {});
  for (double q : {0.0, 4.5, 19.0, 20.0, 23.0}) {
    CHECK(a.predict(q) == doctest::Approx(b.predict(q + 12345.0)).epsilon(1e-9));
  }
}

TEST_CASE("fitting is pure") {
  const auto w = series(3, 20, wave);
  const auto a = GprModel::fit(w, {});
  const auto b = GprModel::fit(w, {});
  for (double q = 0; q < 30; q += 0.5) CHECK(a.predict(q) == b.predict(q));
}

TEST_CASE("bad inputs") {
  CHECK_THROWS_AS(GprModel::fit(std::vector<Observation>{}, {}), ContractViolation);
  Hyperparameters h;
  h.length_scale = 0.0;
  CHECK_THROWS_AS(GprModel::fit(series(0, 3, wave), h), ContractViolation);

  // Duplicate inputs without noise or jitter leave a singular matrix.
  Hyperparameters sing;
  sing.noise_ratio = 0.0;
  sing.jitter_ratio = 0.0;
  const std::vector<Observation> dup{{1.0, 1.0}, {1.0, 2.0}, {2.0, 0.0}};
  CHECK_THROWS_AS(GprModel::fit(dup, sing), NumericalError);
}

TEST_CASE("sliding window keeps the newest points") {
  SlidingWindow w(3);
  CHECK(w.empty());
  for (int i = 0; i < 5; ++i) w.push({double(i), double(10 * i)});
  CHECK(w.size() == 3);
  const auto s = w.snapshot();
  CHECK(s.front().input == 2.0);
  CHECK(s.back().input == 4.0);
  CHECK(w.back().value == 40.0);
  CHECK_THROWS_AS(SlidingWindow(0), ContractViolation);
}
