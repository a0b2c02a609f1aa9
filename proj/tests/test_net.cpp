#include <doctest.h>

#include <cmath>
#include <random>

#include "ssenc/error.hpp"
#include "ssenc/net.hpp"
#include "support.hpp"

using namespace ssenc;

TEST_CASE("parameter layout and counts") {
  const NetShape s{3, {4, 5}, 2};
  CHECK(s.parameter_count() == (4 * 3 + 4) + (5 * 4 + 5) + 2 * 5 + 2 * 3 + 2);
  const auto net = ResidualNet<double>::init(s, 1);
  CHECK(net.hidden_weight_offset(0) == 0);
  CHECK(net.hidden_bias_offset(0) == 12);
  CHECK(net.hidden_weight_offset(1) == 16);
  CHECK(net.output_weight_offset() == 41);
  CHECK(net.bypass_weight_offset() == 51);
  CHECK(net.bypass_bias_offset() == 57);
  const NetShape affine{3, {}, 2};
  CHECK(affine.parameter_count() == 8);
  CHECK(ResidualNet<double>(affine).output_weight().empty());
}

TEST_CASE("initialization bounds and moments") {
  for (auto rule : {InitRule::Standard, InitRule::Sqrt}) {
    const NetShape s{16, {64}, 4};
    const auto net = ResidualNet<double>::init(s, 3, rule);
    const double b_in = init_bound(rule, 16), b_hid = init_bound(rule, 64);
    double sum = 0, sumsq = 0;
    for (double w : net.hidden_weight(0)) {
      CHECK(std::abs(w) <= b_in);
      sum += w;
      sumsq += w * w;
    }
    const double n = static_cast<double>(net.hidden_weight(0).size());
    CHECK(std::abs(sum / n) < 4.0 * b_in / std::sqrt(3.0 * n));
    CHECK(sumsq / n == doctest::Approx(b_in * b_in / 3.0).epsilon(0.15));
    for (double w : net.output_weight()) CHECK(std::abs(w) <= b_hid);
    for (double w : net.bypass_bias()) CHECK(std::abs(w) <= b_in);
  }
  CHECK(init_bound(InitRule::Standard, 4) == doctest::Approx(0.5));
  CHECK(init_bound(InitRule::Sqrt, 16) == doctest::Approx(0.5));
  CHECK(ResidualNet<double>::init({2, {3}, 1}, 9) == ResidualNet<double>::init({2, {3}, 1}, 9));
  CHECK_FALSE(ResidualNet<double>::init({2, {3}, 1}, 9) == ResidualNet<double>::init({2, {3}, 1}, 10));
  CHECK(init_rule_from_string(to_string(InitRule::Sqrt)) == InitRule::Sqrt);
  CHECK_THROWS(init_rule_from_string("xavier"));
}

TEST_CASE("forward pass hand examples") {
  // One hidden node: W = 1, b = 0, A1 = 1, A3 = 0, b3 = 0 gives tanh(z).
  ResidualNet<double> net({1, {1}, 1});
  std::vector<double> p{1.0, 0.0, 1.0, 0.0, 0.0};
  net.set_params(p);
  std::vector<double> out(1);
  net.evaluate(std::vector<double>{0.5}, out);
  CHECK(out[0] == doctest::Approx(0.4621171573).epsilon(1e-10));

  // Affine net: A3 = [[1, 2]], b3 = [3].
  ResidualNet<double> lin({2, {}, 1});
  lin.set_params(std::vector<double>{1.0, 2.0, 3.0});
  lin.evaluate(std::vector<double>{1.0, -1.0}, out);
  CHECK(out[0] == 2.0);
}

TEST_CASE("forward matches the plain-loop reference") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const NetShape s{1 + rng() % 6, testing::random_widths(rng, 3, 9), 1 + rng() % 4};
    const auto net = ResidualNet<double>::init(s, rng(), InitRule::Sqrt);
    std::vector<double> z(s.n_in);
    std::normal_distribution<double> nd;
    for (auto& v : z) v = nd(rng);
    std::vector<double> out(s.n_out);
    net.evaluate(z, out);
    const auto ref = testing::naive_net(net, z);
    NetTape<double> tape;
    const auto taped = net.forward(z, tape);
    for (std::size_t i = 0; i < s.n_out; ++i) {
      CHECK(std::abs(out[i] - ref[i]) < 1e-12);
      CHECK(taped[i] == out[i]);
    }
  }
}

TEST_CASE("backward matches finite differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 100; ++trial) {
    const NetShape s{1 + rng() % 5, testing::random_widths(rng, 2, 8), 1 + rng() % 3};
    auto net = ResidualNet<double>::init(s, rng(), InitRule::Sqrt);
    std::vector<double> z(s.n_in), w(s.n_out);
    for (auto& v : z) v = nd(rng);
    for (auto& v : w) v = nd(rng);
    auto objective = [&](const ResidualNet<double>& n, const std::vector<double>& zin) {
      std::vector<double> o(s.n_out);
      n.evaluate(zin, o);
      double acc = 0;
      for (std::size_t i = 0; i < o.size(); ++i) acc += w[i] * o[i];
      return acc;
    };
    NetTape<double> tape;
    net.forward(z, tape);
    std::vector<double> dz(s.n_in), dp(net.params().size(), 0.0);
    net.backward(tape, w, dz, dp);

    const double h = 1e-6;
    for (std::size_t i = 0; i < dp.size(); ++i) {
      auto plus = net, minus = net;
      plus.mutable_params()[i] += h;
      minus.mutable_params()[i] -= h;
      const double fd = (objective(plus, z) - objective(minus, z)) / (2 * h);
      CHECK((testing::rel_error(fd, dp[i]) < 1e-6 || std::abs(fd - dp[i]) < 1e-9));
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
      auto zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      const double fd = (objective(net, zp) - objective(net, zm)) / (2 * h);
      CHECK((testing::rel_error(fd, dz[i]) < 1e-6 || std::abs(fd - dz[i]) < 1e-9));
    }
  }
}

TEST_CASE("backward accumulates into dparams and rejects stale tapes") {
  auto net = ResidualNet<double>::init({2, {3}, 1}, 1);
  NetTape<double> tape;
  const std::vector<double> z{0.3, -0.2}, w{1.0};
  net.forward(z, tape);
  std::vector<double> dz(2), once(net.params().size(), 0.0), twice(net.params().size(), 0.0);
  net.backward(tape, w, dz, once);
  net.backward(tape, w, dz, twice);
  net.backward(tape, w, dz, twice);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2 * once[i]));
  net.mutable_params()[0] += 1.0;
  CHECK_THROWS_AS(net.backward(tape, w, dz, once), Error);
}

TEST_CASE("zero hidden layers give an exactly linear map") {
  const auto net = ResidualNet<double>::init({3, {}, 2}, 8);
  const std::vector<double> a{1, 2, 3}, b{-1, 0.5, 2};
  std::vector<double> fa(2), fb(2), fab(2), f0(2);
  net.evaluate(a, fa);
  net.evaluate(b, fb);
  net.evaluate(std::vector<double>{0, 2.5, 5}, fab);
  net.evaluate(std::vector<double>{0, 0, 0}, f0);
  for (std::size_t i = 0; i < 2; ++i) CHECK(fab[i] == doctest::Approx(fa[i] + fb[i] - f0[i]).epsilon(1e-14));
}

TEST_CASE("parameter flatten round trip and shape checks") {
  const auto net = ResidualNet<float>::init({4, {5}, 2}, 2);
  ResidualNet<float> copy({4, {5}, 2});
  copy.set_params(net.params());
  CHECK(copy == net);
  CHECK_THROWS_AS(copy.set_params(std::vector<float>(3)), DimensionError);
  std::vector<float> out(2);
  CHECK_THROWS_AS(net.evaluate(std::vector<float>(3), out), DimensionError);
  CHECK_THROWS(NetShape({0, {}, 1}).validate());
  CHECK_THROWS(NetShape({1, {0}, 1}).validate());
}
