#include <doctest.h>

#include <cmath>
#include <fstream>
#include <string>

#include "ssenc/data.hpp"
#include "ssenc/error.hpp"
#include "support.hpp"

using namespace ssenc;

namespace {

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("csv round trip is exact") {
  const auto dir = testing::scratch_dir("csv_roundtrip");
  const auto d = testing::random_dataset(50, 2, 3, 11);
  save_csv(d, dir / "d.csv");
  const auto back = load_csv(dir / "d.csv", 2, 3);
  CHECK(back.u == d.u);
  CHECK(back.y == d.y);
}

TEST_CASE("csv parsing accepts signs, exponents and blank lines") {
  const auto dir = testing::scratch_dir("csv_parse");
  const auto p = write_file(dir, "a.csv", "u1,y1\n+1.5,-2e-3\n\n 3 , 4 \n");
  const auto d = load_csv(p, 1, 1);
  REQUIRE(d.samples() == 2);
  CHECK(d.u.at(0, 0) == 1.5);
  CHECK(d.y.at(0, 0) == -2e-3);
  CHECK(d.u.at(1, 0) == 3.0);
}

TEST_CASE("csv errors name the row, line and column") {
  const auto dir = testing::scratch_dir("csv_errors");
  SUBCASE("bad number") {
    const auto p = write_file(dir, "b.csv", "u1,y1\n1,2\n\n3,abc\n");
    const auto msg = error_of([&] { load_csv(p, 1, 1); });
    CHECK(msg.find("row 2 (line 4)") != std::string::npos);
    CHECK(msg.find("'y1'") != std::string::npos);
  }
  SUBCASE("non-finite") {
    const auto p = write_file(dir, "n.csv", "u1,y1\nnan,2\n");
    CHECK_THROWS_AS(load_csv(p, 1, 1), DataError);
    const auto q = write_file(dir, "i.csv", "u1,y1\n1,inf\n");
    CHECK_THROWS_AS(load_csv(q, 1, 1), DataError);
  }
  SUBCASE("field count") {
    const auto p = write_file(dir, "f.csv", "u1,y1\n1,2,3\n");
    CHECK(error_of([&] { load_csv(p, 1, 1); }).find("3 fields, expected 2") != std::string::npos);
  }
  SUBCASE("header") {
    const auto p = write_file(dir, "h.csv", "y1,u1\n1,2\n");
    CHECK(error_of([&] { load_csv(p, 1, 1); }).find("header mismatch") != std::string::npos);
  }
  SUBCASE("empty and missing") {
    const auto p = write_file(dir, "e.csv", "u1,y1\n");
    CHECK(error_of([&] { load_csv(p, 1, 1); }).find("no data rows") != std::string::npos);
    CHECK_THROWS_AS(load_csv(dir / "missing.csv", 1, 1), DataError);
  }
}

TEST_CASE("normalizer uses the population standard deviation") {
  const Signal s(1, {1.0, 2.0, 3.0, 4.0});
  const auto n = fit_normalizer(s);
  CHECK(n.mean[0] == doctest::Approx(2.5));
  CHECK(n.stddev[0] == doctest::Approx(std::sqrt(1.25)));
  const auto z = n.apply(s);
  const auto back = n.invert(z);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.values[i] == doctest::Approx(s.values[i]));
  CHECK_THROWS_AS(fit_normalizer(Signal(1, std::vector<double>{2.0, 2.0, 2.0})), DataError);
  CHECK_THROWS_AS(fit_normalizer(Signal(1, std::vector<double>{2.0})), DataError);
}

TEST_CASE("split checks bounds and overlap") {
  const auto d = testing::random_dataset(100, 1, 1, 3);
  const std::vector<IndexRange> ok{{0, 60}, {60, 80}, {80, 100}};
  const auto parts = split(d, ok);
  REQUIRE(parts.size() == 3);
  CHECK(parts[1].samples() == 20);
  CHECK(parts[1].u.at(0, 0) == d.u.at(60, 0));
  const std::vector<IndexRange> overlap{{0, 60}, {50, 80}};
  CHECK_THROWS_AS(split(d, overlap), DataError);
  const std::vector<IndexRange> outside{{90, 101}};
  CHECK_THROWS_AS(split(d, outside), DataError);
  const std::vector<IndexRange> empty{{5, 5}};
  CHECK_THROWS_AS(split(d, empty), DataError);
}

TEST_CASE("linear generation matches a hand-computed trajectory") {
  // x1 = 0.5 x + u, y = x: impulse response 0, 1, 0.5
  SyntheticSystem s;
  s.linear = {1, 1, 1, {0.5}, {1.0}, {1.0}, {0.0}};
  const auto d = generate(s, Signal(1, std::vector<double>{1.0, 0.0, 0.0}), 0);
  CHECK(d.y.values == std::vector<double>{0.0, 1.0, 0.5});
}

TEST_CASE("wiener generation matches a plain loop") {
  const auto sys = testing::second_order_wiener();
  const auto u = gaussian_input(300, 1, 1.0, 5);
  const auto d = generate(sys, u, 0);
  double x0 = 0, x1 = 0;
  for (std::size_t t = 0; t < 300; ++t) {
    const double y = std::tanh(0.5 * x0);
    CHECK(std::abs(d.y.at(t, 0) - y) < 1e-12);
    const double n0 = 0.7 * x0 + 0.2 * x1 + 1.0 * u.at(t, 0);
    const double n1 = -0.2 * x0 + 0.7 * x1 + 0.5 * u.at(t, 0);
    x0 = n0;
    x1 = n1;
  }
}

TEST_CASE("unstable systems and bad json are rejected") {
  SyntheticSystem s;
  s.linear = {1, 1, 1, {1.01}, {1.0}, {1.0}, {0.0}};
  CHECK(error_of([&] { generate(s, Signal(1, std::vector<double>{1.0}), 0); }).find("not stable") != std::string::npos);
  CHECK_THROWS_AS(system_from_json("{"), ConfigError);
  CHECK_THROWS_AS(system_from_json(R"({"kind":"nope"})"), ConfigError);
}

TEST_CASE("system json round trip") {
  const auto sys = testing::second_order_wiener();
  const auto back = system_from_json(system_to_json(sys));
  CHECK(back.kind == SystemKind::Wiener);
  CHECK(back.linear.a == sys.linear.a);
  CHECK(back.nonlinearity.in_scale == 0.5);
  SyntheticSystem duff;
  duff.kind = SystemKind::Duffing;
  duff.duffing.damping = 0.3;
  CHECK(system_from_json(system_to_json(duff)).duffing.damping == 0.3);
}

TEST_CASE("noise is seeded and has the requested level") {
  const auto u = gaussian_input(20000, 1, 1.0, 1);
  const auto a = generate(testing::second_order_linear(0.1), u, 9);
  const auto b = generate(testing::second_order_linear(0.1), u, 9);
  const auto clean = generate(testing::second_order_linear(0.0), u, 9);
  CHECK(a.y == b.y);
  double ss = 0;
  for (std::size_t i = 0; i < u.samples(); ++i) ss += std::pow(a.y.values[i] - clean.y.values[i], 2);
  CHECK(std::sqrt(ss / u.samples()) == doctest::Approx(0.1).epsilon(0.03));
}

TEST_CASE("duffing generation stays finite and responds to input") {
  SyntheticSystem s;
  s.kind = SystemKind::Duffing;
  const auto d = generate(s, gaussian_input(2000, 1, 1.0, 2), 0);
  CHECK(d.y.at(0, 0) == 0.0);
  for (double v : d.y.values) CHECK(std::isfinite(v));
  CHECK_NOTHROW(fit_normalizer(d.y));
}

TEST_CASE("input generators hit the requested rms") {
  auto rms = [](const Signal& s) {
    double ss = 0;
    for (double v : s.values) ss += v * v;
    return std::sqrt(ss / s.values.size());
  };
  CHECK(rms(gaussian_input(50000, 1, 2.0, 1)) == doctest::Approx(2.0).epsilon(0.02));
  CHECK(rms(filtered_gaussian_input(4000, 2, 0.7, 0.9, 1)) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(rms(multisine_input(4000, 1, 1.5, 40, 0.3, 1)) == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(gaussian_input(10, 1, 1.0, 4) == gaussian_input(10, 1, 1.0, 4));
  CHECK_THROWS_AS(filtered_gaussian_input(10, 1, 1.0, 1.0, 1), ConfigError);
}
