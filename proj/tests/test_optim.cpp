#include <doctest.h>

#include <cmath>
#include <limits>

#include "ssenc/error.hpp"
#include "ssenc/metrics.hpp"
#include "ssenc/optim.hpp"
#include "support.hpp"

using namespace ssenc;

namespace {

struct Task {
  Dataset train, val;
};

Task linear_task(double scale = 1.0) {
  const auto sys = testing::second_order_linear();
  Task t{generate(sys, filtered_gaussian_input(600, 1, 1.0, 0.5, 1), 0),
         generate(sys, filtered_gaussian_input(300, 1, 1.0, 0.5, 2), 0)};
  for (auto* d : {&t.train, &t.val}) {
    for (double& v : d->u.values) v *= scale;
    for (double& v : d->y.values) v *= scale;
  }
  return t;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.n_a = c.n_b = 4;
  c.horizon = 10;
  c.batch_size = 32;
  c.learning_rate = 5e-3;
  c.max_epochs = 15;
  c.final_refine_epochs = 5;
  c.seed = 3;
  return c;
}

template <class T>
TrainResult<T> run(const Task& task, const TrainConfig& c, const ModelArch& arch = {{6}, {6}, {6}}) {
  const auto [un, yn] = fit_normalizer(task.train);
  const auto m = SSEncoderModel<T>::create({c.n_x, 1, 1, c.n_a, c.n_b}, arch, un, yn, c.seed);
  return train(m, task.train, task.val, c);
}

}  // namespace

TEST_CASE("adam matches a hand computation") {
  AdamState<double> s(1, 0.1);
  std::vector<double> p{1.0};
  REQUIRE(adam_step(s, std::span<double>(p), std::span<const double>(std::vector<double>{0.5})));
  CHECK(p[0] == doctest::Approx(0.900000002).epsilon(1e-12));
  REQUIRE(adam_step(s, std::span<double>(p), std::span<const double>(std::vector<double>{-1.0})));
  CHECK(p[0] == doctest::Approx(0.9366103542405654).epsilon(1e-12));
  CHECK(s.m[0] == doctest::Approx(-0.055));
  CHECK(s.v[0] == doctest::Approx(0.00124975));
  CHECK(s.t == 2);
}

TEST_CASE("adam skips non-finite gradients without touching state") {
  AdamState<double> s(2, 0.1);
  std::vector<double> p{1.0, 2.0};
  const std::vector<double> bad{0.1, std::numeric_limits<double>::quiet_NaN()};
  CHECK_FALSE(adam_step(s, std::span<double>(p), std::span<const double>(bad)));
  CHECK(p == std::vector<double>{1.0, 2.0});
  CHECK(s.t == 0);
  CHECK(s.m == std::vector<double>{0.0, 0.0});
}

TEST_CASE("config validation names the field") {
  TrainConfig c;
  c.batch_size = 0;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("batch_size") != std::string::npos);
  }
  c = {};
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(train_mode_from_string("simulation") == TrainMode::Simulation);
  CHECK(precision_from_string("f32") == Precision::F32);
  CHECK_THROWS_AS(train_mode_from_string("sgd"), ConfigError);
}

TEST_CASE("training reduces validation error and is deterministic") {
  const auto task = linear_task();
  const auto c = quick_config();
  const auto a = run<double>(task, c);
  const auto b = run<double>(task, c);
  CHECK(log_csv(a.log, false) == log_csv(b.log, false));
  CHECK(model_to_json(a.model) == model_to_json(b.model));
  CHECK(a.log.records.size() == c.max_epochs + c.final_refine_epochs);
  CHECK(a.log.best_val_nrms() < a.log.records.front().val_nrms);
}

TEST_CASE("saved model scores the minimum logged validation NRMS") {
  const auto task = linear_task();
  for (auto mode : {TrainMode::EncoderBatch, TrainMode::EncoderFull, TrainMode::Simulation}) {
    auto c = quick_config();
    c.mode = mode;
    c.learning_rate = 0.05;  // large steps make validation non-monotone
    const auto r = run<double>(task, c);
    CHECK(evaluate_simulation(r.model, task.val).nrms == r.log.best_val_nrms());
    CHECK(r.log.records.front().is_best);
    std::size_t best = 0;
    for (std::size_t i = 0; i < r.log.records.size(); ++i)
      if (r.log.records[i].is_best) best = i;
    CHECK(r.log.records[best].val_nrms == r.log.best_val_nrms());
  }
}

TEST_CASE("refinement epochs are appended and flagged") {
  const auto task = linear_task();
  auto c = quick_config();
  c.final_refine_epochs = 4;
  const auto r = run<double>(task, c);
  REQUIRE(r.log.records.size() == c.max_epochs + 4);
  for (std::size_t i = 0; i < r.log.records.size(); ++i) {
    CHECK(r.log.records[i].epoch == i + 1);
    CHECK(r.log.records[i].refine == (i >= c.max_epochs));
  }
}

TEST_CASE("an amplitude change by a power of two leaves training bit-identical") {
  const auto c = quick_config();
  const auto a = run<double>(linear_task(1.0), c);
  const auto b = run<double>(linear_task(1024.0), c);
  REQUIRE(a.log.records.size() == b.log.records.size());
  for (std::size_t i = 0; i < a.log.records.size(); ++i) {
    CHECK(a.log.records[i].train_loss == b.log.records[i].train_loss);
    CHECK(a.log.records[i].val_nrms == b.log.records[i].val_nrms);
  }
  CHECK(a.model.parameters().values == b.model.parameters().values);
  const auto k = run<double>(linear_task(1000.0), c);
  CHECK(k.log.best_val_nrms() == doctest::Approx(a.log.best_val_nrms()).epsilon(1e-6));
}

TEST_CASE("single precision training runs") {
  auto c = quick_config();
  c.precision = Precision::F32;
  const auto r = run<float>(linear_task(), c);
  CHECK(std::isfinite(r.log.best_val_nrms()));
  CHECK(r.log.best_val_nrms() < r.log.records.front().val_nrms);
}

TEST_CASE("wall-clock budget stops the main phase") {
  auto c = quick_config();
  c.max_epochs = 1000000;
  c.max_seconds = 0.3;
  c.final_refine_epochs = 0;
  const auto r = run<double>(linear_task(), c);
  CHECK(r.log.records.size() < 1000000);
  CHECK(r.log.records.back().seconds >= 0.3);
}

TEST_CASE("log csv format") {
  TrainLog log;
  log.records.push_back({1, 0.5, 0.25, 1.5, true, false, 0});
  log.records.push_back({2, 0.4, 0.3, 2.0, false, true, 0});
  const auto with = log_csv(log, true);
  CHECK(with.rfind("epoch,train_loss,val_nrms,seconds,is_best\n", 0) == 0);
  CHECK(with.find("1.500000,1") != std::string::npos);
  CHECK(log_csv(log, false).find("0.000000,0") != std::string::npos);
}
