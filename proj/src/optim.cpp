#include "ssenc/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ssenc/error.hpp"
#include "ssenc/kernels.hpp"
#include "ssenc/metrics.hpp"

namespace ssenc {

template <class T>
bool adam_step(AdamState<T>& s, std::span<T> params, std::span<const T> grad) {
  if (params.size() != grad.size() || s.m.size() != params.size() || s.v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and moment sizes differ");
  }
  if (!std::all_of(grad.begin(), grad.end(), [](T g) { return std::isfinite(g); })) return false;
  ++s.t;
  const double t = static_cast<double>(s.t);
  const T c1 = static_cast<T>(1.0 - std::pow(s.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(s.beta2, t));
  kernels::active<T>().adam(params.data(), s.m.data(), s.v.data(), grad.data(), params.size(),
                            static_cast<T>(s.learning_rate), static_cast<T>(s.beta1), static_cast<T>(s.beta2),
                            static_cast<T>(s.epsilon), c1, c2);
  return true;
}

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::EncoderBatch:
      return "encoder-batch";
    case TrainMode::EncoderFull:
      return "encoder-full";
    case TrainMode::Simulation:
      return "simulation";
  }
  return "?";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "encoder-batch") return TrainMode::EncoderBatch;
  if (s == "encoder-full") return TrainMode::EncoderFull;
  if (s == "simulation") return TrainMode::Simulation;
  throw ConfigError("mode must be encoder-batch, encoder-full or simulation, got '" + s + "'");
}

std::string to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

Precision precision_from_string(const std::string& s) {
  if (s == "f32") return Precision::F32;
  if (s == "f64") return Precision::F64;
  throw ConfigError("precision must be f32 or f64, got '" + s + "'");
}

void TrainConfig::validate() const {
  if (n_x == 0) throw ConfigError("n_x must be >= 1");
  if (n_a + n_b == 0) throw ConfigError("n_a + n_b must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (workers == 0) throw ConfigError("workers must be >= 1");
  if (!(max_seconds >= 0.0)) throw ConfigError("max_seconds must be >= 0");
}

double TrainLog::best_val_nrms() const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : records) best = std::min(best, r.val_nrms);
  return best;
}

std::string log_csv(const TrainLog& log, bool include_wall_time) {
  std::ostringstream out;
  out << "epoch,train_loss,val_nrms,seconds,is_best\n";
  char buf[160];
  for (const auto& r : log.records) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.6f,%d\n", r.epoch, r.train_loss, r.val_nrms,
                  include_wall_time ? r.seconds : 0.0, r.is_best ? 1 : 0);
    out << buf;
  }
  return out.str();
}

void write_log_csv(const TrainLog& log, const std::filesystem::path& path, bool include_wall_time) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << log_csv(log, include_wall_time);
}

namespace {

using Clock = std::chrono::steady_clock;

template <class T>
double validation_nrms(const SSEncoderModel<T>& m, const Dataset& val, SimInit init) {
  const double v = evaluate_simulation(m, val, init).nrms;
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

template <class T>
void check_compatible(const SSEncoderModel<T>& model, const Dataset& train, const Dataset& val,
                      const TrainConfig& cfg) {
  cfg.validate();
  const auto& d = model.dims();
  if (d.n_x != cfg.n_x || d.n_a != cfg.n_a || d.n_b != cfg.n_b) {
    throw ConfigError("model dims (n_x, n_a, n_b) = (" + std::to_string(d.n_x) + ", " + std::to_string(d.n_a) + ", " +
                      std::to_string(d.n_b) + ") do not match the training config");
  }
  train.validate();
  val.validate();
  if (val.samples() <= (cfg.sim_init == SimInit::Encoder ? d.warmup() : 0)) {
    throw ConfigError("validation set has " + std::to_string(val.samples()) +
                      " samples, too short for a free-run simulation after max(n_a, n_b)=" +
                      std::to_string(d.warmup()));
  }
}

// Applies one gradient step; returns the loss, NaN when the step was skipped.
template <class T>
double apply_step(SSEncoderModel<T>& model, std::vector<T>& flat, AdamState<T>& adam, const LossResult<T>& r) {
  if (!std::isfinite(r.loss)) return std::numeric_limits<double>::quiet_NaN();
  if (!adam_step<T>(adam, flat, r.grad.values)) return std::numeric_limits<double>::quiet_NaN();
  model.set_parameters(std::span<const T>(flat));
  return r.loss;
}

}  // namespace

template <class T>
TrainResult<T> train(const SSEncoderModel<T>& model, const Dataset& train_set, const Dataset& val,
                     const TrainConfig& cfg) {
  check_compatible(model, train_set, val, cfg);
  const auto& dims = model.dims();
  const auto data = model.normalize(train_set);
  SectionSet sections;
  if (cfg.mode != TrainMode::Simulation) {
    sections = {valid_starts(train_set.samples(), dims.n_a, dims.n_b, cfg.horizon, cfg.burn_in), cfg.horizon,
                cfg.burn_in};
    if (cfg.mode == TrainMode::EncoderBatch && cfg.batch_size > sections.starts.size()) {
      throw ConfigError("batch_size " + std::to_string(cfg.batch_size) + " exceeds the " +
                        std::to_string(sections.starts.size()) + " available sections");
    }
  } else if (train_set.samples() <= (cfg.sim_init == SimInit::Encoder ? dims.warmup() : 0)) {
    throw ConfigError("training set too short for the simulation loss");
  }

  TrainResult<T> result{model, {}};
  if (cfg.max_epochs == 0) return result;

  const EvalOptions opts{cfg.workers, true};
  SSEncoderModel<T> current = model;
  std::vector<T> flat = current.parameters().values;
  AdamState<T> adam(flat.size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
  Batch all;
  all.sections.resize(sections.starts.size());
  for (std::size_t i = 0; i < all.sections.size(); ++i) all.sections[i] = i;

  const auto t_start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t_start).count(); };
  double best = std::numeric_limits<double>::infinity();
  bool have_best = false;
  bool any_finite = false;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0, skipped = 0;
    bool out_of_time = false;
    auto record_step = [&](double loss) {
      if (std::isfinite(loss)) {
        loss_sum += loss;
        ++loss_count;
      } else {
        ++skipped;
      }
      out_of_time = cfg.max_seconds > 0.0 && elapsed() >= cfg.max_seconds;
    };

    switch (cfg.mode) {
      case TrainMode::EncoderBatch:
        for (const auto& batch : make_epoch_batches(sections.starts.size(), cfg.batch_size, cfg.seed, epoch)) {
          record_step(apply_step(current, flat, adam, batch_loss(current, data, sections, batch, opts)));
          if (out_of_time) break;
        }
        break;
      case TrainMode::EncoderFull:
        record_step(apply_step(current, flat, adam, batch_loss(current, data, sections, all, opts)));
        break;
      case TrainMode::Simulation:
        record_step(apply_step(current, flat, adam, simulation_loss(current, data, cfg.sim_init, opts)));
        break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : std::numeric_limits<double>::quiet_NaN();
    rec.val_nrms = validation_nrms(current, val, cfg.sim_init);
    rec.seconds = elapsed();
    rec.skipped_steps = skipped;
    any_finite = any_finite || loss_count > 0;
    if (!have_best || rec.val_nrms < best) {
      best = rec.val_nrms;
      have_best = true;
      rec.is_best = true;
      result.model = current;
    }
    result.log.records.push_back(rec);
    if (out_of_time) break;
  }
  if (!any_finite) throw Error("training failed: every epoch produced non-finite losses");

  if (cfg.final_refine_epochs > 0) {
    result.model = refine_full(result.model, train_set, val, cfg, &result.log);
  }
  return result;
}

template <class T>
SSEncoderModel<T> refine_full(const SSEncoderModel<T>& model, const Dataset& train_set, const Dataset& val,
                              const TrainConfig& cfg, TrainLog* log) {
  if (cfg.final_refine_epochs == 0) return model;
  check_compatible(model, train_set, val, cfg);
  const auto& dims = model.dims();
  const auto data = model.normalize(train_set);
  SectionSet sections;
  if (cfg.mode != TrainMode::Simulation) {
    sections = {valid_starts(train_set.samples(), dims.n_a, dims.n_b, cfg.horizon, cfg.burn_in), cfg.horizon,
                cfg.burn_in};
  }

  const EvalOptions opts{cfg.workers, true};
  const double input_nrms = validation_nrms(model, val, cfg.sim_init);
  double global_best = log ? std::min(log->best_val_nrms(), input_nrms) : input_nrms;
  std::size_t epoch = log && !log->records.empty() ? log->records.back().epoch : 0;
  const double time_offset = log && !log->records.empty() ? log->records.back().seconds : 0.0;

  SSEncoderModel<T> current = model;
  SSEncoderModel<T> best_model = model;
  double best = input_nrms;
  bool improved = false;
  std::vector<T> flat = current.parameters().values;
  AdamState<T> adam(flat.size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
  const auto t_start = Clock::now();

  for (std::size_t e = 0; e < cfg.final_refine_epochs; ++e) {
    const auto r = cfg.mode == TrainMode::Simulation ? simulation_loss(current, data, cfg.sim_init, opts)
                                                     : encoder_loss(current, data, sections, opts);
    const double loss = apply_step(current, flat, adam, r);
    EpochRecord rec;
    rec.epoch = ++epoch;
    rec.refine = true;
    rec.train_loss = r.loss;
    rec.skipped_steps = std::isfinite(loss) ? 0 : 1;
    rec.val_nrms = validation_nrms(current, val, cfg.sim_init);
    rec.seconds = time_offset + std::chrono::duration<double>(Clock::now() - t_start).count();
    if (rec.val_nrms < best) {
      best = rec.val_nrms;
      best_model = current;
      improved = true;
    }
    if (rec.val_nrms < global_best) {
      global_best = rec.val_nrms;
      rec.is_best = true;
    }
    if (log) log->records.push_back(rec);
  }
  return improved ? best_model : model;
}

template bool adam_step(AdamState<float>&, std::span<float>, std::span<const float>);
template bool adam_step(AdamState<double>&, std::span<double>, std::span<const double>);
template TrainResult<float> train(const SSEncoderModel<float>&, const Dataset&, const Dataset&, const TrainConfig&);
template TrainResult<double> train(const SSEncoderModel<double>&, const Dataset&, const Dataset&, const TrainConfig&);
template SSEncoderModel<float> refine_full(const SSEncoderModel<float>&, const Dataset&, const Dataset&,
                                           const TrainConfig&, TrainLog*);
template SSEncoderModel<double> refine_full(const SSEncoderModel<double>&, const Dataset&, const Dataset&,
                                            const TrainConfig&, TrainLog*);

}  // namespace ssenc
