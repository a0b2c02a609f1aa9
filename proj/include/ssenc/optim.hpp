#pragma once

// Adam, the epoch/batch training loop with early stopping on the validation
// free-run NRMS, and the optional full-batch refinement phase.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ssenc/loss.hpp"
#include "ssenc/model.hpp"

namespace ssenc {

template <class T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t t = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8)
      : m(n, T(0)), v(n, T(0)), learning_rate(lr), beta1(b1), beta2(b2), epsilon(eps) {}
};

// One bias-corrected Adam update. Returns false, leaving state and params
// untouched, when the gradient has a non-finite entry.
template <class T>
bool adam_step(AdamState<T>& state, std::span<T> params, std::span<const T> grad);

enum class TrainMode { EncoderBatch, EncoderFull, Simulation };
enum class Precision { F32, F64 };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);
std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct TrainConfig {
  std::size_t n_x = 2;
  std::size_t n_a = 10;
  std::size_t n_b = 10;
  std::size_t horizon = 20;  // T
  std::size_t burn_in = 0;   // k0
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;
  Precision precision = Precision::F64;
  TrainMode mode = TrainMode::EncoderBatch;
  std::size_t final_refine_epochs = 50;
  SimInit sim_init = SimInit::Encoder;  // validation free run and simulation-mode loss
  unsigned workers = 1;
  double max_seconds = 0.0;  // wall-clock budget for the main phase, 0 = unlimited

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;     // 1-based, continues through refinement
  double train_loss = 0.0;   // mean batch loss over the epoch (normalized space)
  double val_nrms = 0.0;     // validation free-run NRMS, +inf if non-finite
  double seconds = 0.0;      // wall time since training started
  bool is_best = false;
  bool refine = false;
  std::size_t skipped_steps = 0;
};

struct TrainLog {
  std::vector<EpochRecord> records;

  double best_val_nrms() const;
};

// CSV columns: epoch,train_loss,val_nrms,seconds,is_best. With
// include_wall_time unset the seconds column is written as 0 so that logs of
// identical runs are byte-identical.
void write_log_csv(const TrainLog& log, const std::filesystem::path& path, bool include_wall_time = true);
std::string log_csv(const TrainLog& log, bool include_wall_time = true);

template <class T>
struct TrainResult {
  SSEncoderModel<T> model;
  TrainLog log;
};

// Trains from `model` (normalizers must already be set, normally fitted on
// `train`). Returns the snapshot with the lowest validation NRMS among logged
// epochs; with max_epochs = 0 the input model and an empty log.
template <class T>
TrainResult<T> train(const SSEncoderModel<T>& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg);

// Full-batch Adam over all sections for cfg.final_refine_epochs epochs.
// Returns the best refined snapshot if it beats the input's validation NRMS,
// otherwise the input. Epochs are appended to `log` when given.
template <class T>
SSEncoderModel<T> refine_full(const SSEncoderModel<T>& model, const Dataset& train, const Dataset& val,
                              const TrainConfig& cfg, TrainLog* log = nullptr);

extern template bool adam_step(AdamState<float>&, std::span<float>, std::span<const float>);
extern template bool adam_step(AdamState<double>&, std::span<double>, std::span<const double>);
extern template TrainResult<float> train(const SSEncoderModel<float>&, const Dataset&, const Dataset&,
                                         const TrainConfig&);
extern template TrainResult<double> train(const SSEncoderModel<double>&, const Dataset&, const Dataset&,
                                          const TrainConfig&);
extern template SSEncoderModel<float> refine_full(const SSEncoderModel<float>&, const Dataset&, const Dataset&,
                                                  const TrainConfig&, TrainLog*);
extern template SSEncoderModel<double> refine_full(const SSEncoderModel<double>&, const Dataset&, const Dataset&,
                                                   const TrainConfig&, TrainLog*);

}  // namespace ssenc
