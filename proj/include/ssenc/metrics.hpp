#pragma once

// Evaluation in physical units: RMS / NRMS of a free-run simulation, the
// n-step NRMS curve and the DFT magnitude of the residual.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "ssenc/data.hpp"
#include "ssenc/model.hpp"

namespace ssenc {

struct MetricReport {
  double rms = 0.0;
  double nrms = 0.0;     // rms / sigma_y
  double sigma_y = 0.0;
  std::size_t t0 = 0;       // first evaluated sample
  std::size_t samples = 0;  // evaluated samples
};

// rms = sqrt(mean_t |y_hat_t - y_t|^2). sigma_y defaults to the population
// spread of y over the same rows, sqrt(mean_t |y_t - mean(y)|^2).
MetricReport nrms(const Signal& y_hat, const Signal& y, std::optional<double> sigma_y = std::nullopt);

// Population spread of y, as used for the default sigma_y.
double output_spread(const Signal& y);

// Free-run simulation of `d` scored against its outputs from t0 onward.
template <class T>
MetricReport evaluate_simulation(const SSEncoderModel<T>& m, const Dataset& d, SimInit init = SimInit::Encoder);

struct NStepCurve {
  std::vector<double> values;  // NRMS_n for n = 0..n_max
  std::size_t sections = 0;    // M
  double sigma_y = 0.0;
};

// For every valid encoder start t_i admitting n_max + 1 predictions, averages
// |y_hat(t_i -> t_i + n) - y(t_i + n)|^2 in physical units, then takes the
// square root and divides by the spread of y over [max(n_a, n_b), N).
template <class T>
NStepCurve nstep_nrms(const SSEncoderModel<T>& m, const Dataset& d, std::size_t n_max);

struct Spectrum {
  std::vector<double> frequency;  // Hz with a sample period, else cycles/sample
  std::vector<double> residual;   // |DFT(y_hat - y)|
  std::vector<double> reference;  // |DFT(y)|
};

// Full N-bin DFT magnitudes of a single-channel residual and reference.
Spectrum error_spectrum(std::span<const double> y_hat, std::span<const double> y,
                        std::optional<double> sample_period = std::nullopt);

// CSV exports.
void write_nstep_csv(const NStepCurve& c, const std::filesystem::path& path);
// One-sided (bins 0..N/2) export.
void write_spectrum_csv(const Spectrum& s, const std::filesystem::path& path);

extern template MetricReport evaluate_simulation(const SSEncoderModel<float>&, const Dataset&, SimInit);
extern template MetricReport evaluate_simulation(const SSEncoderModel<double>&, const Dataset&, SimInit);
extern template NStepCurve nstep_nrms(const SSEncoderModel<float>&, const Dataset&, std::size_t);
extern template NStepCurve nstep_nrms(const SSEncoderModel<double>&, const Dataset&, std::size_t);

}  // namespace ssenc
