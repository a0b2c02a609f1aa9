#include "ssenc/metrics.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>

#include "ssenc/error.hpp"
#include "ssenc/loss.hpp"

namespace ssenc {

double output_spread(const Signal& y) {
  const std::size_t n = y.samples();
  if (n == 0) throw DataError("output spread of an empty signal");
  std::vector<double> mean(y.width, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < y.width; ++c) mean[c] += y.at(t, c);
  for (double& m : mean) m /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < y.width; ++c) ss += (y.at(t, c) - mean[c]) * (y.at(t, c) - mean[c]);
  return std::sqrt(ss / static_cast<double>(n));
}

MetricReport nrms(const Signal& y_hat, const Signal& y, std::optional<double> sigma_y) {
  if (y_hat.width != y.width || y_hat.samples() != y.samples()) {
    throw DimensionError("nrms: prediction and reference have different shapes");
  }
  if (y.samples() == 0) throw DataError("nrms: empty signals");
  MetricReport r;
  r.samples = y.samples();
  double ss = 0.0;
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const double d = y_hat.values[i] - y.values[i];
    ss += d * d;
  }
  r.rms = std::sqrt(ss / static_cast<double>(r.samples));
  r.sigma_y = sigma_y ? *sigma_y : output_spread(y);
  if (!(r.sigma_y > 0.0)) throw DataError("nrms: sigma_y must be positive");
  r.nrms = r.rms / r.sigma_y;
  return r;
}

template <class T>
MetricReport evaluate_simulation(const SSEncoderModel<T>& m, const Dataset& d, SimInit init) {
  const auto sim = m.simulate(d, init);
  auto report = nrms(sim.y_hat, d.y.slice(sim.t0, d.samples()));
  report.t0 = sim.t0;
  return report;
}

template <class T>
NStepCurve nstep_nrms(const SSEncoderModel<T>& m, const Dataset& d, std::size_t n_max) {
  const auto& dims = m.dims();
  const auto data = m.normalize(d);
  const auto starts = valid_starts(d.samples(), dims.n_a, dims.n_b, n_max, 0);
  const auto& yn = m.y_normalizer();
  const std::size_t n_y = dims.n_y;

  std::vector<double> acc(n_max + 1, 0.0);
  for (std::size_t start : starts) {
    const auto pred = m.rollout(data, start, n_max, 0);
    for (std::size_t n = 0; n <= n_max; ++n) {
      double ss = 0.0;
      for (std::size_t c = 0; c < n_y; ++c) {
        const double r = yn.invert(static_cast<double>(pred[n * n_y + c]), c) - d.y.at(start + n, c);
        ss += r * r;
      }
      acc[n] += ss;
    }
  }
  NStepCurve curve;
  curve.sections = starts.size();
  curve.sigma_y = output_spread(d.y.slice(dims.warmup(), d.samples()));
  if (!(curve.sigma_y > 0.0)) throw DataError("nstep_nrms: output has zero spread over the evaluation range");
  curve.values.resize(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) {
    curve.values[n] = std::sqrt(acc[n] / static_cast<double>(curve.sections)) / curve.sigma_y;
  }
  return curve;
}

Spectrum error_spectrum(std::span<const double> y_hat, std::span<const double> y, std::optional<double> sample_period) {
  if (y_hat.size() != y.size()) throw DimensionError("error_spectrum: length mismatch");
  const std::size_t n = y.size();
  if (n < 2) throw DataError("error_spectrum needs at least 2 samples");
  if (sample_period && !(*sample_period > 0.0)) throw DataError("error_spectrum: sample period must be positive");

  static std::mutex planner;
  const std::size_t half = n / 2 + 1;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(half);
  fftw_plan plan;
  {
    std::lock_guard lock(planner);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }

  auto magnitudes = [&](auto&& fill) {
    for (std::size_t i = 0; i < n; ++i) in[i] = fill(i);
    fftw_execute(plan);
    std::vector<double> mag(n);
    for (std::size_t k = 0; k < half; ++k) mag[k] = std::hypot(out[k][0], out[k][1]);
    for (std::size_t k = half; k < n; ++k) mag[k] = mag[n - k];
    return mag;
  };

  Spectrum s;
  s.residual = magnitudes([&](std::size_t i) { return y_hat[i] - y[i]; });
  s.reference = magnitudes([&](std::size_t i) { return y[i]; });
  {
    std::lock_guard lock(planner);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);

  const double scale = 1.0 / (static_cast<double>(n) * (sample_period ? *sample_period : 1.0));
  s.frequency.resize(n);
  for (std::size_t k = 0; k < n; ++k) s.frequency[k] = static_cast<double>(k) * scale;
  return s;
}

void write_nstep_csv(const NStepCurve& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "n,nrms\n";
  char buf[64];
  for (std::size_t n = 0; n < c.values.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", n, c.values[n]);
    out << buf;
  }
}

void write_spectrum_csv(const Spectrum& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "bin,frequency,residual_magnitude,output_magnitude\n";
  char buf[128];
  const std::size_t n = s.frequency.size();
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", k, s.frequency[k], s.residual[k], s.reference[k]);
    out << buf;
  }
}

template MetricReport evaluate_simulation(const SSEncoderModel<float>&, const Dataset&, SimInit);
template MetricReport evaluate_simulation(const SSEncoderModel<double>&, const Dataset&, SimInit);
template NStepCurve nstep_nrms(const SSEncoderModel<float>&, const Dataset&, std::size_t);
template NStepCurve nstep_nrms(const SSEncoderModel<double>&, const Dataset&, std::size_t);

}  // namespace ssenc
