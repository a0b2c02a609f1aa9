#pragma once

// Time-series datasets: CSV ingestion, splitting, normalization and the
// synthetic ground-truth systems used as oracles.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ssenc {

// A sampled multichannel signal, stored row-major (one row per sample).
struct Signal {
  std::size_t width = 0;
  std::vector<double> values;

  Signal() = default;
  Signal(std::size_t samples, std::size_t width) : width(width), values(samples * width, 0.0) {}
  Signal(std::size_t width, std::vector<double> values);

  std::size_t samples() const { return width == 0 ? 0 : values.size() / width; }
  std::span<const double> row(std::size_t t) const { return {values.data() + t * width, width}; }
  std::span<double> row(std::size_t t) { return {values.data() + t * width, width}; }
  double& at(std::size_t t, std::size_t c) { return values[t * width + c]; }
  double at(std::size_t t, std::size_t c) const { return values[t * width + c]; }
  Signal slice(std::size_t begin, std::size_t end) const;

  bool operator==(const Signal&) const = default;
};

struct Dataset {
  Signal u;
  Signal y;
  std::optional<double> sample_period;  // seconds, metadata only

  std::size_t samples() const { return u.samples(); }
  std::size_t n_u() const { return u.width; }
  std::size_t n_y() const { return y.width; }

  // Throws DataError unless u and y are aligned, non-empty and finite.
  void validate() const;
  Dataset slice(std::size_t begin, std::size_t end) const;
};

Dataset load_csv(const std::filesystem::path& path, std::size_t n_u, std::size_t n_y);
// Writes with round-trip precision (17 significant digits).
void save_csv(const Dataset& d, const std::filesystem::path& path);

struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t width() const { return mean.size(); }
  Signal apply(const Signal& s) const;
  Signal invert(const Signal& s) const;
  double apply(double x, std::size_t channel) const { return (x - mean[channel]) / stddev[channel]; }
  double invert(double z, std::size_t channel) const { return z * stddev[channel] + mean[channel]; }

  bool operator==(const Normalizer&) const = default;
};

// Per-channel arithmetic mean and population (1/N) standard deviation.
// Throws DataError on a constant channel or fewer than two samples.
Normalizer fit_normalizer(const Signal& s);
std::pair<Normalizer, Normalizer> fit_normalizer(const Dataset& d);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

std::vector<Dataset> split(const Dataset& d, std::span<const IndexRange> ranges);

// ---------------------------------------------------------------------------
// Synthetic systems

enum class SystemKind { LinearSS, Wiener, Duffing };

// x+ = A x + B u, v = C x + D u. All matrices row-major.
struct LinearBlock {
  std::size_t n_x = 0, n_u = 0, n_y = 0;
  std::vector<double> a, b, c, d;

  void check() const;
  double spectral_radius() const;
};

// Static output map of the Wiener kind: y = out_scale * tanh(in_scale * v).
struct TanhNonlinearity {
  double in_scale = 1.0;
  double out_scale = 1.0;
  double operator()(double v) const;
};

// m q'' + c q' + k q + k3 q^3 = gain * u, output y = q. The input is held
// constant over each sample period; integrated with classical RK4.
struct DuffingParams {
  double mass = 1.0;
  double damping = 0.2;
  double stiffness = 1.0;
  double cubic = 1.0;
  double gain = 1.0;
  double sample_period = 0.1;
  int substeps = 4;
};

struct SyntheticSystem {
  SystemKind kind = SystemKind::LinearSS;
  LinearBlock linear;          // LinearSS and Wiener
  TanhNonlinearity nonlinearity;  // Wiener
  DuffingParams duffing;       // Duffing
  double noise_std = 0.0;

  std::size_t state_dim() const;
  std::size_t n_u() const;
  std::size_t n_y() const;
};

// Simulates the system from zero initial state and adds i.i.d. Gaussian
// output noise drawn from a generator seeded with `seed`.
Dataset generate(const SyntheticSystem& sys, const Signal& u, std::uint64_t seed);

// JSON description used by the `generate` subcommand (see docs/formats.md).
SyntheticSystem system_from_json(const std::string& text);
std::string system_to_json(const SyntheticSystem& sys);

// Excitation signals.
Signal gaussian_input(std::size_t samples, std::size_t width, double stddev, std::uint64_t seed);
// White Gaussian noise through a second-order low-pass with the given
// discrete pole radius (0 <= pole < 1), rescaled to `stddev`.
Signal filtered_gaussian_input(std::size_t samples, std::size_t width, double stddev, double pole,
                               std::uint64_t seed);
// Random-phase multisine with `lines` excited frequency bins below `max_fraction`
// of Nyquist, scaled to rms `stddev`.
Signal multisine_input(std::size_t samples, std::size_t width, double stddev, std::size_t lines,
                       double max_fraction, std::uint64_t seed);

}  // namespace ssenc
