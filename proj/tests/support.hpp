#pragma once

// Shared fixtures for the unit and acceptance suites: random models and data,
// plus plain-loop reference implementations that share no code with the
// library's evaluation paths.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ssenc/data.hpp"
#include "ssenc/loss.hpp"
#include "ssenc/model.hpp"
#include "ssenc/net.hpp"

namespace ssenc::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ssenc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline Dataset random_dataset(std::size_t samples, std::size_t n_u, std::size_t n_y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Dataset d{Signal(samples, n_u), Signal(samples, n_y), std::nullopt};
  for (double& v : d.u.values) v = nd(rng);
  for (double& v : d.y.values) v = nd(rng);
  return d;
}

inline Normalizer identity_normalizer(std::size_t width) {
  return {std::vector<double>(width, 0.0), std::vector<double>(width, 1.0)};
}

inline std::vector<std::size_t> random_widths(std::mt19937_64& rng, std::size_t max_layers, std::size_t max_width) {
  std::uniform_int_distribution<std::size_t> layers(0, max_layers), width(1, max_width);
  std::vector<std::size_t> w(layers(rng));
  for (auto& v : w) v = width(rng);
  return w;
}

// Stable second-order single-input single-output system used by several tests.
inline SyntheticSystem second_order_linear(double noise_std = 0.0) {
  SyntheticSystem s;
  s.kind = SystemKind::LinearSS;
  s.linear = {2, 1, 1, {0.7, 0.2, -0.2, 0.7}, {1.0, 0.5}, {1.0, 0.0}, {0.0}};
  s.noise_std = noise_std;
  return s;
}

inline SyntheticSystem second_order_wiener() {
  SyntheticSystem s = second_order_linear();
  s.kind = SystemKind::Wiener;
  s.nonlinearity = {0.5, 1.0};
  return s;
}

// A two-tap shift register, y_t = u_{t-1} + u_{t-2}, together with a model
// that represents it exactly. With integer inputs every intermediate value is
// an exact integer, so predictions match the data bit for bit.
inline SyntheticSystem shift_register() {
  SyntheticSystem s;
  s.linear = {2, 1, 1, {0, 0, 1, 0}, {1, 0}, {1, 1}, {0}};
  return s;
}

inline SSEncoderModel<double> shift_register_model() {
  const ModelDims dims{2, 1, 1, 2, 2};
  ResidualNet<double> e({4, {}, 2}), f({3, {}, 2}), h({3, {}, 1});
  e.set_params(std::vector<double>{0, 0, 0, 1, 0, 0, 1, 0, 0, 0});
  f.set_params(std::vector<double>{0, 0, 1, 1, 0, 0, 0, 0});
  h.set_params(std::vector<double>{1, 1, 0, 0});
  return {dims, e, f, h, identity_normalizer(1), identity_normalizer(1)};
}

inline Signal integer_input(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(-3, 3);
  Signal u(samples, 1);
  for (double& v : u.values) v = pick(rng);
  return u;
}

// --- reference implementations -------------------------------------------

template <class T>
std::vector<double> naive_net(const ResidualNet<T>& net, const std::vector<double>& z) {
  const auto& shape = net.shape();
  std::vector<double> a = z;
  for (std::size_t l = 0; l < shape.hidden.size(); ++l) {
    const auto W = net.hidden_weight(l);
    const auto b = net.hidden_bias(l);
    std::vector<double> next(shape.hidden[l]);
    for (std::size_t i = 0; i < next.size(); ++i) {
      double s = b[i];
      for (std::size_t j = 0; j < a.size(); ++j) s += static_cast<double>(W[i * a.size() + j]) * a[j];
      next[i] = std::tanh(s);
    }
    a = std::move(next);
  }
  std::vector<double> out(shape.n_out);
  const auto A1 = net.output_weight();
  const auto A3 = net.bypass_weight();
  const auto b3 = net.bypass_bias();
  for (std::size_t i = 0; i < shape.n_out; ++i) {
    double s = b3[i];
    for (std::size_t j = 0; j < shape.n_in; ++j) s += static_cast<double>(A3[i * shape.n_in + j]) * z[j];
    if (!shape.hidden.empty())
      for (std::size_t j = 0; j < a.size(); ++j) s += static_cast<double>(A1[i * a.size() + j]) * a[j];
    out[i] = s;
  }
  return out;
}

// Predicted outputs for t = start .. start + steps - 1, normalized space.
template <class T>
std::vector<std::vector<double>> naive_rollout(const SSEncoderModel<T>& m, const NormalizedData<T>& d,
                                               std::size_t start, std::size_t steps) {
  const auto& dims = m.dims();
  std::vector<double> z;
  for (std::size_t k = start - dims.n_a; k < start; ++k)
    for (std::size_t c = 0; c < dims.n_y; ++c) z.push_back(d.y[k * dims.n_y + c]);
  for (std::size_t k = start - dims.n_b; k < start; ++k)
    for (std::size_t c = 0; c < dims.n_u; ++c) z.push_back(d.u[k * dims.n_u + c]);
  std::vector<double> x = naive_net(m.encoder_net(), z);
  std::vector<std::vector<double>> out;
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<double> xu = x;
    for (std::size_t c = 0; c < dims.n_u; ++c) xu.push_back(d.u[(start + k) * dims.n_u + c]);
    out.push_back(naive_net(m.h_net(), xu));
    x = naive_net(m.f_net(), xu);
  }
  return out;
}

template <class T>
double naive_encoder_loss(const SSEncoderModel<T>& m, const NormalizedData<T>& d, const SectionSet& s) {
  double total = 0.0;
  for (std::size_t start : s.starts) {
    const auto pred = naive_rollout(m, d, start, s.horizon + s.burn_in + 1);
    for (std::size_t k = s.burn_in; k <= s.horizon + s.burn_in; ++k)
      for (std::size_t c = 0; c < m.dims().n_y; ++c) {
        const double r = pred[k][c] - d.y[(start + k) * m.dims().n_y + c];
        total += r * r;
      }
  }
  return total / (2.0 * static_cast<double>(s.starts.size()) * static_cast<double>(s.horizon + 1));
}

inline double rel_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace ssenc::testing
