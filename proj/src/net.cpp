#include "ssenc/net.hpp"

#include <atomic>
#include <cmath>
#include <random>

#include "ssenc/error.hpp"
#include "ssenc/kernels.hpp"

namespace ssenc {
namespace {

std::uint64_t next_stamp() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

std::size_t NetShape::parameter_count() const {
  std::size_t count = 0;
  std::size_t prev = n_in;
  for (std::size_t w : hidden) {
    count += w * prev + w;
    prev = w;
  }
  if (!hidden.empty()) count += n_out * prev;
  return count + n_out * n_in + n_out;
}

std::size_t NetShape::activation_count() const {
  std::size_t count = 0;
  for (std::size_t w : hidden) count += w;
  return count;
}

void NetShape::validate() const {
  if (n_in == 0 || n_out == 0) throw DimensionError("net input and output widths must be >= 1");
  for (std::size_t w : hidden) {
    if (w == 0) throw DimensionError("hidden layer widths must be >= 1");
  }
}

std::string to_string(InitRule r) { return r == InitRule::Sqrt ? "sqrt" : "standard"; }

InitRule init_rule_from_string(const std::string& s) {
  if (s == "standard") return InitRule::Standard;
  if (s == "sqrt") return InitRule::Sqrt;
  throw ConfigError("init_k must be 'standard' or 'sqrt', got '" + s + "'");
}

double init_bound(InitRule rule, std::size_t fan_in) {
  const double n = static_cast<double>(fan_in);
  const double k = rule == InitRule::Sqrt ? 1.0 / std::sqrt(n) : 1.0 / n;
  return std::sqrt(k);
}

template <class T>
ResidualNet<T>::ResidualNet(NetShape shape) : shape_(std::move(shape)) {
  shape_.validate();
  params_.assign(shape_.parameter_count(), T(0));
  compute_offsets();
  stamp_ = next_stamp();
}

template <class T>
void ResidualNet<T>::compute_offsets() {
  offsets_.clear();
  std::size_t off = 0;
  std::size_t prev = shape_.n_in;
  for (std::size_t w : shape_.hidden) {
    offsets_.push_back(off);
    off += w * prev;
    offsets_.push_back(off);
    off += w;
    prev = w;
  }
  output_offset_ = off;
  if (!shape_.hidden.empty()) off += shape_.n_out * prev;
  bypass_offset_ = off;
  off += shape_.n_out * shape_.n_in;
  bias_offset_ = off;
}

template <class T>
ResidualNet<T> ResidualNet<T>::init(NetShape shape, std::uint64_t seed, InitRule rule) {
  ResidualNet net(std::move(shape));
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double b = init_bound(rule, fan_in);
    std::uniform_real_distribution<double> dist(-b, b);
    for (std::size_t i = 0; i < count; ++i) net.params_[offset + i] = static_cast<T>(dist(rng));
  };
  const auto& s = net.shape_;
  std::size_t prev = s.n_in;
  for (std::size_t l = 0; l < s.hidden.size(); ++l) {
    fill(net.hidden_weight_offset(l), s.hidden[l] * prev, prev);
    fill(net.hidden_bias_offset(l), s.hidden[l], prev);
    prev = s.hidden[l];
  }
  if (!s.hidden.empty()) fill(net.output_offset_, s.n_out * prev, prev);
  fill(net.bypass_offset_, s.n_out * s.n_in, s.n_in);
  fill(net.bias_offset_, s.n_out, s.n_in);
  net.init_seed_ = seed;
  net.init_rule_ = rule;
  return net;
}

template <class T>
void ResidualNet<T>::set_params(std::span<const T> p) {
  if (p.size() != params_.size()) {
    throw DimensionError("net expects " + std::to_string(params_.size()) + " parameters, got " +
                         std::to_string(p.size()));
  }
  std::copy(p.begin(), p.end(), params_.begin());
  stamp_ = next_stamp();
}

template <class T>
std::span<T> ResidualNet<T>::mutable_params() {
  stamp_ = next_stamp();
  return params_;
}

template <class T>
std::span<const T> ResidualNet<T>::hidden_weight(std::size_t layer) const {
  const std::size_t prev = layer == 0 ? shape_.n_in : shape_.hidden[layer - 1];
  return {params_.data() + offsets_.at(2 * layer), shape_.hidden[layer] * prev};
}

template <class T>
std::span<const T> ResidualNet<T>::hidden_bias(std::size_t layer) const {
  return {params_.data() + offsets_.at(2 * layer + 1), shape_.hidden[layer]};
}

template <class T>
std::span<const T> ResidualNet<T>::output_weight() const {
  return {params_.data() + output_offset_, bypass_offset_ - output_offset_};
}

template <class T>
std::span<const T> ResidualNet<T>::bypass_weight() const {
  return {params_.data() + bypass_offset_, shape_.n_out * shape_.n_in};
}

template <class T>
std::span<const T> ResidualNet<T>::bypass_bias() const {
  return {params_.data() + bias_offset_, shape_.n_out};
}

template <class T>
void ResidualNet<T>::check_input(std::span<const T> z_in, std::span<T> z_out) const {
  if (z_in.size() != shape_.n_in || z_out.size() != shape_.n_out) {
    throw DimensionError("net maps " + std::to_string(shape_.n_in) + " -> " + std::to_string(shape_.n_out) +
                         " but was called with " + std::to_string(z_in.size()) + " -> " +
                         std::to_string(z_out.size()));
  }
}

template <class T>
void ResidualNet<T>::run(std::span<const T> z_in, std::span<T> z_out, T* activations) const {
  const T* prev = z_in.data();
  std::size_t prev_width = shape_.n_in;
  T* act = activations;
  const auto& k = kernels::active<T>();
  for (std::size_t l = 0; l < shape_.hidden.size(); ++l) {
    const std::size_t w = shape_.hidden[l];
    const T* weight = params_.data() + offsets_[2 * l];
    const T* bias = params_.data() + offsets_[2 * l + 1];
    k.gemv(weight, w, prev_width, prev, act, false);
    for (std::size_t i = 0; i < w; ++i) act[i] = std::tanh(act[i] + bias[i]);
    prev = act;
    prev_width = w;
    act += w;
  }
  k.gemv(params_.data() + bypass_offset_, shape_.n_out, shape_.n_in, z_in.data(), z_out.data(), false);
  if (!shape_.hidden.empty()) {
    k.gemv(params_.data() + output_offset_, shape_.n_out, prev_width, prev, z_out.data(), true);
  }
  const T* b3 = params_.data() + bias_offset_;
  for (std::size_t i = 0; i < shape_.n_out; ++i) z_out[i] += b3[i];
}

template <class T>
void ResidualNet<T>::evaluate(std::span<const T> z_in, std::span<T> z_out) const {
  check_input(z_in, z_out);
  thread_local std::vector<T> scratch;
  scratch.resize(shape_.activation_count());
  run(z_in, z_out, scratch.data());
}

template <class T>
void ResidualNet<T>::forward(std::span<const T> z_in, std::span<T> z_out, NetTape<T>& tape) const {
  check_input(z_in, z_out);
  tape.stamp = stamp_;
  tape.input.assign(z_in.begin(), z_in.end());
  tape.activations.resize(shape_.activation_count());
  run(tape.input, z_out, tape.activations.data());
}

template <class T>
std::vector<T> ResidualNet<T>::forward(std::span<const T> z_in, NetTape<T>& tape) const {
  std::vector<T> out(shape_.n_out);
  forward(z_in, out, tape);
  return out;
}

template <class T>
void ResidualNet<T>::backward(const NetTape<T>& tape, std::span<const T> dz_out, std::span<T> dz_in,
                              std::span<T> dparams) const {
  if (tape.stamp != stamp_ || tape.input.size() != shape_.n_in ||
      tape.activations.size() != shape_.activation_count()) {
    throw Error("backward called with a stale or mismatched tape");
  }
  if (dz_out.size() != shape_.n_out || dz_in.size() != shape_.n_in || dparams.size() != params_.size()) {
    throw DimensionError("backward: gradient buffer sizes do not match the net");
  }
  const auto& k = kernels::active<T>();
  const std::size_t n_in = shape_.n_in, n_out = shape_.n_out;
  T* dp = dparams.data();

  // Affine bypass.
  k.ger(dp + bypass_offset_, n_out, n_in, dz_out.data(), tape.input.data());
  for (std::size_t i = 0; i < n_out; ++i) dp[bias_offset_ + i] += dz_out[i];
  std::fill(dz_in.begin(), dz_in.end(), T(0));
  k.gemv_t(params_.data() + bypass_offset_, n_out, n_in, dz_out.data(), dz_in.data());

  const std::size_t layers = shape_.hidden.size();
  if (layers == 0) return;

  thread_local std::vector<T> g, g_prev;
  const std::size_t last_width = shape_.hidden.back();
  const T* act_end = tape.activations.data() + tape.activations.size();
  const T* last_act = act_end - last_width;

  k.ger(dp + output_offset_, n_out, last_width, dz_out.data(), last_act);
  g.assign(last_width, T(0));
  k.gemv_t(params_.data() + output_offset_, n_out, last_width, dz_out.data(), g.data());

  const T* act = last_act;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t w = shape_.hidden[l];
    const std::size_t prev_width = l == 0 ? n_in : shape_.hidden[l - 1];
    const T* prev_act = l == 0 ? tape.input.data() : act - prev_width;
    k.tanh_backprop(act, g.data(), w);
    k.ger(dp + offsets_[2 * l], w, prev_width, g.data(), prev_act);
    T* db = dp + offsets_[2 * l + 1];
    for (std::size_t i = 0; i < w; ++i) db[i] += g[i];
    if (l == 0) {
      k.gemv_t(params_.data() + offsets_[0], w, n_in, g.data(), dz_in.data());
    } else {
      g_prev.assign(prev_width, T(0));
      k.gemv_t(params_.data() + offsets_[2 * l], w, prev_width, g.data(), g_prev.data());
      g.swap(g_prev);
      act = prev_act;
    }
  }
}

template <class T>
ParamVector<T> ParamVector<T>::zeros_like() const {
  ParamVector out;
  out.values.assign(values.size(), T(0));
  out.entries = entries;
  return out;
}

template class ResidualNet<float>;
template class ResidualNet<double>;
template struct ParamVector<float>;
template struct ParamVector<double>;

}  // namespace ssenc
