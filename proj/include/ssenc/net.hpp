#pragma once

// Residual tanh MLP with an affine bypass:
//
//   z_out = A1 tanh(W_L ... tanh(W_1 z_in + b_1) ... + b_L) + A3 z_in + b3
//
// With one hidden layer this is exactly A1 tanh(A2 z + b2) + A3 z + b3; with
// no hidden layers it is the affine map A3 z + b3. Gradients are computed by
// hand-written reverse mode over a per-call tape.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ssenc {

struct NetShape {
  std::size_t n_in = 0;
  std::vector<std::size_t> hidden;
  std::size_t n_out = 0;

  std::size_t parameter_count() const;
  std::size_t activation_count() const;
  // Throws DimensionError on zero widths.
  void validate() const;

  bool operator==(const NetShape&) const = default;
};

// Uniform initialization bound: U(-sqrt(k), sqrt(k)) with k = 1/fan_in
// (Standard) or k = 1/sqrt(fan_in) (Sqrt).
enum class InitRule { Standard, Sqrt };

std::string to_string(InitRule r);
InitRule init_rule_from_string(const std::string& s);
double init_bound(InitRule rule, std::size_t fan_in);

template <class T>
class ResidualNet;

// Activations cached by ResidualNet::forward. Reusable across calls; the
// buffers only grow.
template <class T>
struct NetTape {
  std::uint64_t stamp = 0;
  std::vector<T> input;
  std::vector<T> activations;  // hidden layers, concatenated
};

template <class T>
class ResidualNet {
 public:
  ResidualNet() = default;
  // All parameters zero.
  explicit ResidualNet(NetShape shape);
  static ResidualNet init(NetShape shape, std::uint64_t seed, InitRule rule = InitRule::Standard);

  const NetShape& shape() const { return shape_; }
  std::size_t n_in() const { return shape_.n_in; }
  std::size_t n_out() const { return shape_.n_out; }
  std::size_t layers() const { return shape_.hidden.size(); }

  std::span<const T> params() const { return params_; }
  // Replaces every parameter; size must equal parameter_count().
  void set_params(std::span<const T> p);
  // Mutable view. Invalidates tapes recorded before the call.
  std::span<T> mutable_params();

  // Views into the parameter buffer. Weights are row-major (out x in).
  std::span<const T> hidden_weight(std::size_t layer) const;
  std::span<const T> hidden_bias(std::size_t layer) const;
  std::span<const T> output_weight() const;  // empty without hidden layers
  std::span<const T> bypass_weight() const;
  std::span<const T> bypass_bias() const;
  std::size_t hidden_weight_offset(std::size_t layer) const { return offsets_[2 * layer]; }
  std::size_t hidden_bias_offset(std::size_t layer) const { return offsets_[2 * layer + 1]; }
  std::size_t output_weight_offset() const { return output_offset_; }
  std::size_t bypass_weight_offset() const { return bypass_offset_; }
  std::size_t bypass_bias_offset() const { return bias_offset_; }

  // Identifies the current parameter values; tapes carry it so backward can
  // reject a tape recorded against different parameters.
  std::uint64_t stamp() const { return stamp_; }

  std::uint64_t init_seed() const { return init_seed_; }
  InitRule init_rule() const { return init_rule_; }
  void set_init_metadata(std::uint64_t seed, InitRule rule) {
    init_seed_ = seed;
    init_rule_ = rule;
  }

  // Evaluation without recording.
  void evaluate(std::span<const T> z_in, std::span<T> z_out) const;
  void forward(std::span<const T> z_in, std::span<T> z_out, NetTape<T>& tape) const;
  std::vector<T> forward(std::span<const T> z_in, NetTape<T>& tape) const;

  // Reverse pass for a tape from forward(). dz_in is overwritten; the
  // parameter gradient is accumulated into dparams (parameter_count() long).
  void backward(const NetTape<T>& tape, std::span<const T> dz_out, std::span<T> dz_in,
                std::span<T> dparams) const;

  bool operator==(const ResidualNet& o) const {
    return shape_ == o.shape_ && params_ == o.params_;
  }

 private:
  void compute_offsets();
  void check_input(std::span<const T> z_in, std::span<T> z_out) const;
  void run(std::span<const T> z_in, std::span<T> z_out, T* activations) const;

  NetShape shape_;
  std::vector<T> params_;
  std::vector<std::size_t> offsets_;
  std::size_t output_offset_ = 0;
  std::size_t bypass_offset_ = 0;
  std::size_t bias_offset_ = 0;
  std::uint64_t stamp_ = 0;
  std::uint64_t init_seed_ = 0;
  InitRule init_rule_ = InitRule::Standard;
};

// Flat view of the trainable scalars of several nets, with a named index map.
template <class T>
struct ParamVector {
  struct Entry {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  std::vector<T> values;
  std::vector<Entry> entries;

  std::size_t size() const { return values.size(); }
  std::span<T> segment(std::size_t i) { return {values.data() + entries[i].offset, entries[i].size}; }
  std::span<const T> segment(std::size_t i) const {
    return {values.data() + entries[i].offset, entries[i].size};
  }
  // Same layout, all zeros.
  ParamVector zeros_like() const;
};

extern template class ResidualNet<float>;
extern template class ResidualNet<double>;
extern template struct ParamVector<float>;
extern template struct ParamVector<double>;

}  // namespace ssenc
