#pragma once

// State-space encoder model
//
//   x_{t+1} = f(x_t, u_t),   y_t = h(x_t, u_t),
//   x_{t_i} = e(y_{t_i-n_a .. t_i-1}, u_{t_i-n_b .. t_i-1}),
//
// with e, f, h residual nets. All of encode/step/output/rollout work in
// normalized signal space; simulate takes and returns physical units.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ssenc/data.hpp"
#include "ssenc/net.hpp"

namespace ssenc {

inline constexpr int kModelFormatVersion = 1;

struct ModelDims {
  std::size_t n_x = 0, n_u = 0, n_y = 0;
  std::size_t n_a = 0, n_b = 0;

  // Encoder input width n_y*n_a + n_u*n_b.
  std::size_t encoder_inputs() const { return n_y * n_a + n_u * n_b; }
  // First index with a complete encoder history, max(n_a, n_b).
  std::size_t warmup() const { return n_a > n_b ? n_a : n_b; }
  void validate() const;

  bool operator==(const ModelDims&) const = default;
};

// Hidden widths of the three nets; empty means affine.
struct ModelArch {
  std::vector<std::size_t> encoder_hidden;
  std::vector<std::size_t> f_hidden;
  std::vector<std::size_t> h_hidden;
};

enum class SimInit { Encoder, Zero };

std::string to_string(SimInit s);
SimInit sim_init_from_string(const std::string& s);

// Dataset converted to the working precision with the model's normalizers.
template <class T>
struct NormalizedData {
  std::size_t n_u = 0, n_y = 0;
  std::vector<T> u, y;  // row-major

  std::size_t samples() const { return n_u == 0 ? 0 : u.size() / n_u; }
  std::span<const T> u_row(std::size_t t) const { return {u.data() + t * n_u, n_u}; }
  std::span<const T> y_row(std::size_t t) const { return {y.data() + t * n_y, n_y}; }
};

// Tapes of one rollout, reused between sections.
template <class T>
struct RolloutTape {
  bool from_encoder = true;
  std::size_t start = 0;
  std::size_t steps = 0;  // number of output evaluations
  NetTape<T> encoder;
  std::vector<NetTape<T>> f;  // steps - 1 transitions
  std::vector<NetTape<T>> h;  // steps outputs
};

template <class T>
class SSEncoderModel {
 public:
  SSEncoderModel() = default;
  // Nets are checked against dims.
  SSEncoderModel(ModelDims dims, ResidualNet<T> encoder, ResidualNet<T> f, ResidualNet<T> h,
                 Normalizer u_norm, Normalizer y_norm);

  // Random initialization; the three nets get independent seeds derived from `seed`.
  static SSEncoderModel create(const ModelDims& dims, const ModelArch& arch, Normalizer u_norm,
                               Normalizer y_norm, std::uint64_t seed, InitRule rule = InitRule::Standard);

  const ModelDims& dims() const { return dims_; }
  const ResidualNet<T>& encoder_net() const { return e_; }
  const ResidualNet<T>& f_net() const { return f_; }
  const ResidualNet<T>& h_net() const { return h_; }
  ResidualNet<T>& encoder_net() { return e_; }
  ResidualNet<T>& f_net() { return f_; }
  ResidualNet<T>& h_net() { return h_; }
  const Normalizer& u_normalizer() const { return u_norm_; }
  const Normalizer& y_normalizer() const { return y_norm_; }
  void set_normalizers(Normalizer u_norm, Normalizer y_norm);

  // Histories are oldest-first, n_a (resp. n_b) rows flattened channel-major
  // per time step. The encoder input is [y history; u history].
  std::vector<T> encode(std::span<const T> y_hist, std::span<const T> u_hist) const;
  std::vector<T> step(std::span<const T> x, std::span<const T> u) const;
  std::vector<T> output(std::span<const T> x, std::span<const T> u) const;

  NormalizedData<T> normalize(const Dataset& d) const;

  // Encoder-initialized section prediction from start index t_i.
  // Evaluates horizon + burn_in + 1 outputs and returns the last horizon + 1
  // of them (k = burn_in .. burn_in + horizon) as rows of width n_y.
  // When tape is non-null it is filled for rollout_backward.
  std::vector<T> rollout(const NormalizedData<T>& data, std::size_t start, std::size_t horizon,
                         std::size_t burn_in, RolloutTape<T>* tape = nullptr) const;

  // Free run over [0, N) from the zero state; all N outputs, normalized.
  std::vector<T> rollout_from_zero(const NormalizedData<T>& data, RolloutTape<T>* tape = nullptr) const;

  // Reverse pass of a recorded rollout. dy holds dL/dy_hat for every output
  // evaluation (tape.steps rows, burn-in rows included). Gradients accumulate
  // into grad, laid out as parameters().
  void rollout_backward(const RolloutTape<T>& tape, std::span<const T> dy, std::span<T> grad) const;

  // Free-run simulation in physical units. With encoder init the first
  // prediction is at t0 = max(n_a, n_b); with zero init at t0 = 0.
  struct Simulation {
    std::size_t t0 = 0;
    Signal y_hat;
  };
  Simulation simulate(const Dataset& d, SimInit init = SimInit::Encoder) const;

  // Flat parameters in the order encoder, f, h.
  ParamVector<T> parameters() const;
  void set_parameters(const ParamVector<T>& p);
  void set_parameters(std::span<const T> flat);
  std::size_t parameter_count() const;

  bool operator==(const SSEncoderModel& o) const {
    return dims_ == o.dims_ && e_ == o.e_ && f_ == o.f_ && h_ == o.h_ && u_norm_ == o.u_norm_ &&
           y_norm_ == o.y_norm_;
  }

 private:
  void check_nets() const;

  ModelDims dims_;
  ResidualNet<T> e_, f_, h_;
  Normalizer u_norm_, y_norm_;
};

// Model files: versioned JSON (see docs/formats.md).
template <class T>
std::string model_to_json(const SSEncoderModel<T>& m);

using AnyModel = std::variant<SSEncoderModel<float>, SSEncoderModel<double>>;

// Throws FormatError on malformed documents or an unsupported version.
AnyModel model_from_json(const std::string& text);

template <class T>
void save_model(const SSEncoderModel<T>& m, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

extern template class SSEncoderModel<float>;
extern template class SSEncoderModel<double>;

}  // namespace ssenc
