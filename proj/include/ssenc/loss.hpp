#pragma once

// Sectioned (multiple-shooting) losses with exact gradients.
//
// encoder loss:    1/(2 N (T+1)) * sum_i sum_{k=k0}^{T+k0} |y_hat(t_i -> t_i+k) - y(t_i+k)|^2
// batch loss:      same summand over a subset B, normalized by |B|
// simulation loss: 1/N_s * sum_t |y_hat(t) - y(t)|^2 over one free run
//
// All losses are evaluated on normalized data. Sections are processed in
// fixed-size chunks whose partial sums are reduced in chunk order, so the
// result does not depend on the worker count.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ssenc/model.hpp"

namespace ssenc {

struct SectionSet {
  std::vector<std::size_t> starts;
  std::size_t horizon = 0;  // T
  std::size_t burn_in = 0;  // k0
};

// Indices into SectionSet::starts.
struct Batch {
  std::vector<std::size_t> sections;
  std::size_t size() const { return sections.size(); }
};

template <class T>
struct LossResult {
  double loss = 0.0;
  ParamVector<T> grad;
};

struct EvalOptions {
  unsigned workers = 1;
  bool with_gradient = true;
};

// Every start in [max(n_a, n_b), N - 1 - T - k0], ascending. Throws
// DataError naming the minimum length when there is none.
std::vector<std::size_t> valid_starts(std::size_t samples, std::size_t n_a, std::size_t n_b, std::size_t horizon,
                                      std::size_t burn_in);
std::vector<std::size_t> valid_starts(const Dataset& d, std::size_t n_a, std::size_t n_b, std::size_t horizon,
                                      std::size_t burn_in);

template <class T>
void validate_sections(const SSEncoderModel<T>& m, const NormalizedData<T>& data, const SectionSet& sections);

template <class T>
LossResult<T> encoder_loss(const SSEncoderModel<T>& m, const NormalizedData<T>& data, const SectionSet& sections,
                           const EvalOptions& opts = {});

template <class T>
LossResult<T> batch_loss(const SSEncoderModel<T>& m, const NormalizedData<T>& data, const SectionSet& sections,
                         const Batch& batch, const EvalOptions& opts = {});

// Free run over the whole dataset. Encoder init scores t in [max(n_a, n_b), N);
// zero init scores t in [0, N).
template <class T>
LossResult<T> simulation_loss(const SSEncoderModel<T>& m, const NormalizedData<T>& data,
                              SimInit init = SimInit::Encoder, const EvalOptions& opts = {});

// Shuffles the section indices 0..count-1 with a generator keyed on
// (seed, epoch) and cuts them into consecutive batches of batch_size; a short
// remainder is dropped.
std::vector<Batch> make_epoch_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                      std::uint64_t epoch);

extern template void validate_sections(const SSEncoderModel<float>&, const NormalizedData<float>&, const SectionSet&);
extern template void validate_sections(const SSEncoderModel<double>&, const NormalizedData<double>&,
                                       const SectionSet&);
extern template LossResult<float> encoder_loss(const SSEncoderModel<float>&, const NormalizedData<float>&,
                                               const SectionSet&, const EvalOptions&);
extern template LossResult<double> encoder_loss(const SSEncoderModel<double>&, const NormalizedData<double>&,
                                                const SectionSet&, const EvalOptions&);
extern template LossResult<float> batch_loss(const SSEncoderModel<float>&, const NormalizedData<float>&,
                                             const SectionSet&, const Batch&, const EvalOptions&);
extern template LossResult<double> batch_loss(const SSEncoderModel<double>&, const NormalizedData<double>&,
                                              const SectionSet&, const Batch&, const EvalOptions&);
extern template LossResult<float> simulation_loss(const SSEncoderModel<float>&, const NormalizedData<float>&,
                                                  SimInit, const EvalOptions&);
extern template LossResult<double> simulation_loss(const SSEncoderModel<double>&, const NormalizedData<double>&,
                                                   SimInit, const EvalOptions&);

}  // namespace ssenc
