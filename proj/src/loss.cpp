#include "ssenc/loss.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <random>
#include <thread>

#include "ssenc/error.hpp"

namespace ssenc {
namespace {

constexpr std::size_t kChunk = 8;

}  // namespace

std::vector<std::size_t> valid_starts(std::size_t samples, std::size_t n_a, std::size_t n_b, std::size_t horizon,
                                      std::size_t burn_in) {
  const std::size_t first = std::max(n_a, n_b);
  const std::size_t min_len = first + horizon + burn_in + 1;
  if (samples < min_len) {
    throw DataError("dataset has " + std::to_string(samples) + " samples; sections with max(n_a, n_b)=" +
                    std::to_string(first) + ", T=" + std::to_string(horizon) + ", k0=" + std::to_string(burn_in) +
                    " need at least " + std::to_string(min_len));
  }
  std::vector<std::size_t> starts(samples - min_len + 1);
  std::iota(starts.begin(), starts.end(), first);
  return starts;
}

std::vector<std::size_t> valid_starts(const Dataset& d, std::size_t n_a, std::size_t n_b, std::size_t horizon,
                                      std::size_t burn_in) {
  return valid_starts(d.samples(), n_a, n_b, horizon, burn_in);
}

template <class T>
void validate_sections(const SSEncoderModel<T>& m, const NormalizedData<T>& data, const SectionSet& sections) {
  if (sections.starts.empty()) throw DataError("section set is empty");
  const std::size_t n = data.samples();
  const std::size_t first = m.dims().warmup();
  for (std::size_t s : sections.starts) {
    if (n == 0 || s < first || s + sections.horizon + sections.burn_in > n - 1) {
      throw DataError("section start " + std::to_string(s) + " is invalid: starts must lie in [" +
                      std::to_string(first) + ", N - 1 - T - k0] for N=" + std::to_string(n));
    }
  }
}

namespace {

// scale * sum over the listed sections of the squared residuals, with gradient.
template <class T>
LossResult<T> section_sum(const SSEncoderModel<T>& m, const NormalizedData<T>& data, const SectionSet& sections,
                          std::span<const std::size_t> which, double scale, const EvalOptions& opts) {
  const std::size_t n_y = m.dims().n_y;
  const std::size_t horizon = sections.horizon, burn_in = sections.burn_in;
  const std::size_t steps = horizon + burn_in + 1;
  const std::size_t params = m.parameter_count();
  const std::size_t chunks = (which.size() + kChunk - 1) / kChunk;

  std::vector<double> chunk_loss(chunks, 0.0);
  std::vector<std::vector<T>> chunk_grad(opts.with_gradient ? chunks : 0);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    RolloutTape<T> tape;
    std::vector<T> dy(steps * n_y, T(0));
    for (std::size_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
      double total = 0.0;
      if (opts.with_gradient) chunk_grad[c].assign(params, T(0));
      const std::size_t end = std::min(which.size(), (c + 1) * kChunk);
      for (std::size_t w = c * kChunk; w < end; ++w) {
        const std::size_t start = sections.starts[which[w]];
        const auto pred = m.rollout(data, start, horizon, burn_in, opts.with_gradient ? &tape : nullptr);
        double section = 0.0;
        for (std::size_t k = 0; k <= horizon; ++k) {
          const auto y = data.y_row(start + burn_in + k);
          for (std::size_t j = 0; j < n_y; ++j) {
            const T r = pred[k * n_y + j] - y[j];
            section += static_cast<double>(r) * static_cast<double>(r);
            dy[(burn_in + k) * n_y + j] = static_cast<T>(2.0 * scale) * r;
          }
        }
        total += section;
        if (opts.with_gradient) m.rollout_backward(tape, dy, chunk_grad[c]);
      }
      chunk_loss[c] = total;
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
  }

  LossResult<T> result;
  result.grad = m.parameters().zeros_like();
  double sum = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    sum += chunk_loss[c];
    if (opts.with_gradient) {
      for (std::size_t p = 0; p < params; ++p) result.grad.values[p] += chunk_grad[c][p];
    }
  }
  result.loss = scale * sum;
  return result;
}

}  // namespace

template <class T>
LossResult<T> encoder_loss(const SSEncoderModel<T>& m, const NormalizedData<T>& data, const SectionSet& sections,
                           const EvalOptions& opts) {
  validate_sections(m, data, sections);
  std::vector<std::size_t> all(sections.starts.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double scale = 1.0 / (2.0 * static_cast<double>(all.size()) * static_cast<double>(sections.horizon + 1));
  return section_sum(m, data, sections, all, scale, opts);
}

template <class T>
LossResult<T> batch_loss(const SSEncoderModel<T>& m, const NormalizedData<T>& data, const SectionSet& sections,
                         const Batch& batch, const EvalOptions& opts) {
  if (batch.sections.empty()) throw DataError("batch is empty");
  validate_sections(m, data, sections);
  for (std::size_t i : batch.sections) {
    if (i >= sections.starts.size()) {
      throw DataError("batch index " + std::to_string(i) + " is out of range for " +
                      std::to_string(sections.starts.size()) + " sections");
    }
  }
  const double scale =
      1.0 / (2.0 * static_cast<double>(batch.sections.size()) * static_cast<double>(sections.horizon + 1));
  return section_sum(m, data, sections, batch.sections, scale, opts);
}

template <class T>
LossResult<T> simulation_loss(const SSEncoderModel<T>& m, const NormalizedData<T>& data, SimInit init,
                              const EvalOptions& opts) {
  const std::size_t n = data.samples();
  const std::size_t n_y = m.dims().n_y;
  RolloutTape<T> tape;
  RolloutTape<T>* tp = opts.with_gradient ? &tape : nullptr;
  std::size_t t0 = 0;
  std::vector<T> pred;
  if (init == SimInit::Encoder) {
    t0 = m.dims().warmup();
    if (n <= t0) {
      throw DataError("simulation loss with encoder init needs more than " + std::to_string(t0) + " samples, got " +
                      std::to_string(n));
    }
    pred = m.rollout(data, t0, n - t0 - 1, 0, tp);
  } else {
    if (n == 0) throw DataError("simulation loss on an empty dataset");
    pred = m.rollout_from_zero(data, tp);
  }
  const std::size_t scored = n - t0;
  const double scale = 1.0 / static_cast<double>(scored);
  std::vector<T> dy(scored * n_y);
  double sum = 0.0;
  for (std::size_t k = 0; k < scored; ++k) {
    const auto y = data.y_row(t0 + k);
    for (std::size_t j = 0; j < n_y; ++j) {
      const T r = pred[k * n_y + j] - y[j];
      sum += static_cast<double>(r) * static_cast<double>(r);
      dy[k * n_y + j] = static_cast<T>(2.0 * scale) * r;
    }
  }
  LossResult<T> result;
  result.grad = m.parameters().zeros_like();
  result.loss = scale * sum;
  if (opts.with_gradient) m.rollout_backward(tape, dy, result.grad.values);
  return result;
}

std::vector<Batch> make_epoch_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                      std::uint64_t epoch) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (batch_size > count) {
    throw ConfigError("batch_size " + std::to_string(batch_size) + " exceeds the " + std::to_string(count) +
                      " available sections");
  }
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> batches;
  for (std::size_t b = 0; b + batch_size <= count; b += batch_size) {
    batches.push_back({std::vector<std::size_t>(order.begin() + b, order.begin() + b + batch_size)});
  }
  return batches;
}

#define SSENC_INSTANTIATE(T)                                                                                       \
  template void validate_sections(const SSEncoderModel<T>&, const NormalizedData<T>&, const SectionSet&);          \
  template LossResult<T> encoder_loss(const SSEncoderModel<T>&, const NormalizedData<T>&, const SectionSet&,       \
                                      const EvalOptions&);                                                         \
  template LossResult<T> batch_loss(const SSEncoderModel<T>&, const NormalizedData<T>&, const SectionSet&,         \
                                    const Batch&, const EvalOptions&);                                             \
  template LossResult<T> simulation_loss(const SSEncoderModel<T>&, const NormalizedData<T>&, SimInit,              \
                                         const EvalOptions&);

SSENC_INSTANTIATE(float)
SSENC_INSTANTIATE(double)

#undef SSENC_INSTANTIATE

}  // namespace ssenc
