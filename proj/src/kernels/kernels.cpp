#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "ssenc/error.hpp"

namespace ssenc::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(SSENC_HAVE_AVX2)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() {
  const char* env = std::getenv("SSENC_KERNELS");
  const std::string choice = env ? env : "auto";
  if (choice == "scalar") return Backend::Scalar;
  if (choice == "avx2") {
    if (!cpu_has_avx2()) throw Error("SSENC_KERNELS=avx2 but the CPU lacks AVX2/FMA");
    return Backend::Avx2;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{detect()};
  return b;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool backend_supported(Backend b) { return b == Backend::Scalar || cpu_has_avx2(); }

template <class T>
const KernelTable<T>* table_for(Backend b) {
  if (b == Backend::Scalar) return &detail::scalar_table<T>();
#if defined(SSENC_HAVE_AVX2)
  if (cpu_has_avx2()) return &detail::avx2_table<T>();
#endif
  return nullptr;
}

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw Error("kernel backend '" + std::string(backend_name(b)) + "' is not supported here");
  }
  current().store(b);
}

Backend active_backend() { return current().load(); }

template <class T>
const KernelTable<T>& active() {
  return *table_for<T>(current().load(std::memory_order_relaxed));
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  return active<T>().dot(a.data(), b.data(), a.size());
}

template <class T>
void gemv(std::span<const T> a, std::size_t rows, std::size_t cols, std::span<const T> x,
          std::span<T> y, bool accumulate) {
  active<T>().gemv(a.data(), rows, cols, x.data(), y.data(), accumulate);
}

template <class T>
void gemv_t(std::span<const T> a, std::size_t rows, std::size_t cols, std::span<const T> x,
            std::span<T> y) {
  active<T>().gemv_t(a.data(), rows, cols, x.data(), y.data());
}

template <class T>
void ger(std::span<T> a, std::size_t rows, std::size_t cols, std::span<const T> u,
         std::span<const T> v) {
  active<T>().ger(a.data(), rows, cols, u.data(), v.data());
}

template <class T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
  active<T>().axpy(alpha, x.data(), y.data(), x.size());
}

template <class T>
void tanh_backprop(std::span<const T> act, std::span<T> g) {
  active<T>().tanh_backprop(act.data(), g.data(), act.size());
}

#define SSENC_INSTANTIATE(T)                                                                   \
  template const KernelTable<T>* table_for<T>(Backend);                                        \
  template const KernelTable<T>& active<T>();                                                  \
  template T dot<T>(std::span<const T>, std::span<const T>);                                   \
  template void gemv<T>(std::span<const T>, std::size_t, std::size_t, std::span<const T>,      \
                        std::span<T>, bool);                                                   \
  template void gemv_t<T>(std::span<const T>, std::size_t, std::size_t, std::span<const T>,    \
                          std::span<T>);                                                       \
  template void ger<T>(std::span<T>, std::size_t, std::size_t, std::span<const T>,             \
                       std::span<const T>);                                                    \
  template void axpy<T>(T, std::span<const T>, std::span<T>);                                  \
  template void tanh_backprop<T>(std::span<const T>, std::span<T>);

SSENC_INSTANTIATE(float)
SSENC_INSTANTIATE(double)

#undef SSENC_INSTANTIATE

}  // namespace ssenc::kernels
