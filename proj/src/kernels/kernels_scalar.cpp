#include <cmath>

#include "kernels_impl.hpp"

namespace ssenc::kernels::detail {
namespace {

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <class T>
void gemv(const T* a, std::size_t rows, std::size_t cols, const T* x, T* y, bool accumulate) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T s = dot(a + r * cols, x, cols);
    y[r] = accumulate ? y[r] + s : s;
  }
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void gemv_t(const T* a, std::size_t rows, std::size_t cols, const T* x, T* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

template <class T>
void ger(T* a, std::size_t rows, std::size_t cols, const T* u, const T* v) {
  for (std::size_t r = 0; r < rows; ++r) axpy(u[r], v, a + r * cols, cols);
}

template <class T>
void tanh_backprop(const T* act, T* g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) g[i] *= T(1) - act[i] * act[i];
}

template <class T>
void adam(T* p, T* m, T* v, const T* g, std::size_t n, T lr, T b1, T b2, T eps, T c1, T c2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
    const T mhat = m[i] / c1;
    const T vhat = v[i] / c2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <class T>
constexpr KernelTable<T> make_table() {
  return {&dot<T>, &gemv<T>, &gemv_t<T>, &ger<T>, &axpy<T>, &tanh_backprop<T>, &adam<T>};
}

}  // namespace

template <class T>
const KernelTable<T>& scalar_table() {
  static constexpr KernelTable<T> table = make_table<T>();
  return table;
}

template const KernelTable<float>& scalar_table<float>();
template const KernelTable<double>& scalar_table<double>();

}  // namespace ssenc::kernels::detail
