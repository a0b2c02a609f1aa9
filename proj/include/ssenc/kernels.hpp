#pragma once

// Dense arithmetic kernels used by the residual networks and the optimizer.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active backend is chosen once at first use from the
// CPU feature flags; the SSENC_KERNELS environment variable (scalar | avx2 |
// auto) or set_backend() override the choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace ssenc::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend b);

// Matrices are row-major, rows x cols.
template <class T>
struct KernelTable {
  T (*dot)(const T* a, const T* b, std::size_t n);
  // y = A x, or y += A x when accumulate is set.
  void (*gemv)(const T* a, std::size_t rows, std::size_t cols, const T* x, T* y, bool accumulate);
  // y += A^T x   (x has rows entries, y has cols entries)
  void (*gemv_t)(const T* a, std::size_t rows, std::size_t cols, const T* x, T* y);
  // A += u v^T   (u has rows entries, v has cols entries)
  void (*ger)(T* a, std::size_t rows, std::size_t cols, const T* u, const T* v);
  // y += alpha x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  // g[i] *= 1 - act[i]^2   (backprop through tanh given its output)
  void (*tanh_backprop)(const T* act, T* g, std::size_t n);
  // Bias-corrected Adam update over n parameters; c1 = 1 - beta1^t, c2 = 1 - beta2^t.
  void (*adam)(T* param, T* m, T* v, const T* grad, std::size_t n, T lr, T beta1, T beta2, T eps,
               T c1, T c2);
};

// Table for a specific backend, or nullptr when the backend is not compiled
// in or not supported by this CPU.
template <class T>
const KernelTable<T>* table_for(Backend b);

bool backend_supported(Backend b);

// Throws ssenc::Error if the backend is unsupported.
void set_backend(Backend b);
Backend active_backend();

template <class T>
const KernelTable<T>& active();

// Span front ends over the active table.

template <class T>
T dot(std::span<const T> a, std::span<const T> b);

template <class T>
void gemv(std::span<const T> a, std::size_t rows, std::size_t cols, std::span<const T> x,
          std::span<T> y, bool accumulate = false);

template <class T>
void gemv_t(std::span<const T> a, std::size_t rows, std::size_t cols, std::span<const T> x,
            std::span<T> y);

template <class T>
void ger(std::span<T> a, std::size_t rows, std::size_t cols, std::span<const T> u,
         std::span<const T> v);

template <class T>
void axpy(T alpha, std::span<const T> x, std::span<T> y);

template <class T>
void tanh_backprop(std::span<const T> act, std::span<T> g);

}  // namespace ssenc::kernels
