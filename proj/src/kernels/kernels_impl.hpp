#pragma once

#include "ssenc/kernels.hpp"

namespace ssenc::kernels::detail {

template <class T>
const KernelTable<T>& scalar_table();

#if defined(SSENC_HAVE_AVX2)
template <class T>
const KernelTable<T>& avx2_table();
#endif

}  // namespace ssenc::kernels::detail
