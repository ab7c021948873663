#pragma once

// Internal dispatch table shared by the kernel backends. Not part of the
// public API.

#include <cstddef>

namespace prefnoise::kernels::detail {

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*matvec)(const double*, std::size_t, std::size_t, std::size_t,
                   const double*, double*);
    void (*adam_update)(double*, const double*, double*, double*, std::size_t,
                        double, double, double, double, double, double);
};

const KernelTable& scalar_table();

#if defined(PREFNOISE_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

} // namespace prefnoise::kernels::detail
