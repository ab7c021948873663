#include "prefnoise/kernels.hpp"

#include "prefnoise/common.hpp"
#include "prefnoise/kernels_impl.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace prefnoise::kernels {

namespace {

using detail::KernelTable;

const KernelTable* table_for(Backend backend) {
#if defined(PREFNOISE_HAVE_AVX2)
    if (backend == Backend::Avx2) {
        return &detail::avx2_table();
    }
#else
    (void)backend;
#endif
    return &detail::scalar_table();
}

std::atomic<const KernelTable*>& active_table() {
    static std::atomic<const KernelTable*> table{table_for(default_backend())};
    return table;
}

std::atomic<Backend>& active_backend_slot() {
    static std::atomic<Backend> backend{default_backend()};
    return backend;
}

} // namespace

std::string_view backend_name(Backend backend) {
    switch (backend) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    }
    return "unknown";
}

bool backend_supported(Backend backend) {
    if (backend == Backend::Scalar) {
        return true;
    }
#if defined(PREFNOISE_HAVE_AVX2)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend default_backend() {
    const char* env = std::getenv("PREFNOISE_KERNELS");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) {
            return Backend::Scalar;
        }
        if (std::strcmp(env, "avx2") == 0) {
            if (backend_supported(Backend::Avx2)) {
                return Backend::Avx2;
            }
            std::fprintf(stderr, "prefnoise: PREFNOISE_KERNELS=avx2 not supported on this CPU, "
                                 "using scalar kernels\n");
            return Backend::Scalar;
        }
        std::fprintf(stderr, "prefnoise: ignoring unknown PREFNOISE_KERNELS value '%s'\n", env);
    }
    return backend_supported(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
}

Backend active_backend() {
    return active_backend_slot().load(std::memory_order_relaxed);
}

void set_backend(Backend backend) {
    if (!backend_supported(backend)) {
        throw UsageError("kernel backend not supported on this CPU: " +
                         std::string(backend_name(backend)));
    }
    active_backend_slot().store(backend, std::memory_order_relaxed);
    active_table().store(table_for(backend), std::memory_order_relaxed);
}

double dot(const double* a, const double* b, std::size_t n) {
    return active_table().load(std::memory_order_relaxed)->dot(a, b, n);
}

double sum(const double* x, std::size_t n) {
    return active_table().load(std::memory_order_relaxed)->sum(x, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    active_table().load(std::memory_order_relaxed)->axpy(alpha, x, y, n);
}

void matvec(const double* m, std::size_t rows, std::size_t cols,
            std::size_t row_stride, const double* x, double* y) {
    active_table().load(std::memory_order_relaxed)->matvec(m, rows, cols, row_stride, x, y);
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2) {
    active_table().load(std::memory_order_relaxed)
        ->adam_update(p, g, m, v, n, lr, beta1, beta2, eps, bias1, bias2);
}

} // namespace prefnoise::kernels
