#pragma once

#include <cstddef>
#include <string_view>

// Dense double-precision inner loops used by the policy forward/backward
// passes and the optimizer. Each operation has a scalar reference
// implementation and an AVX2+FMA variant; the active backend is selected at
// runtime (CPU detection, overridable via set_backend or the
// PREFNOISE_KERNELS environment variable). The variants agree to within
// floating-point reassociation error and are equivalence-tested.
namespace prefnoise::kernels {

enum class Backend { Scalar, Avx2 };

std::string_view backend_name(Backend backend);

bool backend_supported(Backend backend);

// Best supported backend, or the PREFNOISE_KERNELS override if valid.
Backend default_backend();

Backend active_backend();

// Throws UsageError if the backend is not supported on this CPU.
void set_backend(Backend backend);

double dot(const double* a, const double* b, std::size_t n);

double sum(const double* x, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// y[r] = dot(m + r * row_stride, x, cols) for r in [0, rows).
// row_stride >= cols lets callers apply a column block of a wider matrix.
void matvec(const double* m, std::size_t rows, std::size_t cols,
            std::size_t row_stride, const double* x, double* y);

// One Adam step over a flat parameter block, in place:
//   m = beta1*m + (1-beta1)*g,  v = beta2*v + (1-beta2)*g^2,
//   p -= lr * (m/bias1) / (sqrt(v/bias2) + eps)
// bias1/bias2 are the usual 1-beta^t corrections, computed by the caller.
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2);

} // namespace prefnoise::kernels
