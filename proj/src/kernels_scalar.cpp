// Scalar reference kernels. These define the semantics the SIMD variants are
// tested against.

#include "prefnoise/kernels_impl.hpp"

#include <cmath>

namespace prefnoise::kernels::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i];
    }
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void matvec_scalar(const double* m, std::size_t rows, std::size_t cols,
                   std::size_t row_stride, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = dot_scalar(m + r * row_stride, x, cols);
    }
}

void adam_update_scalar(double* p, const double* g, double* m, double* v, std::size_t n,
                        double lr, double beta1, double beta2, double eps,
                        double bias1, double bias2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{
        dot_scalar, sum_scalar, axpy_scalar, matvec_scalar, adam_update_scalar,
    };
    return table;
}

} // namespace prefnoise::kernels::detail
