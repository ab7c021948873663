#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "prefnoise/kernels.hpp"
#include "prefnoise/rng.hpp"

#include "testutil.hpp"

#include <cmath>
#include <vector>

using namespace prefnoise;

namespace {

// Sizes straddling the vector width and remainder handling.
const std::vector<std::size_t> kSizes{0, 1, 3, 4, 7, 8, 15, 32, 33, 257, 1000};

struct BackendGuard {
    kernels::Backend saved = kernels::active_backend();
    ~BackendGuard() { kernels::set_backend(saved); }
};

} // namespace

TEST_CASE("scalar dot/sum/axpy reference values") {
    BackendGuard guard;
    kernels::set_backend(kernels::Backend::Scalar);
    const std::vector<double> a{1.0, 2.0, 3.0};
    const std::vector<double> b{-1.0, 0.5, 4.0};
    CHECK(kernels::dot(a.data(), b.data(), 3) == doctest::Approx(12.0));
    CHECK(kernels::sum(a.data(), 3) == doctest::Approx(6.0));
    std::vector<double> y{1.0, 1.0, 1.0};
    kernels::axpy(2.0, a.data(), y.data(), 3);
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[2] == doctest::Approx(7.0));
}

TEST_CASE("matvec with row stride applies a column block") {
    BackendGuard guard;
    kernels::set_backend(kernels::Backend::Scalar);
    // 2x4 matrix, use the last 2 columns of each row.
    const std::vector<double> m{1, 2, 3, 4, 5, 6, 7, 8};
    const std::vector<double> x{1.0, -1.0};
    std::vector<double> y(2);
    kernels::matvec(m.data() + 2, 2, 2, 4, x.data(), y.data());
    CHECK(y[0] == doctest::Approx(3.0 - 4.0));
    CHECK(y[1] == doctest::Approx(7.0 - 8.0));
}

TEST_CASE("avx2 kernels match scalar reference") {
    if (!kernels::backend_supported(kernels::Backend::Avx2)) {
        MESSAGE("avx2 not supported on this host; skipping equivalence checks");
        return;
    }
    BackendGuard guard;
    Rng rng(20240201);
    for (const std::size_t n : kSizes) {
        const std::vector<double> a = testutil::random_vector(n, rng);
        const std::vector<double> b = testutil::random_vector(n, rng);

        kernels::set_backend(kernels::Backend::Scalar);
        const double dot_ref = kernels::dot(a.data(), b.data(), n);
        const double sum_ref = kernels::sum(a.data(), n);
        std::vector<double> y_ref = testutil::random_vector(n, rng);
        std::vector<double> y_simd = y_ref;
        kernels::axpy(0.37, a.data(), y_ref.data(), n);

        kernels::set_backend(kernels::Backend::Avx2);
        const double dot_simd = kernels::dot(a.data(), b.data(), n);
        const double sum_simd = kernels::sum(a.data(), n);
        kernels::axpy(0.37, a.data(), y_simd.data(), n);

        // FMA and reassociation move the last bits; bound by the magnitude sum.
        double mag = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            mag += std::fabs(a[i] * b[i]);
        }
        CHECK(std::fabs(dot_ref - dot_simd) <= 1e-13 * mag);
        CHECK(std::fabs(sum_ref - sum_simd) <= 1e-13 * mag);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(y_ref[i] == doctest::Approx(y_simd[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("avx2 matvec and adam match scalar reference") {
    if (!kernels::backend_supported(kernels::Backend::Avx2)) {
        return;
    }
    BackendGuard guard;
    Rng rng(77);
    const std::size_t rows = 7;
    const std::size_t cols = 13;
    const std::size_t stride = 17;
    const std::vector<double> m = testutil::random_vector(rows * stride, rng);
    const std::vector<double> x = testutil::random_vector(cols, rng);
    std::vector<double> y_ref(rows);
    std::vector<double> y_simd(rows);

    kernels::set_backend(kernels::Backend::Scalar);
    kernels::matvec(m.data(), rows, cols, stride, x.data(), y_ref.data());
    kernels::set_backend(kernels::Backend::Avx2);
    kernels::matvec(m.data(), rows, cols, stride, x.data(), y_simd.data());
    for (std::size_t r = 0; r < rows; ++r) {
        CHECK(y_ref[r] == doctest::Approx(y_simd[r]).epsilon(1e-12));
    }

    for (const std::size_t n : kSizes) {
        if (n == 0) {
            continue;
        }
        const std::vector<double> g = testutil::random_vector(n, rng);
        std::vector<double> p1 = testutil::random_vector(n, rng);
        std::vector<double> p2 = p1;
        std::vector<double> m1(n, 0.1);
        std::vector<double> m2 = m1;
        std::vector<double> v1(n, 0.2);
        std::vector<double> v2 = v1;

        kernels::set_backend(kernels::Backend::Scalar);
        kernels::adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, 1e-3, 0.9,
                             0.999, 1e-8, 0.5, 0.3);
        kernels::set_backend(kernels::Backend::Avx2);
        kernels::adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, 1e-3, 0.9,
                             0.999, 1e-8, 0.5, 0.3);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-12));
            CHECK(m1[i] == doctest::Approx(m2[i]).epsilon(1e-12));
            CHECK(v1[i] == doctest::Approx(v2[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("backend selection") {
    CHECK(kernels::backend_supported(kernels::Backend::Scalar));
    CHECK(kernels::backend_name(kernels::Backend::Scalar) == "scalar");
    CHECK(kernels::backend_name(kernels::Backend::Avx2) == "avx2");
    BackendGuard guard;
    kernels::set_backend(kernels::Backend::Scalar);
    CHECK(kernels::active_backend() == kernels::Backend::Scalar);
}
