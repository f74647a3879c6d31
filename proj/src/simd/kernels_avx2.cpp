#include <algorithm>
#include <immintrin.h>

#include "rbn/simd.hpp"

namespace rbn::simd::detail {

namespace {

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        __m256d y1 = _mm256_loadu_pd(y + i + 4);
        y0 = _mm256_add_pd(y0, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
        y1 = _mm256_add_pd(y1, _mm256_mul_pd(va, _mm256_loadu_pd(x + i + 4)));
        _mm256_storeu_pd(y + i, y0);
        _mm256_storeu_pd(y + i + 4, y1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        y0 = _mm256_add_pd(y0, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
        _mm256_storeu_pd(y + i, y0);
    }
    for (; i < n; ++i) {
        y[i] = y[i] + a * x[i];
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        a0 = _mm256_add_pd(a0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        a1 = _mm256_add_pd(a1, _mm256_mul_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
        a2 = _mm256_add_pd(a2, _mm256_mul_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8)));
        a3 = _mm256_add_pd(a3, _mm256_mul_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12)));
    }
    const __m256d v = _mm256_add_pd(_mm256_add_pd(a0, a1), _mm256_add_pd(a2, a3));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, v);
    double sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
    for (; i < n; ++i) {
        sum = sum + x[i] * y[i];
    }
    return sum;
}

void gather_axpy(const std::uint32_t* idx, const double* val, std::size_t nnz, const double* basis,
                 std::size_t width, double* acc) {
    if (width == 1) {
        double s = acc[0];
        for (std::size_t e = 0; e < nnz; ++e) s = s + val[e] * basis[idx[e]];
        acc[0] = s;
        return;
    }
    // Eight or four columns per sweep; sums stay in registers and each column sees the scalar order.
    std::size_t c0 = 0;
    for (; c0 + 8 <= width; c0 += 8) {
        __m256d s0 = _mm256_loadu_pd(acc + c0), s1 = _mm256_loadu_pd(acc + c0 + 4);
        for (std::size_t e = 0; e < nnz; ++e) {
            const double* b = basis + static_cast<std::size_t>(idx[e]) * width + c0;
            const __m256d v = _mm256_set1_pd(val[e]);
            s0 = _mm256_add_pd(s0, _mm256_mul_pd(v, _mm256_loadu_pd(b)));
            s1 = _mm256_add_pd(s1, _mm256_mul_pd(v, _mm256_loadu_pd(b + 4)));
        }
        _mm256_storeu_pd(acc + c0, s0);
        _mm256_storeu_pd(acc + c0 + 4, s1);
    }
    if (c0 + 4 <= width) {
        __m256d s0 = _mm256_loadu_pd(acc + c0);
        for (std::size_t e = 0; e < nnz; ++e) {
            const double* b = basis + static_cast<std::size_t>(idx[e]) * width + c0;
            s0 = _mm256_add_pd(s0, _mm256_mul_pd(_mm256_set1_pd(val[e]), _mm256_loadu_pd(b)));
        }
        _mm256_storeu_pd(acc + c0, s0);
        c0 += 4;
    }
    for (; c0 < width; ++c0) {
        double s = acc[c0];
        for (std::size_t e = 0; e < nnz; ++e) s = s + val[e] * basis[static_cast<std::size_t>(idx[e]) * width + c0];
        acc[c0] = s;
    }
}

void scatter_axpy(const std::uint32_t* idx, const double* val, std::size_t nnz, const double* coef,
                  std::size_t width, double* out) {
    if (width == 1) {
        const double c = coef[0];
        for (std::size_t e = 0; e < nnz; ++e) out[idx[e]] = out[idx[e]] + val[e] * c;
        return;
    }
    if (width == 4) {
        const __m256d c = _mm256_loadu_pd(coef);
        for (std::size_t e = 0; e < nnz; ++e) {
            double* o = out + static_cast<std::size_t>(idx[e]) * 4;
            _mm256_storeu_pd(o, _mm256_add_pd(_mm256_loadu_pd(o), _mm256_mul_pd(_mm256_set1_pd(val[e]), c)));
        }
        return;
    }
    for (std::size_t e = 0; e < nnz; ++e) {
        double* o = out + static_cast<std::size_t>(idx[e]) * width;
        const double ve = val[e];
        const __m256d v = _mm256_set1_pd(ve);
        std::size_t c = 0;
        for (; c + 4 <= width; c += 4)
            _mm256_storeu_pd(o + c, _mm256_add_pd(_mm256_loadu_pd(o + c), _mm256_mul_pd(v, _mm256_loadu_pd(coef + c))));
        for (; c < width; ++c) o[c] = o[c] + ve * coef[c];
    }
}

} // namespace

const Kernels* avx2_kernels() {
    static const Kernels k{axpy, dot, gather_axpy, scatter_axpy};
    return &k;
}

} // namespace rbn::simd::detail
