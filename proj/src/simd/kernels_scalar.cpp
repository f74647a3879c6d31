#include "rbn/simd.hpp"

namespace rbn::simd::detail {

namespace {

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = y[i] + a * x[i];
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    // Mirrors the 4x4-lane accumulation of the vector variants.
    double lane[16] = {};
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        for (std::size_t l = 0; l < 16; ++l) {
            lane[l] = lane[l] + x[i + l] * y[i + l];
        }
    }
    double v[4];
    for (std::size_t l = 0; l < 4; ++l) {
        v[l] = (lane[l] + lane[4 + l]) + (lane[8 + l] + lane[12 + l]);
    }
    double sum = (v[0] + v[1]) + (v[2] + v[3]);
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
    for (std::size_t e = 0; e < nnz; ++e) {
        axpy(val[e], basis + static_cast<std::size_t>(idx[e]) * width, acc, width);
    }
}

void scatter_axpy(const std::uint32_t* idx, const double* val, std::size_t nnz, const double* coef,
                  std::size_t width, double* out) {
    if (width == 1) {
        const double c = coef[0];
        for (std::size_t e = 0; e < nnz; ++e) out[idx[e]] = out[idx[e]] + val[e] * c;
        return;
    }
    for (std::size_t e = 0; e < nnz; ++e) {
        axpy(val[e], coef, out + static_cast<std::size_t>(idx[e]) * width, width);
    }
}

} // namespace

const Kernels& scalar_kernels() {
    static const Kernels k{axpy, dot, gather_axpy, scatter_axpy};
    return k;
}

} // namespace rbn::simd::detail
