#ifndef RBN_SIMD_HPP
#define RBN_SIMD_HPP

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace rbn::simd {

/* Inner-loop kernels behind a runtime-selected dispatch table.
 *
 * Every variant produces bit-identical results: elementwise kernels use
 * separate multiply and add (no fused contraction) and reductions follow
 * one fixed association order (16 interleaved partial sums, combined as a
 * balanced tree, then the tail in sequence). Switching the level therefore
 * never changes program output, only speed. */
enum class Level { scalar, avx2 };

std::string_view name(Level level);

// Best level supported by this CPU and build.
Level detect();

// Level used by kernels(); defaults to detect(), or RBN_SIMD=scalar|avx2 from the environment.
Level active();
void set_active(Level level);
bool available(Level level);

struct Kernels {
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // acc[c] += sum_e val[e] * basis[idx[e] * width + c], c < width
    void (*gather_axpy)(const std::uint32_t* idx, const double* val, std::size_t nnz, const double* basis,
                        std::size_t width, double* acc);
    // out[idx[e] * width + c] += val[e] * coef[c], c < width
    void (*scatter_axpy)(const std::uint32_t* idx, const double* val, std::size_t nnz, const double* coef,
                         std::size_t width, double* out);
};

const Kernels& kernels();
const Kernels& kernels(Level level);

namespace detail {
const Kernels& scalar_kernels();
const Kernels* avx2_kernels();  // nullptr when not built
} // namespace detail

} // namespace rbn::simd

#endif
