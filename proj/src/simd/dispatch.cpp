#include <atomic>
#include <cstdlib>
#include <string>

#include "rbn/errors.hpp"
#include "rbn/simd.hpp"

namespace rbn::simd {

namespace detail {
#if !defined(RBN_BUILD_AVX2)
const Kernels* avx2_kernels() {
    return nullptr;
}
#endif
} // namespace detail

namespace {

bool cpu_has_avx2() {
#if defined(RBN_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Level initial_level() {
    if (const char* env = std::getenv("RBN_SIMD")) {
        const std::string want(env);
        if (want == "scalar") {
            return Level::scalar;
        }
        if (want == "avx2" && available(Level::avx2)) {
            return Level::avx2;
        }
    }
    return detect();
}

std::atomic<Level>& current() {
    static std::atomic<Level> level{initial_level()};
    return level;
}

} // namespace

std::string_view name(Level level) {
    switch (level) {
    case Level::scalar:
        return "scalar";
    case Level::avx2:
        return "avx2";
    }
    return "unknown";
}

bool available(Level level) {
    if (level == Level::scalar) {
        return true;
    }
    return detail::avx2_kernels() != nullptr && cpu_has_avx2();
}

Level detect() {
    return available(Level::avx2) ? Level::avx2 : Level::scalar;
}

Level active() {
    return current().load(std::memory_order_relaxed);
}

void set_active(Level level) {
    if (!available(level)) {
        throw DomainError("SIMD level " + std::string(name(level)) + " is not available on this machine");
    }
    current().store(level, std::memory_order_relaxed);
}

const Kernels& kernels(Level level) {
    if (level == Level::avx2 && available(Level::avx2)) {
        return *detail::avx2_kernels();
    }
    return detail::scalar_kernels();
}

const Kernels& kernels() {
    return kernels(active());
}

} // namespace rbn::simd
