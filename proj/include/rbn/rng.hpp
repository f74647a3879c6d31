#ifndef RBN_RNG_HPP
#define RBN_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace rbn {

/* Seedable, splittable generator. The engine is std::mt19937_64; child
 * streams are derived by hashing (seed, stream id) with SplitMix64, so a
 * stream's output depends only on its lineage and never on how many draws
 * other streams made. */
class Rng {
public:
    static constexpr std::string_view algorithm = "mt19937_64+splitmix64-split";

    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    // Independent child stream.
    Rng split(std::uint64_t stream) const;

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() { return normal_(engine_); }

    // Uniform integer in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n);

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Mixes a parent seed with an ordered list of stream ids.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

} // namespace rbn

#endif
