#ifndef RBN_CORRUPTION_HPP
#define RBN_CORRUPTION_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rbn/bn.hpp"

namespace rbn {

enum class Strategy { mean_shift, config_starve, random_flip, oblivious_product };

std::string_view name(Strategy s);
// Throws CorruptionError on an unknown name.
Strategy parse_strategy(std::string_view text);

struct CorruptionSpec {
    double eps = 0.0;
    Strategy strategy = Strategy::random_flip;
    std::uint64_t seed = 0;
    // mean_shift: row written into every replaced slot; empty means all ones.
    std::vector<std::uint8_t> target;
    // random_flip: per-bit flip probability (0.5 gives uniform rows).
    double flip_rate = 0.5;
    // oblivious_product: marginals of the planted product distribution; empty means planted_value everywhere.
    std::vector<double> planted_p;
    double planted_value = 0.9;
};

nlohmann::json to_json(const CorruptionSpec& spec);
CorruptionSpec corruption_spec_from_json(const nlohmann::json& doc);

struct CorruptionResult {
    SampleSet corrupted;
    std::vector<bool> planted;  // true for replaced rows
    std::size_t replaced = 0;
    std::vector<std::string> warnings;
};

/* Replaces exactly floor(eps N) rows, each by a row different from its
 * original; every other row is left untouched. The strategies may read
 * the clean samples and the true network. */
CorruptionResult corrupt(const SampleSet& clean, const BayesNet& net, const CorruptionSpec& spec);

} // namespace rbn

#endif
