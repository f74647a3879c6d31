#ifndef RBN_BN_HPP
#define RBN_BN_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rbn/rng.hpp"

namespace rbn {

// Largest d for which exact enumeration over {0,1}^d is attempted.
inline constexpr std::size_t kExactMaxNodes = 20;
// Default Monte Carlo sample count when exact enumeration is not possible.
inline constexpr std::size_t kDefaultMonteCarloSamples = 1000000;
// Per-node parent limit; keeps 2^|Parents(i)| addressable.
inline constexpr std::size_t kMaxParents = 24;

/* Node i together with an assignment to its parents, in the order the
 * parents are listed. */
struct Config {
    std::size_t node = 0;
    std::vector<std::uint8_t> assignment;

    bool operator==(const Config&) const = default;
};

/* Fixed DAG over nodes 0..d-1 in topological order (every parent index is
 * smaller than its child). Parental configurations are flattened to
 * k in [0, m) lexicographically over (i, a), with the assignment a read as
 * a binary integer whose most significant bit is the first listed parent. */
class BayesNetStructure {
public:
    BayesNetStructure() = default;

    // Throws StructureError on forward/self edges, duplicate or out-of-range parents.
    explicit BayesNetStructure(std::vector<std::vector<std::size_t>> parents);

    static BayesNetStructure empty(std::size_t d);
    static BayesNetStructure chain(std::size_t d);

    std::size_t nodes() const { return parents_.size(); }
    std::size_t table_size() const { return m_; }
    const std::vector<std::size_t>& parents(std::size_t i) const { return parents_[i]; }
    const std::vector<std::vector<std::size_t>>& all_parents() const { return parents_; }

    // First flat index belonging to node i; offset(d) == m.
    std::size_t offset(std::size_t i) const { return offsets_[i]; }

    std::size_t config_index(std::size_t node, std::span<const std::uint8_t> assignment) const;
    Config deindex(std::size_t k) const;

    // Node that owns flat index k.
    std::size_t node_of(std::size_t k) const;

    // Flat index of node i's configuration realised by a full bit row.
    std::size_t realized_config(std::size_t node, const std::uint8_t* row) const {
        std::size_t code = 0;
        for (std::size_t p : parents_[node]) {
            code = (code << 1) | row[p];
        }
        return offsets_[node] + code;
    }

    bool operator==(const BayesNetStructure& other) const { return parents_ == other.parents_; }

private:
    std::vector<std::vector<std::size_t>> parents_;
    std::vector<std::size_t> offsets_;
    std::size_t m_ = 0;
};

// Validates a raw parent list; returns the table size m.
std::size_t validate_structure(const std::vector<std::vector<std::size_t>>& parents);

class BayesNet {
public:
    BayesNet() = default;

    // Throws ShapeError if cpt.size() != m, DomainError if an entry leaves [0, 1].
    BayesNet(BayesNetStructure structure, std::vector<double> cpt);

    const BayesNetStructure& structure() const { return structure_; }
    std::span<const double> cpt() const { return cpt_; }
    std::size_t nodes() const { return structure_.nodes(); }
    std::size_t table_size() const { return structure_.table_size(); }

    // min_k min(p_k, 1 - p_k)
    double balance() const;

    // log P(x) for a full row; -inf when the row has probability zero.
    double log_prob(const std::uint8_t* row) const;
    double prob(const std::uint8_t* row) const;

private:
    BayesNetStructure structure_;
    std::vector<double> cpt_;
};

/* N binary rows over d nodes, row-major, plus the flat configuration index
 * each row realises at each node (exactly d per row). */
class SampleSet {
public:
    SampleSet() = default;

    // Computes the realised configurations. Throws ShapeError on size
    // mismatch and DomainError on bytes other than 0/1.
    SampleSet(const BayesNetStructure& structure, std::size_t n, std::vector<std::uint8_t> bits);

    std::size_t size() const { return n_; }
    std::size_t dim() const { return d_; }
    std::size_t table_size() const { return m_; }

    std::span<const std::uint8_t> row(std::size_t i) const { return {bits_.data() + i * d_, d_}; }
    std::span<const std::uint32_t> configs(std::size_t i) const { return {configs_.data() + i * d_, d_}; }

    std::span<const std::uint8_t> bits() const { return bits_; }
    std::span<const std::uint32_t> configs() const { return configs_; }

    // Copy of the rows selected by `keep` (same order).
    SampleSet subset(const BayesNetStructure& structure, std::span<const std::size_t> keep) const;

    bool operator==(const SampleSet& other) const { return n_ == other.n_ && d_ == other.d_ && bits_ == other.bits_; }

private:
    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::size_t m_ = 0;
    std::vector<std::uint8_t> bits_;
    std::vector<std::uint32_t> configs_;
};

// N i.i.d. rows; deterministic given the seed.
SampleSet sample(const BayesNet& net, std::size_t n, std::uint64_t seed);

enum class ProbabilityMode { exact, monte_carlo };

struct ConfigProbabilities {
    std::vector<double> pi;
    double alpha = 0.0;  // min_k pi_k
    ProbabilityMode mode = ProbabilityMode::exact;
    std::size_t mc_samples = 0;
    std::uint64_t mc_seed = 0;
};

// pi^P_k = Pr[X in Pi_k]. Exact mode enumerates 2^d outcomes (CapacityError above d_max).
ConfigProbabilities config_probabilities(const BayesNet& net, ProbabilityMode mode,
                                         std::size_t mc_samples = kDefaultMonteCarloSamples,
                                         std::uint64_t mc_seed = 0, std::size_t d_max = kExactMaxNodes);

// Exact when d <= d_max, Monte Carlo otherwise.
ConfigProbabilities config_probabilities_auto(const BayesNet& net, std::uint64_t mc_seed = 0,
                                              std::size_t mc_samples = kDefaultMonteCarloSamples);

// Empirical pi^S over a sample set.
std::vector<double> empirical_config_frequencies(const SampleSet& samples);

// 1/2 sum_x |P(x) - Q(x)| by enumeration.
double tv_exact(const BayesNet& p, const BayesNet& q, std::size_t d_max = kExactMaxNodes);

// E_{x~P}[max(0, 1 - Q(x)/P(x))] over fresh samples from P.
double tv_monte_carlo(const BayesNet& p, const BayesNet& q, std::size_t samples, std::uint64_t seed);

// sqrt(2 sum_k sqrt(pi^P_k pi^Q_k) (p_k - q_k)^2 / ((p_k + q_k)(2 - p_k - q_k)))
double tv_bound(const BayesNet& p, const BayesNet& q, std::span<const double> pi_p, std::span<const double> pi_q);

} // namespace rbn

#endif
