#include "rbn/bn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rbn/errors.hpp"

namespace rbn {

std::size_t validate_structure(const std::vector<std::vector<std::size_t>>& parents) {
    const std::size_t d = parents.size();
    std::size_t m = 0;
    for (std::size_t i = 0; i < d; ++i) {
        const auto& pa = parents[i];
        if (pa.size() > kMaxParents) {
            throw StructureError("node " + std::to_string(i) + " has more than " + std::to_string(kMaxParents) +
                                 " parents");
        }
        for (std::size_t j = 0; j < pa.size(); ++j) {
            if (pa[j] >= d) {
                throw StructureError("parent index " + std::to_string(pa[j]) + " of node " + std::to_string(i) +
                                     " is out of range");
            }
            if (pa[j] >= i) {
                throw StructureError("edge " + std::to_string(pa[j]) + " -> " + std::to_string(i) +
                                     " violates topological order");
            }
            for (std::size_t l = 0; l < j; ++l) {
                if (pa[l] == pa[j]) {
                    throw StructureError("duplicate parent " + std::to_string(pa[j]) + " of node " +
                                         std::to_string(i));
                }
            }
        }
        const std::size_t width = std::size_t{1} << pa.size();
        if (m > std::numeric_limits<std::uint32_t>::max() - width) {
            throw StructureError("conditional probability table too large");
        }
        m += width;
    }
    return m;
}

BayesNetStructure::BayesNetStructure(std::vector<std::vector<std::size_t>> parents)
    : parents_(std::move(parents)) {
    m_ = validate_structure(parents_);
    offsets_.resize(parents_.size() + 1);
    offsets_[0] = 0;
    for (std::size_t i = 0; i < parents_.size(); ++i) {
        offsets_[i + 1] = offsets_[i] + (std::size_t{1} << parents_[i].size());
    }
}

BayesNetStructure BayesNetStructure::empty(std::size_t d) {
    return BayesNetStructure(std::vector<std::vector<std::size_t>>(d));
}

BayesNetStructure BayesNetStructure::chain(std::size_t d) {
    std::vector<std::vector<std::size_t>> parents(d);
    for (std::size_t i = 1; i < d; ++i) {
        parents[i] = {i - 1};
    }
    return BayesNetStructure(std::move(parents));
}

std::size_t BayesNetStructure::config_index(std::size_t node, std::span<const std::uint8_t> assignment) const {
    if (node >= parents_.size()) {
        throw IndexError("node " + std::to_string(node) + " out of range");
    }
    if (assignment.size() != parents_[node].size()) {
        throw IndexError("assignment for node " + std::to_string(node) + " has " +
                         std::to_string(assignment.size()) + " bits, expected " +
                         std::to_string(parents_[node].size()));
    }
    std::size_t code = 0;
    for (std::uint8_t bit : assignment) {
        if (bit > 1) {
            throw IndexError("assignment bits must be 0 or 1");
        }
        code = (code << 1) | bit;
    }
    return offsets_[node] + code;
}

std::size_t BayesNetStructure::node_of(std::size_t k) const {
    if (k >= m_) {
        throw IndexError("flat index " + std::to_string(k) + " out of range (m = " + std::to_string(m_) + ")");
    }
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), k);
    return static_cast<std::size_t>(it - offsets_.begin()) - 1;
}

Config BayesNetStructure::deindex(std::size_t k) const {
    Config out;
    out.node = node_of(k);
    const std::size_t width = parents_[out.node].size();
    const std::size_t code = k - offsets_[out.node];
    out.assignment.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
        out.assignment[j] = static_cast<std::uint8_t>((code >> (width - 1 - j)) & 1U);
    }
    return out;
}

BayesNet::BayesNet(BayesNetStructure structure, std::vector<double> cpt)
    : structure_(std::move(structure)), cpt_(std::move(cpt)) {
    if (cpt_.size() != structure_.table_size()) {
        throw ShapeError("cpt has " + std::to_string(cpt_.size()) + " entries, structure needs " +
                         std::to_string(structure_.table_size()));
    }
    for (std::size_t k = 0; k < cpt_.size(); ++k) {
        if (!(cpt_[k] >= 0.0 && cpt_[k] <= 1.0)) {
            throw DomainError("cpt entry " + std::to_string(k) + " is not a probability");
        }
    }
}

double BayesNet::balance() const {
    double c = 0.5;
    for (double p : cpt_) {
        c = std::min(c, std::min(p, 1.0 - p));
    }
    return c;
}

double BayesNet::log_prob(const std::uint8_t* row) const {
    double lp = 0.0;
    for (std::size_t i = 0; i < structure_.nodes(); ++i) {
        const double p = cpt_[structure_.realized_config(i, row)];
        lp += std::log(row[i] ? p : 1.0 - p);
    }
    return lp;
}

double BayesNet::prob(const std::uint8_t* row) const {
    double pr = 1.0;
    for (std::size_t i = 0; i < structure_.nodes(); ++i) {
        const double p = cpt_[structure_.realized_config(i, row)];
        pr *= row[i] ? p : 1.0 - p;
    }
    return pr;
}

SampleSet::SampleSet(const BayesNetStructure& structure, std::size_t n, std::vector<std::uint8_t> bits)
    : n_(n), d_(structure.nodes()), m_(structure.table_size()), bits_(std::move(bits)) {
    if (bits_.size() != n_ * d_) {
        throw ShapeError("sample matrix has " + std::to_string(bits_.size()) + " entries, expected " +
                         std::to_string(n_ * d_));
    }
    configs_.resize(bits_.size());
    for (std::size_t i = 0; i < n_; ++i) {
        const std::uint8_t* r = bits_.data() + i * d_;
        std::uint32_t* c = configs_.data() + i * d_;
        for (std::size_t j = 0; j < d_; ++j) {
            if (r[j] > 1) {
                throw DomainError("sample bits must be 0 or 1");
            }
            c[j] = static_cast<std::uint32_t>(structure.realized_config(j, r));
        }
    }
}

SampleSet SampleSet::subset(const BayesNetStructure& structure, std::span<const std::size_t> keep) const {
    std::vector<std::uint8_t> bits(keep.size() * d_);
    for (std::size_t r = 0; r < keep.size(); ++r) {
        if (keep[r] >= n_) {
            throw IndexError("subset row out of range");
        }
        std::copy_n(bits_.data() + keep[r] * d_, d_, bits.data() + r * d_);
    }
    return SampleSet(structure, keep.size(), std::move(bits));
}

namespace {

void sample_rows(const BayesNet& net, std::size_t n, Rng& rng, std::vector<std::uint8_t>& bits) {
    const auto& st = net.structure();
    const auto cpt = net.cpt();
    const std::size_t d = st.nodes();
    bits.assign(n * d, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint8_t* row = bits.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = rng.bernoulli(cpt[st.realized_config(j, row)]) ? 1 : 0;
        }
    }
}

// Calls fn(row, probability) for every x in {0,1}^d.
template <class Fn>
void enumerate_outcomes(std::size_t d, Fn&& fn) {
    std::vector<std::uint8_t> row(d, 0);
    const std::uint64_t total = std::uint64_t{1} << d;
    for (std::uint64_t x = 0; x < total; ++x) {
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = static_cast<std::uint8_t>((x >> j) & 1U);
        }
        fn(row.data());
    }
}

void require_exact_capacity(std::size_t d, std::size_t d_max) {
    if (d > d_max) {
        throw CapacityError("exact enumeration needs d <= " + std::to_string(d_max) + ", got d = " +
                            std::to_string(d));
    }
}

} // namespace

SampleSet sample(const BayesNet& net, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> bits;
    sample_rows(net, n, rng, bits);
    return SampleSet(net.structure(), n, std::move(bits));
}

std::vector<double> empirical_config_frequencies(const SampleSet& samples) {
    std::vector<std::uint64_t> counts(samples.table_size(), 0);
    for (std::uint32_t k : samples.configs()) {
        ++counts[k];
    }
    std::vector<double> pi(counts.size(), 0.0);
    if (samples.size() == 0) {
        return pi;
    }
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (std::size_t k = 0; k < counts.size(); ++k) {
        pi[k] = static_cast<double>(counts[k]) * inv;
    }
    return pi;
}

ConfigProbabilities config_probabilities(const BayesNet& net, ProbabilityMode mode, std::size_t mc_samples,
                                         std::uint64_t mc_seed, std::size_t d_max) {
    const auto& st = net.structure();
    ConfigProbabilities out;
    out.mode = mode;
    if (mode == ProbabilityMode::exact) {
        require_exact_capacity(st.nodes(), d_max);
        out.pi.assign(st.table_size(), 0.0);
        enumerate_outcomes(st.nodes(), [&](const std::uint8_t* row) {
            const double pr = net.prob(row);
            if (pr == 0.0) {
                return;
            }
            for (std::size_t j = 0; j < st.nodes(); ++j) {
                out.pi[st.realized_config(j, row)] += pr;
            }
        });
    } else {
        out.mc_samples = mc_samples;
        out.mc_seed = mc_seed;
        // Streamed in chunks so large N_mc does not hold every row at once.
        std::vector<std::uint64_t> counts(st.table_size(), 0);
        Rng rng(mc_seed);
        std::vector<std::uint8_t> bits;
        const std::size_t chunk = 65536;
        for (std::size_t done = 0; done < mc_samples; done += chunk) {
            const std::size_t n = std::min(chunk, mc_samples - done);
            sample_rows(net, n, rng, bits);
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint8_t* row = bits.data() + i * st.nodes();
                for (std::size_t j = 0; j < st.nodes(); ++j) {
                    ++counts[st.realized_config(j, row)];
                }
            }
        }
        out.pi.resize(counts.size());
        for (std::size_t k = 0; k < counts.size(); ++k) {
            out.pi[k] = mc_samples ? static_cast<double>(counts[k]) / static_cast<double>(mc_samples) : 0.0;
        }
    }
    out.alpha = out.pi.empty() ? 0.0 : *std::min_element(out.pi.begin(), out.pi.end());
    return out;
}

ConfigProbabilities config_probabilities_auto(const BayesNet& net, std::uint64_t mc_seed, std::size_t mc_samples) {
    if (net.nodes() <= kExactMaxNodes) {
        return config_probabilities(net, ProbabilityMode::exact);
    }
    return config_probabilities(net, ProbabilityMode::monte_carlo, mc_samples, mc_seed);
}

namespace {

void require_same_shape(const BayesNet& p, const BayesNet& q) {
    if (p.nodes() != q.nodes()) {
        throw ShapeError("networks have different node counts (" + std::to_string(p.nodes()) + " vs " +
                         std::to_string(q.nodes()) + ")");
    }
}

} // namespace

double tv_exact(const BayesNet& p, const BayesNet& q, std::size_t d_max) {
    require_same_shape(p, q);
    require_exact_capacity(p.nodes(), d_max);
    double total = 0.0;
    enumerate_outcomes(p.nodes(), [&](const std::uint8_t* row) { total += std::abs(p.prob(row) - q.prob(row)); });
    return 0.5 * total;
}

double tv_monte_carlo(const BayesNet& p, const BayesNet& q, std::size_t samples, std::uint64_t seed) {
    require_same_shape(p, q);
    if (samples == 0) {
        throw DomainError("Monte Carlo TV needs at least one sample");
    }
    Rng rng(seed);
    std::vector<std::uint8_t> bits;
    const std::size_t d = p.nodes();
    const std::size_t chunk = 65536;
    double total = 0.0;
    for (std::size_t done = 0; done < samples; done += chunk) {
        const std::size_t n = std::min(chunk, samples - done);
        sample_rows(p, n, rng, bits);
        double part = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint8_t* row = bits.data() + i * d;
            const double ratio = std::exp(q.log_prob(row) - p.log_prob(row));
            part += std::max(0.0, 1.0 - ratio);
        }
        total += part;
    }
    return total / static_cast<double>(samples);
}

double tv_bound(const BayesNet& p, const BayesNet& q, std::span<const double> pi_p, std::span<const double> pi_q) {
    require_same_shape(p, q);
    if (!(p.structure() == q.structure())) {
        throw ShapeError("tv_bound needs networks with the same structure");
    }
    const std::size_t m = p.table_size();
    if (pi_p.size() != m || pi_q.size() != m) {
        throw ShapeError("configuration probability vectors must have length m");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double a = p.cpt()[k];
        const double b = q.cpt()[k];
        if (a == b) {
            continue;
        }
        const double denom = (a + b) * (2.0 - a - b);
        if (!(denom > 0.0)) {
            throw DomainError("degenerate denominator at flat index " + std::to_string(k));
        }
        sum += std::sqrt(pi_p[k] * pi_q[k]) * (a - b) * (a - b) / denom;
    }
    return std::sqrt(2.0 * sum);
}

} // namespace rbn
