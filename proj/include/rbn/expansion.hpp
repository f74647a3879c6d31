#ifndef RBN_EXPANSION_HPP
#define RBN_EXPANSION_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "rbn/bn.hpp"
#include "rbn/sparse.hpp"

namespace rbn {

/* Empirical statistics of a sample set over the m parental configurations.
 * q_s is the raw ratio t_k / n_k; q_clamped is q_s clipped to
 * [c/2, 1 - c/2], and the scaling vector s is computed from q_clamped. */
struct EmpiricalStats {
    std::size_t samples = 0;
    double balance = 0.0;
    std::vector<std::uint64_t> counts;     // n_k
    std::vector<std::uint64_t> successes;  // t_k
    std::vector<double> pi_s;
    std::vector<double> q_s;
    std::vector<double> q_clamped;
    std::vector<double> s;
};

// Throws DegenerateConfigError if some configuration never occurs; DomainError unless c in (0, 1).
EmpiricalStats empirical_stats(const SampleSet& samples, double balance);

nlohmann::json stats_to_json(const EmpiricalStats& stats);

// d-sparse vector in R^m; support is the realised configurations even when a value is 0.
struct SparseExpanded {
    std::size_t m = 0;
    std::vector<std::uint32_t> indices;
    std::vector<double> values;
};

// f(x, q): x_i - q_k at each realised k = (i, a).
SparseExpanded expand(const SampleSet& samples, std::size_t row, std::span<const double> q);
// f(x, q) o s restricted to the support.
SparseExpanded expand_scaled(const SampleSet& samples, std::size_t row, std::span<const double> q,
                             std::span<const double> s);

/* The scaled expansions {f(X_i, q) o s} of a whole sample set, evaluated on
 * demand. Nothing of size N*m (or N*d doubles) is materialised; each row
 * costs one table lookup per node. */
class ExpandedBatch final : public RowSource {
public:
    // s may be empty, meaning no scaling.
    ExpandedBatch(const SampleSet& samples, std::span<const double> q, std::span<const double> s);

    std::size_t rows() const override { return samples_.size(); }
    std::size_t dim() const override { return samples_.table_size(); }
    std::size_t nnz() const override { return samples_.size() * samples_.dim(); }
    SparseRow row(std::size_t i, std::vector<double>& scratch) const override;

private:
    const SampleSet& samples_;
    // value_[2k + b] = (b - q_k) * s_k
    std::vector<double> value_;
};

// E[f(X, q)] = pi^P o (p - q)
std::vector<double> expected_expansion_mean(const BayesNet& net, std::span<const double> q,
                                            std::span<const double> pi_p);

// diag Cov[f(X, p)] = pi^P o p o (1 - p)
std::vector<double> expansion_cov_fxp(const BayesNet& net, std::span<const double> pi_p);

struct CMatrixReport {
    double exact_norm = 0.0;
    double bound = 0.0;
    std::size_t iterations = 0;
};

// Largest m for which the dense C matrix diagnostic is formed.
inline constexpr std::size_t kCMatrixMaxDim = 2000;

/* Spectral norm of C_{D,q} = 1/|D| sum (f(X,p) - f(X,q))(f(X,p) - f(X,q))^T
 * by power iteration on the dense matrix, and the bound
 * sum_k pi^D_k (p_k - q_k)^2. Throws CapacityError for m > 2000 and
 * DomainError if the bound is violated beyond relative 1e-6. */
CMatrixReport c_matrix_norm_bound(const SampleSet& subset, std::span<const double> p, std::span<const double> q);

} // namespace rbn

#endif
