#include "rbn/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "rbn/errors.hpp"
#include "rbn/rng.hpp"

namespace rbn {

double RowSource::max_norm() const {
    std::vector<double> scratch;
    double best = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
        const SparseRow r = row(i, scratch);
        double sq = 0.0;
        for (double v : r.val) {
            sq += v * v;
        }
        best = std::max(best, sq);
    }
    return std::sqrt(best);
}

void SparseBatch::push_back(std::span<const std::uint32_t> idx, std::span<const double> val) {
    if (idx.size() != val.size()) {
        throw ShapeError("sparse row has mismatched index/value lengths");
    }
    for (std::size_t e = 0; e < idx.size(); ++e) {
        if (idx[e] >= dim_ || (e > 0 && idx[e] <= idx[e - 1])) {
            throw ShapeError("sparse row indices must be strictly increasing and below dim");
        }
    }
    idx_.insert(idx_.end(), idx.begin(), idx.end());
    val_.insert(val_.end(), val.begin(), val.end());
    offsets_.push_back(idx_.size());
}

void SparseBatch::push_dense(std::span<const double> values) {
    if (values.size() != dim_) {
        throw ShapeError("dense row length does not match dim");
    }
    for (std::size_t j = 0; j < dim_; ++j) {
        idx_.push_back(static_cast<std::uint32_t>(j));
    }
    val_.insert(val_.end(), values.begin(), values.end());
    offsets_.push_back(idx_.size());
}

SparseRow SparseBatch::row(std::size_t i, std::vector<double>&) const {
    return row(i);
}

void SparseBatch::reserve(std::size_t rows, std::size_t nnz) {
    offsets_.reserve(rows + 1);
    idx_.reserve(nnz);
    val_.reserve(nnz);
}

EmpiricalStats empirical_stats(const SampleSet& samples, double balance) {
    if (!(balance > 0.0 && balance < 1.0)) {
        throw DomainError("balance c must lie in (0, 1)");
    }
    if (samples.size() == 0) {
        throw DomainError("empirical statistics need at least one sample");
    }
    const std::size_t m = samples.table_size();
    const std::size_t d = samples.dim();
    EmpiricalStats st;
    st.samples = samples.size();
    st.balance = balance;
    st.counts.assign(m, 0);
    st.successes.assign(m, 0);
    const auto bits = samples.bits();
    const auto cfg = samples.configs();
    for (std::size_t e = 0; e < samples.size() * d; ++e) {
        ++st.counts[cfg[e]];
        st.successes[cfg[e]] += bits[e];
    }
    st.pi_s.resize(m);
    st.q_s.resize(m);
    st.q_clamped.resize(m);
    st.s.resize(m);
    const double lo = balance / 2.0;
    const double hi = 1.0 - balance / 2.0;
    const double n = static_cast<double>(samples.size());
    for (std::size_t k = 0; k < m; ++k) {
        if (st.counts[k] == 0) {
            throw DegenerateConfigError(k, "parental configuration " + std::to_string(k) +
                                               " never occurs in the sample set");
        }
        st.pi_s[k] = static_cast<double>(st.counts[k]) / n;
        st.q_s[k] = static_cast<double>(st.successes[k]) / static_cast<double>(st.counts[k]);
        st.q_clamped[k] = std::clamp(st.q_s[k], lo, hi);
        st.s[k] = 1.0 / std::sqrt(st.pi_s[k] * st.q_clamped[k] * (1.0 - st.q_clamped[k]));
    }
    return st;
}

nlohmann::json stats_to_json(const EmpiricalStats& stats) {
    return {{"samples", stats.samples},     {"balance", stats.balance}, {"counts", stats.counts},
            {"successes", stats.successes}, {"pi_s", stats.pi_s},       {"q_s", stats.q_s},
            {"q_clamped", stats.q_clamped}, {"s", stats.s}};
}

SparseExpanded expand(const SampleSet& samples, std::size_t row, std::span<const double> q) {
    return expand_scaled(samples, row, q, {});
}

SparseExpanded expand_scaled(const SampleSet& samples, std::size_t row, std::span<const double> q,
                             std::span<const double> s) {
    const std::size_t m = samples.table_size();
    if (q.size() != m || (!s.empty() && s.size() != m)) {
        throw ShapeError("q and s must have length m");
    }
    if (row >= samples.size()) {
        throw IndexError("sample row out of range");
    }
    SparseExpanded out;
    out.m = m;
    const auto bits = samples.row(row);
    const auto cfg = samples.configs(row);
    out.indices.assign(cfg.begin(), cfg.end());
    out.values.resize(cfg.size());
    for (std::size_t j = 0; j < cfg.size(); ++j) {
        const double v = static_cast<double>(bits[j]) - q[cfg[j]];
        out.values[j] = s.empty() ? v : v * s[cfg[j]];
    }
    return out;
}

ExpandedBatch::ExpandedBatch(const SampleSet& samples, std::span<const double> q, std::span<const double> s)
    : samples_(samples) {
    const std::size_t m = samples.table_size();
    if (q.size() != m || (!s.empty() && s.size() != m)) {
        throw ShapeError("q and s must have length m");
    }
    value_.resize(2 * m);
    for (std::size_t k = 0; k < m; ++k) {
        const double scale = s.empty() ? 1.0 : s[k];
        value_[2 * k] = (0.0 - q[k]) * scale;
        value_[2 * k + 1] = (1.0 - q[k]) * scale;
    }
}

SparseRow ExpandedBatch::row(std::size_t i, std::vector<double>& scratch) const {
    const std::size_t d = samples_.dim();
    scratch.resize(d);
    const auto bits = samples_.row(i);
    const auto cfg = samples_.configs(i);
    for (std::size_t j = 0; j < d; ++j) {
        scratch[j] = value_[2 * static_cast<std::size_t>(cfg[j]) + bits[j]];
    }
    return {cfg, {scratch.data(), d}};
}

std::vector<double> expected_expansion_mean(const BayesNet& net, std::span<const double> q,
                                            std::span<const double> pi_p) {
    const std::size_t m = net.table_size();
    if (q.size() != m || pi_p.size() != m) {
        throw ShapeError("q and pi must have length m");
    }
    std::vector<double> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        out[k] = pi_p[k] * (net.cpt()[k] - q[k]);
    }
    return out;
}

std::vector<double> expansion_cov_fxp(const BayesNet& net, std::span<const double> pi_p) {
    const std::size_t m = net.table_size();
    if (pi_p.size() != m) {
        throw ShapeError("pi must have length m");
    }
    std::vector<double> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double p = net.cpt()[k];
        out[k] = pi_p[k] * p * (1.0 - p);
    }
    return out;
}

CMatrixReport c_matrix_norm_bound(const SampleSet& subset, std::span<const double> p, std::span<const double> q) {
    const std::size_t m = subset.table_size();
    if (m > kCMatrixMaxDim) {
        throw CapacityError("C matrix diagnostic needs m <= " + std::to_string(kCMatrixMaxDim));
    }
    if (p.size() != m || q.size() != m) {
        throw ShapeError("p and q must have length m");
    }
    if (subset.size() == 0) {
        throw DomainError("C matrix needs a nonempty subset");
    }
    // f(X,p) - f(X,q) equals q_k - p_k on the realised support.
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    std::vector<double> pi_d(m, 0.0);
    const double inv = 1.0 / static_cast<double>(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const auto cfg = subset.configs(i);
        for (std::uint32_t a : cfg) {
            pi_d[a] += inv;
            const double da = q[a] - p[a];
            for (std::uint32_t b : cfg) {
                c(a, b) += inv * da * (q[b] - p[b]);
            }
        }
    }
    CMatrixReport rep;
    for (std::size_t k = 0; k < m; ++k) {
        rep.bound += pi_d[k] * (p[k] - q[k]) * (p[k] - q[k]);
    }
    if (rep.bound == 0.0) {
        return rep;
    }
    Rng rng(0x5eed);
    Eigen::VectorXd v(static_cast<Eigen::Index>(m));
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        v[k] = rng.normal();
    }
    v.normalize();
    double lambda = 0.0;
    for (std::size_t it = 0; it < 200; ++it) {
        Eigen::VectorXd w = c * v;
        const double next = v.dot(w);
        const double norm = w.norm();
        rep.iterations = it + 1;
        if (norm == 0.0) {
            lambda = 0.0;
            break;
        }
        v = w / norm;
        const bool done = std::abs(next - lambda) <= 1e-9 * std::abs(next);
        lambda = next;
        if (done) {
            break;
        }
    }
    rep.exact_norm = lambda;
    if (rep.exact_norm > rep.bound * (1.0 + 1e-6)) {
        throw DomainError("C matrix spectral norm exceeds its bound");
    }
    return rep;
}

} // namespace rbn
