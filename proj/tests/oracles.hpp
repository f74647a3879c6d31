#ifndef RBN_TESTS_ORACLES_HPP
#define RBN_TESTS_ORACLES_HPP

// Slow, direct reference computations used only to check the library.
// Nothing here calls into the code under test beyond plain accessors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rbn/bn.hpp"
#include "rbn/sparse.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline std::size_t node_config(const rbn::BayesNetStructure& st, std::size_t i, const std::vector<int>& x) {
    std::size_t k = st.offset(i), a = 0;
    for (std::size_t p : st.parents(i)) a = 2 * a + static_cast<std::size_t>(x[p]);
    return k + a;
}

inline std::vector<int> bits_of(std::size_t code, std::size_t d) {
    std::vector<int> x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = static_cast<int>((code >> j) & 1u);
    return x;
}

inline double joint(const rbn::BayesNet& net, const std::vector<int>& x) {
    double pr = 1.0;
    for (std::size_t i = 0; i < net.nodes(); ++i) {
        const double p = net.cpt()[node_config(net.structure(), i, x)];
        pr *= x[i] ? p : 1.0 - p;
    }
    return pr;
}

inline std::vector<double> config_probabilities(const rbn::BayesNet& net) {
    const std::size_t d = net.nodes();
    std::vector<double> pi(net.table_size(), 0.0);
    for (std::size_t code = 0; code < (std::size_t{1} << d); ++code) {
        const auto x = bits_of(code, d);
        const double pr = joint(net, x);
        for (std::size_t i = 0; i < d; ++i) pi[node_config(net.structure(), i, x)] += pr;
    }
    return pi;
}

inline double tv(const rbn::BayesNet& p, const rbn::BayesNet& q) {
    const std::size_t d = p.nodes();
    double acc = 0.0;
    for (std::size_t code = 0; code < (std::size_t{1} << d); ++code) {
        const auto x = bits_of(code, d);
        acc += std::abs(joint(p, x) - joint(q, x));
    }
    return 0.5 * acc;
}

inline std::vector<double> dense_row(const rbn::RowSource& b, std::size_t i) {
    std::vector<double> scratch, x(b.dim(), 0.0);
    const auto r = b.row(i, scratch);
    for (std::size_t e = 0; e < r.idx.size(); ++e) x[r.idx[e]] = r.val[e];
    return x;
}

inline std::vector<double> mean(const rbn::RowSource& b, const std::vector<double>& w) {
    double tot = 0.0;
    for (double v : w) tot += v;
    std::vector<double> mu(b.dim(), 0.0);
    for (std::size_t i = 0; i < b.rows(); ++i) {
        const auto x = dense_row(b, i);
        for (std::size_t a = 0; a < b.dim(); ++a) mu[a] += w[i] / tot * x[a];
    }
    return mu;
}

inline Matrix covariance(const rbn::RowSource& b, const std::vector<double>& w) {
    double tot = 0.0;
    for (double v : w) tot += v;
    const auto mu = mean(b, w);
    const std::size_t n = b.dim();
    Matrix c(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < b.rows(); ++i) {
        auto x = dense_row(b, i);
        for (std::size_t a = 0; a < n; ++a) x[a] -= mu[a];
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t c2 = 0; c2 < n; ++c2) c[a][c2] += w[i] / tot * x[a] * x[c2];
    }
    return c;
}

inline Matrix multiply(const Matrix& a, const Matrix& b) {
    const std::size_t n = a.size();
    Matrix c(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

// exp(A) by scaling and squaring with a long Taylor series.
inline Matrix expm(Matrix a) {
    const std::size_t n = a.size();
    double norm = 0.0;
    for (const auto& r : a) {
        double s = 0.0;
        for (double v : r) s += std::abs(v);
        norm = std::max(norm, s);
    }
    int squarings = 0;
    while (norm > 0.5) {
        norm /= 2.0;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    for (auto& r : a)
        for (auto& v : r) v *= scale;
    Matrix result(n, std::vector<double>(n, 0.0)), term(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) result[i][i] = term[i][i] = 1.0;
    for (int k = 1; k <= 30; ++k) {
        term = multiply(term, a);
        for (auto& r : term)
            for (auto& v : r) v /= k;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) result[i][j] += term[i][j];
    }
    for (int s = 0; s < squarings; ++s) result = multiply(result, result);
    return result;
}

struct Scores {
    std::vector<double> tau;
    double q = 0.0;
};

// tau_i = (X_i - mu_t)^T U (X_i - mu_t), U = exp(alpha sum_{i<t} Sigma_i) / tr, q = <Sigma_t - I, U>.
inline Scores scores(const rbn::RowSource& b, const std::vector<std::vector<double>>& weights, double alpha) {
    const std::size_t n = b.dim(), t = weights.size() - 1;
    Matrix sum(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < t; ++i) {
        const auto c = covariance(b, weights[i]);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t c2 = 0; c2 < n; ++c2) sum[a][c2] += alpha * c[a][c2];
    }
    Matrix u = expm(sum);
    double tr = 0.0;
    for (std::size_t a = 0; a < n; ++a) tr += u[a][a];
    for (auto& r : u)
        for (auto& v : r) v /= tr;
    const auto mu = mean(b, weights[t]);
    const auto ct = covariance(b, weights[t]);
    Scores s;
    for (std::size_t i = 0; i < b.rows(); ++i) {
        auto x = dense_row(b, i);
        for (std::size_t a = 0; a < n; ++a) x[a] -= mu[a];
        double v = 0.0;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t c2 = 0; c2 < n; ++c2) v += x[a] * u[a][c2] * x[c2];
        s.tau.push_back(v);
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t c2 = 0; c2 < n; ++c2) s.q += (ct[a][c2] - (a == c2 ? 1.0 : 0.0)) * u[c2][a];
    return s;
}

} // namespace oracle

#endif
