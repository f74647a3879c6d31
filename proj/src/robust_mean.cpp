#include "rbn/robust_mean.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "rbn/errors.hpp"
#include "rbn/rng.hpp"
#include "rbn/simd.hpp"

namespace rbn {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::vector<double> normalize_weights(const WeightVector& w) {
    double total = 0.0;
    for (double x : w.w) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("weights must be finite and nonnegative");
        total += x;
    }
    if (total <= 0.0) throw EmptyWeightError("weight vector has zero total");
    std::vector<double> out(w.w.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = w.w[i] / total;
    return out;
}

std::vector<double> mean_of(const RowSource& batch, const std::vector<double>& wn) {
    const auto& k = simd::kernels();
    std::vector<double> mu(batch.dim(), 0.0), scratch;
    for (std::size_t j = 0; j < batch.rows(); ++j) {
        if (wn[j] == 0.0) continue;
        SparseRow r = batch.row(j, scratch);
        k.scatter_axpy(r.idx.data(), r.val.data(), r.idx.size(), &wn[j], 1, mu.data());
    }
    return mu;
}

void check_weights(const RowSource& batch, std::span<const WeightVector> weights) {
    for (const auto& w : weights)
        if (w.size() != batch.rows())
            throw ShapeError("weight vector has " + std::to_string(w.size()) + " entries for " +
                             std::to_string(batch.rows()) + " rows");
}

} // namespace

WeightVector WeightVector::uniform(std::size_t n) {
    return WeightVector{std::vector<double>(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0)};
}

double WeightVector::total() const { return std::accumulate(w.begin(), w.end(), 0.0); }

double GoodnessParams::xi() const {
    const double tail = eps > 0.0 ? eps * std::log(1.0 / eps) : 0.0;
    return gamma2 + 2.0 * gamma1 * gamma1 + 4.0 * eps * eps * beta1 * beta1 + 2.0 * eps * beta2 + tail;
}

GoodnessParams stable_to_good(const StabilityParams& p) {
    if (!(p.eps > 0.0) || !(p.eps < 1.0)) throw DomainError("stability eps must lie in (0, 1)");
    if (!(p.beta >= 0.0) || !(p.gamma >= 0.0)) throw DomainError("stability beta, gamma must be nonnegative");
    GoodnessParams g;
    g.eps = p.eps;
    g.gamma1 = p.beta;
    g.gamma2 = p.gamma;
    g.beta1 = p.beta / p.eps;
    g.beta2 = p.gamma / p.eps + 3.0 * p.beta * p.beta / (p.eps * p.eps);
    return g;
}

std::vector<double> weighted_mean(const RowSource& batch, const WeightVector& w) {
    const WeightVector* one = &w;
    check_weights(batch, std::span<const WeightVector>(one, 1));
    return mean_of(batch, normalize_weights(w));
}

std::vector<double> sigma_apply(std::span<const double> v, const RowSource& batch, const WeightVector& w) {
    if (v.size() != batch.dim()) throw ShapeError("sigma_apply: vector length does not match dim");
    CovarianceOperator op(batch, std::span<const WeightVector>(&w, 1));
    std::vector<double> out(batch.dim());
    op.apply(v.data(), 1, out.data());
    return out;
}

std::vector<double> dense_covariance(const RowSource& batch, const WeightVector& w) {
    const std::size_t dim = batch.dim();
    const auto wn = normalize_weights(w);
    const auto mu = mean_of(batch, wn);
    std::vector<double> cov(dim * dim, 0.0), x(dim), scratch;
    for (std::size_t j = 0; j < batch.rows(); ++j) {
        if (wn[j] == 0.0) continue;
        std::fill(x.begin(), x.end(), 0.0);
        SparseRow r = batch.row(j, scratch);
        for (std::size_t e = 0; e < r.idx.size(); ++e) x[r.idx[e]] = r.val[e];
        for (std::size_t a = 0; a < dim; ++a) x[a] -= mu[a];
        for (std::size_t a = 0; a < dim; ++a) {
            const double xa = wn[j] * x[a];
            for (std::size_t b = 0; b < dim; ++b) cov[a * dim + b] += xa * x[b];
        }
    }
    return cov;
}

CovarianceOperator::CovarianceOperator(const RowSource& batch, std::span<const WeightVector> weights)
    : batch_(batch), active_(batch.rows(), 0) {
    check_weights(batch, weights);
    for (const auto& w : weights) {
        weights_.push_back(normalize_weights(w));
        means_.push_back(mean_of(batch, weights_.back()));
        const auto& wn = weights_.back();
        for (std::size_t j = 0; j < wn.size(); ++j)
            if (wn[j] > 0.0) active_[j] = 1;
    }
}

void CovarianceOperator::apply(const double* u, std::size_t width, double* out) const {
    const auto& k = simd::kernels();
    const std::size_t dim = batch_.dim(), terms = means_.size();
    std::fill(out, out + dim * width, 0.0);
    if (terms == 0) return;

    // c_i = U^T mu_i
    std::vector<double> c(terms * width, 0.0);
    for (std::size_t i = 0; i < terms; ++i)
        for (std::size_t a = 0; a < dim; ++a)
            if (means_[i][a] != 0.0) k.axpy(means_[i][a], u + a * width, &c[i * width], width);

    std::vector<double> s(terms * width, 0.0), proj(width), diff(width), coef(width), scratch;
    for (std::size_t j = 0; j < batch_.rows(); ++j) {
        if (!active_[j]) continue;
        SparseRow r = batch_.row(j, scratch);
        std::fill(proj.begin(), proj.end(), 0.0);
        k.gather_axpy(r.idx.data(), r.val.data(), r.idx.size(), u, width, proj.data());
        std::fill(coef.begin(), coef.end(), 0.0);
        for (std::size_t i = 0; i < terms; ++i) {
            const double wj = weights_[i][j];
            if (wj == 0.0) continue;
            for (std::size_t col = 0; col < width; ++col) diff[col] = proj[col] - c[i * width + col];
            k.axpy(wj, diff.data(), coef.data(), width);
            k.axpy(wj, diff.data(), &s[i * width], width);
        }
        k.scatter_axpy(r.idx.data(), r.val.data(), r.idx.size(), coef.data(), width, out);
    }
    // sum_j w_j (x_j - mu)(x_j - mu)^T u = sum_j w_j x_j (x_j - mu)^T u - mu s^T
    for (std::size_t i = 0; i < terms; ++i)
        for (std::size_t a = 0; a < dim; ++a)
            if (means_[i][a] != 0.0) k.axpy(-means_[i][a], &s[i * width], out + a * width, width);
}

PowerIterationResult top_eigenvalue(const CovarianceOperator& op, std::size_t max_iterations, double rel_tol,
                                    std::uint64_t seed, double scale) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const std::size_t dim = op.dim();
    PowerIterationResult res;
    if (dim == 0 || op.terms() == 0) return res;
    // four columns: one start vector can sit almost orthogonal to a lone spike
    const auto b = static_cast<Eigen::Index>(std::min<std::size_t>(4, dim));
    const auto n = static_cast<Eigen::Index>(dim);
    RowMat v(n, b), mv(n, b);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
    v = Eigen::HouseholderQR<Eigen::MatrixXd>(v).householderQ() * Eigen::MatrixXd::Identity(n, b);
    double prev = 0.0;
    for (std::size_t it = 1; it <= std::max<std::size_t>(max_iterations, 1); ++it) {
        op.apply(v.data(), static_cast<std::size_t>(b), mv.data());
        Eigen::MatrixXd h = v.transpose() * mv;
        h = 0.5 * (h + h.transpose()).eval();
        const double lambda = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
        res.value = lambda;
        res.iterations = it;
        if (mv.norm() == 0.0) break;
        v = Eigen::HouseholderQR<Eigen::MatrixXd>(mv).householderQ() * Eigen::MatrixXd::Identity(n, b);
        if (it > 1 && std::abs(lambda - prev) <= rel_tol * std::max(std::abs(lambda), scale)) break;
        prev = lambda;
    }
    return res;
}

std::size_t sketch_rows(const SketchOptions& opt, std::size_t n) {
    if (opt.rows > 0) return opt.rows;
    if (!(opt.delta > 0.0 && opt.delta < 1.0)) throw DomainError("sketch delta must lie in (0, 1)");
    const double v = opt.rows_factor * std::log2(std::max<double>(n, 2.0)) * std::log2(1.0 / opt.delta);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v)));
}

std::size_t sketch_degree(const SketchOptions& opt, std::size_t dim) {
    if (opt.degree > 0) return opt.degree;
    const double v = opt.degree_factor * std::log2(std::max<double>(dim, 2.0));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v)));
}

ScoreReport score_oracle(const RowSource& batch, std::span<const WeightVector> weights, double alpha_step,
                         const SketchOptions& opt) {
    if (weights.empty()) throw ShapeError("score_oracle needs at least one weight vector");
    if (!(alpha_step >= 0.0) || !std::isfinite(alpha_step)) throw StepSizeError("alpha must be finite and >= 0");
    check_weights(batch, weights);
    const std::size_t n = batch.rows(), dim = batch.dim(), t = weights.size() - 1;
    const std::size_t r = sketch_rows(opt, n), ell = sketch_degree(opt, dim);

    ScoreReport rep;
    rep.sketch = {r, ell, alpha_step, opt.delta, opt.seed};

    CovarianceOperator history(batch, weights.first(t));
    const bool expo = t > 0 && alpha_step > 0.0;
    if (expo) {
        double bound = opt.norm_bound;
        if (bound < 0.0) bound = top_eigenvalue(history, 100, 1e-6, derive_seed(opt.seed, 0x7057)).value;
        if (alpha_step * bound / 2.0 > ell / 2.0)
            throw StepSizeError("alpha * ||sum Sigma|| = " + std::to_string(alpha_step * bound) +
                                " exceeds the polynomial degree " + std::to_string(ell));
    }

    const auto wt = normalize_weights(weights[t]);
    const auto mu = mean_of(batch, wt);
    const auto& k = simd::kernels();

    std::size_t block = opt.block;
    if (block == 0) block = std::max<std::size_t>(1, (std::size_t{1} << 24) / std::max<std::size_t>(3 * dim, 1));
    block = std::min(block, r);

    std::vector<double> tau(n, 0.0), q, a, tmp, ct, proj, scratch;
    const double qscale = 1.0 / std::sqrt(static_cast<double>(r));
    double trace = 0.0;
    for (std::size_t b0 = 0; b0 < r; b0 += block) {
        // Pad to a multiple of four; the zero columns stay zero and add nothing.
        const std::size_t live = std::min(block, r - b0), w = (live + 3) / 4 * 4;
        q.assign(dim * w, 0.0);
        for (std::size_t row = 0; row < live; ++row) {
            Rng rng(derive_seed(opt.seed, b0 + row));
            for (std::size_t col = 0; col < dim; ++col) q[col * w + row] = qscale * rng.normal();
        }
        a = q;
        if (expo) {
            // Horner: u <- q + (alpha / 2j) M u, j = l..1
            tmp.resize(dim * w);
            for (std::size_t j = ell; j >= 1; --j) {
                history.apply(a.data(), w, tmp.data());
                const double f = alpha_step / (2.0 * static_cast<double>(j));
                for (std::size_t e = 0; e < dim * w; ++e) a[e] = q[e] + f * tmp[e];
            }
        }
        trace += k.dot(a.data(), a.data(), a.size());
        ct.assign(w, 0.0);
        for (std::size_t col = 0; col < dim; ++col)
            if (mu[col] != 0.0) k.axpy(mu[col], &a[col * w], ct.data(), w);
        proj.resize(w);
        for (std::size_t j = 0; j < n; ++j) {
            SparseRow rr = batch.row(j, scratch);
            for (std::size_t e = 0; e < w; ++e) proj[e] = -ct[e];
            k.gather_axpy(rr.idx.data(), rr.val.data(), rr.idx.size(), a.data(), w, proj.data());
            tau[j] += k.dot(proj.data(), proj.data(), w);
        }
    }
    if (!(trace > 0.0) || !std::isfinite(trace)) throw DegenerateSketchError("tr(A A^T) is zero or not finite");
    double qt = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        tau[j] /= trace;
        qt += wt[j] * tau[j];
    }
    rep.tau = std::move(tau);
    rep.q_tilde = qt - 1.0;
    return rep;
}

ScoreReport score_oracle_exact(const RowSource& batch, std::span<const WeightVector> weights, double alpha_step) {
    if (weights.empty()) throw ShapeError("score_oracle_exact needs at least one weight vector");
    if (!(alpha_step >= 0.0) || !std::isfinite(alpha_step)) throw StepSizeError("alpha must be finite and >= 0");
    const std::size_t n = batch.rows(), dim = batch.dim(), t = weights.size() - 1;
    if (dim > kExactOracleMaxDim)
        throw CapacityError("dense oracle limited to dim <= " + std::to_string(kExactOracleMaxDim));
    check_weights(batch, weights);

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < t; ++i) {
        const auto c = dense_covariance(batch, weights[i]);
        sum += Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(c.data(), dim, dim);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(alpha_step * sum);
    const Eigen::VectorXd lam = es.eigenvalues();
    const double top = lam.maxCoeff();
    Eigen::VectorXd e = (lam.array() - top).exp();
    e /= e.sum();
    const Eigen::MatrixXd u = es.eigenvectors() * e.asDiagonal() * es.eigenvectors().transpose();

    const auto ct = dense_covariance(batch, weights[t]);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> sig(ct.data(), dim, dim);

    const auto wt = normalize_weights(weights[t]);
    const auto mu = mean_of(batch, wt);
    ScoreReport rep;
    rep.sketch = {0, 0, alpha_step, 0.0, 0};
    rep.tau.resize(n);
    Eigen::VectorXd x(dim);
    std::vector<double> scratch;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t a = 0; a < dim; ++a) x[a] = -mu[a];
        SparseRow r = batch.row(j, scratch);
        for (std::size_t e2 = 0; e2 < r.idx.size(); ++e2) x[r.idx[e2]] += r.val[e2];
        rep.tau[j] = x.dot(u * x);
    }
    rep.q_tilde = (sig - Eigen::MatrixXd::Identity(dim, dim)).cwiseProduct(u).sum();
    return rep;
}

namespace {

// Smallest tau whose weighted lower tail reaches `level` of the active mass.
double weighted_quantile(const std::vector<double>& tau, const std::vector<double>& w, double level) {
    std::vector<std::size_t> order;
    order.reserve(tau.size());
    double total = 0.0;
    for (std::size_t j = 0; j < tau.size(); ++j)
        if (w[j] > 0.0) {
            order.push_back(j);
            total += w[j];
        }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tau[a] < tau[b]; });
    double cum = 0.0;
    for (std::size_t j : order) {
        cum += w[j];
        if (cum >= level * total) return tau[j];
    }
    return order.empty() ? 0.0 : tau[order.back()];
}

struct Downweight {
    double removed = 0.0;
    std::size_t zeroed = 0;
};

Downweight downweight(WeightVector& w, const std::vector<double>& tau, double eps) {
    Downweight d;
    const double thr = weighted_quantile(tau, w.w, 1.0 - 2.0 * eps);
    double tmax = 0.0;
    for (std::size_t j = 0; j < tau.size(); ++j)
        if (w.w[j] > 0.0) tmax = std::max(tmax, tau[j]);
    if (!(tmax > 0.0)) return d;
    for (std::size_t j = 0; j < tau.size(); ++j) {
        if (w.w[j] <= 0.0 || !(tau[j] > thr)) continue;
        const double nw = std::max(0.0, w.w[j] * (1.0 - tau[j] / tmax));
        d.removed += w.w[j] - nw;
        w.w[j] = nw;
        if (nw == 0.0) ++d.zeroed;
    }
    return d;
}

} // namespace

FilterResult que_filter(const RowSource& batch, double eps, const StabilityParams& stability, double delta,
                        std::uint64_t seed, const FilterOptions& opt, double radius) {
    if (!(eps > 0.0 && eps < 1.0 / 3.0)) throw DomainError("filter eps must lie in (0, 1/3)");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("filter delta must lie in (0, 1)");
    if (batch.rows() == 0) throw EmptyWeightError("empty batch");
    const std::size_t dim = batch.dim(), n = batch.rows();

    FilterResult res;
    FilterTrace& tr = res.trace;
    tr.gamma_target = stable_to_good(stability).xi();
    tr.radius = radius > 0.0 ? radius : batch.max_norm();
    tr.epoch_budget = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(opt.epoch_factor * std::log2(std::max(tr.radius, 2.0)))));
    const double lndim = std::log(std::max<double>(dim, 2.0));
    tr.rounds_per_epoch = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(opt.mmwu_factor * lndim)));

    SketchOptions sk = opt.sketch;
    sk.delta = delta;

    WeightVector w = WeightVector::uniform(n);
    double best_excess = INFINITY;
    WeightVector best;

    auto excess_of = [&](const WeightVector& cur, std::size_t epoch, FilterEpoch& rec) {
        CovarianceOperator op(batch, std::span<const WeightVector>(&cur, 1));
        auto pi = top_eigenvalue(op, opt.power_iterations, opt.power_tol, derive_seed(seed, 0xe0, epoch),
                                 opt.power_scale);
        tr.power_passes += pi.iterations;
        rec.lambda = pi.value;
        rec.excess = pi.value - 1.0;
        rec.power_iterations = pi.iterations;
        if (rec.excess < best_excess) {
            best_excess = rec.excess;
            best = cur;
        }
        return rec.excess;
    };

    for (std::size_t epoch = 0;; ++epoch) {
        FilterEpoch rec;
        rec.epoch = epoch;
        const double excess = excess_of(w, epoch, rec);
        if (excess <= tr.gamma_target) {
            tr.epochs.push_back(rec);
            tr.converged = true;
            best = w;
            best_excess = excess;
            break;
        }
        if (epoch >= tr.epoch_budget) {
            tr.epochs.push_back(rec);
            break;
        }
        rec.alpha_step = lndim / (static_cast<double>(tr.rounds_per_epoch) * std::max(rec.lambda, 1e-300));
        tr.epochs.push_back(rec);

        std::vector<WeightVector> hist;
        bool changed = false;
        for (std::size_t round = 0; round < tr.rounds_per_epoch; ++round) {
            hist.push_back(w);
            sk.seed = derive_seed(seed, epoch + 1, round + 1);
            // ||Sigma(w^i)|| <= ||Sigma(w^0)|| up to filtering noise; the sum is bounded by its term count.
            sk.norm_bound = static_cast<double>(round) * rec.lambda;
            const auto t0 = Clock::now();
            ScoreReport sr;
            try {
                sr = score_oracle(batch, hist, rec.alpha_step, sk);
            } catch (const EmptyWeightError&) {
                hist.pop_back();
                break;
            }
            FilterRound fr;
            fr.epoch = epoch;
            fr.round = round;
            fr.oracle_ms = elapsed_ms(t0);
            fr.q_tilde = sr.q_tilde;
            fr.sketch_rows = sr.sketch.rows;
            fr.degree = sr.sketch.degree;
            ++tr.oracle_calls;
            tr.oracle_ms += fr.oracle_ms;
            // The epoch only runs because the excess test failed, so its last round filters regardless.
            const bool last = round + 1 == tr.rounds_per_epoch && !changed;
            if (sr.q_tilde > opt.stop_factor * tr.gamma_target || last) {
                WeightVector trial = w;
                const auto d = downweight(trial, sr.tau, eps);
                if (trial.total() > 0.0 && d.removed > 0.0) {
                    w = std::move(trial);
                    fr.filtered = true;
                    fr.weight_removed = d.removed;
                    fr.zeroed = d.zeroed;
                    changed = true;
                    if (opt.record_weights) tr.weight_history.push_back(w.w);
                }
            }
            tr.rounds.push_back(fr);
        }
        if (!changed) {
            // Nothing left to remove: report the current state as final.
            FilterEpoch last;
            last.epoch = epoch + 1;
            excess_of(w, epoch + 1, last);
            tr.epochs.push_back(last);
            break;
        }
    }
    tr.final_excess = best_excess;
    tr.final_weights = best;
    res.mean = weighted_mean(batch, best);
    return res;
}

FilterResult robust_mean(const RowSource& batch, double eps, double beta, double gamma, double radius,
                         std::uint64_t seed, const FilterOptions& opt) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw DomainError("radius must be positive and finite");
    const double observed = batch.max_norm();
    if (observed > radius * (1.0 + 1e-12))
        throw DomainError("row norm " + std::to_string(observed) + " exceeds radius " + std::to_string(radius));
    return que_filter(batch, eps, StabilityParams{eps, beta, gamma}, opt.sketch.delta, seed, opt, radius);
}

nlohmann::json to_json(const ScoreReport& r, bool include_scores) {
    nlohmann::json j{{"q_tilde", r.q_tilde},
                     {"sketch",
                      {{"rows", r.sketch.rows},
                       {"degree", r.sketch.degree},
                       {"alpha", r.sketch.alpha_step},
                       {"delta", r.sketch.delta},
                       {"seed", r.sketch.seed}}}};
    if (include_scores) j["tau"] = r.tau;
    return j;
}

nlohmann::json to_json(const FilterTrace& t) {
    nlohmann::json epochs = nlohmann::json::array(), rounds = nlohmann::json::array();
    for (const auto& e : t.epochs)
        epochs.push_back({{"epoch", e.epoch},
                          {"lambda", e.lambda},
                          {"excess", e.excess},
                          {"alpha", e.alpha_step},
                          {"power_iterations", e.power_iterations}});
    for (const auto& r : t.rounds)
        rounds.push_back({{"epoch", r.epoch},
                          {"round", r.round},
                          {"q_tilde", r.q_tilde},
                          {"filtered", r.filtered},
                          {"weight_removed", r.weight_removed},
                          {"zeroed", r.zeroed},
                          {"sketch_rows", r.sketch_rows},
                          {"degree", r.degree},
                          {"oracle_ms", r.oracle_ms}});
    return {{"gamma_target", t.gamma_target}, {"radius", t.radius},
            {"epoch_budget", t.epoch_budget}, {"rounds_per_epoch", t.rounds_per_epoch},
            {"converged", t.converged},       {"final_excess", t.final_excess},
            {"oracle_calls", t.oracle_calls}, {"oracle_ms", t.oracle_ms},
            {"power_passes", t.power_passes}, {"epochs", epochs},
            {"rounds", rounds}};
}

} // namespace rbn
