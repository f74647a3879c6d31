#include "rbn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "rbn/errors.hpp"
#include "rbn/expansion.hpp"
#include "rbn/rng.hpp"

namespace rbn {

namespace {

constexpr std::string_view kFamilies[] = {"empty", "chain", "random_dag"};

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::vector<std::size_t> random_subset(std::size_t n, std::size_t count, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(count);
    return idx;
}

} // namespace

std::string_view name(Family f) { return kFamilies[static_cast<int>(f)]; }

Family parse_family(std::string_view text) {
    for (int i = 0; i < 3; ++i)
        if (kFamilies[i] == text) return static_cast<Family>(i);
    throw DomainError("unknown structure family '" + std::string(text) + "'");
}

nlohmann::json to_json(const GeneratorSpec& s) {
    return {{"family", std::string(name(s.family))},
            {"d", s.d},
            {"max_parents", s.max_parents},
            {"c", s.c},
            {"seed", s.seed}};
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
    GeneratorSpec s;
    try {
        if (j.contains("family")) s.family = parse_family(j.at("family").get<std::string>());
        take(j, "d", s.d);
        take(j, "max_parents", s.max_parents);
        take(j, "c", s.c);
        take(j, "seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad generator spec: ") + e.what());
    }
    return s;
}

BayesNetStructure generate_structure(const GeneratorSpec& spec) {
    switch (spec.family) {
    case Family::empty:
        return BayesNetStructure::empty(spec.d);
    case Family::chain:
        return BayesNetStructure::chain(spec.d);
    case Family::random_dag: {
        Rng rng(derive_seed(spec.seed, 1));
        std::vector<std::vector<std::size_t>> parents(spec.d);
        for (std::size_t i = 0; i < spec.d; ++i) {
            const std::size_t k = rng.below(std::min(i, spec.max_parents) + 1);
            if (k == 0) continue;
            parents[i] = random_subset(i, k, rng);
            std::sort(parents[i].begin(), parents[i].end());
        }
        return BayesNetStructure(std::move(parents));
    }
    }
    throw DomainError("unknown structure family");
}

BayesNet generate_net(const GeneratorSpec& spec) {
    if (!(spec.c > 0.0 && spec.c <= 0.5)) throw DomainError("generator c must lie in (0, 1/2]");
    BayesNetStructure st = generate_structure(spec);
    Rng rng(derive_seed(spec.seed, 2));
    std::vector<double> cpt(st.table_size());
    for (auto& p : cpt) p = spec.c + (1.0 - 2.0 * spec.c) * rng.uniform();
    return BayesNet(std::move(st), std::move(cpt));
}

BayesNet empirical_net(const SampleSet& samples, const BayesNetStructure& structure) {
    if (samples.dim() != structure.nodes() || samples.table_size() != structure.table_size())
        throw StructureError("samples do not conform to the structure");
    const std::size_t m = structure.table_size(), d = samples.dim();
    std::vector<std::uint64_t> n(m, 0), t(m, 0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto row = samples.row(i);
        const auto cfg = samples.configs(i);
        for (std::size_t j = 0; j < d; ++j) {
            ++n[cfg[j]];
            t[cfg[j]] += row[j];
        }
    }
    std::vector<double> q(m, 0.5);
    for (std::size_t k = 0; k < m; ++k)
        if (n[k] > 0) q[k] = static_cast<double>(t[k]) / static_cast<double>(n[k]);
    return BayesNet(structure, std::move(q));
}

double population_residual(const BayesNet& truth, std::span<const double> q, std::span<const double> pi_p) {
    const auto p = truth.cpt();
    if (q.size() != p.size() || pi_p.size() != p.size()) throw ShapeError("residual: length mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double var = pi_p[k] * p[k] * (1.0 - p[k]);
        if (!(var > 0.0)) continue;
        const double v = pi_p[k] * (p[k] - q[k]) / std::sqrt(var);
        acc += v * v;
    }
    return std::sqrt(acc);
}

Metrics evaluate(const BayesNet& truth, const BayesNet& learned, const EvalOptions& opt) {
    if (!(truth.structure() == learned.structure())) throw StructureError("networks have different structures");
    Metrics m;
    const auto pp = config_probabilities_auto(truth, derive_seed(opt.seed, 1), opt.mc_samples);
    const auto pq = config_probabilities_auto(learned, derive_seed(opt.seed, 2), opt.mc_samples);
    m.pi_mode = pp.mode == ProbabilityMode::exact ? "exact" : "monte_carlo";
    if (truth.nodes() <= opt.d_max)
        m.tv_exact = tv_exact(truth, learned, opt.d_max);
    else
        m.tv_mc = tv_monte_carlo(truth, learned, opt.mc_samples, derive_seed(opt.seed, 3));
    m.tv_bound = tv_bound(truth, learned, pp.pi, pq.pi);
    m.residual = population_residual(truth, learned.cpt(), pp.pi);
    const auto p = truth.cpt(), q = learned.cpt();
    for (std::size_t k = 0; k < p.size(); ++k) m.linf_cpt = std::max(m.linf_cpt, std::abs(p[k] - q[k]));
    return m;
}

nlohmann::json to_json(const Metrics& m) {
    nlohmann::json j{{"tv_bound", m.tv_bound}, {"residual", m.residual}, {"linf_cpt", m.linf_cpt}, {"pi_mode", m.pi_mode}};
    j["tv_exact"] = m.tv_exact ? nlohmann::json(*m.tv_exact) : nlohmann::json(nullptr);
    j["tv_monte_carlo"] = m.tv_mc ? nlohmann::json(*m.tv_mc) : nlohmann::json(nullptr);
    j["tv_exact_available"] = m.tv_exact.has_value();
    return j;
}

nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"generator", to_json(c.generator)},
            {"N", c.n},
            {"n_factor", c.n_factor},
            {"corruption", to_json(c.corruption)},
            {"learn", to_json(c.learn)},
            {"eval", {{"mc_samples", c.eval.mc_samples}, {"seed", c.eval.seed}, {"d_max", c.eval.d_max}}},
            {"seed", c.seed}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        if (j.contains("generator")) c.generator = generator_spec_from_json(j.at("generator"));
        take(j, "N", c.n);
        take(j, "n_factor", c.n_factor);
        if (j.contains("corruption")) c.corruption = corruption_spec_from_json(j.at("corruption"));
        if (j.contains("learn")) c.learn = learn_config_from_json(j.at("learn"));
        if (j.contains("eval")) {
            take(j.at("eval"), "mc_samples", c.eval.mc_samples);
            take(j.at("eval"), "seed", c.eval.seed);
            take(j.at("eval"), "d_max", c.eval.d_max);
        }
        take(j, "seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad experiment config: ") + e.what());
    }
    return c;
}

BenchRow run_experiment(const ExperimentConfig& cfg) {
    BenchRow row;
    row.d = cfg.generator.d;
    row.eps = cfg.corruption.eps;
    row.strategy = std::string(name(cfg.corruption.strategy));
    row.seed = cfg.seed;
    try {
        GeneratorSpec gen = cfg.generator;
        gen.seed = derive_seed(cfg.seed, 1);
        const BayesNet net = generate_net(gen);
        const std::size_t m = net.table_size();
        if (cfg.n > 0) {
            row.n = cfg.n;
        } else {
            if (!(cfg.corruption.eps > 0.0)) throw DomainError("N must be given when eps = 0");
            row.n = static_cast<std::size_t>(
                std::ceil(cfg.n_factor * static_cast<double>(m) / (cfg.corruption.eps * cfg.corruption.eps)));
        }

        SampleSet corrupted;
        {
            const SampleSet clean = sample(net, row.n, derive_seed(cfg.seed, 2));
            CorruptionSpec cs = cfg.corruption;
            cs.seed = derive_seed(cfg.seed, 3);
            corrupted = std::move(corrupt(clean, net, cs).corrupted);
        }
        const auto pi_p = config_probabilities_auto(net, derive_seed(cfg.seed, 5), cfg.eval.mc_samples);

        LearnConfig lc = cfg.learn;
        lc.seed = derive_seed(cfg.seed, 4);
        GroundTruth truth{&net, pi_p.pi};
        const LearnResult lr = learn(corrupted, net.structure(), lc, &truth);
        row.learn_ms = lr.trace.total_ms;
        row.nonconverged = lr.trace.nonconverged;
        row.iterations = lr.trace.steps.size();
        row.residual_start = lr.trace.residual0;
        for (const auto& s : lr.trace.steps) {
            row.oracle_ms += s.oracle_ms;
            if (s.residual) row.residual_path.push_back(*s.residual);
        }

        const BayesNet base = empirical_net(corrupted, net.structure());
        corrupted = SampleSet();

        EvalOptions eo = cfg.eval;
        eo.seed = derive_seed(cfg.seed, 6);
        const Metrics mr = evaluate(net, lr.net, eo);
        const Metrics mb = evaluate(net, base, eo);
        row.tv = mr.tv();
        row.tv_is_exact = mr.tv_exact.has_value();
        row.tv_bound = mr.tv_bound;
        row.residual = mr.residual;
        row.baseline_tv = mb.tv();
        row.baseline_residual = mb.residual;
    } catch (const std::exception& e) {
        row.error = e.what();
        row.tv = row.tv_bound = row.residual = row.baseline_tv = NAN;
    }
    return row;
}

nlohmann::json to_json(const BenchGrid& g) {
    nlohmann::json strategies = nlohmann::json::array();
    for (auto s : g.strategies) strategies.push_back(std::string(name(s)));
    return {{"family", std::string(name(g.family))},
            {"d", g.d},
            {"eps", g.eps},
            {"strategies", strategies},
            {"seeds", g.seeds},
            {"max_parents", g.max_parents},
            {"c", g.c},
            {"N", g.n},
            {"n_factor", g.n_factor},
            {"learn", to_json(g.learn)},
            {"eval", {{"mc_samples", g.eval.mc_samples}, {"seed", g.eval.seed}, {"d_max", g.eval.d_max}}}};
}

BenchGrid bench_grid_from_json(const nlohmann::json& j) {
    BenchGrid g;
    try {
        if (j.contains("family")) g.family = parse_family(j.at("family").get<std::string>());
        take(j, "d", g.d);
        take(j, "eps", g.eps);
        if (j.contains("strategies")) {
            g.strategies.clear();
            for (const auto& s : j.at("strategies")) g.strategies.push_back(parse_strategy(s.get<std::string>()));
        }
        take(j, "seeds", g.seeds);
        take(j, "max_parents", g.max_parents);
        take(j, "c", g.c);
        take(j, "N", g.n);
        take(j, "n_factor", g.n_factor);
        if (j.contains("learn")) g.learn = learn_config_from_json(j.at("learn"));
        if (j.contains("eval")) {
            take(j.at("eval"), "mc_samples", g.eval.mc_samples);
            take(j.at("eval"), "seed", g.eval.seed);
            take(j.at("eval"), "d_max", g.eval.d_max);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad bench grid: ") + e.what());
    }
    return g;
}

ExperimentConfig cell_config(const BenchGrid& g, std::size_t d, double eps, Strategy strategy, std::uint64_t seed) {
    ExperimentConfig c;
    c.generator = {g.family, d, g.max_parents, g.c, 0};
    c.n = g.n;
    c.n_factor = g.n_factor;
    c.corruption.eps = eps;
    c.corruption.strategy = strategy;
    c.learn = g.learn;
    c.learn.eps = eps;
    c.learn.balance = g.c;
    c.eval = g.eval;
    c.seed = seed;
    return c;
}

std::vector<BenchRow> run_bench(const BenchGrid& g, const std::function<void(const BenchRow&)>& on_row) {
    std::vector<BenchRow> rows;
    for (std::size_t d : g.d)
        for (double eps : g.eps)
            for (Strategy s : g.strategies)
                for (std::uint64_t seed : g.seeds) {
                    rows.push_back(run_experiment(cell_config(g, d, eps, s, seed)));
                    if (on_row) on_row(rows.back());
                }
    return rows;
}

std::string bench_csv_header() {
    return "d,N,eps,strategy,seed,tv_exact,tv_bound,residual,learn_ms,oracle_ms,baseline_tv";
}

std::string to_csv(const BenchRow& r) {
    std::ostringstream os;
    os << r.d << ',' << r.n << ',' << num(r.eps) << ',' << r.strategy << ',' << r.seed << ',' << num(r.tv) << ','
       << num(r.tv_bound) << ',' << num(r.residual) << ',' << num(r.learn_ms) << ',' << num(r.oracle_ms) << ','
       << num(r.baseline_tv);
    return os.str();
}

namespace {

// Rows of f(X, p) restricted to a keep-mask, with the moment maps the audit needs.
double norm2(const std::vector<double>& v) {
    double a = 0.0;
    for (double x : v) a += x * x;
    return std::sqrt(a);
}

class MaskedMoments {
public:
    MaskedMoments(const ExpandedBatch& f, const std::vector<double>& sigma, const std::vector<std::uint8_t>& keep)
        : f_(f), sigma_(sigma), keep_(keep) {
        for (auto k : keep) kept_ += k;
    }

    std::vector<double> mean() const {
        std::vector<double> mu(f_.dim(), 0.0), scratch;
        for (std::size_t i = 0; i < f_.rows(); ++i) {
            if (!keep_[i]) continue;
            SparseRow r = f_.row(i, scratch);
            for (std::size_t e = 0; e < r.idx.size(); ++e) mu[r.idx[e]] += r.val[e];
        }
        for (auto& v : mu) v /= static_cast<double>(kept_);
        return mu;
    }

    // (mean_T f f^T - Sigma) v
    void apply(const std::vector<double>& v, std::vector<double>& out) const {
        std::fill(out.begin(), out.end(), 0.0);
        std::vector<double> scratch;
        for (std::size_t i = 0; i < f_.rows(); ++i) {
            if (!keep_[i]) continue;
            SparseRow r = f_.row(i, scratch);
            double pr = 0.0;
            for (std::size_t e = 0; e < r.idx.size(); ++e) pr += r.val[e] * v[r.idx[e]];
            for (std::size_t e = 0; e < r.idx.size(); ++e) out[r.idx[e]] += pr * r.val[e];
        }
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = out[k] / static_cast<double>(kept_) - sigma_[k] * v[k];
    }

    // Largest |v^T B v| met along a power iteration: a lower bound on ||B||.
    double spectral(std::size_t iterations, std::uint64_t seed, std::vector<double>* top = nullptr,
                    const std::vector<double>* start = nullptr) const {
        const std::size_t m = f_.dim();
        Rng rng(seed);
        std::vector<double> v(m), bv(m);
        double nrm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            nrm += x * x;
        }
        for (auto& x : v) x /= std::sqrt(nrm);
        if (start && norm2(*start) > 0.0) v = *start;
        double best = 0.0;
        for (std::size_t it = 0; it < std::max<std::size_t>(iterations, 1); ++it) {
            apply(v, bv);
            double ray = 0.0, nb = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                ray += v[k] * bv[k];
                nb += bv[k] * bv[k];
            }
            if (std::abs(ray) > best) {
                best = std::abs(ray);
                if (top) *top = v;
            }
            if (nb == 0.0) break;
            nb = std::sqrt(nb);
            for (std::size_t k = 0; k < m; ++k) v[k] = bv[k] / nb;
        }
        return best;
    }

private:
    const ExpandedBatch& f_;
    const std::vector<double>& sigma_;
    const std::vector<std::uint8_t>& keep_;
    std::size_t kept_ = 0;
};

// Keep-mask that drops the `count` rows with the largest key.
std::vector<std::uint8_t> drop_top(const std::vector<double>& key, std::size_t count) {
    std::vector<std::size_t> order(key.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    std::vector<std::uint8_t> keep(key.size(), 1);
    for (std::size_t i = 0; i < count; ++i) keep[order[i]] = 0;
    return keep;
}

} // namespace

AuditReport audit_conditions(const SampleSet& clean, const BayesNet& net, double eps, const AuditOptions& opt) {
    if (!(eps > 0.0 && eps < 0.5)) throw DomainError("audit eps must lie in (0, 1/2)");
    if (clean.dim() != net.nodes() || clean.table_size() != net.table_size())
        throw StructureError("samples do not match the network");
    const std::size_t n = clean.size(), m = net.table_size(), d = clean.dim();
    if (n == 0) throw DomainError("audit needs samples");

    AuditReport rep;
    rep.eps = eps;
    rep.n = n;
    rep.removed = std::min(n - 1, static_cast<std::size_t>(std::floor(2.0 * eps * static_cast<double>(n))));
    rep.delta1 = eps * std::sqrt(std::log(1.0 / eps));
    rep.delta2 = eps * std::log(1.0 / eps);
    const std::size_t keep_n = n - rep.removed;
    const double kn = static_cast<double>(keep_n);

    const auto pi = config_probabilities_auto(net, derive_seed(opt.seed, 1)).pi;
    const auto p = net.cpt();

    std::vector<std::uint64_t> cnt(m, 0), suc(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = clean.row(i);
        const auto cfg = clean.configs(i);
        for (std::size_t j = 0; j < d; ++j) {
            ++cnt[cfg[j]];
            suc[cfg[j]] += row[j];
        }
    }

    // (a)
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        if (cnt[k] == 0) continue;
        const double diff = p[k] - static_cast<double>(suc[k]) / static_cast<double>(cnt[k]);
        acc += pi[k] * diff * diff;
    }
    rep.estimation = std::sqrt(acc);
    rep.estimation_target = eps;

    // (b) closed form for the per-coordinate extremes.
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t nk = cnt[k];
        const std::size_t up = nk - std::min(nk, rep.removed - std::min(rep.removed, n - nk));
        const std::size_t down = nk - std::min(nk, rep.removed);
        const double dev = std::max(std::abs(static_cast<double>(up) / kn - pi[k]),
                                    std::abs(static_cast<double>(down) / kn - pi[k]));
        rep.config_probability.greedy = std::max(rep.config_probability.greedy, dev);
    }
    rep.config_probability.target = eps;

    // (c)
    std::vector<double> sigma(m);
    for (std::size_t k = 0; k < m; ++k) sigma[k] = pi[k] * p[k] * (1.0 - p[k]);
    const ExpandedBatch f(clean, p, {});
    const std::vector<std::uint8_t> all(n, 1);
    std::vector<double> v(m, 0.0);
    MaskedMoments(f, sigma, all).spectral(opt.power_iterations, derive_seed(opt.seed, 2), &v);
    const std::vector<double> mu_full = MaskedMoments(f, sigma, all).mean();
    const double mu_norm = norm2(mu_full);

    std::vector<double> proj(n), along_mean(n), scratch;
    for (std::size_t i = 0; i < n; ++i) {
        SparseRow r = f.row(i, scratch);
        double a = 0.0, b = 0.0;
        for (std::size_t e = 0; e < r.idx.size(); ++e) {
            a += r.val[e] * v[r.idx[e]];
            if (mu_norm > 0.0) b += r.val[e] * mu_full[r.idx[e]] / mu_norm;
        }
        proj[i] = a;
        along_mean[i] = b;
    }
    std::vector<double> neg(n), absp(n), nabs(n), neg_mean(n);
    for (std::size_t i = 0; i < n; ++i) {
        neg[i] = -proj[i];
        absp[i] = std::abs(proj[i]);
        nabs[i] = -absp[i];
        neg_mean[i] = -along_mean[i];
    }
    for (const auto* key : {&proj, &neg, &neg_mean}) {
        const auto keep = drop_top(*key, rep.removed);
        rep.first_moment.greedy = std::max(rep.first_moment.greedy, norm2(MaskedMoments(f, sigma, keep).mean()));
    }
    for (const auto* key : {&absp, &nabs}) {
        const auto keep = drop_top(*key, rep.removed);
        rep.second_moment.greedy = std::max(
            rep.second_moment.greedy, MaskedMoments(f, sigma, keep).spectral(opt.power_iterations, derive_seed(opt.seed, 3)));
    }
    rep.first_moment.target = rep.delta1;
    rep.second_moment.target = rep.delta2;

    // Random subsets.
    Rng rng(derive_seed(opt.seed, 4));
    rep.random_subsets = opt.random_subsets;
    for (std::size_t s = 0; s < opt.random_subsets; ++s) {
        std::vector<std::uint8_t> keep(n, 1);
        for (std::size_t i : random_subset(n, rep.removed, rng)) keep[i] = 0;
        std::vector<std::uint64_t> ct(m, 0);
        for (std::size_t i = 0; i < n; ++i)
            if (keep[i])
                for (auto k : clean.configs(i)) ++ct[k];
        double dev_b = 0.0;
        for (std::size_t k = 0; k < m; ++k) dev_b = std::max(dev_b, std::abs(static_cast<double>(ct[k]) / kn - pi[k]));
        const MaskedMoments mm(f, sigma, keep);
        const double dev_m = norm2(mm.mean());
        const double dev_c = mm.spectral(opt.subset_power_iterations, derive_seed(opt.seed, 5, s), nullptr, &v);
        rep.config_probability.random = std::max(rep.config_probability.random, dev_b);
        rep.first_moment.random = std::max(rep.first_moment.random, dev_m);
        rep.second_moment.random = std::max(rep.second_moment.random, dev_c);
        if (rep.config_probability.greedy >= dev_b && rep.first_moment.greedy >= dev_m &&
            rep.second_moment.greedy >= dev_c)
            ++rep.greedy_wins;
    }

    rep.estimation_flagged = rep.estimation > opt.flag_factor * rep.estimation_target;
    for (AuditEntry* e : {&rep.config_probability, &rep.first_moment, &rep.second_moment})
        e->flagged = e->worst() > opt.flag_factor * e->target;
    rep.any_flagged = rep.estimation_flagged || rep.config_probability.flagged || rep.first_moment.flagged ||
                      rep.second_moment.flagged;
    return rep;
}

nlohmann::json to_json(const AuditReport& r) {
    auto entry = [](const AuditEntry& e) {
        return nlohmann::json{{"greedy", e.greedy}, {"random", e.random}, {"worst", e.worst()},
                              {"target", e.target}, {"flagged", e.flagged}};
    };
    return {{"eps", r.eps},
            {"N", r.n},
            {"removed", r.removed},
            {"delta1", r.delta1},
            {"delta2", r.delta2},
            {"estimation", {{"value", r.estimation}, {"target", r.estimation_target}, {"flagged", r.estimation_flagged}}},
            {"config_probability", entry(r.config_probability)},
            {"first_moment", entry(r.first_moment)},
            {"second_moment", entry(r.second_moment)},
            {"random_subsets", r.random_subsets},
            {"greedy_wins", r.greedy_wins},
            {"any_flagged", r.any_flagged},
            {"lower_bounds", true}};
}

} // namespace rbn
