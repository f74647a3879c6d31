#include "rbn/learner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "rbn/errors.hpp"
#include "rbn/rng.hpp"

namespace rbn {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

double rho_target(const LearnConfig& c) {
    if (c.eps <= 0.0) return 0.0;
    return c.eps * std::sqrt(std::log(1.0 / c.eps)) / std::sqrt(c.alpha * c.balance);
}

std::size_t planned_iterations(const LearnConfig& c, double rho0, bool& capped) {
    capped = false;
    const double target = rho_target(c);
    if (c.eps <= 0.0 || rho0 <= target) return 0;
    const double t = std::ceil(std::log(rho0 / target) / std::log(1.0 / c.contraction));
    if (t > static_cast<double>(c.t_max)) {
        capped = true;
        return c.t_max;
    }
    return static_cast<std::size_t>(t);
}

double beta_at(const LearnConfig& c, double rho) { return c.beta_scale * c.eps * rho / c.alpha; }

double gamma_at(const LearnConfig& c, double rho) {
    return c.gamma_scale * (rho * rho / c.alpha + rho / std::sqrt(c.alpha));
}

nlohmann::json filter_to_json(const FilterOptions& f) {
    return {{"mmwu_factor", f.mmwu_factor},
            {"epoch_factor", f.epoch_factor},
            {"stop_factor", f.stop_factor},
            {"power_iterations", f.power_iterations},
            {"power_tol", f.power_tol},
            {"power_scale", f.power_scale},
            {"sketch",
             {{"rows_factor", f.sketch.rows_factor},
              {"degree_factor", f.sketch.degree_factor},
              {"rows", f.sketch.rows},
              {"degree", f.sketch.degree},
              {"block", f.sketch.block}}}};
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

} // namespace

void validate(const LearnConfig& c) {
    if (!(c.eps_max > 0.0 && c.eps_max < 1.0 / 3.0)) throw DomainError("eps_max must lie in (0, 1/3)");
    if (!(c.eps >= 0.0 && c.eps < c.eps_max))
        throw DomainError("eps must lie in [0, " + std::to_string(c.eps_max) + ")");
    if (!(c.balance > 0.0 && c.balance < 1.0)) throw DomainError("c must lie in (0, 1)");
    if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
    if (!(c.contraction > 0.0 && c.contraction < 1.0)) throw DomainError("contraction c1 must lie in (0, 1)");
    if (!(c.rho0_scale > 0.0) || !(c.beta_scale > 0.0) || !(c.gamma_scale > 0.0))
        throw DomainError("schedule scales must be positive");
    if (c.delta > 0.0 && !(c.delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
}

nlohmann::json to_json(const LearnConfig& c) {
    return {{"eps", c.eps},
            {"c", c.balance},
            {"alpha", c.alpha},
            {"T_max", c.t_max},
            {"K0", c.rho0_scale},
            {"c1", c.contraction},
            {"K_beta", c.beta_scale},
            {"K_gamma", c.gamma_scale},
            {"delta", c.delta},
            {"seed", c.seed},
            {"stop_tol", c.stop_tol},
            {"eps_max", c.eps_max},
            {"trust_balance", c.trust_balance},
            {"filter", filter_to_json(c.filter)}};
}

LearnConfig learn_config_from_json(const nlohmann::json& j) {
    LearnConfig c;
    try {
        take(j, "eps", c.eps);
        take(j, "c", c.balance);
        take(j, "alpha", c.alpha);
        take(j, "T_max", c.t_max);
        take(j, "K0", c.rho0_scale);
        take(j, "c1", c.contraction);
        take(j, "K_beta", c.beta_scale);
        take(j, "K_gamma", c.gamma_scale);
        take(j, "delta", c.delta);
        take(j, "seed", c.seed);
        take(j, "stop_tol", c.stop_tol);
        take(j, "eps_max", c.eps_max);
        take(j, "trust_balance", c.trust_balance);
        if (j.contains("filter")) {
            const auto& f = j.at("filter");
            take(f, "mmwu_factor", c.filter.mmwu_factor);
            take(f, "epoch_factor", c.filter.epoch_factor);
            take(f, "stop_factor", c.filter.stop_factor);
            take(f, "power_iterations", c.filter.power_iterations);
            take(f, "power_tol", c.filter.power_tol);
            take(f, "power_scale", c.filter.power_scale);
            if (f.contains("sketch")) {
                const auto& s = f.at("sketch");
                take(s, "rows_factor", c.filter.sketch.rows_factor);
                take(s, "degree_factor", c.filter.sketch.degree_factor);
                take(s, "rows", c.filter.sketch.rows);
                take(s, "degree", c.filter.sketch.degree);
                take(s, "block", c.filter.sketch.block);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad learn config: ") + e.what());
    }
    return c;
}

Initialization initialize(const SampleSet& samples, const LearnConfig& config) {
    validate(config);
    Initialization init;
    init.stats = empirical_stats(samples, config.balance);
    init.q0 = init.stats.q_clamped;
    const double d = static_cast<double>(samples.dim());
    init.rho0 = config.rho0_scale * config.eps * std::sqrt(d) / std::sqrt(config.alpha * config.balance);
    return init;
}

StepResult refine_step(const SampleSet& samples, std::span<const double> q_t, const EmpiricalStats& stats,
                       double rho_t, const LearnConfig& config, std::size_t iteration, double delta) {
    const auto t0 = Clock::now();
    const std::size_t m = samples.table_size();
    if (q_t.size() != m) throw ShapeError("q has the wrong length");
    if (!(rho_t > 0.0) || !std::isfinite(rho_t)) throw ScheduleError("rho must be positive and finite");

    StepResult out;
    StepDiagnostics& dg = out.diag;
    dg.iteration = iteration;
    dg.rho = rho_t;
    dg.beta = beta_at(config, rho_t);
    dg.gamma = gamma_at(config, rho_t);
    const double smax = *std::max_element(stats.s.begin(), stats.s.end());
    dg.radius = std::sqrt(static_cast<double>(samples.dim())) * smax * 2.0;

    ExpandedBatch batch(samples, q_t, stats.s);
    FilterOptions fo = config.filter;
    fo.sketch.delta = delta;
    const FilterResult fr =
        robust_mean(batch, config.eps, dg.beta, dg.gamma, dg.radius, derive_seed(config.seed, 0x1ea7, iteration), fo);
    out.nu = fr.mean;

    double nn = 0.0;
    for (double v : out.nu) nn += v * v;
    dg.nu_norm = std::sqrt(nn);
    dg.filter_converged = fr.trace.converged;
    dg.filter_excess = fr.trace.final_excess;
    dg.gamma_target = fr.trace.gamma_target;
    dg.oracle_calls = fr.trace.oracle_calls;
    dg.oracle_ms = fr.trace.oracle_ms;
    for (const auto& r : fr.trace.rounds) dg.filtered_rounds += r.filtered ? 1 : 0;
    dg.filter = to_json(fr.trace);

    const double lo = config.trust_balance ? config.balance / 2.0 : 0.0;
    const double hi = config.trust_balance ? 1.0 - config.balance / 2.0 : 1.0;
    out.q_next.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double v = q_t[k] + out.nu[k] / (stats.s[k] * stats.pi_s[k]);
        const double cl = std::clamp(v, lo, hi);
        if (cl != v) ++dg.clamped;
        out.q_next[k] = cl;
    }
    out.rho_next = config.contraction * rho_t;
    if (!(out.rho_next > 0.0) || !std::isnormal(out.rho_next)) throw ScheduleError("rho underflowed");
    dg.step_ms = elapsed_ms(t0);
    return out;
}

LearnResult learn(const SampleSet& samples, const BayesNetStructure& structure, const LearnConfig& config,
                  const GroundTruth* truth, const std::function<void(const StepDiagnostics&)>& on_step) {
    const auto t0 = Clock::now();
    if (samples.dim() != structure.nodes() || samples.table_size() != structure.table_size())
        throw StructureError("samples do not conform to the structure");
    Initialization init = initialize(samples, config);

    LearnTrace tr;
    tr.rho0 = init.rho0;
    tr.rho_target = rho_target(config);
    tr.planned_iterations = planned_iterations(config, init.rho0, tr.capped);
    const double n = static_cast<double>(samples.size());
    tr.delta = config.delta > 0.0
                   ? config.delta
                   : 1.0 / (10.0 * static_cast<double>(std::max<std::size_t>(tr.planned_iterations, 1)) * n);
    tr.stop_tol = config.stop_tol >= 0.0
                      ? config.stop_tol
                      : 1e-3 * std::sqrt(static_cast<double>(samples.table_size())) * config.eps;
    if (truth) tr.residual0 = residual(*truth->net, init.q0, init.stats, truth->pi_p);

    // Excess that a stable set may show at the end of the schedule; a small nu only
    // certifies convergence once the filter also sees no more than this.
    double final_xi = 0.0;
    if (config.eps > 0.0) {
        const double rt = tr.rho_target;
        final_xi = stable_to_good({config.eps, beta_at(config, rt), gamma_at(config, rt)}).xi();
    }

    // every excess test below uses a threshold >= final_xi
    LearnConfig run = config;
    run.filter.power_scale = std::max(run.filter.power_scale, 1.0 + final_xi);

    std::vector<double> q = init.q0;
    double rho = init.rho0;
    for (std::size_t t = 0; t < tr.planned_iterations; ++t) {
        StepResult st = refine_step(samples, q, init.stats, rho, run, t, tr.delta);
        q = std::move(st.q_next);
        if (truth) st.diag.residual = residual(*truth->net, q, init.stats, truth->pi_p);
        if (!st.diag.filter_converged) tr.nonconverged = true;
        const bool small = st.diag.nu_norm <= tr.stop_tol && st.diag.filter_excess <= final_xi;
        if (on_step) on_step(st.diag);
        tr.steps.push_back(std::move(st.diag));
        if (small) {
            tr.stopped_early = t + 1 < tr.planned_iterations;
            break;
        }
        rho = st.rho_next;
    }
    tr.total_ms = elapsed_ms(t0);
    return {BayesNet(structure, std::move(q)), std::move(tr)};
}

double residual(const BayesNet& truth, std::span<const double> q, const EmpiricalStats& stats,
                std::span<const double> pi_p) {
    const auto p = truth.cpt();
    if (q.size() != p.size() || pi_p.size() != p.size() || stats.s.size() != p.size())
        throw ShapeError("residual: length mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double v = pi_p[k] * (p[k] - q[k]) * stats.s[k];
        acc += v * v;
    }
    return std::sqrt(acc);
}

nlohmann::json to_json(const StepDiagnostics& s, bool include_filter) {
    nlohmann::json j{{"iteration", s.iteration},
                     {"rho", s.rho},
                     {"beta", s.beta},
                     {"gamma", s.gamma},
                     {"radius", s.radius},
                     {"nu_norm", s.nu_norm},
                     {"clamped", s.clamped},
                     {"filter_converged", s.filter_converged},
                     {"filter_excess", s.filter_excess},
                     {"gamma_target", s.gamma_target},
                     {"oracle_calls", s.oracle_calls},
                     {"filtered_rounds", s.filtered_rounds},
                     {"oracle_ms", s.oracle_ms},
                     {"step_ms", s.step_ms}};
    j["residual"] = s.residual ? nlohmann::json(*s.residual) : nlohmann::json(nullptr);
    if (include_filter) j["filter"] = s.filter;
    return j;
}

nlohmann::json trace_summary(const LearnTrace& t) {
    return {{"rho0", t.rho0},
            {"rho_target", t.rho_target},
            {"planned_iterations", t.planned_iterations},
            {"iterations", t.steps.size()},
            {"delta", t.delta},
            {"stop_tol", t.stop_tol},
            {"capped", t.capped},
            {"stopped_early", t.stopped_early},
            {"nonconverged", t.nonconverged},
            {"residual0", t.residual0 ? nlohmann::json(*t.residual0) : nlohmann::json(nullptr)},
            {"total_ms", t.total_ms}};
}

std::string trace_to_jsonl(const LearnTrace& t, bool include_filter) {
    std::ostringstream os;
    for (const auto& s : t.steps) os << to_json(s, include_filter).dump() << '\n';
    return os.str();
}

} // namespace rbn
