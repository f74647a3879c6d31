// rbn: generate, corrupt, learn, evaluate, bench and audit from the command line.
//
// Every subcommand writes <out>/<cmd>.config.json holding its full effective
// configuration; passing that file back through --config reproduces the run.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rbn/bn.hpp"
#include "rbn/bn_io.hpp"
#include "rbn/corruption.hpp"
#include "rbn/errors.hpp"
#include "rbn/harness.hpp"
#include "rbn/learner.hpp"
#include "rbn/rng.hpp"
#include "rbn/simd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitNonConverged = 1;
constexpr int kExitUsage = 2;

// Explicit flags are applied over the --config file, which is applied over defaults.
struct Overrides {
    std::vector<std::pair<CLI::Option*, std::function<void(json&)>>> items;

    template <class T>
    void add(CLI::Option* opt, const T& value, std::string pointer) {
        items.emplace_back(opt, [&value, pointer](json& cfg) { cfg[json::json_pointer(pointer)] = value; });
    }

    void apply(json& cfg) const {
        for (const auto& [opt, fn] : items)
            if (opt->count() > 0) fn(cfg);
    }
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    json doc = rbn::read_json(path);
    if (doc.contains("config") && doc.contains("command")) return doc.at("config");
    return doc;
}

json meta(const std::string& cmd, const json& cfg) {
    return {{"tool", "rbn"},
            {"version", std::string(rbn::kToolVersion)},
            {"rng", std::string(rbn::Rng::algorithm)},
            {"command", cmd},
            {"config", cfg}};
}

void write_config(const fs::path& out, const std::string& cmd, const json& cfg) {
    rbn::write_json(out / (cmd + ".config.json"), meta(cmd, cfg));
}

struct Common {
    std::string out = ".";
    std::string config;
    std::string trace;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
    sub->add_option("--config", c.config, "JSON config; explicit flags take precedence");
}

// ---- generate ----

struct GenerateArgs {
    Common common;
    std::string family = "empty";
    std::size_t d = 16;
    double c = 0.3;
    std::size_t n = 100000;
    std::uint64_t seed = 0;
    std::size_t max_parents = 2;
    bool gzip = false;
    Overrides ov;
};

int run_generate(GenerateArgs& a) {
    json cfg = {{"family", "empty"}, {"d", 16}, {"c", 0.3}, {"N", 100000}, {"seed", 0}, {"max_parents", 2}, {"gzip", false}};
    cfg.merge_patch(load_config(a.common.config));
    a.ov.apply(cfg);

    rbn::GeneratorSpec spec = rbn::generator_spec_from_json(cfg);
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    spec.seed = rbn::derive_seed(seed, 1);
    const rbn::BayesNet net = rbn::generate_net(spec);
    const auto n = cfg.at("N").get<std::size_t>();
    const rbn::SampleSet samples = rbn::sample(net, n, rbn::derive_seed(seed, 2));
    const auto pi = rbn::config_probabilities_auto(net, rbn::derive_seed(seed, 3));

    const fs::path out(a.common.out);
    rbn::write_net(out / "net.json", net, meta("generate", cfg));
    const std::string sname = cfg.at("gzip").get<bool>() ? "samples.txt.gz" : "samples.txt";
    rbn::write_samples(out / sname, samples);
    write_config(out, "generate", cfg);

    std::cout << json{{"m", net.table_size()},
                      {"alpha", pi.alpha},
                      {"alpha_mode", pi.mode == rbn::ProbabilityMode::exact ? "exact" : "monte_carlo"},
                      {"c", net.balance()},
                      {"net", (out / "net.json").string()},
                      {"samples", (out / sname).string()}}
                     .dump()
              << '\n';
    return 0;
}

// ---- corrupt ----

struct CorruptArgs {
    Common common;
    std::string net, samples, strategy = "mean_shift";
    double eps = 0.0;
    std::uint64_t seed = 0;
    Overrides ov;
};

int run_corrupt(CorruptArgs& a) {
    json cfg = {{"net", ""}, {"samples", ""}, {"corruption", rbn::to_json(rbn::CorruptionSpec{})}};
    cfg["corruption"]["strategy"] = "mean_shift";
    cfg.merge_patch(load_config(a.common.config));
    a.ov.apply(cfg);

    const rbn::BayesNet net = rbn::read_net(cfg.at("net").get<std::string>());
    const rbn::SampleSet clean = rbn::read_samples(cfg.at("samples").get<std::string>(), net.structure());
    const rbn::CorruptionSpec spec = rbn::corruption_spec_from_json(cfg.at("corruption"));
    const rbn::CorruptionResult res = rbn::corrupt(clean, net, spec);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';

    const fs::path out(a.common.out);
    rbn::write_samples(out / "corrupted.txt", res.corrupted);
    rbn::write_mask(out / "mask.txt", res.planted);
    write_config(out, "corrupt", cfg);
    std::cout << json{{"replaced", res.replaced}, {"N", clean.size()}, {"samples", (out / "corrupted.txt").string()},
                      {"mask", (out / "mask.txt").string()}}
                     .dump()
              << '\n';
    return 0;
}

// ---- learn ----

struct LearnArgs {
    Common common;
    std::string net, samples;
    double eps = 0.05, c = 0.3, alpha = 1.0;
    std::uint64_t seed = 0;
    Overrides ov;
};

int run_learn(LearnArgs& a) {
    json cfg = {{"net", ""}, {"samples", ""}, {"learn", rbn::to_json(rbn::LearnConfig{})}};
    cfg.merge_patch(load_config(a.common.config));
    a.ov.apply(cfg);

    const rbn::BayesNet structure_net = rbn::read_net(cfg.at("net").get<std::string>());
    const rbn::SampleSet samples = rbn::read_samples(cfg.at("samples").get<std::string>(), structure_net.structure());
    const rbn::LearnConfig lc = rbn::learn_config_from_json(cfg.at("learn"));
    std::ofstream trace_out;
    if (!a.common.trace.empty()) {
        trace_out.open(a.common.trace, std::ios::binary);
        if (!trace_out) throw rbn::IoError("cannot write " + a.common.trace);
    }
    const rbn::LearnResult res = rbn::learn(samples, structure_net.structure(), lc, nullptr,
                                            [&](const rbn::StepDiagnostics& st) {
                                                if (trace_out) trace_out << rbn::to_json(st).dump() << '\n' << std::flush;
                                            });

    json summary = rbn::trace_summary(res.trace);
    summary.erase("total_ms");
    json m = meta("learn", cfg);
    m["trace"] = summary;

    const fs::path out(a.common.out);
    rbn::write_net(out / "learned.json", res.net, m);
    write_config(out, "learn", cfg);

    json report = rbn::trace_summary(res.trace);
    report["learned"] = (out / "learned.json").string();
    std::cout << report.dump() << '\n';
    if (res.trace.nonconverged) {
        std::cerr << "warning: robust mean filter did not converge in some iteration; output written\n";
        return kExitNonConverged;
    }
    return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
    Common common;
    std::string truth, learned;
    std::uint64_t seed = 0;
    std::size_t mc = rbn::kDefaultMonteCarloSamples;
    Overrides ov;
};

int run_evaluate(EvaluateArgs& a) {
    json cfg = {{"truth", ""}, {"learned", ""}, {"seed", 0}, {"mc_samples", rbn::kDefaultMonteCarloSamples}};
    cfg.merge_patch(load_config(a.common.config));
    a.ov.apply(cfg);

    const rbn::BayesNet truth = rbn::read_net(cfg.at("truth").get<std::string>());
    const rbn::BayesNet learned = rbn::read_net(cfg.at("learned").get<std::string>());
    rbn::EvalOptions eo;
    eo.seed = cfg.at("seed").get<std::uint64_t>();
    eo.mc_samples = cfg.at("mc_samples").get<std::size_t>();
    const rbn::Metrics mt = rbn::evaluate(truth, learned, eo);

    json doc = rbn::to_json(mt);
    doc["meta"] = meta("evaluate", cfg);
    const fs::path out(a.common.out);
    rbn::write_json(out / "metrics.json", doc);
    write_config(out, "evaluate", cfg);
    std::cout << rbn::to_json(mt).dump() << '\n';
    return 0;
}

// ---- bench ----

struct BenchArgs {
    Common common;
    std::string family = "empty";
    std::vector<std::size_t> d;
    std::vector<double> eps;
    std::vector<std::string> strategy;
    std::vector<std::uint64_t> seed;
    std::size_t n = 0;
    double c = 0.3;
    Overrides ov;
};

int run_bench(BenchArgs& a) {
    json cfg = rbn::to_json(rbn::BenchGrid{});
    cfg.merge_patch(load_config(a.common.config));
    a.ov.apply(cfg);
    const rbn::BenchGrid grid = rbn::bench_grid_from_json(cfg);

    const fs::path out(a.common.out);
    fs::create_directories(out);
    write_config(out, "bench", cfg);
    std::ofstream csv(out / "bench.csv", std::ios::binary);
    if (!csv) throw rbn::IoError("cannot write " + (out / "bench.csv").string());
    csv << rbn::bench_csv_header() << '\n';
    bool failed = false, nonconverged = false;
    rbn::run_bench(grid, [&](const rbn::BenchRow& row) {
        csv << rbn::to_csv(row) << '\n';
        csv.flush();
        std::cerr << "bench d=" << row.d << " eps=" << row.eps << " " << row.strategy << " seed=" << row.seed
                  << " tv=" << row.tv << " baseline=" << row.baseline_tv << " learn_ms=" << row.learn_ms
                  << (row.error.empty() ? "" : " error: " + row.error) << '\n';
        failed |= !row.error.empty();
        nonconverged |= row.nonconverged;
    });
    if (failed) return kExitUsage;
    return nonconverged ? kExitNonConverged : 0;
}

// ---- audit ----

struct AuditArgs {
    Common common;
    std::string net, samples;
    double eps = 0.05;
    std::uint64_t seed = 0;
    Overrides ov;
};

int run_audit(AuditArgs& a) {
    json cfg = {{"net", ""}, {"samples", ""}, {"eps", 0.05}, {"seed", 0}, {"random_subsets", 100},
                {"power_iterations", 30}, {"subset_power_iterations", 5}, {"flag_factor", 1.0}};
    cfg.merge_patch(load_config(a.common.config));
    a.ov.apply(cfg);

    const rbn::BayesNet net = rbn::read_net(cfg.at("net").get<std::string>());
    const rbn::SampleSet samples = rbn::read_samples(cfg.at("samples").get<std::string>(), net.structure());
    rbn::AuditOptions ao;
    ao.seed = cfg.at("seed").get<std::uint64_t>();
    ao.random_subsets = cfg.at("random_subsets").get<std::size_t>();
    ao.power_iterations = cfg.at("power_iterations").get<std::size_t>();
    ao.subset_power_iterations = cfg.at("subset_power_iterations").get<std::size_t>();
    ao.flag_factor = cfg.at("flag_factor").get<double>();
    const rbn::AuditReport rep = rbn::audit_conditions(samples, net, cfg.at("eps").get<double>(), ao);

    json doc = rbn::to_json(rep);
    doc["meta"] = meta("audit", cfg);
    const fs::path out(a.common.out);
    rbn::write_json(out / "audit.json", doc);
    write_config(out, "audit", cfg);
    std::cout << rbn::to_json(rep).dump() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust learning of Bayesian networks from corrupted samples"};
    app.require_subcommand(1);
    std::string simd;
    app.add_option("--simd", simd, "Kernel level: scalar or avx2 (default: best available)");

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Generate a network and clean samples");
    add_common(gen, ga.common);
    ga.ov.add(gen->add_option("--family", ga.family, "empty | chain | random_dag"), ga.family, "/family");
    ga.ov.add(gen->add_option("--d", ga.d, "Number of nodes"), ga.d, "/d");
    ga.ov.add(gen->add_option("--c", ga.c, "CPT entries drawn uniformly from [c, 1 - c]"), ga.c, "/c");
    ga.ov.add(gen->add_option("--N", ga.n, "Number of samples"), ga.n, "/N");
    ga.ov.add(gen->add_option("--seed", ga.seed), ga.seed, "/seed");
    ga.ov.add(gen->add_option("--max-parents", ga.max_parents, "random_dag in-degree cap"), ga.max_parents,
              "/max_parents");
    ga.ov.add(gen->add_flag("--gzip", ga.gzip, "Write samples.txt.gz"), ga.gzip, "/gzip");

    CorruptArgs ca;
    auto* cor = app.add_subcommand("corrupt", "Replace floor(eps N) samples adversarially");
    add_common(cor, ca.common);
    ca.ov.add(cor->add_option("--net", ca.net, "Ground-truth net.json"), ca.net, "/net");
    ca.ov.add(cor->add_option("--samples", ca.samples, "Clean samples file"), ca.samples, "/samples");
    ca.ov.add(cor->add_option("--eps", ca.eps), ca.eps, "/corruption/eps");
    ca.ov.add(cor->add_option("--strategy", ca.strategy, "mean_shift | config_starve | random_flip | oblivious_product"),
              ca.strategy, "/corruption/strategy");
    ca.ov.add(cor->add_option("--seed", ca.seed), ca.seed, "/corruption/seed");

    LearnArgs la;
    auto* lrn = app.add_subcommand("learn", "Learn the CPT from corrupted samples");
    add_common(lrn, la.common);
    lrn->add_option("--trace", la.common.trace, "Write the per-iteration trace (JSON lines) here");
    la.ov.add(lrn->add_option("--net,--structure", la.net, "net.json supplying the structure"), la.net, "/net");
    la.ov.add(lrn->add_option("--samples", la.samples, "Samples file"), la.samples, "/samples");
    la.ov.add(lrn->add_option("--eps", la.eps), la.eps, "/learn/eps");
    la.ov.add(lrn->add_option("--c", la.c, "Balance"), la.c, "/learn/c");
    la.ov.add(lrn->add_option("--alpha", la.alpha, "Lower bound on configuration probabilities"), la.alpha,
              "/learn/alpha");
    la.ov.add(lrn->add_option("--seed", la.seed), la.seed, "/learn/seed");

    EvaluateArgs ea;
    auto* ev = app.add_subcommand("evaluate", "Compare a learned network with the truth");
    add_common(ev, ea.common);
    ea.ov.add(ev->add_option("--truth", ea.truth, "Ground-truth net.json"), ea.truth, "/truth");
    ea.ov.add(ev->add_option("--learned", ea.learned, "Learned net.json"), ea.learned, "/learned");
    ea.ov.add(ev->add_option("--seed", ea.seed, "Monte Carlo seed"), ea.seed, "/seed");
    ea.ov.add(ev->add_option("--mc-samples", ea.mc, "Monte Carlo sample count"), ea.mc, "/mc_samples");

    BenchArgs ba;
    auto* bn = app.add_subcommand("bench", "Run a grid of end-to-end experiments and write bench.csv");
    add_common(bn, ba.common);
    ba.ov.add(bn->add_option("--family", ba.family), ba.family, "/family");
    ba.ov.add(bn->add_option("--d", ba.d)->delimiter(','), ba.d, "/d");
    ba.ov.add(bn->add_option("--eps", ba.eps)->delimiter(','), ba.eps, "/eps");
    ba.ov.add(bn->add_option("--strategy", ba.strategy)->delimiter(','), ba.strategy, "/strategies");
    ba.ov.add(bn->add_option("--seed", ba.seed)->delimiter(','), ba.seed, "/seeds");
    ba.ov.add(bn->add_option("--N", ba.n, "Samples per cell; 0 means 10 m / eps^2"), ba.n, "/N");
    ba.ov.add(bn->add_option("--c", ba.c), ba.c, "/c");

    AuditArgs aa;
    auto* au = app.add_subcommand("audit", "Search for violations of the clean-sample conditions");
    add_common(au, aa.common);
    aa.ov.add(au->add_option("--net", aa.net, "Ground-truth net.json"), aa.net, "/net");
    aa.ov.add(au->add_option("--samples", aa.samples, "Clean samples file"), aa.samples, "/samples");
    aa.ov.add(au->add_option("--eps", aa.eps), aa.eps, "/eps");
    aa.ov.add(au->add_option("--seed", aa.seed), aa.seed, "/seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (!simd.empty()) {
            const auto level = simd == "scalar" ? rbn::simd::Level::scalar : rbn::simd::Level::avx2;
            if ((simd != "scalar" && simd != "avx2") || !rbn::simd::available(level))
                throw rbn::DomainError("unsupported --simd level '" + simd + "'");
            rbn::simd::set_active(level);
        }
        if (*gen) return run_generate(ga);
        if (*cor) return run_corrupt(ca);
        if (*lrn) return run_learn(la);
        if (*ev) return run_evaluate(ea);
        if (*bn) return run_bench(ba);
        if (*au) return run_audit(aa);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
