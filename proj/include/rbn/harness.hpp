#ifndef RBN_HARNESS_HPP
#define RBN_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rbn/bn.hpp"
#include "rbn/corruption.hpp"
#include "rbn/learner.hpp"

namespace rbn {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class Family { empty, chain, random_dag };

std::string_view name(Family f);
Family parse_family(std::string_view text);

struct GeneratorSpec {
    Family family = Family::empty;
    std::size_t d = 16;
    std::size_t max_parents = 2;  // random_dag only
    double c = 0.3;               // cpt entries uniform in [c, 1 - c]
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const nlohmann::json& doc);

BayesNetStructure generate_structure(const GeneratorSpec& spec);
BayesNet generate_net(const GeneratorSpec& spec);

// Plain empirical conditional frequencies; configurations never seen get 1/2.
BayesNet empirical_net(const SampleSet& samples, const BayesNetStructure& structure);

struct EvalOptions {
    std::size_t mc_samples = kDefaultMonteCarloSamples;
    std::uint64_t seed = 0;
    std::size_t d_max = kExactMaxNodes;
};

struct Metrics {
    std::optional<double> tv_exact;  // d <= d_max
    std::optional<double> tv_mc;     // d > d_max
    double tv_bound = 0.0;
    double residual = 0.0;  // ||pi^P o (p - q) o s^P||, s^P = (pi^P p (1 - p))^{-1/2}
    double linf_cpt = 0.0;
    std::string pi_mode;

    double tv() const { return tv_exact ? *tv_exact : tv_mc.value_or(0.0); }
};

// Throws StructureError when the structures differ.
Metrics evaluate(const BayesNet& truth, const BayesNet& learned, const EvalOptions& opt = {});
double population_residual(const BayesNet& truth, std::span<const double> q, std::span<const double> pi_p);
nlohmann::json to_json(const Metrics& m);

struct ExperimentConfig {
    GeneratorSpec generator;
    std::size_t n = 0;        // 0: ceil(n_factor * m / eps^2)
    double n_factor = 10.0;
    CorruptionSpec corruption;
    LearnConfig learn;
    EvalOptions eval;
    std::uint64_t seed = 0;   // all component seeds derive from this one
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc);

struct BenchRow {
    std::size_t d = 0;
    std::size_t n = 0;
    double eps = 0.0;
    std::string strategy;
    std::uint64_t seed = 0;
    double tv = 0.0;
    bool tv_is_exact = false;
    double tv_bound = 0.0;
    double residual = 0.0;
    double learn_ms = 0.0;
    double oracle_ms = 0.0;
    double baseline_tv = 0.0;
    double baseline_residual = 0.0;
    bool nonconverged = false;
    std::size_t iterations = 0;
    std::vector<double> residual_path;  // evaluation residual after each refinement, learner scaling
    std::optional<double> residual_start;
    std::string error;
};

// generate -> sample -> corrupt -> learn -> evaluate, with the empirical baseline.
BenchRow run_experiment(const ExperimentConfig& cfg);

struct BenchGrid {
    Family family = Family::empty;
    std::vector<std::size_t> d{16, 64, 256};
    std::vector<double> eps{0.05};
    std::vector<Strategy> strategies{Strategy::mean_shift};
    std::vector<std::uint64_t> seeds{0};
    std::size_t max_parents = 2;
    double c = 0.3;
    std::size_t n = 0;
    double n_factor = 10.0;
    LearnConfig learn;
    EvalOptions eval;
};

nlohmann::json to_json(const BenchGrid& grid);
BenchGrid bench_grid_from_json(const nlohmann::json& doc);
ExperimentConfig cell_config(const BenchGrid& grid, std::size_t d, double eps, Strategy strategy,
                             std::uint64_t seed);

std::vector<BenchRow> run_bench(const BenchGrid& grid, const std::function<void(const BenchRow&)>& on_row = {});

// d,N,eps,strategy,seed,tv_exact,tv_bound,residual,learn_ms,oracle_ms,baseline_tv
std::string bench_csv_header();
std::string to_csv(const BenchRow& row);

struct AuditOptions {
    std::size_t random_subsets = 100;
    std::size_t power_iterations = 30;
    std::size_t subset_power_iterations = 5;  // random subsets start from the full-sample top direction
    std::uint64_t seed = 0;
    double flag_factor = 1.0;  // flag when deviation > flag_factor * target
};

struct AuditEntry {
    double greedy = 0.0;
    double random = 0.0;  // worst over the random subsets
    double target = 0.0;
    bool flagged = false;

    double worst() const { return greedy > random ? greedy : random; }
};

struct AuditReport {
    double eps = 0.0;
    std::size_t n = 0;
    std::size_t removed = 0;  // floor(2 eps N)
    double delta1 = 0.0;
    double delta2 = 0.0;
    double estimation = 0.0;  // ||sqrt(pi^P) o (p - p^G)||
    double estimation_target = 0.0;
    bool estimation_flagged = false;
    AuditEntry config_probability;  // ||pi^T - pi^P||_inf
    AuditEntry first_moment;        // ||mean_T f(X, p)||
    AuditEntry second_moment;       // ||mean_T f f^T - diag(pi p (1 - p))||
    std::size_t random_subsets = 0;
    std::size_t greedy_wins = 0;  // random subsets that the greedy search beat on every entry
    bool any_flagged = false;
};

/* Search-based audit of the deterministic conditions on the clean set.
 * Every subset deviation is a lower bound on the worst case over all
 * subsets of size N - floor(2 eps N). */
AuditReport audit_conditions(const SampleSet& clean, const BayesNet& net, double eps, const AuditOptions& opt = {});
nlohmann::json to_json(const AuditReport& report);

} // namespace rbn

#endif
