#ifndef RBN_LEARNER_HPP
#define RBN_LEARNER_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rbn/bn.hpp"
#include "rbn/expansion.hpp"
#include "rbn/robust_mean.hpp"

namespace rbn {

struct LearnConfig {
    double eps = 0.05;
    double balance = 0.3;  // c
    double alpha = 1.0;    // lower bound on min_k pi_k
    std::size_t t_max = 40;
    double rho0_scale = 3.0;   // K0
    double contraction = 0.5;  // c1
    double beta_scale = 4.0;   // K_beta
    double gamma_scale = 4.0;  // K_gamma
    double delta = -1.0;       // <= 0: 1 / (10 T N)
    std::uint64_t seed = 0;
    double stop_tol = -1.0;  // < 0: 1e-3 sqrt(m) eps
    double eps_max = 0.1;
    // Clamp updates to [c/2, 1 - c/2]; otherwise to [0, 1].
    bool trust_balance = true;
    FilterOptions filter;
};

// Throws DomainError for out-of-range settings.
void validate(const LearnConfig& config);

nlohmann::json to_json(const LearnConfig& config);
// Missing keys keep their defaults.
LearnConfig learn_config_from_json(const nlohmann::json& doc);

struct Initialization {
    std::vector<double> q0;
    EmpiricalStats stats;
    double rho0 = 0.0;
};

Initialization initialize(const SampleSet& samples, const LearnConfig& config);

// Evaluation-only ground truth for residuals in the trace.
struct GroundTruth {
    const BayesNet* net = nullptr;
    std::vector<double> pi_p;
};

struct StepDiagnostics {
    std::size_t iteration = 0;
    double rho = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double radius = 0.0;
    double nu_norm = 0.0;
    std::size_t clamped = 0;
    bool filter_converged = true;
    double filter_excess = 0.0;
    double gamma_target = 0.0;
    std::size_t oracle_calls = 0;
    std::size_t filtered_rounds = 0;
    double oracle_ms = 0.0;
    double step_ms = 0.0;
    std::optional<double> residual;  // of q_next
    nlohmann::json filter;           // full filter trace
};

struct StepResult {
    std::vector<double> q_next;
    double rho_next = 0.0;
    std::vector<double> nu;
    StepDiagnostics diag;
};

// One refinement: nu = robust mean of {f(X_i, q_t) o s}, q_next = clamp(q_t + nu / (s pi^S)).
StepResult refine_step(const SampleSet& samples, std::span<const double> q_t, const EmpiricalStats& stats,
                       double rho_t, const LearnConfig& config, std::size_t iteration, double delta);

struct LearnTrace {
    double rho0 = 0.0;
    double rho_target = 0.0;
    std::size_t planned_iterations = 0;
    double delta = 0.0;
    double stop_tol = 0.0;
    bool capped = false;         // T_max bound the schedule
    bool stopped_early = false;  // ||nu|| fell below stop_tol
    bool nonconverged = false;   // some filter call exhausted its budget
    std::optional<double> residual0;
    std::vector<StepDiagnostics> steps;
    double total_ms = 0.0;
};

struct LearnResult {
    BayesNet net;
    LearnTrace trace;
};

// on_step, when set, sees each step's diagnostics as soon as the step finishes.
LearnResult learn(const SampleSet& samples, const BayesNetStructure& structure, const LearnConfig& config,
                  const GroundTruth* truth = nullptr,
                  const std::function<void(const StepDiagnostics&)>& on_step = {});

// ||pi^P o (p - q) o s||_2 with the learner's scaling s.
double residual(const BayesNet& truth, std::span<const double> q, const EmpiricalStats& stats,
                std::span<const double> pi_p);

nlohmann::json to_json(const StepDiagnostics& step, bool include_filter = true);
nlohmann::json trace_summary(const LearnTrace& trace);
// One JSON object per iteration.
std::string trace_to_jsonl(const LearnTrace& trace, bool include_filter = true);

} // namespace rbn

#endif
