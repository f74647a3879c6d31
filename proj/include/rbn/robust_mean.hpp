#ifndef RBN_ROBUST_MEAN_HPP
#define RBN_ROBUST_MEAN_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "rbn/sparse.hpp"

namespace rbn {

/* Nonnegative sample weights. Means and covariances are always formed
 * from the normalised view w / total. */
struct WeightVector {
    std::vector<double> w;

    static WeightVector uniform(std::size_t n);
    double total() const;
    std::size_t size() const { return w.size(); }
};

struct StabilityParams {
    double eps = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

struct GoodnessParams {
    double eps = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;

    // gamma2 + 2 gamma1^2 + 4 eps^2 beta1^2 + 2 eps beta2 + eps ln(1/eps): the
    // covariance excess a good set can exhibit, used as the filter's target.
    double xi() const;
};

// (eps, beta, gamma)-stable  =>  good with gamma1 = beta, gamma2 = gamma,
// beta1 = beta/eps, beta2 = gamma/eps + 3 beta^2/eps^2.
GoodnessParams stable_to_good(const StabilityParams& params);

// mu(w); throws EmptyWeightError when the total weight is zero.
std::vector<double> weighted_mean(const RowSource& batch, const WeightVector& w);

// Sigma(w) v without forming Sigma(w).
std::vector<double> sigma_apply(std::span<const double> v, const RowSource& batch, const WeightVector& w);

// Dense Sigma(w), row-major dim x dim. Test and diagnostic use only.
std::vector<double> dense_covariance(const RowSource& batch, const WeightVector& w);

/* Sum of weighted covariances  M = sum_i Sigma(w^i)  applied to a block of
 * vectors in one pass over the rows. Blocks are stored coordinate-major:
 * element (k, c) of a dim x width block lives at [k * width + c]. */
class CovarianceOperator {
public:
    CovarianceOperator(const RowSource& batch, std::span<const WeightVector> weights);

    std::size_t dim() const { return batch_.dim(); }
    std::size_t terms() const { return means_.size(); }
    const std::vector<double>& mean(std::size_t i) const { return means_[i]; }
    const std::vector<double>& normalized(std::size_t i) const { return weights_[i]; }

    // out = M u; out is overwritten.
    void apply(const double* u, std::size_t width, double* out) const;

private:
    const RowSource& batch_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> means_;
    std::vector<std::uint8_t> active_;  // row has positive weight in some term
};

struct PowerIterationResult {
    double value = 0.0;
    std::size_t iterations = 0;
};

// Largest eigenvalue of a PSD operator by block power iteration (Rayleigh-Ritz on 4 columns).
// Stops once successive estimates differ by at most rel_tol * max(lambda, scale).
PowerIterationResult top_eigenvalue(const CovarianceOperator& op, std::size_t max_iterations, double rel_tol,
                                    std::uint64_t seed, double scale = 0.0);

struct SketchOptions {
    double delta = 0.05;
    std::uint64_t seed = 0;
    // r = ceil(rows_factor * log2 n * log2(1/delta)) unless `rows` is set.
    double rows_factor = 2.0;
    // l = ceil(degree_factor * log2 dim) unless `degree` is set.
    double degree_factor = 4.0;
    std::size_t rows = 0;
    std::size_t degree = 0;
    // Sketch rows pushed through the polynomial per pass; 0 picks a size from dim.
    std::size_t block = 0;
    // Known upper bound on ||sum_{i<t} Sigma(w^i)||; negative means estimate it.
    double norm_bound = -1.0;
};

struct SketchMeta {
    std::size_t rows = 0;
    std::size_t degree = 0;
    double alpha_step = 0.0;
    double delta = 0.0;
    std::uint64_t seed = 0;
};

struct ScoreReport {
    std::vector<double> tau;
    double q_tilde = 0.0;
    SketchMeta sketch;
};

std::size_t sketch_rows(const SketchOptions& opt, std::size_t n);
std::size_t sketch_degree(const SketchOptions& opt, std::size_t dim);

/* Approximate scores for the last weight vector against
 *   U = exp(alpha sum_{i<t} Sigma(w^i)) / tr(...)
 * using A = Q P_l(alpha/2 sum_{i<t} Sigma(w^i)) with Gaussian Q (entries of
 * variance 1/r), P_l the degree-l Taylor polynomial of exp:
 *   tau_i = ||A (X_i - mu(w^t))||^2 / tr(A A^T),   q = sum_i w^t_i tau_i - 1.
 * Throws StepSizeError if alpha/2 * ||sum Sigma|| exceeds l/2 and
 * DegenerateSketchError if tr(A A^T) vanishes. */
ScoreReport score_oracle(const RowSource& batch, std::span<const WeightVector> weights, double alpha_step,
                         const SketchOptions& opt);

// Largest dim accepted by the dense oracle.
inline constexpr std::size_t kExactOracleMaxDim = 2000;

// Same quantities from a dense eigendecomposition; q = <Sigma(w^t) - I, U>.
ScoreReport score_oracle_exact(const RowSource& batch, std::span<const WeightVector> weights, double alpha_step);

struct FilterOptions {
    // Weight vectors per epoch: ceil(mmwu_factor * ln dim).
    double mmwu_factor = 1.0;
    // Epoch budget: ceil(epoch_factor * log2 R).
    double epoch_factor = 1.0;
    // A round downweights only when q_tilde > stop_factor * gamma_target.
    double stop_factor = 0.2;
    std::size_t power_iterations = 50;
    // Power iteration stops when successive estimates differ by <= power_tol * max(lambda, power_scale).
    double power_tol = 1e-3;
    double power_scale = 0.0;
    SketchOptions sketch;
    bool record_weights = false;
};

struct FilterEpoch {
    std::size_t epoch = 0;
    double lambda = 0.0;  // top eigenvalue of Sigma(w) at epoch start
    double excess = 0.0;  // lambda - 1
    double alpha_step = 0.0;
    std::size_t power_iterations = 0;
};

struct FilterRound {
    std::size_t epoch = 0;
    std::size_t round = 0;
    double q_tilde = 0.0;
    bool filtered = false;
    double weight_removed = 0.0;  // raw weight mass removed this round
    std::size_t zeroed = 0;
    double oracle_ms = 0.0;
    std::size_t sketch_rows = 0;
    std::size_t degree = 0;
};

struct FilterTrace {
    double gamma_target = 0.0;
    double radius = 0.0;
    std::size_t epoch_budget = 0;
    std::size_t rounds_per_epoch = 0;
    bool converged = false;
    double final_excess = 0.0;  // excess of the weights behind the returned mean
    std::size_t oracle_calls = 0;
    double oracle_ms = 0.0;
    std::size_t power_passes = 0;
    std::vector<FilterEpoch> epochs;
    std::vector<FilterRound> rounds;
    WeightVector final_weights;
    std::vector<std::vector<double>> weight_history;  // after each downweighting, if recorded
};

struct FilterResult {
    std::vector<double> mean;
    FilterTrace trace;
};

/* QUE-style filter. Each epoch estimates the top eigenvalue of Sigma(w);
 * if its excess over 1 is at most gamma_target = xi(stable_to_good(...)),
 * mu(w) is returned. Otherwise a round of matrix multiplicative weights
 * runs with alpha = ln(dim) / (T lambda): each weight vector is scored by
 * the sketch oracle and, when q_tilde exceeds stop_factor * gamma_target,
 * samples above the (1 - 2 eps) weighted quantile of tau lose weight
 * w_i <- w_i (1 - tau_i / tau_max). The last round of an epoch filters
 * anyway if nothing has been removed yet. Weights only decrease. When the
 * epoch budget runs out, or an epoch removes nothing, the mean with the
 * smallest excess seen is returned with converged = false. */
FilterResult que_filter(const RowSource& batch, double eps, const StabilityParams& stability, double delta,
                        std::uint64_t seed, const FilterOptions& opt = {}, double radius = -1.0);

/* Entry point used by the learner: checks that `radius` bounds every row
 * norm, then runs que_filter with the (eps, beta, gamma) stability target. */
FilterResult robust_mean(const RowSource& batch, double eps, double beta, double gamma, double radius,
                         std::uint64_t seed, const FilterOptions& opt = {});

nlohmann::json to_json(const ScoreReport& report, bool include_scores = true);
nlohmann::json to_json(const FilterTrace& trace);

} // namespace rbn

#endif
