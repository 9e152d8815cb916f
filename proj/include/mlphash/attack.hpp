#pragma once

#include "mlphash/protocol.hpp"
#include "mlphash/schemes.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mlphash {

/// The attacker's model of the embedding population, used to draw initial
/// guesses. Synthetic datasets expose their generator parameters; ingested
/// data is summarized by per-coordinate mean and standard deviation (a
/// diagonal-covariance surrogate).
struct StartDistribution {
    std::optional<SynthParams> synth;
    Vector mean;
    Vector stddev;

    bool empty() const { return !synth && mean.size() == 0; }
    Index dim() const;
    static StartDistribution from_dataset(const IdentityDataset& ds);
    Vector draw(SeededStream& stream) const;
};

struct AttackConfig {
    int n_starts = 10;
    /// Function-evaluation budget per start; 0 resolves to 2000 * d.
    long max_evals = 0;
    /// Convergence rule. 0 (default): the best point must re-hash bit-exactly
    /// to the target (for the linear sanity objective, squared error <= 1e-12,
    /// i.e. recovery to about 1e-6 in norm). Positive: final loss <= tolerance.
    /// Negative: unreachable, nothing ever counts as converged.
    double loss_tolerance = 0.0;
    double margin = 1e-3;  // hinge margin of the surrogate loss
    std::vector<double> fmr_points{1e-2, 1e-3};
    int n_victims = 0;  // 0 -> every identity in the dataset
    std::uint64_t seed = 0xA77AC4;
    /// Solver sanity mode: a single square orthonormal layer, no activation,
    /// no binarization; the target is the continuous projection itself.
    bool linear_sanity = false;
    /// Filled from the dataset when left empty.
    StartDistribution distribution;

    long evals(Index d) const { return max_evals > 0 ? max_evals : 2000 * static_cast<long>(d); }
    void validate() const;
};

struct AttackResult {
    std::string victim_id;
    std::vector<bool> converged;     // per start
    std::vector<double> final_loss;  // per start
    std::optional<Vector> best_inverted;  // lowest-loss converged start, absent if none
    std::optional<double> unprotected_similarity;
    std::vector<bool> success;  // per FMR operating point
    long evals_used = 0;

    bool any_converged() const;
};

struct AttackReport {
    std::string scheme;  // scheme name, or "linear-sanity"
    Index dim = 0;
    AttackConfig config;
    std::vector<double> thresholds;  // unprotected cosine thresholds, aligned with fmr_points
    std::vector<AttackResult> victims;
    std::vector<double> sar;  // aligned with fmr_points
};

/// Hinge surrogate: sum_i max(0, margin - sign_i * slack_i(x)) where slack is
/// the signed distance of output i from its decision boundary (tau for
/// MLP-Hash, 0 for BioHash, the runner-up gap for IoM argmax codes). Zero
/// exactly when x reproduces every target symbol with the given margin.
double inversion_loss(const Vector& x, const ProtectedTemplate& target,
                      const SchemeMaterial& material, const SchemeConfig& scheme,
                      double margin = 1e-3);
/// Convenience overload that rebuilds the key-derived material per call.
double inversion_loss(const Vector& x, const ProtectedTemplate& target, UserKey key,
                      const SchemeConfig& scheme, double margin = 1e-3);

/// Linear sanity objective (no activation, no binarization).
struct LinearTarget {
    Vector y;  // continuous projection of the hidden pre-image
    Matrix m;  // the square orthonormal layer (rows orthonormal)
};
LinearTarget linear_project(const Vector& u, UserKey key);
/// Closed-form inverse: rows of m are orthonormal and m is square, so the
/// pre-image is exactly m^T applied from the right.
Vector invert_linear(const LinearTarget& t);
double linear_loss(const Vector& x, const LinearTarget& t);  // squared error

/// Multi-start inversion of one protected template under the full-disclosure
/// model (key and parameters known). Start s draws its initial guess from
/// cfg.distribution on stream stream_base + s of cfg.seed. Non-convergence is
/// a result state, never an error.
AttackResult invert_template(const ProtectedTemplate& target, UserKey key,
                             const SchemeConfig& scheme, Index d, const AttackConfig& cfg,
                             std::uint64_t stream_base = 1);
AttackResult invert_linear_target(const LinearTarget& target, const AttackConfig& cfg,
                                  std::uint64_t stream_base = 1);

/// Full Success Attack Rate pipeline: per victim, protect sample 0 under the
/// victim's key, attack it, and on convergence compare the reconstruction to
/// the true embedding with cosine_score against unprotected impostor
/// thresholds. Victims run in parallel; per-victim streams keep the report
/// identical to a serial run.
AttackReport success_attack_rate(const IdentityDataset& ds, const SchemeConfig& scheme,
                                 const AttackConfig& cfg);

namespace detail {

/// Derivative-free simplex minimizer (Nelder-Mead with the dimension-adaptive
/// expansion/contraction/shrink coefficients of Gao & Han). When the simplex
/// collapses before the budget is spent, it restarts around the incumbent with
/// a smaller, slightly jittered simplex. Stops early once f(best) <= target.
struct NelderMeadOptions {
    long max_evals = 10000;
    double target_loss = 0.0;
    double initial_step = 1.0;  // scaled by 1/sqrt(dim) per coordinate
};

struct NelderMeadResult {
    Vector x;
    double loss = 0.0;
    long evals = 0;
    int restarts = 0;
};

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             SeededStream& stream, const NelderMeadOptions& opts);

}  // namespace detail

}  // namespace mlphash
