#pragma once

#include "mlphash/protocol.hpp"
#include "mlphash/schemes.hpp"

#include <string>
#include <vector>

namespace mlphash {

/// Labeled score collections. Polarity convention: higher = more similar.
/// Distance-like values must enter through add_distance, which negates them.
struct ScoreSet {
    enum class Label { Genuine, Impostor, Mated, NonMated };

    std::vector<double> genuine;
    std::vector<double> impostor;
    std::vector<double> mated;
    std::vector<double> non_mated;

    void add_similarity(Label label, double score);
    void add_distance(Label label, double distance) { add_similarity(label, -distance); }
    std::vector<double>& of(Label label);
    const std::vector<double>& of(Label label) const;
};

struct UnlinkabilityReport {
    std::vector<double> score_grid;     // bin centers of the shared histogram grid
    std::vector<double> local_measure;  // D(s) in [0,1] per grid point
    double d_sys = 0.0;                 // global measure, mated-density-weighted average
    double omega = 1.0;
    int bins = 100;
};

/// Protects enrollment and probe samples with their protocol-assigned keys and
/// scores every probe against its claimed enrollment (hamming similarity, or
/// cosine for the unprotected pass-through). Protection material is cached per
/// key and probe templates per (sample, key); both caches are behavior-neutral.
ScoreSet collect_scores(const IdentityDataset& ds, const VerificationProtocol& proto,
                        const SchemeConfig& scheme);

/// Mated: templates of the same sample under different keys. Non-mated:
/// templates of different identities under different keys. keys_per_subject
/// distinct keys are derived per identity from key_seed.
ScoreSet collect_linkage_scores(const IdentityDataset& ds, const SchemeConfig& scheme,
                                int keys_per_subject, UserKey key_seed);

/// Histogram-density estimate of the mated / non-mated overlap on a shared
/// grid. LR(s) = p(s|mated)/p(s|non-mated); D(s) = 2*omega*LR/(1+omega*LR) - 1
/// where LR > 1, else 0; empty non-mated bins with mated mass count as LR = inf.
/// d_sys is the p(s|mated)-weighted average of D(s).
UnlinkabilityReport unlinkability_report(const ScoreSet& scores, double omega = 1.0,
                                         int bins = 100);

/// Smallest threshold t with fraction{score > t} <= target_fmr (strictly-above
/// matching, empirical quantile, no interpolation).
double threshold_at_fmr(std::vector<double> impostor, double target_fmr);

/// True for sample sizes large enough that the FMR quantile is meaningful.
inline bool fmr_estimate_reliable(std::size_t n_impostor, double target_fmr) {
    return static_cast<double>(n_impostor) * target_fmr >= 1.0;
}

/// Fraction of genuine scores strictly above t.
double tmr_at_threshold(const std::vector<double>& genuine, double t);

struct TmrReport {
    std::string scheme;
    std::string scenario;
    double fmr = 1e-3;
    int trials = 0;
    std::vector<double> per_trial_tmr;
    std::vector<double> per_trial_threshold;
    double tmr_mean = 0.0;
    double tmr_std = 0.0;  // sample std over trials; 0 by convention for one trial
};

/// Repeats protocol construction and scoring with a trial-varied key seed
/// (mix64(key_seed + trial)); the decision threshold is recomputed per trial.
/// When keep_scores is given, the per-trial score sets are appended to it.
TmrReport run_verification_experiment(const IdentityDataset& ds, const SchemeConfig& scheme,
                                      Scenario scenario, int n_trials, UserKey key_seed,
                                      double fmr = 1e-3,
                                      std::vector<ScoreSet>* keep_scores = nullptr);

struct BenchRow {
    std::string scheme;
    double mean_ms = 0.0;
    double std_ms = 0.0;
    int trials = 0;
    int warmup = 0;  // excluded warm-up iterations
};

/// Wall-clock protection time per scheme over fresh random embeddings.
/// Key-derived matrices are generated inside the timed region (the protection
/// call is timed end to end). Runs on a single thread.
std::vector<BenchRow> timing_benchmark(const std::vector<SchemeConfig>& schemes, Index d,
                                       int n_trials, int warmup = 10,
                                       UserKey seed = UserKey{0xBE7C4});

}  // namespace mlphash
