#include "mlphash/eval.hpp"

#include "mlphash/parallel.hpp"
#include "mlphash/prng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <unordered_map>

namespace mlphash {

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

void ScoreSet::add_similarity(Label label, double score) {
    if (!std::isfinite(score)) throw NonFiniteInput("score is not finite");
    of(label).push_back(score);
}

std::vector<double>& ScoreSet::of(Label label) {
    switch (label) {
        case Label::Genuine: return genuine;
        case Label::Impostor: return impostor;
        case Label::Mated: return mated;
        case Label::NonMated: return non_mated;
    }
    throw InvalidParameter("unknown score label");
}

const std::vector<double>& ScoreSet::of(Label label) const {
    return const_cast<ScoreSet*>(this)->of(label);
}

ScoreSet collect_scores(const IdentityDataset& ds, const VerificationProtocol& proto,
                        const SchemeConfig& scheme) {
    ScoreSet out;
    const auto& probes = proto.probes;

    if (scheme.kind == SchemeKind::Unprotected) {
        for (const auto& p : probes) {
            const auto& e = proto.enrollments[static_cast<std::size_t>(p.claimed)].sample;
            const double s = cosine_score(ds.sample(e.identity, e.sample),
                                          ds.sample(p.sample.identity, p.sample.sample));
            out.add_similarity(p.genuine() ? ScoreSet::Label::Genuine : ScoreSet::Label::Impostor,
                               s);
        }
        return out;
    }

    // Key-derived material is expensive (per-key matrix stacks); identities
    // share keys across probes, so build each key's material exactly once.
    std::vector<UserKey> keys;
    std::unordered_map<std::uint64_t, std::size_t> key_index;
    auto intern_key = [&](UserKey k) {
        auto [it, fresh] = key_index.emplace(k.seed, keys.size());
        if (fresh) keys.push_back(k);
        return it->second;
    };
    for (const auto& e : proto.enrollments) intern_key(e.key);
    for (const auto& p : probes) intern_key(p.key);

    std::vector<SchemeMaterial> materials(keys.size());
    parallel_for(keys.size(),
                 [&](std::size_t i) { materials[i] = make_material(keys[i], scheme, ds.dim); });

    std::vector<ProtectedTemplate> enrolled(proto.enrollments.size());
    parallel_for(enrolled.size(), [&](std::size_t i) {
        const auto& e = proto.enrollments[i];
        enrolled[i] = protect_with(ds.sample(e.sample.identity, e.sample.sample),
                                   materials[key_index.at(e.key.seed)], scheme);
    });

    // In the normal scenario one probe sample is compared against every
    // enrolled identity under its own key; protect each distinct
    // (sample, key) combination once and fan the template out.
    std::map<std::tuple<int, int, std::size_t>, std::size_t> job_index;
    std::vector<std::size_t> probe_job(probes.size());
    struct Job {
        SampleRef sample;
        std::size_t key;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto& p = probes[i];
        const std::size_t k = key_index.at(p.key.seed);
        auto [it, fresh] = job_index.emplace(
            std::make_tuple(p.sample.identity, p.sample.sample, k), jobs.size());
        if (fresh) jobs.push_back(Job{p.sample, k});
        probe_job[i] = it->second;
    }

    std::vector<ProtectedTemplate> probe_templates(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        const auto& j = jobs[i];
        probe_templates[i] = protect_with(ds.sample(j.sample.identity, j.sample.sample),
                                          materials[j.key], scheme);
    });

    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto& p = probes[i];
        const double s = hamming_score(enrolled[static_cast<std::size_t>(p.claimed)],
                                       probe_templates[probe_job[i]]);
        out.add_similarity(p.genuine() ? ScoreSet::Label::Genuine : ScoreSet::Label::Impostor, s);
    }
    return out;
}

ScoreSet collect_linkage_scores(const IdentityDataset& ds, const SchemeConfig& scheme,
                                int keys_per_subject, UserKey key_seed) {
    if (keys_per_subject < 2)
        throw InvalidParameter("linkage needs at least two keys per subject");
    ds.validate();
    const int K = keys_per_subject;
    const std::size_t n_id = ds.n_identities();  // one identity is fine: non_mated stays empty

    // Each "application" k gets its own seed; subject keys are then derived
    // per identity exactly as in the verification protocol.
    auto subject_key = [&](std::size_t i, int k) {
        const UserKey app_seed{mix64(key_seed.seed + static_cast<std::uint64_t>(k))};
        return identity_key(app_seed, ds.identities[i].id);
    };

    const bool raw = scheme.kind == SchemeKind::Unprotected;

    // templates[i][s][k]; one material per (identity, application), built and
    // dropped inside its task so peak memory stays bounded by the worker count.
    std::vector<std::vector<std::vector<ProtectedTemplate>>> tpl(n_id);
    for (std::size_t i = 0; i < n_id; ++i) {
        tpl[i].assign(ds.identities[i].samples.size(),
                      std::vector<ProtectedTemplate>(static_cast<std::size_t>(K)));
    }
    if (!raw) {
        parallel_for(n_id * static_cast<std::size_t>(K), [&](std::size_t task) {
            const std::size_t i = task / static_cast<std::size_t>(K);
            const int k = static_cast<int>(task % static_cast<std::size_t>(K));
            const SchemeMaterial mat = make_material(subject_key(i, k), scheme, ds.dim);
            const auto& samples = ds.identities[i].samples;
            for (std::size_t s = 0; s < samples.size(); ++s)
                tpl[i][s][static_cast<std::size_t>(k)] = protect_with(samples[s], mat, scheme);
        });
    }

    auto score = [&](std::size_t i1, std::size_t s1, int k1, std::size_t i2, std::size_t s2,
                     int k2) {
        if (raw) return cosine_score(ds.identities[i1].samples[s1], ds.identities[i2].samples[s2]);
        return hamming_score(tpl[i1][s1][static_cast<std::size_t>(k1)],
                             tpl[i2][s2][static_cast<std::size_t>(k2)]);
    };

    ScoreSet out;
    // Mated: the same sample protected under two different keys.
    for (std::size_t i = 0; i < n_id; ++i)
        for (std::size_t s = 0; s < ds.identities[i].samples.size(); ++s)
            for (int k1 = 0; k1 < K; ++k1)
                for (int k2 = k1 + 1; k2 < K; ++k2)
                    out.add_similarity(ScoreSet::Label::Mated, score(i, s, k1, i, s, k2));
    // Non-mated: different subjects, different keys (first sample of each).
    for (std::size_t i = 0; i < n_id; ++i)
        for (std::size_t j = i + 1; j < n_id; ++j)
            for (int k = 0; k < K; ++k)
                out.add_similarity(ScoreSet::Label::NonMated, score(i, 0, k, j, 0, (k + 1) % K));
    return out;
}

UnlinkabilityReport unlinkability_report(const ScoreSet& scores, double omega, int bins) {
    if (bins < 10) throw InvalidParameter("histogram needs at least 10 bins");
    if (!(omega > 0.0) || !std::isfinite(omega))
        throw InvalidParameter("omega must be positive and finite");
    const auto& mated = scores.mated;
    const auto& non_mated = scores.non_mated;
    if (mated.empty()) throw EmptyDistribution("mated scores");
    if (non_mated.empty()) throw EmptyDistribution("non-mated scores");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double s : mated) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    for (double s : non_mated) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    if (!(hi > lo)) {
        // Every score identical: both densities are a point mass at the same
        // spot, LR = 1 everywhere. Widen the range so the binning below works.
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / bins;
    auto bin_of = [&](double s) {
        auto b = static_cast<long>((s - lo) / width);
        return static_cast<std::size_t>(std::clamp<long>(b, 0, bins - 1));
    };
    std::vector<std::size_t> cm(static_cast<std::size_t>(bins), 0);
    std::vector<std::size_t> cn(static_cast<std::size_t>(bins), 0);
    for (double s : mated) ++cm[bin_of(s)];
    for (double s : non_mated) ++cn[bin_of(s)];

    UnlinkabilityReport rep;
    rep.omega = omega;
    rep.bins = bins;
    rep.score_grid.resize(static_cast<std::size_t>(bins));
    rep.local_measure.resize(static_cast<std::size_t>(bins));
    const auto nm = static_cast<double>(mated.size());
    const auto nn = static_cast<double>(non_mated.size());
    for (int b = 0; b < bins; ++b) {
        const auto ib = static_cast<std::size_t>(b);
        rep.score_grid[ib] = lo + (b + 0.5) * width;
        const double pm = static_cast<double>(cm[ib]) / nm;  // mass, so bin widths cancel in LR
        double d_local = 0.0;
        if (cm[ib] > 0) {
            if (cn[ib] == 0) {
                d_local = 1.0;  // LR diverges: mated mass with no non-mated support
            } else {
                const double lr = pm / (static_cast<double>(cn[ib]) / nn);
                if (lr > 1.0) d_local = 2.0 * omega * lr / (1.0 + omega * lr) - 1.0;
            }
        }
        rep.local_measure[ib] = d_local;
        rep.d_sys += d_local * pm;
    }
    return rep;
}

double threshold_at_fmr(std::vector<double> impostor, double target_fmr) {
    if (impostor.empty()) throw EmptyDistribution("impostor scores");
    if (!(target_fmr >= 0.0 && target_fmr <= 1.0))
        throw InvalidParameter("target FMR must lie in [0, 1]");
    std::sort(impostor.begin(), impostor.end());
    const std::size_t n = impostor.size();
    // Number of impostor scores allowed strictly above the threshold; the
    // epsilon keeps exact products like 0.2 * 10 from truncating to 1.
    auto m = static_cast<std::size_t>(static_cast<double>(n) * target_fmr + 1e-9);
    if (m >= n) m = n - 1;
    return impostor[n - m - 1];
}

double tmr_at_threshold(const std::vector<double>& genuine, double t) {
    if (genuine.empty()) throw EmptyDistribution("genuine scores");
    std::size_t hits = 0;
    for (double g : genuine)
        if (g > t) ++hits;
    return static_cast<double>(hits) / static_cast<double>(genuine.size());
}

TmrReport run_verification_experiment(const IdentityDataset& ds, const SchemeConfig& scheme,
                                      Scenario scenario, int n_trials, UserKey key_seed,
                                      double fmr, std::vector<ScoreSet>* keep_scores) {
    if (n_trials < 1) throw InvalidParameter("need at least one trial");
    TmrReport rep;
    rep.scheme = scheme_name(scheme.kind);
    rep.scenario = scenario_name(scenario);
    rep.fmr = fmr;
    rep.trials = n_trials;
    for (int t = 0; t < n_trials; ++t) {
        const UserKey trial_seed{mix64(key_seed.seed + static_cast<std::uint64_t>(t))};
        const auto proto = build_protocol(ds, scenario, trial_seed);
        auto scores = collect_scores(ds, proto, scheme);
        const double thr = threshold_at_fmr(scores.impostor, fmr);
        rep.per_trial_threshold.push_back(thr);
        rep.per_trial_tmr.push_back(tmr_at_threshold(scores.genuine, thr));
        if (keep_scores) keep_scores->push_back(std::move(scores));
    }
    rep.tmr_mean = mean_of(rep.per_trial_tmr);
    rep.tmr_std = sample_std(rep.per_trial_tmr, rep.tmr_mean);
    return rep;
}

std::vector<BenchRow> timing_benchmark(const std::vector<SchemeConfig>& schemes, Index d,
                                       int n_trials, int warmup, UserKey seed) {
    if (d < 1) throw InvalidParameter("dimension must be positive");
    if (n_trials < 10) throw InvalidParameter("need at least 10 timed trials for a stable mean");
    if (warmup < 0) throw InvalidParameter("warmup cannot be negative");
    using clock = std::chrono::steady_clock;
    std::vector<BenchRow> rows;
    SeededStream stream(seed, 0);
    for (const auto& cfg : schemes) {
        if (cfg.kind == SchemeKind::Unprotected)
            throw InvalidParameter("the unprotected baseline has no protection step to time");
        BenchRow row;
        row.scheme = scheme_name(cfg.kind);
        row.trials = n_trials;
        row.warmup = warmup;
        std::vector<double> ms;
        ms.reserve(static_cast<std::size_t>(n_trials));
        // Fresh embedding and key per iteration so every timed call pays the
        // full cost, including key-derived material generation.
        for (int i = 0; i < warmup + n_trials; ++i) {
            Vector u(d);
            stream.fill_normal(u);
            const UserKey key{mix64(seed.seed + 1 + static_cast<std::uint64_t>(i))};
            const auto t0 = clock::now();
            const ProtectedTemplate tpl = protect(u, key, cfg);
            const auto t1 = clock::now();
            if (tpl.length != cfg.output_length(d))
                throw Error("benchmark produced a template of unexpected length");
            if (i >= warmup)
                ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        row.mean_ms = mean_of(ms);
        row.std_ms = sample_std(ms, row.mean_ms);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace mlphash
