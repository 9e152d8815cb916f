#include <doctest.h>

#include "mlphash/eval.hpp"
#include "mlphash/prng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace mlphash;
using Label = ScoreSet::Label;

namespace {

std::vector<double> random_scores(std::uint64_t seed, int n) {
    SeededStream s(UserKey{seed}, 0);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(s.uniform01());
    return out;
}

}  // namespace

TEST_CASE("ScoreSet enforces polarity and finiteness") {
    ScoreSet s;
    s.add_similarity(Label::Genuine, 0.75);
    s.add_distance(Label::Impostor, 0.25);  // distances are negated on ingestion
    CHECK(s.genuine == std::vector<double>{0.75});
    CHECK(s.impostor == std::vector<double>{-0.25});
    CHECK_THROWS_AS(s.add_similarity(Label::Mated, std::nan("")), NonFiniteInput);
    CHECK_THROWS_AS(s.add_similarity(Label::Mated, HUGE_VAL), NonFiniteInput);
    CHECK(s.of(Label::Genuine).size() == 1);
}

TEST_CASE("threshold_at_fmr: enumerated example") {
    std::vector<double> imp;
    for (int i = 1; i <= 10; ++i) imp.push_back(i / 10.0);
    const double t = threshold_at_fmr(imp, 0.2);
    CHECK(t == doctest::Approx(0.8));
    // exactly {0.9, 1.0} lie strictly above
    CHECK(std::count_if(imp.begin(), imp.end(), [&](double s) { return s > t; }) == 2);
}

TEST_CASE("threshold_at_fmr: quantile edges") {
    CHECK(threshold_at_fmr({0.3, 0.6}, 0.999) == doctest::Approx(0.3));
    CHECK(threshold_at_fmr({0.4, 0.4, 0.4}, 0.5) == doctest::Approx(0.4));
    CHECK(threshold_at_fmr({0.4, 0.4, 0.4}, 0.001) == doctest::Approx(0.4));
    CHECK_THROWS_AS(threshold_at_fmr({}, 0.1), EmptyDistribution);
    CHECK_THROWS_AS(threshold_at_fmr({0.1}, -0.5), InvalidParameter);
    CHECK_THROWS_AS(threshold_at_fmr({0.1}, 1.5), InvalidParameter);
}

TEST_CASE("threshold and TMR are monotone over random score lists") {
    for (std::uint64_t trial = 0; trial < 200; ++trial) {
        const auto scores = random_scores(trial, 50);
        const double t1 = threshold_at_fmr(scores, 0.05);
        const double t2 = threshold_at_fmr(scores, 0.2);
        CHECK(t2 <= t1);  // raising target_fmr never raises the threshold

        const auto genuine = random_scores(trial + 1000, 40);
        CHECK(tmr_at_threshold(genuine, t2) >= tmr_at_threshold(genuine, t1));

        const double fmr_at_t1 =
            static_cast<double>(std::count_if(scores.begin(), scores.end(),
                                              [&](double s) { return s > t1; })) /
            static_cast<double>(scores.size());
        CHECK(fmr_at_t1 <= 0.05);
    }
}

TEST_CASE("tmr_at_threshold is a strict-above fraction") {
    CHECK(tmr_at_threshold({0.5, 0.6, 0.7}, 0.4) == doctest::Approx(1.0));
    CHECK(tmr_at_threshold({0.5, 0.6, 0.7}, 0.55) == doctest::Approx(2.0 / 3.0));
    CHECK(tmr_at_threshold({0.5, 0.6, 0.7}, 0.7) == doctest::Approx(0.0));  // 0.7 is not above
    CHECK(tmr_at_threshold({0.5, 0.6, 0.7}, 0.9) == doctest::Approx(0.0));
    CHECK(tmr_at_threshold({0.5, 0.5}, 0.5) == doctest::Approx(0.0));  // ties do not match
    CHECK_THROWS_AS(tmr_at_threshold({}, 0.5), EmptyDistribution);
}

TEST_CASE("fmr_estimate_reliable needs at least one expected impostor match") {
    CHECK(fmr_estimate_reliable(1000, 1e-3));
    CHECK(!fmr_estimate_reliable(999, 1e-3));
    CHECK(fmr_estimate_reliable(100, 1e-2));
}

TEST_CASE("unlinkability: identical distributions score near zero") {
    const auto pool = random_scores(7, 2000);
    ScoreSet s;
    for (double v : pool) {
        s.add_similarity(Label::Mated, v);
        s.add_similarity(Label::NonMated, v);
    }
    const auto rep = unlinkability_report(s, 1.0, 50);
    CHECK(rep.d_sys == doctest::Approx(0.0));
    CHECK(rep.d_sys < 0.02);
    CHECK(rep.bins == 50);
    CHECK(rep.score_grid.size() == 50);
    CHECK(rep.local_measure.size() == 50);
}

TEST_CASE("unlinkability: disjoint supports score exactly one") {
    ScoreSet s;
    for (int i = 0; i < 500; ++i) {
        s.add_similarity(Label::Mated, 0.8 + 0.0001 * i);
        s.add_similarity(Label::NonMated, 0.1 + 0.0001 * i);
    }
    const auto rep = unlinkability_report(s, 1.0, 100);
    CHECK(rep.d_sys == doctest::Approx(1.0));
}

TEST_CASE("unlinkability: degenerate single-value scores are unlinkable") {
    ScoreSet s;
    for (int i = 0; i < 100; ++i) {
        s.add_similarity(Label::Mated, 0.5);
        s.add_similarity(Label::NonMated, 0.5);
    }
    CHECK(unlinkability_report(s).d_sys == doctest::Approx(0.0));
}

TEST_CASE("unlinkability: D_sys stays in [0,1] and rises with separation") {
    SeededStream noise(UserKey{3}, 0);
    for (const double shift : {0.0, 0.1, 0.3, 0.6}) {
        ScoreSet s;
        for (int i = 0; i < 3000; ++i) {
            s.add_similarity(Label::NonMated, 0.5 + 0.05 * noise.normal());
            s.add_similarity(Label::Mated, 0.5 + shift + 0.05 * noise.normal());
        }
        const auto rep = unlinkability_report(s);
        CHECK(rep.d_sys >= 0.0);
        CHECK(rep.d_sys <= 1.0);
        if (shift == 0.0) CHECK(rep.d_sys < 0.05);
        if (shift == 0.6) CHECK(rep.d_sys > 0.95);
    }
}

TEST_CASE("unlinkability is invariant under strictly increasing transforms") {
    SeededStream noise(UserKey{5}, 0);
    ScoreSet raw, cubed, shifted;
    for (int i = 0; i < 4000; ++i) {
        const double m = 0.55 + 0.08 * noise.normal();
        const double n = 0.45 + 0.08 * noise.normal();
        raw.add_similarity(Label::Mated, m);
        raw.add_similarity(Label::NonMated, n);
        cubed.add_similarity(Label::Mated, m * m * m);
        cubed.add_similarity(Label::NonMated, n * n * n);
        shifted.add_similarity(Label::Mated, 10.0 * m + 3.0);
        shifted.add_similarity(Label::NonMated, 10.0 * n + 3.0);
    }
    const double base = unlinkability_report(raw).d_sys;
    CHECK(std::abs(unlinkability_report(cubed).d_sys - base) < 0.03);
    CHECK(std::abs(unlinkability_report(shifted).d_sys - base) < 0.03);
}

TEST_CASE("unlinkability_report validates its inputs") {
    ScoreSet s;
    s.add_similarity(Label::Mated, 0.5);
    CHECK_THROWS_AS(unlinkability_report(s), EmptyDistribution);
    s.add_similarity(Label::NonMated, 0.4);
    CHECK_THROWS_AS(unlinkability_report(s, 1.0, 9), InvalidParameter);
    CHECK_THROWS_AS(unlinkability_report(s, 0.0, 50), InvalidParameter);
    CHECK_NOTHROW(unlinkability_report(s, 1.0, 10));
}

TEST_CASE("collect_scores: 2x2 toy protocol counts") {
    const auto ds = synth_generate(2, 2, 8, 0.1, UserKey{9});
    const auto proto = build_protocol(ds, Scenario::Normal, UserKey{1});
    SchemeConfig cfg;
    const auto s = collect_scores(ds, proto, cfg);
    CHECK(s.genuine.size() == 2);
    CHECK(s.impostor.size() == 2);
}

TEST_CASE("collect_scores: identical enrolled and probe sample scores 1.0") {
    auto ds = synth_generate(2, 2, 8, 0.1, UserKey{9});
    for (auto& ident : ds.identities) ident.samples[1] = ident.samples[0];
    const auto proto = build_protocol(ds, Scenario::Normal, UserKey{1});
    for (const auto kind :
         {SchemeKind::MlpHash, SchemeKind::BioHash, SchemeKind::IomGrp, SchemeKind::IomUrp}) {
        SchemeConfig cfg;
        cfg.kind = kind;
        cfg.iom_window = 4;  // default 16 exceeds d=8
        const auto s = collect_scores(ds, proto, cfg);
        for (double g : s.genuine) CHECK(g == doctest::Approx(1.0));
    }
}

TEST_CASE("collect_scores separates genuine from impostor under MLP-Hash") {
    const auto ds = synth_generate(100, 2, 32, 0.05, UserKey{12});
    const auto proto = build_protocol(ds, Scenario::Normal, UserKey{77});
    SchemeConfig cfg;
    const auto s = collect_scores(ds, proto, cfg);
    REQUIRE(!s.genuine.empty());
    REQUIRE(!s.impostor.empty());
    const double mg = std::accumulate(s.genuine.begin(), s.genuine.end(), 0.0) /
                      static_cast<double>(s.genuine.size());
    const double mi = std::accumulate(s.impostor.begin(), s.impostor.end(), 0.0) /
                      static_cast<double>(s.impostor.size());
    CHECK(mg > mi);
}

TEST_CASE("collect_scores: unprotected pass-through uses cosine") {
    const auto ds = synth_generate(3, 2, 16, 0.05, UserKey{2});
    const auto proto = build_protocol(ds, Scenario::Normal, UserKey{5});
    SchemeConfig cfg;
    cfg.kind = SchemeKind::Unprotected;
    const auto s = collect_scores(ds, proto, cfg);
    REQUIRE(s.genuine.size() == 3);
    CHECK(s.genuine[0] ==
          doctest::Approx(cosine_score(ds.identities[0].samples[0], ds.identities[0].samples[1])));
}

TEST_CASE("collect_linkage_scores: single identity has no non-mated pairs") {
    auto full = synth_generate(2, 2, 16, 0.1, UserKey{8});
    IdentityDataset ds;
    ds.dim = full.dim;
    ds.identities.push_back(full.identities[0]);
    SchemeConfig cfg;
    const auto s = collect_linkage_scores(ds, cfg, 2, UserKey{3});
    CHECK(s.non_mated.empty());
    CHECK(!s.mated.empty());
}

TEST_CASE("collect_linkage_scores: unprotected mated pairs are identical samples") {
    const auto ds = synth_generate(3, 2, 16, 0.1, UserKey{8});
    SchemeConfig cfg;
    cfg.kind = SchemeKind::Unprotected;
    const auto s = collect_linkage_scores(ds, cfg, 3, UserKey{3});
    REQUIRE(!s.mated.empty());
    for (double v : s.mated) CHECK(v == doctest::Approx(1.0));
    REQUIRE(!s.non_mated.empty());
    for (double v : s.non_mated) CHECK(v < 1.0);
}

TEST_CASE("collect_linkage_scores: protected mated/non-mated means stay close") {
    const auto ds = synth_generate(100, 1, 32, 0.05, UserKey{21});
    SchemeConfig cfg;
    const auto s = collect_linkage_scores(ds, cfg, 10, UserKey{13});
    const double mm = std::accumulate(s.mated.begin(), s.mated.end(), 0.0) /
                      static_cast<double>(s.mated.size());
    const double mn = std::accumulate(s.non_mated.begin(), s.non_mated.end(), 0.0) /
                      static_cast<double>(s.non_mated.size());
    CHECK(std::abs(mm - mn) < 0.02);
    CHECK_THROWS_AS(collect_linkage_scores(ds, cfg, 1, UserKey{13}), InvalidParameter);
}

TEST_CASE("run_verification_experiment: single trial has zero std") {
    const auto ds = synth_generate(10, 3, 16, 0.05, UserKey{31});
    SchemeConfig cfg;
    cfg.kind = SchemeKind::BioHash;
    const auto rep = run_verification_experiment(ds, cfg, Scenario::Normal, 1, UserKey{5}, 1e-2);
    CHECK(rep.trials == 1);
    CHECK(rep.per_trial_tmr.size() == 1);
    CHECK(rep.tmr_std == doctest::Approx(0.0));
    CHECK(rep.tmr_mean == doctest::Approx(rep.per_trial_tmr[0]));
    CHECK(rep.scheme == "biohash");
    CHECK(rep.scenario == "normal");
    CHECK(rep.fmr == doctest::Approx(1e-2));
}

TEST_CASE("run_verification_experiment: pass-through ignores the scenario") {
    const auto ds = synth_generate(8, 3, 16, 0.05, UserKey{31});
    SchemeConfig cfg;
    cfg.kind = SchemeKind::Unprotected;
    const auto a = run_verification_experiment(ds, cfg, Scenario::Normal, 3, UserKey{5}, 1e-2);
    const auto b = run_verification_experiment(ds, cfg, Scenario::Stolen, 3, UserKey{5}, 1e-2);
    CHECK(a.per_trial_tmr == b.per_trial_tmr);
    CHECK(a.per_trial_threshold == b.per_trial_threshold);
}

TEST_CASE("run_verification_experiment: kept scores match the trial count") {
    const auto ds = synth_generate(6, 3, 16, 0.05, UserKey{31});
    SchemeConfig cfg;
    std::vector<ScoreSet> kept;
    const auto rep =
        run_verification_experiment(ds, cfg, Scenario::Normal, 4, UserKey{5}, 1e-2, &kept);
    REQUIRE(kept.size() == 4);
    CHECK(rep.per_trial_threshold.size() == 4);
    for (const auto& s : kept) {
        CHECK(s.genuine.size() == 12);
        CHECK(s.impostor.size() == 60);
    }
    // distinct trial seeds give distinct score multisets for keyed schemes
    CHECK(kept[0].genuine != kept[1].genuine);
}

TEST_CASE("timing_benchmark: shape and validation") {
    std::vector<SchemeConfig> schemes(2);
    schemes[0].kind = SchemeKind::BioHash;
    schemes[1].kind = SchemeKind::MlpHash;
    const auto rows = timing_benchmark(schemes, 16, 10, 2, UserKey{44});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].scheme == "biohash");
    CHECK(rows[1].scheme == "mlp-hash");
    for (const auto& r : rows) {
        CHECK(r.mean_ms > 0.0);
        CHECK(r.std_ms >= 0.0);
        CHECK(r.trials == 10);
        CHECK(r.warmup == 2);
    }
    CHECK_THROWS_AS(timing_benchmark(schemes, 16, 9, 2, UserKey{44}), InvalidParameter);
    schemes[0].kind = SchemeKind::Unprotected;
    CHECK_THROWS_AS(timing_benchmark(schemes, 16, 10, 2, UserKey{44}), InvalidParameter);
}
