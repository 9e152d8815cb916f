// mlphash command-line front end.
//
// Exit codes: 0 success, 2 configuration error, 3 IO or parse error,
// 4 scheme/params digest mismatch. Everything is driven by one JSON config
// (see README) plus per-command flag overrides; flags win.

#include "mlphash/attack.hpp"
#include "mlphash/dataio.hpp"
#include "mlphash/eval.hpp"
#include "mlphash/protocol.hpp"
#include "mlphash/schemes.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace mlphash;

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidParameter& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SchemeMismatch& e) {
        std::cerr << "digest mismatch: " << e.what() << "\n";
        return 4;
    } catch (const LengthMismatch& e) {
        std::cerr << "digest mismatch: " << e.what() << "\n";
        return 4;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 3;
    } catch (const DimensionMismatch& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

/// Options shared by every command; resolve() loads the config file (or the
/// built-in defaults) and applies any flags that were actually given.
struct CommonFlags {
    std::string config_path;
    std::string scheme;
    std::string scenario;
    std::uint64_t key_seed = 0;
    std::string out_dir;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run-config file");
        cmd->add_option("--scheme", scheme,
                        "scheme kind: mlp-hash | biohash | iom-grp | iom-urp | unprotected");
        cmd->add_option("--scenario", scenario, "key scenario: normal | stolen");
        cmd->add_option("--key-seed", key_seed, "base seed for per-identity keys");
        cmd->add_option("--out-dir", out_dir, "report output directory");
    }

    RunConfig resolve(const CLI::App* cmd) const {
        RunConfig cfg;
        if (!config_path.empty())
            cfg = load_run_config(config_path);
        else
            cfg.synth = SynthParams{};
        if (cmd->count("--scheme")) {
            const auto k = scheme_from_name(scheme);
            if (!k) throw ConfigError("unknown scheme kind '" + scheme + "'");
            cfg.scheme.kind = *k;
        }
        if (cmd->count("--scenario")) {
            const auto s = scenario_from_name(scenario);
            if (!s) throw ConfigError("unknown scenario '" + scenario + "'");
            cfg.scenario = *s;
        }
        if (cmd->count("--key-seed")) cfg.key_seed = key_seed;
        if (cmd->count("--out-dir")) cfg.output_dir = out_dir;
        cfg.validate();
        return cfg;
    }
};

std::string report_path(const RunConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.output_dir) / name).string();
}

void write_report_json(const RunConfig& cfg, const std::string& name, nlohmann::json report,
                       bool overwrite) {
    const nlohmann::json out{{"config", cfg.to_json()}, {"report", std::move(report)}};
    write_text_file(report_path(cfg, name), out.dump(2) + "\n", overwrite);
}

void warn_if_fmr_unreliable(std::size_t n_impostor, double fmr) {
    if (!fmr_estimate_reliable(n_impostor, fmr))
        std::cerr << "warning: " << n_impostor << " impostor scores cannot resolve FMR=" << fmr
                  << "; the threshold estimate is unreliable\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MLP-Hash cancelable template protection: schemes, protocols and evaluations"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic identity dataset CSV");
    CommonFlags synth_flags;
    synth_flags.attach(synth_cmd);
    std::string synth_out;
    int synth_identities = 0, synth_samples = 0;
    Index synth_dim = 0;
    double synth_sigma = 0.0;
    std::uint64_t synth_seed = 0;
    bool synth_overwrite = false;
    synth_cmd->add_option("--out", synth_out, "output CSV path")->required();
    synth_cmd->add_option("--identities", synth_identities, "number of identities");
    synth_cmd->add_option("--samples", synth_samples, "samples per identity");
    synth_cmd->add_option("--dim", synth_dim, "embedding dimension");
    synth_cmd->add_option("--sigma", synth_sigma, "within-identity noise scale");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");
    synth_cmd->add_flag("--overwrite", synth_overwrite, "allow overwriting the output file");

    // ---- protect ----
    auto* protect_cmd =
        app.add_subcommand("protect", "Protect an embeddings CSV into a template file");
    CommonFlags protect_flags;
    protect_flags.attach(protect_cmd);
    std::string protect_in, protect_out;
    bool protect_overwrite = false;
    protect_cmd->add_option("--input", protect_in, "embeddings CSV")->required();
    protect_cmd->add_option("--out", protect_out, "output template file")->required();
    protect_cmd->add_flag("--overwrite", protect_overwrite, "allow overwriting the output file");

    // ---- verify ----
    auto* verify_cmd = app.add_subcommand(
        "verify", "Score probe embeddings against enrolled templates (stdout CSV)");
    CommonFlags verify_flags;
    verify_flags.attach(verify_cmd);
    std::string verify_enrolled, verify_probes;
    double verify_threshold = 0.0;
    verify_cmd->add_option("--enrolled", verify_enrolled, "enrolled template file")->required();
    verify_cmd->add_option("--probes", verify_probes, "probe embeddings CSV")->required();
    verify_cmd->add_option("--threshold", verify_threshold, "decision threshold (score > t)");

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "Run an evaluation pipeline");
    eval_cmd->require_subcommand(1);

    auto* acc_cmd = eval_cmd->add_subcommand("accuracy", "TMR at fixed FMR over repeated trials");
    CommonFlags acc_flags;
    acc_flags.attach(acc_cmd);
    int acc_trials = 0;
    double acc_fmr = 0.0;
    std::string acc_scores;
    bool acc_overwrite = false;
    acc_cmd->add_option("--trials", acc_trials, "number of trials");
    acc_cmd->add_option("--fmr", acc_fmr, "target FMR for the decision threshold");
    acc_cmd->add_option("--scores", acc_scores, "also dump per-trial scores to this CSV");
    acc_cmd->add_flag("--overwrite", acc_overwrite, "allow overwriting outputs");

    auto* unlink_cmd =
        eval_cmd->add_subcommand("unlinkability", "Mated/non-mated linkage analysis (D_sys)");
    CommonFlags unlink_flags;
    unlink_flags.attach(unlink_cmd);
    int unlink_bins = 0, unlink_keys = 0;
    double unlink_omega = 0.0;
    std::string unlink_scores;
    bool unlink_overwrite = false;
    unlink_cmd->add_option("--bins", unlink_bins, "histogram bins");
    unlink_cmd->add_option("--omega", unlink_omega, "prior ratio omega");
    unlink_cmd->add_option("--keys-per-subject", unlink_keys, "keys per subject (>= 2)");
    unlink_cmd->add_option("--scores", unlink_scores, "also dump linkage scores to this CSV");
    unlink_cmd->add_flag("--overwrite", unlink_overwrite, "allow overwriting outputs");

    auto* irrev_cmd = eval_cmd->add_subcommand(
        "irreversibility", "Full-disclosure inversion attack and SAR");
    CommonFlags irrev_flags;
    irrev_flags.attach(irrev_cmd);
    int irrev_victims = 0, irrev_starts = 0;
    long irrev_evals = 0;
    bool irrev_linear = false, irrev_overwrite = false;
    std::uint64_t irrev_seed = 0;
    irrev_cmd->add_option("--victims", irrev_victims, "number of victims (0 = all identities)");
    irrev_cmd->add_option("--starts", irrev_starts, "starts per victim");
    irrev_cmd->add_option("--max-evals", irrev_evals, "loss evaluations per start (0 = 2000*d)");
    irrev_cmd->add_option("--attack-seed", irrev_seed, "attack seed");
    irrev_cmd->add_flag("--linear-sanity", irrev_linear,
                        "solver sanity mode: linear layer, no binarization");
    irrev_cmd->add_flag("--overwrite", irrev_overwrite, "allow overwriting outputs");

    auto* bench_cmd = eval_cmd->add_subcommand("bench", "Per-scheme protection timing");
    CommonFlags bench_flags;
    bench_flags.attach(bench_cmd);
    Index bench_dim = 0;
    int bench_trials = 0, bench_warmup = -1;
    bool bench_overwrite = false;
    bench_cmd->add_option("--dim", bench_dim, "embedding dimension");
    bench_cmd->add_option("--trials", bench_trials, "timed trials per scheme");
    bench_cmd->add_option("--warmup", bench_warmup, "warm-up iterations (excluded)");
    bench_cmd->add_flag("--overwrite", bench_overwrite, "allow overwriting outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // --help exits 0; every real parse problem is a config error
    }

    if (synth_cmd->parsed()) {
        return guarded([&] {
            RunConfig cfg = synth_flags.resolve(synth_cmd);
            SynthParams p = cfg.synth.value_or(SynthParams{});
            if (synth_cmd->count("--identities")) p.n_identities = synth_identities;
            if (synth_cmd->count("--samples")) p.samples_per_identity = synth_samples;
            if (synth_cmd->count("--dim")) p.dim = synth_dim;
            if (synth_cmd->count("--sigma")) p.within_sigma = synth_sigma;
            if (synth_cmd->count("--seed")) p.seed = synth_seed;
            if (!synth_overwrite && std::filesystem::exists(synth_out))
                throw IoError("refusing to overwrite existing file: " + synth_out);
            const auto ds = synth_generate(p);
            save_embeddings_csv(ds, synth_out);
            std::cout << "wrote " << ds.identities.size() << " identities to " << synth_out
                      << "\n";
        });
    }

    if (protect_cmd->parsed()) {
        return guarded([&] {
            const RunConfig cfg = protect_flags.resolve(protect_cmd);
            if (cfg.scheme.kind == SchemeKind::Unprotected)
                throw ConfigError("protect needs a protection scheme, not 'unprotected'");
            const auto ds = load_embeddings_csv(protect_in);
            ds.validate();
            TemplateFile tf;
            tf.scheme = cfg.scheme.kind;
            tf.length = cfg.scheme.output_length(ds.dim);
            tf.digest = cfg.scheme.params_digest(ds.dim);
            for (const auto& ident : ds.identities) {
                const auto mat = make_material(identity_key(UserKey{cfg.key_seed}, ident.id),
                                               cfg.scheme, ds.dim);
                for (std::size_t s = 0; s < ident.samples.size(); ++s)
                    tf.records.push_back({ident.id, ident.sample_ids[s],
                                          protect_with(ident.samples[s], mat, cfg.scheme)});
            }
            save_templates(tf, protect_out, protect_overwrite);
            std::cout << "wrote " << tf.records.size() << " templates to " << protect_out << "\n";
        });
    }

    if (verify_cmd->parsed()) {
        return guarded([&] {
            RunConfig cfg = verify_flags.resolve(verify_cmd);
            if (verify_cmd->count("--threshold")) cfg.decision_threshold = verify_threshold;
            if (cfg.scheme.kind == SchemeKind::Unprotected)
                throw ConfigError("verify needs a protection scheme, not 'unprotected'");
            const TemplateFile enrolled = load_templates(verify_enrolled);
            const auto ds = load_embeddings_csv(verify_probes);
            ds.validate();
            if (enrolled.scheme != cfg.scheme.kind ||
                enrolled.digest != cfg.scheme.params_digest(ds.dim))
                throw SchemeMismatch(
                    "enrolled templates were produced under a different scheme configuration");
            std::unordered_map<std::string, const TemplateRecord*> by_id;
            for (const auto& rec : enrolled.records) by_id.try_emplace(rec.identity_id, &rec);

            // Buffer everything; nothing is printed unless the whole run succeeds.
            std::string out = "identity_id,sample_id,score,decision\n";
            char buf[64];
            for (const auto& ident : ds.identities) {
                const auto it = by_id.find(ident.id);
                if (it == by_id.end())
                    throw IoError("no enrolled template for identity '" + ident.id + "'");
                const auto mat = make_material(identity_key(UserKey{cfg.key_seed}, ident.id),
                                               cfg.scheme, ds.dim);
                for (std::size_t s = 0; s < ident.samples.size(); ++s) {
                    const double score =
                        hamming_score(it->second->tpl, protect_with(ident.samples[s], mat, cfg.scheme));
                    std::snprintf(buf, sizeof(buf), "%.17g", score);
                    out += ident.id + "," + ident.sample_ids[s] + "," + buf + "," +
                           (score > cfg.decision_threshold ? "accept" : "reject") + "\n";
                }
            }
            std::cout << out;
        });
    }

    if (acc_cmd->parsed()) {
        return guarded([&] {
            RunConfig cfg = acc_flags.resolve(acc_cmd);
            if (acc_cmd->count("--trials")) cfg.trials = acc_trials;
            if (acc_cmd->count("--fmr")) cfg.target_fmr = acc_fmr;
            cfg.validate();
            const auto ds = dataset_from_config(cfg);
            std::vector<ScoreSet> kept;
            auto* keep = acc_scores.empty() ? nullptr : &kept;
            const auto rep = run_verification_experiment(ds, cfg.scheme, cfg.scenario, cfg.trials,
                                                         UserKey{cfg.key_seed}, cfg.target_fmr,
                                                         keep);
            std::size_t impostors_per_trial = 0;
            for (const auto& ident : ds.identities)
                impostors_per_trial +=
                    (ident.samples.size() - 1) * (ds.identities.size() - 1);
            warn_if_fmr_unreliable(impostors_per_trial, cfg.target_fmr);
            const std::string name =
                "accuracy_" + rep.scheme + "_" + rep.scenario + ".json";
            write_report_json(cfg, name, tmr_report_json(rep), acc_overwrite);
            if (keep) {
                std::vector<ScoreRow> rows;
                for (int t = 0; t < static_cast<int>(kept.size()); ++t)
                    append_score_rows(rows, t, kept[static_cast<std::size_t>(t)]);
                save_scores_csv(rows, acc_scores, acc_overwrite);
            }
            std::cout << rep.scheme << " " << rep.scenario << " TMR@FMR=" << cfg.target_fmr
                      << ": mean=" << rep.tmr_mean << " std=" << rep.tmr_std << " -> "
                      << report_path(cfg, name) << "\n";
        });
    }

    if (unlink_cmd->parsed()) {
        return guarded([&] {
            RunConfig cfg = unlink_flags.resolve(unlink_cmd);
            if (unlink_cmd->count("--bins")) cfg.bins = unlink_bins;
            if (unlink_cmd->count("--omega")) cfg.omega = unlink_omega;
            if (unlink_cmd->count("--keys-per-subject")) cfg.keys_per_subject = unlink_keys;
            cfg.validate();
            const auto ds = dataset_from_config(cfg);
            const auto scores =
                collect_linkage_scores(ds, cfg.scheme, cfg.keys_per_subject, UserKey{cfg.key_seed});
            const auto rep = unlinkability_report(scores, cfg.omega, cfg.bins);
            const std::string name = "unlinkability_" + scheme_name(cfg.scheme.kind) + ".json";
            write_report_json(cfg, name, unlinkability_report_json(rep), unlink_overwrite);
            if (!unlink_scores.empty()) {
                std::vector<ScoreRow> rows;
                append_score_rows(rows, 0, scores);
                save_scores_csv(rows, unlink_scores, unlink_overwrite);
            }
            std::cout << scheme_name(cfg.scheme.kind) << " D_sys=" << rep.d_sys << " -> "
                      << report_path(cfg, name) << "\n";
        });
    }

    if (irrev_cmd->parsed()) {
        return guarded([&] {
            RunConfig cfg = irrev_flags.resolve(irrev_cmd);
            if (irrev_cmd->count("--victims")) cfg.attack.n_victims = irrev_victims;
            if (irrev_cmd->count("--starts")) cfg.attack.n_starts = irrev_starts;
            if (irrev_cmd->count("--max-evals")) cfg.attack.max_evals = irrev_evals;
            if (irrev_cmd->count("--attack-seed")) cfg.attack.seed = irrev_seed;
            if (irrev_linear) cfg.attack.linear_sanity = true;
            cfg.validate();
            const auto ds = dataset_from_config(cfg);
            const auto rep = success_attack_rate(ds, cfg.scheme, cfg.attack);
            const std::string name = "irreversibility_" + rep.scheme + ".json";
            write_report_json(cfg, name, attack_report_json(rep), irrev_overwrite);
            std::cout << rep.scheme << " SAR:";
            for (std::size_t p = 0; p < rep.sar.size(); ++p)
                std::cout << " " << rep.sar[p] << "@" << rep.config.fmr_points[p];
            std::cout << " -> " << report_path(cfg, name) << "\n";
        });
    }

    if (bench_cmd->parsed()) {
        return guarded([&] {
            RunConfig cfg = bench_flags.resolve(bench_cmd);
            if (bench_cmd->count("--dim")) cfg.bench_dim = bench_dim;
            if (bench_cmd->count("--trials")) cfg.bench_trials = bench_trials;
            if (bench_cmd->count("--warmup")) cfg.bench_warmup = bench_warmup;
            cfg.validate();
            std::vector<SchemeConfig> schemes;
            for (const auto kind : {SchemeKind::MlpHash, SchemeKind::BioHash, SchemeKind::IomGrp,
                                    SchemeKind::IomUrp}) {
                SchemeConfig s = cfg.scheme;
                s.kind = kind;
                schemes.push_back(s);
            }
            const auto rows = timing_benchmark(schemes, cfg.bench_dim, cfg.bench_trials,
                                               cfg.bench_warmup, UserKey{cfg.key_seed});
            write_text_file(report_path(cfg, "bench.csv"), bench_csv(rows), bench_overwrite);
            write_text_file(report_path(cfg, "bench_config.json"),
                            nlohmann::json{{"config", cfg.to_json()}}.dump(2) + "\n",
                            bench_overwrite);
            for (const auto& r : rows)
                std::cout << r.scheme << ": " << r.mean_ms << " ms (std " << r.std_ms << ", "
                          << r.trials << " trials)\n";
            std::cout << "-> " << report_path(cfg, "bench.csv") << "\n";
        });
    }

    return 0;
}
