#include "mlphash/dataio.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace mlphash {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string hex16(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

void require_plain_id(const std::string& id, const char* what) {
    if (id.empty() || id.find(',') != std::string::npos || id.find('\n') != std::string::npos ||
        id.find('\r') != std::string::npos)
        throw InvalidParameter(std::string(what) + " must be nonempty and free of commas/newlines");
}

}  // namespace

void write_text_file(const std::string& path, const std::string& content, bool overwrite) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (!overwrite && fs::exists(p)) throw IoError("refusing to overwrite existing file: " + path);
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + p.parent_path().string());
    }
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

std::string bits_to_hex(const ProtectedTemplate& t) {
    if (!t.is_bits()) throw InvalidParameter("bits_to_hex: not a bit template");
    static const char* digits = "0123456789abcdef";
    std::string hex(static_cast<std::size_t>((t.length + 3) / 4), '0');
    for (Index i = 0; i < t.length; ++i) {
        if (!t.bit(i)) continue;
        auto& c = hex[static_cast<std::size_t>(i / 4)];
        const int v = (c <= '9' ? c - '0' : c - 'a' + 10) | (1 << (3 - (i % 4)));
        c = digits[v];
    }
    return hex;
}

void hex_to_bits(std::string_view hex, ProtectedTemplate& t, std::size_t line_no) {
    const auto want = static_cast<std::size_t>((t.length + 3) / 4);
    if (hex.size() != want)
        throw ParseError("expected " + std::to_string(want) + " hex digits, got " +
                             std::to_string(hex.size()),
                         static_cast<long>(line_no));
    for (std::size_t n = 0; n < hex.size(); ++n) {
        const char c = hex[n];
        int v;
        if (c >= '0' && c <= '9')
            v = c - '0';
        else if (c >= 'a' && c <= 'f')
            v = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F')
            v = c - 'A' + 10;
        else
            throw ParseError(std::string("invalid hex digit '") + c + "'",
                             static_cast<long>(line_no));
        for (int b = 0; b < 4; ++b) {
            const auto i = static_cast<Index>(4 * n + static_cast<std::size_t>(b));
            const bool bit = (v >> (3 - b)) & 1;
            if (i >= t.length) {
                if (bit)
                    throw ParseError("nonzero padding bits past the template length",
                                     static_cast<long>(line_no));
                continue;
            }
            t.set_bit(i, bit);
        }
    }
}

void save_templates(const TemplateFile& file, const std::string& path, bool overwrite) {
    std::ostringstream out;
    out << "# scheme=" << scheme_name(file.scheme) << " length=" << file.length
        << " digest=" << hex16(file.digest) << "\n";
    for (const auto& rec : file.records) {
        require_plain_id(rec.identity_id, "identity_id");
        require_plain_id(rec.sample_id, "sample_id");
        if (rec.tpl.scheme != file.scheme || rec.tpl.length != file.length ||
            rec.tpl.params_digest != file.digest)
            throw SchemeMismatch("save_templates: record does not match the file header");
        out << rec.identity_id << ',' << rec.sample_id << ',';
        if (rec.tpl.is_bits()) {
            out << bits_to_hex(rec.tpl);
        } else {
            for (std::size_t i = 0; i < rec.tpl.indices.size(); ++i)
                out << (i ? "," : "") << rec.tpl.indices[i];
        }
        out << '\n';
    }
    write_text_file(path, out.str(), overwrite);
}

TemplateFile load_templates(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open template file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty template file", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    TemplateFile file;
    {
        std::string scheme_str;
        long long length = -1;
        std::string digest_str;
        std::istringstream hs(line);
        std::string tag, kv;
        hs >> tag;
        if (tag != "#") throw ParseError("expected '# scheme=... length=... digest=...' header", 1);
        while (hs >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ParseError("malformed header field '" + kv + "'", 1);
            const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            if (key == "scheme")
                scheme_str = val;
            else if (key == "length")
                length = std::strtoll(val.c_str(), nullptr, 10);
            else if (key == "digest")
                digest_str = val;
            else
                throw ParseError("unknown header field '" + key + "'", 1);
        }
        const auto kind = scheme_from_name(scheme_str);
        if (!kind) throw ParseError("unknown scheme '" + scheme_str + "' in header", 1);
        if (length < 1) throw ParseError("missing or invalid template length in header", 1);
        if (digest_str.size() != 16) throw ParseError("digest must be 16 hex digits", 1);
        std::uint64_t digest = 0;
        const auto [p, ec] =
            std::from_chars(digest_str.data(), digest_str.data() + 16, digest, 16);
        if (ec != std::errc() || p != digest_str.data() + 16)
            throw ParseError("digest must be 16 hex digits", 1);
        file.scheme = *kind;
        file.length = static_cast<Index>(length);
        file.digest = digest;
    }

    const bool bits = file.scheme == SchemeKind::MlpHash || file.scheme == SchemeKind::BioHash;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_commas(line);
        if (fields.size() < 3)
            throw ParseError("expected identity_id,sample_id,<payload>",
                             static_cast<long>(line_no));
        TemplateRecord rec;
        rec.identity_id = fields[0];
        rec.sample_id = fields[1];
        if (rec.identity_id.empty() || rec.sample_id.empty())
            throw ParseError("empty identity or sample id", static_cast<long>(line_no));
        if (bits) {
            if (fields.size() != 3)
                throw ParseError("bit templates carry exactly one payload field",
                                 static_cast<long>(line_no));
            rec.tpl = ProtectedTemplate::make_bits(file.scheme, file.length, file.digest);
            hex_to_bits(fields[2], rec.tpl, line_no);
        } else {
            if (fields.size() != static_cast<std::size_t>(file.length) + 2)
                throw ParseError("expected " + std::to_string(file.length) + " indices, got " +
                                     std::to_string(fields.size() - 2),
                                 static_cast<long>(line_no));
            rec.tpl.scheme = file.scheme;
            rec.tpl.length = file.length;
            rec.tpl.params_digest = file.digest;
            rec.tpl.indices.reserve(static_cast<std::size_t>(file.length));
            for (std::size_t i = 2; i < fields.size(); ++i) {
                std::uint32_t v = 0;
                const auto& f = fields[i];
                const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v, 10);
                if (ec != std::errc() || p != f.data() + f.size() || f.empty())
                    throw ParseError("invalid index '" + f + "'", static_cast<long>(line_no));
                rec.tpl.indices.push_back(v);
            }
        }
        file.records.push_back(std::move(rec));
    }
    return file;
}

void append_score_rows(std::vector<ScoreRow>& rows, int trial, const ScoreSet& scores) {
    for (double s : scores.genuine) rows.push_back({trial, "genuine", s});
    for (double s : scores.impostor) rows.push_back({trial, "impostor", s});
    for (double s : scores.mated) rows.push_back({trial, "mated", s});
    for (double s : scores.non_mated) rows.push_back({trial, "nonmated", s});
}

void save_scores_csv(const std::vector<ScoreRow>& rows, const std::string& path, bool overwrite) {
    std::ostringstream out;
    out << "trial,label,score\n";
    for (const auto& r : rows) out << r.trial << ',' << r.label << ',' << fmt_double(r.score) << '\n';
    write_text_file(path, out.str(), overwrite);
}

nlohmann::json unlinkability_report_json(const UnlinkabilityReport& rep) {
    return json{{"d_sys", rep.d_sys},
                {"omega", rep.omega},
                {"bins", rep.bins},
                {"score_grid", rep.score_grid},
                {"local_measure", rep.local_measure}};
}

nlohmann::json tmr_report_json(const TmrReport& rep) {
    return json{{"scheme", rep.scheme},
                {"scenario", rep.scenario},
                {"fmr", rep.fmr},
                {"trials", rep.trials},
                {"tmr_mean", rep.tmr_mean},
                {"tmr_std", rep.tmr_std},
                {"per_trial_tmr", rep.per_trial_tmr},
                {"per_trial_threshold", rep.per_trial_threshold}};
}

nlohmann::json attack_report_json(const AttackReport& rep) {
    json victims = json::array();
    for (const auto& v : rep.victims) {
        json jv{{"victim_id", v.victim_id},
                {"converged", v.converged},
                {"final_loss", v.final_loss},
                {"success", v.success},
                {"evals_used", v.evals_used}};
        if (v.unprotected_similarity)
            jv["unprotected_similarity"] = *v.unprotected_similarity;
        else
            jv["unprotected_similarity"] = nullptr;
        victims.push_back(std::move(jv));
    }
    const auto& c = rep.config;
    return json{{"scheme", rep.scheme},
                {"dim", rep.dim},
                {"config",
                 {{"n_starts", c.n_starts},
                  {"max_evals_per_start", c.evals(rep.dim)},
                  {"loss_tolerance", c.loss_tolerance},
                  {"margin", c.margin},
                  {"fmr_points", c.fmr_points},
                  {"n_victims", c.n_victims},
                  {"seed", c.seed},
                  {"linear_sanity", c.linear_sanity}}},
                {"fmr_points", c.fmr_points},
                {"thresholds", rep.thresholds},
                {"sar", rep.sar},
                {"victims", std::move(victims)}};
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "scheme,mean_ms,std_ms,trials,warmup\n";
    for (const auto& r : rows)
        out << r.scheme << ',' << fmt_double(r.mean_ms) << ',' << fmt_double(r.std_ms) << ','
            << r.trials << ',' << r.warmup << '\n';
    return out.str();
}

namespace {

void check_keys(const json& j, const char* ctx,
                std::initializer_list<std::string_view> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const auto a : allowed)
            if (it.key() == a) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("unknown key '" + it.key() + "' in " + ctx);
    }
}

const json& expect_object(const json& j, const char* ctx) {
    if (!j.is_object()) throw ConfigError(std::string(ctx) + " must be a JSON object");
    return j;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const char* ctx) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "' in " + ctx);
    }
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
    json scheme_j{{"kind", scheme_name(scheme.kind)},
                  {"mlp_hidden_layers", scheme.mlp_hidden_layers},
                  {"mlp_hidden_width", scheme.mlp_hidden_width},
                  {"mlp_output_length", scheme.mlp_output_length},
                  {"mlp_activation_on_output", scheme.mlp_activation_on_output},
                  {"biohash_length", scheme.biohash_length},
                  {"iom_m", scheme.iom_m},
                  {"iom_q", scheme.iom_q},
                  {"iom_window", scheme.iom_window}};
    json dataset_j;
    if (synth) {
        dataset_j["synth"] = json{{"identities", synth->n_identities},
                                  {"samples", synth->samples_per_identity},
                                  {"dim", synth->dim},
                                  {"sigma", synth->within_sigma},
                                  {"seed", synth->seed}};
    } else {
        dataset_j["csv"] = dataset_csv;
    }
    return json{{"scheme", std::move(scheme_j)},
                {"dataset", std::move(dataset_j)},
                {"scenario", scenario_name(scenario)},
                {"key_seed", key_seed},
                {"eval",
                 {{"bins", bins},
                  {"omega", omega},
                  {"target_fmr", target_fmr},
                  {"trials", trials},
                  {"keys_per_subject", keys_per_subject},
                  {"decision_threshold", decision_threshold}}},
                {"attack",
                 {{"n_starts", attack.n_starts},
                  {"max_evals", attack.max_evals},
                  {"loss_tolerance", attack.loss_tolerance},
                  {"margin", attack.margin},
                  {"fmr_points", attack.fmr_points},
                  {"n_victims", attack.n_victims},
                  {"seed", attack.seed},
                  {"linear_sanity", attack.linear_sanity}}},
                {"bench",
                 {{"dim", bench_dim}, {"trials", bench_trials}, {"warmup", bench_warmup}}},
                {"output_dir", output_dir}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    expect_object(j, "config");
    check_keys(j, "config",
               {"scheme", "dataset", "scenario", "key_seed", "eval", "attack", "bench",
                "output_dir"});
    RunConfig cfg;

    if (j.contains("scheme")) {
        const auto& s = expect_object(j.at("scheme"), "scheme");
        check_keys(s, "scheme",
                   {"kind", "mlp_hidden_layers", "mlp_hidden_width", "mlp_output_length",
                    "mlp_activation_on_output", "biohash_length", "iom_m", "iom_q", "iom_window"});
        const auto kind_name = get_or<std::string>(s, "kind", "mlp-hash", "scheme");
        const auto kind = scheme_from_name(kind_name);
        if (!kind) throw ConfigError("unknown scheme kind '" + kind_name + "'");
        cfg.scheme.kind = *kind;
        cfg.scheme.mlp_hidden_layers = get_or(s, "mlp_hidden_layers", 3, "scheme");
        cfg.scheme.mlp_hidden_width = get_or<Index>(s, "mlp_hidden_width", 0, "scheme");
        cfg.scheme.mlp_output_length = get_or<Index>(s, "mlp_output_length", 0, "scheme");
        cfg.scheme.mlp_activation_on_output =
            get_or(s, "mlp_activation_on_output", true, "scheme");
        cfg.scheme.biohash_length = get_or<Index>(s, "biohash_length", 0, "scheme");
        cfg.scheme.iom_m = get_or(s, "iom_m", 0, "scheme");
        cfg.scheme.iom_q = get_or(s, "iom_q", 16, "scheme");
        cfg.scheme.iom_window = get_or(s, "iom_window", 16, "scheme");
    }

    if (j.contains("dataset")) {
        const auto& d = expect_object(j.at("dataset"), "dataset");
        check_keys(d, "dataset", {"synth", "csv"});
        if (d.contains("synth") && d.contains("csv"))
            throw ConfigError("dataset: give either 'synth' or 'csv', not both");
        if (d.contains("csv")) {
            cfg.synth.reset();
            cfg.dataset_csv = get_or<std::string>(d, "csv", "", "dataset");
            if (cfg.dataset_csv.empty()) throw ConfigError("dataset.csv must be a nonempty path");
        } else if (d.contains("synth")) {
            const auto& sy = expect_object(d.at("synth"), "dataset.synth");
            check_keys(sy, "dataset.synth", {"identities", "samples", "dim", "sigma", "seed"});
            SynthParams p;
            p.n_identities = get_or(sy, "identities", p.n_identities, "dataset.synth");
            p.samples_per_identity = get_or(sy, "samples", p.samples_per_identity, "dataset.synth");
            p.dim = get_or<Index>(sy, "dim", p.dim, "dataset.synth");
            p.within_sigma = get_or(sy, "sigma", p.within_sigma, "dataset.synth");
            p.seed = get_or<std::uint64_t>(sy, "seed", p.seed, "dataset.synth");
            cfg.synth = p;
        }
    } else {
        cfg.synth = SynthParams{};
    }

    if (j.contains("scenario")) {
        const auto name = get_or<std::string>(j, "scenario", "normal", "config");
        const auto sc = scenario_from_name(name);
        if (!sc) throw ConfigError("unknown scenario '" + name + "'");
        cfg.scenario = *sc;
    }
    cfg.key_seed = get_or<std::uint64_t>(j, "key_seed", cfg.key_seed, "config");

    if (j.contains("eval")) {
        const auto& e = expect_object(j.at("eval"), "eval");
        check_keys(e, "eval",
                   {"bins", "omega", "target_fmr", "trials", "keys_per_subject",
                    "decision_threshold"});
        cfg.bins = get_or(e, "bins", cfg.bins, "eval");
        cfg.omega = get_or(e, "omega", cfg.omega, "eval");
        cfg.target_fmr = get_or(e, "target_fmr", cfg.target_fmr, "eval");
        cfg.trials = get_or(e, "trials", cfg.trials, "eval");
        cfg.keys_per_subject = get_or(e, "keys_per_subject", cfg.keys_per_subject, "eval");
        cfg.decision_threshold = get_or(e, "decision_threshold", cfg.decision_threshold, "eval");
    }

    if (j.contains("attack")) {
        const auto& a = expect_object(j.at("attack"), "attack");
        check_keys(a, "attack",
                   {"n_starts", "max_evals", "loss_tolerance", "margin", "fmr_points",
                    "n_victims", "seed", "linear_sanity"});
        cfg.attack.n_starts = get_or(a, "n_starts", cfg.attack.n_starts, "attack");
        cfg.attack.max_evals = get_or<long>(a, "max_evals", cfg.attack.max_evals, "attack");
        cfg.attack.loss_tolerance =
            get_or(a, "loss_tolerance", cfg.attack.loss_tolerance, "attack");
        cfg.attack.margin = get_or(a, "margin", cfg.attack.margin, "attack");
        cfg.attack.fmr_points =
            get_or<std::vector<double>>(a, "fmr_points", cfg.attack.fmr_points, "attack");
        cfg.attack.n_victims = get_or(a, "n_victims", cfg.attack.n_victims, "attack");
        cfg.attack.seed = get_or<std::uint64_t>(a, "seed", cfg.attack.seed, "attack");
        cfg.attack.linear_sanity = get_or(a, "linear_sanity", cfg.attack.linear_sanity, "attack");
    }

    if (j.contains("bench")) {
        const auto& b = expect_object(j.at("bench"), "bench");
        check_keys(b, "bench", {"dim", "trials", "warmup"});
        cfg.bench_dim = get_or<Index>(b, "dim", cfg.bench_dim, "bench");
        cfg.bench_trials = get_or(b, "trials", cfg.bench_trials, "bench");
        cfg.bench_warmup = get_or(b, "warmup", cfg.bench_warmup, "bench");
    }

    cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir, "config");
    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (synth) {
        if (synth->n_identities < 1 || synth->samples_per_identity < 1 || synth->dim < 1)
            throw ConfigError("dataset.synth sizes must be positive");
        if (synth->within_sigma < 0.0 || !std::isfinite(synth->within_sigma))
            throw ConfigError("dataset.synth sigma must be finite and non-negative");
    } else if (dataset_csv.empty()) {
        throw ConfigError("config needs a dataset (synth parameters or a csv path)");
    }
    if (bins < 10) throw ConfigError("eval.bins must be >= 10");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("eval.omega must be positive");
    if (!(target_fmr > 0.0 && target_fmr < 1.0))
        throw ConfigError("eval.target_fmr must lie in (0, 1)");
    if (trials < 1) throw ConfigError("eval.trials must be >= 1");
    if (keys_per_subject < 2) throw ConfigError("eval.keys_per_subject must be >= 2");
    if (!std::isfinite(decision_threshold))
        throw ConfigError("eval.decision_threshold must be finite");
    try {
        attack.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("attack: ") + e.what());
    }
    if (bench_dim < 1) throw ConfigError("bench.dim must be >= 1");
    if (bench_trials < 10) throw ConfigError("bench.trials must be >= 10");
    if (bench_warmup < 0) throw ConfigError("bench.warmup must be >= 0");
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return RunConfig::from_json(j);
}

IdentityDataset dataset_from_config(const RunConfig& cfg) {
    if (cfg.synth) return synth_generate(*cfg.synth);
    return load_embeddings_csv(cfg.dataset_csv);
}

}  // namespace mlphash
