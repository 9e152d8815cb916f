#include <doctest.h>

#include "mlphash/dataio.hpp"

#include <filesystem>
#include <fstream>

using namespace mlphash;
using nlohmann::json;

namespace {

std::string temp_path(const std::string& tag) {
    static int counter = 0;
    return (std::filesystem::temp_directory_path() /
            ("mlphash_dataio_" + tag + "_" + std::to_string(++counter)))
        .string();
}

struct FileGuard {
    std::string path;
    ~FileGuard() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("bits_to_hex: most significant nibble first") {
    auto t = ProtectedTemplate::make_bits(SchemeKind::BioHash, 8, 0);
    t.set_bit(0, true);  // high bit of the first nibble
    CHECK(bits_to_hex(t) == "80");
    t.set_bit(4, true);
    CHECK(bits_to_hex(t) == "88");
    t.set_bit(7, true);
    CHECK(bits_to_hex(t) == "89");

    auto odd = ProtectedTemplate::make_bits(SchemeKind::BioHash, 5, 0);
    odd.set_bit(4, true);  // last bit of a 5-bit template: second nibble, high bit
    CHECK(bits_to_hex(odd) == "08");
}

TEST_CASE("hex_to_bits round-trips and validates") {
    auto t = ProtectedTemplate::make_bits(SchemeKind::MlpHash, 13, 7);
    t.set_bit(0, true);
    t.set_bit(6, true);
    t.set_bit(12, true);
    const auto hex = bits_to_hex(t);
    CHECK(hex.size() == 4);  // ceil(13/4) nibbles

    auto back = ProtectedTemplate::make_bits(SchemeKind::MlpHash, 13, 7);
    hex_to_bits(hex, back, 1);
    CHECK(back == t);

    auto bad = ProtectedTemplate::make_bits(SchemeKind::MlpHash, 13, 7);
    CHECK_THROWS_AS(hex_to_bits("abc", bad, 1), ParseError);      // too short
    CHECK_THROWS_AS(hex_to_bits("abcde", bad, 1), ParseError);    // too long
    CHECK_THROWS_AS(hex_to_bits("zzzz", bad, 1), ParseError);     // bad digit
    CHECK_THROWS_AS(hex_to_bits("ffff", bad, 1), ParseError);     // nonzero padding
    CHECK_NOTHROW(hex_to_bits("fff8", bad, 1));                   // 13 bits set, pad clear
}

TEST_CASE("template file round-trip for bit templates") {
    SchemeConfig cfg;
    const Index d = 16;
    TemplateFile tf;
    tf.scheme = cfg.kind;
    tf.length = cfg.output_length(d);
    tf.digest = cfg.params_digest(d);
    SeededStream s(UserKey{3}, 500);
    for (int i = 0; i < 5; ++i) {
        Vector u(d);
        s.fill_normal(u);
        tf.records.push_back({"id-" + std::to_string(i), "s0",
                              protect(u, UserKey{static_cast<std::uint64_t>(i)}, cfg)});
    }
    const auto path = temp_path("bits");
    FileGuard guard{path};
    save_templates(tf, path);
    const auto back = load_templates(path);
    CHECK(back.scheme == tf.scheme);
    CHECK(back.length == tf.length);
    CHECK(back.digest == tf.digest);
    REQUIRE(back.records.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(back.records[i].identity_id == tf.records[i].identity_id);
        CHECK(back.records[i].sample_id == tf.records[i].sample_id);
        CHECK(back.records[i].tpl == tf.records[i].tpl);
    }
}

TEST_CASE("template file round-trip for index templates") {
    SchemeConfig cfg;
    cfg.kind = SchemeKind::IomGrp;
    const Index d = 8;
    TemplateFile tf;
    tf.scheme = cfg.kind;
    tf.length = cfg.output_length(d);
    tf.digest = cfg.params_digest(d);
    SeededStream s(UserKey{4}, 501);
    Vector u(d);
    s.fill_normal(u);
    tf.records.push_back({"alice", "x", protect(u, UserKey{9}, cfg)});
    const auto path = temp_path("indices");
    FileGuard guard{path};
    save_templates(tf, path);
    const auto back = load_templates(path);
    REQUIRE(back.records.size() == 1);
    CHECK(back.records[0].tpl == tf.records[0].tpl);
    CHECK(back.records[0].tpl.indices == tf.records[0].tpl.indices);
}

TEST_CASE("save_templates enforces record consistency and overwrite policy") {
    SchemeConfig cfg;
    const Index d = 8;
    TemplateFile tf;
    tf.scheme = cfg.kind;
    tf.length = cfg.output_length(d);
    tf.digest = cfg.params_digest(d);
    tf.records.push_back({"a", "s0", protect(Vector::Ones(d), UserKey{1}, cfg)});

    const auto path = temp_path("policy");
    FileGuard guard{path};
    save_templates(tf, path);
    CHECK_THROWS_AS(save_templates(tf, path), IoError);
    CHECK_NOTHROW(save_templates(tf, path, true));

    TemplateFile bad = tf;
    SchemeConfig other;
    other.kind = SchemeKind::BioHash;
    bad.records.push_back({"b", "s0", protect(Vector::Ones(d), UserKey{1}, other)});
    CHECK_THROWS_AS(save_templates(bad, path, true), SchemeMismatch);

    TemplateFile comma = tf;
    comma.records[0].identity_id = "a,b";
    CHECK_THROWS_AS(save_templates(comma, path, true), InvalidParameter);
}

TEST_CASE("load_templates rejects malformed files") {
    const auto path = temp_path("malformed");
    FileGuard guard{path};
    auto write = [&](const std::string& text) { std::ofstream(path) << text; };

    write("no header\n");
    CHECK_THROWS_AS(load_templates(path), ParseError);

    write("# scheme=mlp-hash length=8 digest=zz\nid,s0,00\n");
    CHECK_THROWS_AS(load_templates(path), ParseError);

    write("# scheme=nosuch length=8 digest=0000000000000000\nid,s0,00\n");
    CHECK_THROWS_AS(load_templates(path), ParseError);

    write("# scheme=mlp-hash length=8 digest=0000000000000000\nid,s0\n");
    CHECK_THROWS_AS(load_templates(path), ParseError);

    write("# scheme=mlp-hash length=8 digest=0000000000000000\nid,s0,ff,aa\n");
    CHECK_THROWS_AS(load_templates(path), ParseError);

    write("# scheme=iom-grp length=3 digest=0000000000000000\nid,s0,1,2\n");
    CHECK_THROWS_AS(load_templates(path), ParseError);

    CHECK_THROWS_AS(load_templates("/nonexistent/nowhere.tpl"), IoError);
}

TEST_CASE("score CSV writer") {
    ScoreSet s;
    s.add_similarity(ScoreSet::Label::Genuine, 0.75);
    s.add_similarity(ScoreSet::Label::Impostor, 0.25);
    s.add_similarity(ScoreSet::Label::Mated, 1.0);
    s.add_similarity(ScoreSet::Label::NonMated, 0.5);
    std::vector<ScoreRow> rows;
    append_score_rows(rows, 2, s);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].label == "genuine");
    CHECK(rows[1].label == "impostor");
    CHECK(rows[2].label == "mated");
    CHECK(rows[3].label == "nonmated");

    const auto path = temp_path("scores");
    FileGuard guard{path};
    save_scores_csv(rows, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "trial,label,score");
    std::getline(in, line);
    CHECK(line == "2,genuine,0.75");
    CHECK_THROWS_AS(save_scores_csv(rows, path), IoError);
}

TEST_CASE("report JSON shapes") {
    UnlinkabilityReport u;
    u.score_grid = {0.1, 0.2};
    u.local_measure = {0.0, 1.0};
    u.d_sys = 0.25;
    u.omega = 2.0;
    u.bins = 10;
    const json ju = unlinkability_report_json(u);
    CHECK(ju["d_sys"] == doctest::Approx(0.25));
    CHECK(ju["omega"] == doctest::Approx(2.0));
    CHECK(ju["bins"] == 10);
    CHECK(ju["score_grid"].size() == 2);
    CHECK(ju["local_measure"][1] == doctest::Approx(1.0));

    TmrReport t;
    t.scheme = "biohash";
    t.scenario = "stolen";
    t.fmr = 1e-2;
    t.trials = 2;
    t.per_trial_tmr = {0.9, 1.0};
    t.per_trial_threshold = {0.5, 0.6};
    t.tmr_mean = 0.95;
    t.tmr_std = 0.05;
    const json jt = tmr_report_json(t);
    CHECK(jt["scheme"] == "biohash");
    CHECK(jt["scenario"] == "stolen");
    CHECK(jt["per_trial_tmr"].size() == 2);
    CHECK(jt["tmr_mean"] == doctest::Approx(0.95));

    BenchRow r;
    r.scheme = "mlp-hash";
    r.mean_ms = 1.5;   // exactly representable, so the round-trip
    r.std_ms = 0.25;   // formatter prints the short form
    r.trials = 100;
    r.warmup = 10;
    const auto csv = bench_csv({r});
    CHECK(csv.rfind("scheme,mean_ms,std_ms,trials,warmup\n", 0) == 0);
    CHECK(csv.find("mlp-hash,1.5,0.25,100,10\n") != std::string::npos);
}

TEST_CASE("attack report JSON embeds config and resolved budget") {
    AttackReport rep;
    rep.scheme = "mlp-hash";
    rep.dim = 16;
    rep.config.n_starts = 2;
    rep.config.fmr_points = {1e-2};
    rep.thresholds = {0.4};
    rep.sar = {0.5};
    AttackResult v;
    v.victim_id = "alice";
    v.converged = {true, false};
    v.final_loss = {0.0, 2.5};
    v.success = {true};
    v.evals_used = 123;
    rep.victims.push_back(v);
    const json j = attack_report_json(rep);
    CHECK(j["scheme"] == "mlp-hash");
    CHECK(j["config"]["n_starts"] == 2);
    CHECK(j["config"]["max_evals_per_start"] == 2000 * 16);
    CHECK(j["sar"][0] == doctest::Approx(0.5));
    CHECK(j["victims"][0]["victim_id"] == "alice");
    CHECK(j["victims"][0]["converged"][0] == true);
    CHECK(j["victims"][0]["unprotected_similarity"].is_null());
}

TEST_CASE("RunConfig JSON round-trip") {
    RunConfig cfg;
    cfg.scheme.kind = SchemeKind::IomUrp;
    cfg.scheme.iom_window = 8;
    cfg.scenario = Scenario::Stolen;
    cfg.key_seed = 99;
    cfg.bins = 40;
    cfg.trials = 3;
    cfg.synth = SynthParams{20, 4, 64, 0.1, 7};
    cfg.attack.n_starts = 5;
    cfg.output_dir = "results";
    const auto j = cfg.to_json();
    const auto back = RunConfig::from_json(j);
    CHECK(back.scheme.kind == SchemeKind::IomUrp);
    CHECK(back.scheme.iom_window == 8);
    CHECK(back.scenario == Scenario::Stolen);
    CHECK(back.key_seed == 99);
    CHECK(back.bins == 40);
    CHECK(back.trials == 3);
    REQUIRE(back.synth.has_value());
    CHECK(back.synth->n_identities == 20);
    CHECK(back.synth->dim == 64);
    CHECK(back.attack.n_starts == 5);
    CHECK(back.output_dir == "results");
    CHECK(back.to_json() == j);
}

TEST_CASE("RunConfig parsing rejects unknown keys and bad shapes") {
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"shceme":{}})")), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"scheme":{"knid":"mlp-hash"}})")),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"scheme":{"kind":"bogus"}})")),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"key_seed":"not a number"})")),
                    ConfigError);
    CHECK_THROWS_AS(
        RunConfig::from_json(json::parse(
            R"({"dataset":{"csv":"x.csv","synth":{"identities":4}}})")),
        ConfigError);
    CHECK_NOTHROW(RunConfig::from_json(json::parse(R"({})")));
    const auto cfg = RunConfig::from_json(json::parse(R"({"dataset":{"csv":"x.csv"}})"));
    CHECK(cfg.dataset_csv == "x.csv");
    CHECK(!cfg.synth.has_value());
}

TEST_CASE("RunConfig validation bounds") {
    RunConfig cfg;
    cfg.synth = SynthParams{};
    CHECK_NOTHROW(cfg.validate());
    cfg.bins = 9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.synth = SynthParams{};
    cfg.target_fmr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.target_fmr = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.synth = SynthParams{};
    cfg.keys_per_subject = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.synth = SynthParams{};
    cfg.trials = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.synth = SynthParams{};
    cfg.bench_trials = 9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.synth = SynthParams{};
    cfg.attack.n_starts = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("load_run_config error mapping") {
    const auto path = temp_path("cfg");
    FileGuard guard{path};
    std::ofstream(path) << "{not json";
    CHECK_THROWS_AS(load_run_config(path), ConfigError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_run_config(path), IoError);
    std::ofstream(path) << R"({"eval": {"trials": 5}})";
    CHECK(load_run_config(path).trials == 5);
}

TEST_CASE("dataset_from_config resolves synth or csv") {
    RunConfig cfg;
    cfg.synth = SynthParams{3, 2, 8, 0.1, 5};
    const auto ds = dataset_from_config(cfg);
    CHECK(ds.n_identities() == 3);
    CHECK(ds.dim == 8);

    const auto path = temp_path("ds");
    FileGuard guard{path};
    save_embeddings_csv(ds, path);
    RunConfig file_cfg;
    file_cfg.synth.reset();
    file_cfg.dataset_csv = path;
    const auto loaded = dataset_from_config(file_cfg);
    CHECK(loaded.n_identities() == 3);
    CHECK(!loaded.synth_origin.has_value());
}

TEST_CASE("write_text_file policy") {
    const auto dir = temp_path("nested");
    FileGuard guard{dir};
    const auto path = dir + "/sub/file.txt";
    write_text_file(path, "hello\n");
    CHECK(std::filesystem::exists(path));
    CHECK_THROWS_AS(write_text_file(path, "again\n"), IoError);
    CHECK_NOTHROW(write_text_file(path, "again\n", true));
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "again");
}
