#pragma once

#include "mlphash/attack.hpp"
#include "mlphash/eval.hpp"
#include "mlphash/protocol.hpp"
#include "mlphash/schemes.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mlphash {

/// Template file format (greppable yet compact):
///   # scheme=<name> length=<L> digest=<16 hex digits>
///   <identity_id>,<sample_id>,<payload>
/// Bit templates carry the payload as one hex string, most significant nibble
/// first (bit 0 of the template is the high bit of the first hex digit; unused
/// pad bits in the last digit must be zero). Index templates carry L
/// comma-separated integers instead. Identity and sample ids must be free of
/// commas and line breaks.
struct TemplateRecord {
    std::string identity_id;
    std::string sample_id;
    ProtectedTemplate tpl;
};

struct TemplateFile {
    SchemeKind scheme = SchemeKind::MlpHash;
    Index length = 0;
    std::uint64_t digest = 0;
    std::vector<TemplateRecord> records;
};

void save_templates(const TemplateFile& file, const std::string& path, bool overwrite = false);
TemplateFile load_templates(const std::string& path);

std::string bits_to_hex(const ProtectedTemplate& t);
/// Parses into a template of make_bits shape; throws ParseError on bad digits,
/// wrong length, or nonzero padding.
void hex_to_bits(std::string_view hex, ProtectedTemplate& t, std::size_t line_no);

/// Score file CSV: header `trial,label,score`, labels in
/// {genuine, impostor, mated, nonmated}.
struct ScoreRow {
    int trial = 0;
    std::string label;
    double score = 0.0;
};
void append_score_rows(std::vector<ScoreRow>& rows, int trial, const ScoreSet& scores);
void save_scores_csv(const std::vector<ScoreRow>& rows, const std::string& path,
                     bool overwrite = false);

nlohmann::json unlinkability_report_json(const UnlinkabilityReport& rep);
nlohmann::json tmr_report_json(const TmrReport& rep);
nlohmann::json attack_report_json(const AttackReport& rep);
std::string bench_csv(const std::vector<BenchRow>& rows);

/// One structured config file drives every command; command-line flags
/// override individual fields after loading. Unknown keys are rejected.
struct RunConfig {
    SchemeConfig scheme;
    std::optional<SynthParams> synth;  // dataset.synth
    std::string dataset_csv;           // dataset.csv; exclusive with synth
    Scenario scenario = Scenario::Normal;
    std::uint64_t key_seed = 1;
    // eval
    int bins = 100;
    double omega = 1.0;
    double target_fmr = 1e-3;
    int trials = 10;
    int keys_per_subject = 10;
    double decision_threshold = 0.5;
    // attack (attack.distribution is always derived from the dataset)
    AttackConfig attack;
    // bench
    Index bench_dim = 128;
    int bench_trials = 100;
    int bench_warmup = 10;
    std::string output_dir = "out";

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    void validate() const;
};

RunConfig load_run_config(const std::string& path);
IdentityDataset dataset_from_config(const RunConfig& cfg);

/// Refuses to overwrite unless asked; creates parent directories.
void write_text_file(const std::string& path, const std::string& content,
                     bool overwrite = false);

}  // namespace mlphash
