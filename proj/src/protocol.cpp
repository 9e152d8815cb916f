#include "mlphash/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

namespace mlphash {

void IdentityDataset::validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& ident : identities) {
        if (!seen.insert(ident.id).second)
            throw InvalidParameter("duplicate identity_id '" + ident.id + "'");
        if (ident.samples.empty())
            throw InvalidParameter("identity '" + ident.id + "' has no samples");
        if (ident.sample_ids.size() != ident.samples.size())
            throw InvalidParameter("identity '" + ident.id + "': sample_ids out of step");
        for (const auto& s : ident.samples) {
            if (s.size() != dim)
                throw DimensionMismatch("identity '" + ident.id + "': sample dimension " +
                                        std::to_string(s.size()) + " != " + std::to_string(dim));
            if (!all_finite(s)) throw NonFiniteInput("identity '" + ident.id + "'");
        }
    }
}

std::string scenario_name(Scenario s) { return s == Scenario::Normal ? "normal" : "stolen"; }

std::optional<Scenario> scenario_from_name(std::string_view name) {
    if (name == "normal") return Scenario::Normal;
    if (name == "stolen") return Scenario::Stolen;
    return std::nullopt;
}

IdentityDataset synth_generate(int n_identities, int samples_per_identity, Index d,
                               double within_sigma, UserKey seed) {
    if (n_identities < 2) throw InvalidParameter("synth_generate: need >= 2 identities");
    if (samples_per_identity < 1) throw InvalidParameter("synth_generate: need >= 1 sample");
    if (d < 2) throw InvalidParameter("synth_generate: need d >= 2");
    if (!(within_sigma > 0.0)) throw InvalidParameter("synth_generate: within_sigma must be > 0");

    SeededStream stream(seed, 0);
    IdentityDataset ds;
    ds.dim = d;
    ds.identities.resize(static_cast<std::size_t>(n_identities));
    Vector mean(d), noise(d);
    for (int i = 0; i < n_identities; ++i) {
        auto& ident = ds.identities[static_cast<std::size_t>(i)];
        char buf[32];
        std::snprintf(buf, sizeof(buf), "synth-%04d", i);
        ident.id = buf;
        stream.fill_normal(mean);
        mean.normalize();  // uniform on the unit hypersphere
        ident.samples.reserve(static_cast<std::size_t>(samples_per_identity));
        ident.sample_ids.reserve(static_cast<std::size_t>(samples_per_identity));
        for (int s = 0; s < samples_per_identity; ++s) {
            stream.fill_normal(noise);
            Vector x = mean + within_sigma * noise;
            const double n = x.norm();
            if (n == 0.0) throw DegenerateDraw("synth_generate: zero sample");  // probability 0
            ident.samples.push_back(x / n);
            ident.sample_ids.push_back("s" + std::to_string(s));
        }
    }
    ds.synth_origin = SynthParams{n_identities, samples_per_identity, d, within_sigma, seed.seed};
    return ds;
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view field, long line_no) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("invalid float '" + std::string(field) + "'", line_no);
    return value;
}

}  // namespace

IdentityDataset load_embeddings_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    IdentityDataset ds;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    long line_no = 0;
    bool have_header = false;
    Index d = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header) {
            if (line.rfind("identity_id,sample_id,", 0) != 0)
                throw ParseError("expected header 'identity_id,sample_id,f0,...'", line_no);
            d = static_cast<Index>(split_csv_line(line).size()) - 2;
            ds.dim = d;
            have_header = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() < 3)
            throw ParseError("expected identity_id,sample_id and at least one feature", line_no);
        if (static_cast<Index>(fields.size()) - 2 != d) {
            throw DimensionMismatch("row has " + std::to_string(fields.size() - 2) +
                                    " features, expected " + std::to_string(d) + " (line " +
                                    std::to_string(line_no) + ")");
        }
        Vector v(d);
        for (Index j = 0; j < d; ++j)
            v[j] = parse_double(fields[static_cast<std::size_t>(j + 2)], line_no);
        if (!all_finite(v)) throw ParseError("non-finite feature", line_no);

        const std::string id(fields[0]);
        if (id.empty()) throw ParseError("empty identity_id", line_no);
        if (fields[1].empty()) throw ParseError("empty sample_id", line_no);
        auto [it, inserted] = index.try_emplace(id, ds.identities.size());
        if (inserted) ds.identities.push_back({id, {}, {}});
        ds.identities[it->second].samples.push_back(std::move(v));
        ds.identities[it->second].sample_ids.emplace_back(fields[1]);
    }
    if (!have_header) throw ParseError("empty file", line_no == 0 ? 1 : line_no);
    if (ds.identities.empty()) throw ParseError("no data rows", line_no);
    return ds;
}

void save_embeddings_csv(const IdentityDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "identity_id,sample_id";
    for (Index j = 0; j < ds.dim; ++j) out << ",f" << j;
    out << "\n";
    char buf[40];
    for (const auto& ident : ds.identities) {
        for (std::size_t s = 0; s < ident.samples.size(); ++s) {
            out << ident.id << "," << ident.sample_ids[s];
            const Vector& v = ident.samples[s];
            for (Index j = 0; j < ds.dim; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", v[j]);
                out << "," << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

UserKey identity_key(UserKey key_seed, std::string_view identity_id) {
    return UserKey{key_seed.seed ^ fnv1a64(identity_id)};
}

VerificationProtocol build_protocol(const IdentityDataset& ds, Scenario scenario,
                                    UserKey key_seed) {
    ds.validate();
    const int n = static_cast<int>(ds.identities.size());
    if (n < 2) throw InvalidParameter("build_protocol: need >= 2 identities");

    std::vector<UserKey> keys(static_cast<std::size_t>(n));
    std::unordered_set<std::uint64_t> seen;
    for (int i = 0; i < n; ++i) {
        const auto& ident = ds.identities[static_cast<std::size_t>(i)];
        if (ident.samples.size() < 2) throw InsufficientSamples(ident.id);
        keys[static_cast<std::size_t>(i)] = identity_key(key_seed, ident.id);
        if (!seen.insert(keys[static_cast<std::size_t>(i)].seed).second)
            throw InvalidParameter("key collision for identity '" + ident.id + "'");
    }

    VerificationProtocol proto;
    proto.scenario = scenario;
    proto.enrollments.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        proto.enrollments.push_back({SampleRef{i, 0}, keys[static_cast<std::size_t>(i)]});

    for (int i = 0; i < n; ++i) {
        const auto& ident = ds.identities[static_cast<std::size_t>(i)];
        for (int s = 1; s < static_cast<int>(ident.samples.size()); ++s) {
            for (int claimed = 0; claimed < n; ++claimed) {
                VerificationProtocol::Probe p;
                p.claimed = claimed;
                p.true_identity = i;
                p.sample = SampleRef{i, s};
                p.key = (scenario == Scenario::Stolen) ? keys[static_cast<std::size_t>(claimed)]
                                                       : keys[static_cast<std::size_t>(i)];
                proto.probes.push_back(p);
            }
        }
    }
    return proto;
}

}  // namespace mlphash
