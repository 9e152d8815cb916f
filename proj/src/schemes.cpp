#include "mlphash/schemes.hpp"

#include "mlphash/prng.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <sstream>

namespace mlphash {

std::string scheme_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::MlpHash: return "mlp-hash";
        case SchemeKind::BioHash: return "biohash";
        case SchemeKind::IomGrp: return "iom-grp";
        case SchemeKind::IomUrp: return "iom-urp";
        case SchemeKind::Unprotected: return "unprotected";
    }
    return "?";
}

std::optional<SchemeKind> scheme_from_name(std::string_view name) {
    if (name == "mlp-hash" || name == "mlphash") return SchemeKind::MlpHash;
    if (name == "biohash") return SchemeKind::BioHash;
    if (name == "iom-grp") return SchemeKind::IomGrp;
    if (name == "iom-urp") return SchemeKind::IomUrp;
    if (name == "unprotected") return SchemeKind::Unprotected;
    return std::nullopt;
}

MlpHashParams MlpHashParams::defaults(Index d, int hidden_layers) {
    MlpHashParams p;
    p.layer_lengths.assign(static_cast<std::size_t>(hidden_layers) + 2, 2 * d);
    p.layer_lengths.front() = d;
    p.layer_lengths.back() = d;
    return p;
}

void MlpHashParams::validate() const {
    if (layer_lengths.size() < 2)
        throw InvalidParameter("MlpHashParams: need at least input and output lengths");
    for (Index len : layer_lengths)
        if (len < 1) throw InvalidParameter("MlpHashParams: layer lengths must be >= 1");
}

ProtectedTemplate ProtectedTemplate::make_bits(SchemeKind scheme, Index length,
                                               std::uint64_t digest) {
    ProtectedTemplate t;
    t.scheme = scheme;
    t.length = length;
    t.params_digest = digest;
    t.bits.assign(static_cast<std::size_t>((length + 63) / 64), 0ull);
    return t;
}

MlpHashParams SchemeConfig::mlp_params(Index d) const {
    MlpHashParams p;
    const Index hidden = mlp_hidden_width > 0 ? mlp_hidden_width : 2 * d;
    const Index out = mlp_output_length > 0 ? mlp_output_length : d;
    p.layer_lengths.assign(static_cast<std::size_t>(mlp_hidden_layers) + 2, hidden);
    p.layer_lengths.front() = d;
    p.layer_lengths.back() = out;
    p.activation_on_output = mlp_activation_on_output;
    p.validate();
    return p;
}

Index SchemeConfig::output_length(Index d) const {
    switch (kind) {
        case SchemeKind::MlpHash: return mlp_params(d).layer_lengths.back();
        case SchemeKind::BioHash: return biohash_length > 0 ? biohash_length : d;
        case SchemeKind::IomGrp:
        case SchemeKind::IomUrp: return iom_m > 0 ? iom_m : d;
        case SchemeKind::Unprotected: return d;
    }
    return d;
}

std::string SchemeConfig::describe(Index d) const {
    std::ostringstream os;
    os << scheme_name(kind);
    switch (kind) {
        case SchemeKind::MlpHash: {
            const auto p = mlp_params(d);
            os << ";L=";
            for (std::size_t i = 0; i < p.layer_lengths.size(); ++i)
                os << (i ? "," : "") << p.layer_lengths[i];
            os << ";act_out=" << (p.activation_on_output ? 1 : 0);
            break;
        }
        case SchemeKind::BioHash:
            os << ";d=" << d << ";len=" << output_length(d);
            break;
        case SchemeKind::IomGrp:
            os << ";d=" << d << ";m=" << output_length(d) << ";q=" << iom_q;
            break;
        case SchemeKind::IomUrp:
            os << ";d=" << d << ";m=" << output_length(d) << ";window=" << iom_window;
            break;
        case SchemeKind::Unprotected:
            os << ";d=" << d;
            break;
    }
    return os.str();
}

std::uint64_t SchemeConfig::params_digest(Index d) const { return fnv1a64(describe(d)); }

OrthonormalStack build_orthonormal_stack(UserKey key, const MlpHashParams& params) {
    params.validate();
    OrthonormalStack stack;
    const int n_layers = static_cast<int>(params.layer_lengths.size()) - 1;
    stack.reserve(static_cast<std::size_t>(n_layers));
    for (int l = 1; l <= n_layers; ++l)
        stack.push_back(gen_orthonormal_layer(key, static_cast<std::uint64_t>(l),
                                              params.layer_lengths[static_cast<std::size_t>(l - 1)],
                                              params.layer_lengths[static_cast<std::size_t>(l)]));
    return stack;
}

MlpForwardTrace mlp_forward(const Vector& u, const OrthonormalStack& stack,
                            const MlpHashParams& params) {
    if (u.size() != params.layer_lengths.front())
        throw DimensionMismatch("mlp_forward: embedding length " + std::to_string(u.size()) +
                                " != input layer length " +
                                std::to_string(params.layer_lengths.front()));
    if (!all_finite(u)) throw NonFiniteInput("mlp_forward: non-finite embedding");
    const std::size_t n_layers = params.layer_lengths.size() - 1;
    if (stack.size() != n_layers) throw DimensionMismatch("mlp_forward: stack/params layer count");

    Vector gamma = u;
    for (std::size_t l = 0; l < n_layers; ++l) {
        gamma = (gamma.transpose() * stack[l]).transpose();
        if (l + 1 < n_layers || params.activation_on_output)
            gamma = gamma.cwiseMax(0.0);  // ReLU
    }
    MlpForwardTrace trace;
    trace.tau = gamma.mean();
    trace.gamma = std::move(gamma);
    return trace;
}

namespace {

ProtectedTemplate binarize_above(const Vector& values, double threshold, SchemeKind scheme,
                                 std::uint64_t digest) {
    auto t = ProtectedTemplate::make_bits(scheme, values.size(), digest);
    for (Index i = 0; i < values.size(); ++i)
        if (values[i] > threshold) t.set_bit(i, true);  // strict: ties go to 0
    return t;
}

std::uint64_t mlp_digest(const MlpHashParams& p) {
    std::ostringstream os;
    os << scheme_name(SchemeKind::MlpHash) << ";L=";
    for (std::size_t i = 0; i < p.layer_lengths.size(); ++i)
        os << (i ? "," : "") << p.layer_lengths[i];
    os << ";act_out=" << (p.activation_on_output ? 1 : 0);
    return fnv1a64(os.str());
}

std::vector<std::uint32_t> draw_permutation(SeededStream& stream, Index d) {
    std::vector<std::uint32_t> perm(static_cast<std::size_t>(d));
    std::iota(perm.begin(), perm.end(), 0u);
    // Fisher-Yates, top-down, using the unbiased bounded draw
    for (Index i = d - 1; i >= 1; --i) {
        const auto j = stream.bounded(static_cast<std::uint64_t>(i) + 1);
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

Index argmax_lowest(const Vector& y) {
    Index best = 0;
    for (Index i = 1; i < y.size(); ++i)
        if (y[i] > y[best]) best = i;
    return best;
}

}  // namespace

ProtectedTemplate mlp_hash(const Vector& u, UserKey key, const MlpHashParams& params) {
    const auto stack = build_orthonormal_stack(key, params);
    const auto trace = mlp_forward(u, stack, params);
    return binarize_above(trace.gamma, trace.tau, SchemeKind::MlpHash, mlp_digest(params));
}

ProtectedTemplate biohash(const Vector& u, UserKey key, Index out_len) {
    const Index d = u.size();
    if (out_len < 1 || out_len > d)
        throw DimensionMismatch("biohash: out_len must be in [1, d]; orthonormal rows need out_len <= d");
    if (!all_finite(u)) throw NonFiniteInput("biohash: non-finite embedding");
    SchemeConfig cfg;
    cfg.kind = SchemeKind::BioHash;
    cfg.biohash_length = out_len;
    const Matrix m = gen_orthonormal_layer(key, kBioHashStream, out_len, d);
    return binarize_above(m * u, 0.0, SchemeKind::BioHash, cfg.params_digest(d));
}

ProtectedTemplate iom_grp(const Vector& u, UserKey key, int m, int q) {
    const Index d = u.size();
    if (m < 1) throw InvalidParameter("iom_grp: m must be >= 1");
    if (q < 2) throw InvalidParameter("iom_grp: q must be >= 2");
    if (!all_finite(u)) throw NonFiniteInput("iom_grp: non-finite embedding");
    SchemeConfig cfg;
    cfg.kind = SchemeKind::IomGrp;
    cfg.iom_m = m;
    cfg.iom_q = q;
    ProtectedTemplate t;
    t.scheme = SchemeKind::IomGrp;
    t.length = m;
    t.params_digest = cfg.params_digest(d);
    t.indices.reserve(static_cast<std::size_t>(m));
    for (int j = 1; j <= m; ++j) {
        const Matrix a = random_normal_matrix(key, static_cast<std::uint64_t>(j), q, d);
        t.indices.push_back(static_cast<std::uint32_t>(argmax_lowest(a * u)));
    }
    return t;
}

ProtectedTemplate iom_urp(const Vector& u, UserKey key, int m, int window) {
    const Index d = u.size();
    if (m < 1) throw InvalidParameter("iom_urp: m must be >= 1");
    if (window < 2 || window > d)
        throw InvalidParameter("iom_urp: window must be in [2, d]");
    if (!all_finite(u)) throw NonFiniteInput("iom_urp: non-finite embedding");
    SchemeConfig cfg;
    cfg.kind = SchemeKind::IomUrp;
    cfg.iom_m = m;
    cfg.iom_window = window;
    ProtectedTemplate t;
    t.scheme = SchemeKind::IomUrp;
    t.length = m;
    t.params_digest = cfg.params_digest(d);
    t.indices.reserve(static_cast<std::size_t>(m));
    for (int j = 1; j <= m; ++j) {
        SeededStream stream(key, static_cast<std::uint64_t>(j));
        const auto perm = draw_permutation(stream, d);
        Index best = 0;
        for (Index p = 1; p < window; ++p)
            if (u[perm[static_cast<std::size_t>(p)]] > u[perm[static_cast<std::size_t>(best)]])
                best = p;
        t.indices.push_back(static_cast<std::uint32_t>(best));
    }
    return t;
}

SchemeMaterial make_material(UserKey key, const SchemeConfig& cfg, Index d) {
    SchemeMaterial mat;
    mat.kind = cfg.kind;
    mat.dim = d;
    mat.digest = cfg.params_digest(d);
    switch (cfg.kind) {
        case SchemeKind::MlpHash:
            mat.mats = build_orthonormal_stack(key, cfg.mlp_params(d));
            break;
        case SchemeKind::BioHash: {
            const Index out_len = cfg.output_length(d);
            if (out_len > d) throw DimensionMismatch("biohash: out_len must be <= d");
            mat.mats.push_back(gen_orthonormal_layer(key, kBioHashStream, out_len, d));
            break;
        }
        case SchemeKind::IomGrp: {
            if (cfg.iom_q < 2) throw InvalidParameter("iom_grp: q must be >= 2");
            const int m = static_cast<int>(cfg.output_length(d));
            mat.mats.reserve(static_cast<std::size_t>(m));
            for (int j = 1; j <= m; ++j)
                mat.mats.push_back(
                    random_normal_matrix(key, static_cast<std::uint64_t>(j), cfg.iom_q, d));
            break;
        }
        case SchemeKind::IomUrp: {
            if (cfg.iom_window < 2 || cfg.iom_window > d)
                throw InvalidParameter("iom_urp: window must be in [2, d]");
            const int m = static_cast<int>(cfg.output_length(d));
            mat.perms.reserve(static_cast<std::size_t>(m));
            for (int j = 1; j <= m; ++j) {
                SeededStream stream(key, static_cast<std::uint64_t>(j));
                mat.perms.push_back(draw_permutation(stream, d));
            }
            break;
        }
        case SchemeKind::Unprotected:
            throw InvalidParameter("unprotected system has no protection material");
    }
    return mat;
}

ProtectedTemplate protect_with(const Vector& u, const SchemeMaterial& mat,
                               const SchemeConfig& cfg) {
    if (u.size() != mat.dim)
        throw DimensionMismatch("protect: embedding length " + std::to_string(u.size()) +
                                " != material dimension " + std::to_string(mat.dim));
    if (!all_finite(u)) throw NonFiniteInput("protect: non-finite embedding");
    if (mat.kind != cfg.kind || mat.digest != cfg.params_digest(mat.dim))
        throw SchemeMismatch("protect: material was built for a different scheme configuration");
    switch (mat.kind) {
        case SchemeKind::MlpHash: {
            const auto params = cfg.mlp_params(mat.dim);
            const auto trace = mlp_forward(u, mat.mats, params);
            return binarize_above(trace.gamma, trace.tau, SchemeKind::MlpHash, mat.digest);
        }
        case SchemeKind::BioHash:
            return binarize_above(mat.mats[0] * u, 0.0, SchemeKind::BioHash, mat.digest);
        case SchemeKind::IomGrp: {
            ProtectedTemplate t;
            t.scheme = SchemeKind::IomGrp;
            t.length = static_cast<Index>(mat.mats.size());
            t.params_digest = mat.digest;
            t.indices.reserve(mat.mats.size());
            for (const auto& a : mat.mats)
                t.indices.push_back(static_cast<std::uint32_t>(argmax_lowest(a * u)));
            return t;
        }
        case SchemeKind::IomUrp: {
            ProtectedTemplate t;
            t.scheme = SchemeKind::IomUrp;
            t.length = static_cast<Index>(mat.perms.size());
            t.params_digest = mat.digest;
            t.indices.reserve(mat.perms.size());
            for (const auto& perm : mat.perms) {
                Index best = 0;
                for (Index p = 1; p < cfg.iom_window; ++p)
                    if (u[perm[static_cast<std::size_t>(p)]] > u[perm[static_cast<std::size_t>(best)]])
                        best = p;
                t.indices.push_back(static_cast<std::uint32_t>(best));
            }
            return t;
        }
        case SchemeKind::Unprotected:
            throw InvalidParameter("unprotected system has no protected template");
    }
    throw InvalidParameter("unknown scheme");
}

ProtectedTemplate protect(const Vector& u, UserKey key, const SchemeConfig& cfg) {
    return protect_with(u, make_material(key, cfg, u.size()), cfg);
}

double hamming_score(const ProtectedTemplate& a, const ProtectedTemplate& b) {
    if (a.scheme != b.scheme)
        throw SchemeMismatch("hamming_score: " + scheme_name(a.scheme) + " vs " +
                             scheme_name(b.scheme));
    if (a.length != b.length)
        throw LengthMismatch("hamming_score: length " + std::to_string(a.length) + " vs " +
                             std::to_string(b.length));
    if (a.params_digest != b.params_digest)
        throw SchemeMismatch("hamming_score: params digest mismatch");
    if (a.length == 0) throw LengthMismatch("hamming_score: empty template");

    Index dist = 0;
    if (a.is_bits()) {
        for (std::size_t w = 0; w < a.bits.size(); ++w)
            dist += std::popcount(a.bits[w] ^ b.bits[w]);
    } else {
        for (std::size_t i = 0; i < a.indices.size(); ++i)
            dist += (a.indices[i] != b.indices[i]) ? 1 : 0;
    }
    return 1.0 - static_cast<double>(dist) / static_cast<double>(a.length);
}

double cosine_score(const Vector& u, const Vector& v) {
    if (u.size() != v.size())
        throw DimensionMismatch("cosine_score: " + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()));
    const double nu = u.norm(), nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw ZeroVector("cosine_score: zero-norm input");
    return u.dot(v) / (nu * nv);
}

}  // namespace mlphash
