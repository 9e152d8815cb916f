#pragma once

#include "mlphash/common.hpp"
#include "mlphash/randortho.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mlphash {

enum class SchemeKind { MlpHash, BioHash, IomGrp, IomUrp, Unprotected };

std::string scheme_name(SchemeKind kind);
std::optional<SchemeKind> scheme_from_name(std::string_view name);

// Stream layout for key-derived material (frozen, see prng.hpp):
//   BioHash projection        -> stream 0
//   MLP layer l = 1..H+1      -> stream l
//   IoM-GRP projection j      -> stream j (1-based)
//   IoM-URP permutation j     -> stream j (1-based)
constexpr std::uint64_t kBioHashStream = 0;

struct MlpHashParams {
    /// H+2 entries: index 0 = input length d, 1..H = hidden widths, H+1 = output width.
    std::vector<Index> layer_lengths;
    /// The published procedure applies the activation in every loop pass,
    /// including l = H+1; set false to skip it on the output layer only.
    bool activation_on_output = true;

    /// Paper defaults: H = 3 hidden layers of width 2d, output width d.
    static MlpHashParams defaults(Index d, int hidden_layers = 3);

    int hidden_layers() const { return static_cast<int>(layer_lengths.size()) - 2; }
    void validate() const;
};

/// Final-layer activations and their mean, the binarization threshold.
struct MlpForwardTrace {
    Vector gamma;
    double tau = 0.0;
};

struct ProtectedTemplate {
    SchemeKind scheme = SchemeKind::MlpHash;
    Index length = 0;
    std::uint64_t params_digest = 0;
    std::vector<std::uint64_t> bits;      // packed bit template, bit i = word i/64, bit i%64
    std::vector<std::uint32_t> indices;   // IoM index template

    bool is_bits() const { return scheme == SchemeKind::MlpHash || scheme == SchemeKind::BioHash; }
    bool bit(Index i) const { return (bits[static_cast<std::size_t>(i >> 6)] >> (i & 63)) & 1u; }
    void set_bit(Index i, bool v) {
        auto& w = bits[static_cast<std::size_t>(i >> 6)];
        const std::uint64_t mask = 1ull << (i & 63);
        w = v ? (w | mask) : (w & ~mask);
    }
    static ProtectedTemplate make_bits(SchemeKind scheme, Index length, std::uint64_t digest);

    friend bool operator==(const ProtectedTemplate& a, const ProtectedTemplate& b) {
        return a.scheme == b.scheme && a.length == b.length &&
               a.params_digest == b.params_digest && a.bits == b.bits && a.indices == b.indices;
    }
};

/// One scheme plus its parameters; zero-valued sizes resolve to the embedding
/// dimension at use (hidden width to 2d), mirroring the defaults above.
struct SchemeConfig {
    SchemeKind kind = SchemeKind::MlpHash;
    // MLP-Hash
    int mlp_hidden_layers = 3;
    Index mlp_hidden_width = 0;   // 0 -> 2d
    Index mlp_output_length = 0;  // 0 -> d
    bool mlp_activation_on_output = true;
    // BioHash
    Index biohash_length = 0;  // 0 -> d
    // IoM
    int iom_m = 0;  // 0 -> d
    int iom_q = 16;
    int iom_window = 16;

    MlpHashParams mlp_params(Index d) const;
    Index output_length(Index d) const;
    std::uint64_t params_digest(Index d) const;
    std::string describe(Index d) const;
};

/// Key-derived protection material for one (key, scheme, dimension); generating
/// it once and reusing it across calls is a performance choice only, the result
/// is identical to per-call regeneration.
struct SchemeMaterial {
    SchemeKind kind = SchemeKind::MlpHash;
    Index dim = 0;
    std::uint64_t digest = 0;
    std::vector<Matrix> mats;
    std::vector<std::vector<std::uint32_t>> perms;
};

OrthonormalStack build_orthonormal_stack(UserKey key, const MlpHashParams& params);

MlpForwardTrace mlp_forward(const Vector& u, const OrthonormalStack& stack,
                            const MlpHashParams& params);

ProtectedTemplate mlp_hash(const Vector& u, UserKey key, const MlpHashParams& params);
ProtectedTemplate biohash(const Vector& u, UserKey key, Index out_len);
ProtectedTemplate iom_grp(const Vector& u, UserKey key, int m, int q);
ProtectedTemplate iom_urp(const Vector& u, UserKey key, int m, int window);

SchemeMaterial make_material(UserKey key, const SchemeConfig& cfg, Index d);
ProtectedTemplate protect_with(const Vector& u, const SchemeMaterial& material,
                               const SchemeConfig& cfg);
/// Full protection call: regenerates the key-derived material inside.
ProtectedTemplate protect(const Vector& u, UserKey key, const SchemeConfig& cfg);

/// Similarity in [0, 1]: 1 - HammingDistance/length. Bit templates compare
/// bits; index templates count positions with unequal indices.
double hamming_score(const ProtectedTemplate& a, const ProtectedTemplate& b);

/// Unprotected-baseline comparator.
double cosine_score(const Vector& u, const Vector& v);

}  // namespace mlphash
