#pragma once

#include "mlphash/common.hpp"
#include "mlphash/prng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mlphash {

/// Parameters of the synthetic identity generator, kept with generated
/// datasets so downstream consumers (the inversion attack) can sample from
/// the same distribution.
struct SynthParams {
    int n_identities = 100;
    int samples_per_identity = 10;
    Index dim = 128;
    double within_sigma = 0.05;
    std::uint64_t seed = 1;
};

struct IdentityDataset {
    struct Identity {
        std::string id;
        std::vector<Vector> samples;
        std::vector<std::string> sample_ids;  // parallel to samples (synthetic: "s0", "s1", ...)
    };
    std::vector<Identity> identities;
    Index dim = 0;
    std::optional<SynthParams> synth_origin;

    std::size_t n_identities() const { return identities.size(); }
    const Vector& sample(int identity, int sample_idx) const {
        return identities[static_cast<std::size_t>(identity)]
            .samples[static_cast<std::size_t>(sample_idx)];
    }
    void validate() const;
};

enum class Scenario { Normal, Stolen };

std::string scenario_name(Scenario s);
std::optional<Scenario> scenario_from_name(std::string_view name);

struct SampleRef {
    int identity = 0;
    int sample = 0;
};

/// Single-enrollment verification protocol: sample 0 of each identity enrolls,
/// every remaining sample probes against every enrolled identity.
struct VerificationProtocol {
    struct Enrollment {
        SampleRef sample;
        UserKey key;
    };
    struct Probe {
        int claimed = 0;        // enrolled identity index the probe claims
        int true_identity = 0;  // identity the probe sample actually belongs to
        SampleRef sample;
        UserKey key;
        bool genuine() const { return claimed == true_identity; }
    };
    Scenario scenario = Scenario::Normal;
    std::vector<Enrollment> enrollments;  // index == identity index
    std::vector<Probe> probes;
};

/// Class means drawn uniformly from the unit hypersphere; samples are the mean
/// plus isotropic Gaussian noise of scale within_sigma, re-normalized to unit
/// norm. Deterministic in `seed` (stream 0 of the seed, consumed sequentially).
IdentityDataset synth_generate(int n_identities, int samples_per_identity, Index d,
                               double within_sigma, UserKey seed);
inline IdentityDataset synth_generate(const SynthParams& p) {
    return synth_generate(p.n_identities, p.samples_per_identity, p.dim, p.within_sigma,
                          UserKey{p.seed});
}

/// CSV schema: header `identity_id,sample_id,f0,...,f{d-1}`, one sample per
/// row, UTF-8, decimal floats. Dimension is fixed by the header column count.
IdentityDataset load_embeddings_csv(const std::string& path);

/// Mirror of the load schema; floats at 17 significant digits (lossless).
void save_embeddings_csv(const IdentityDataset& ds, const std::string& path);

/// Per-identity key: key_seed XOR fnv1a64(identity_id).
UserKey identity_key(UserKey key_seed, std::string_view identity_id);

/// Builds the verification protocol for one scenario. Keys are derived with
/// identity_key and checked collision-free across the dataset. In the stolen
/// scenario every probe carries the claimed identity's key; in the normal
/// scenario it carries its true identity's key.
VerificationProtocol build_protocol(const IdentityDataset& ds, Scenario scenario,
                                    UserKey key_seed);

}  // namespace mlphash
