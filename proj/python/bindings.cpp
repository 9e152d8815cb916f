// pybind11 surface: the core protection operations plus the evaluation
// primitives that make sense on in-memory arrays. Batch experiment pipelines
// stay in the CLI; this module is for notebook-scale poking.

#include "mlphash/attack.hpp"
#include "mlphash/eval.hpp"
#include "mlphash/protocol.hpp"
#include "mlphash/randortho.hpp"
#include "mlphash/schemes.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdio>
#include <stdexcept>

namespace py = pybind11;
using namespace mlphash;

namespace {

SchemeKind kind_of(const std::string& name) {
    const auto k = scheme_from_name(name);
    if (!k) throw std::invalid_argument("unknown scheme kind '" + name + "'");
    return *k;
}

std::string digest_hex(std::uint64_t digest) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
    return buf;
}

py::array_t<bool> template_bits(const ProtectedTemplate& t) {
    if (!t.is_bits()) throw std::invalid_argument("index template has no bits");
    py::array_t<bool> out(static_cast<py::ssize_t>(t.length));
    auto* p = out.mutable_data();
    for (Index i = 0; i < t.length; ++i) p[i] = t.bit(i);
    return out;
}

py::array_t<std::uint32_t> template_indices(const ProtectedTemplate& t) {
    if (t.is_bits()) throw std::invalid_argument("bit template has no indices");
    py::array_t<std::uint32_t> out(static_cast<py::ssize_t>(t.indices.size()));
    std::copy(t.indices.begin(), t.indices.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "MLP-Hash cancelable template protection core";

    py::class_<SchemeConfig>(m, "SchemeConfig")
        .def(py::init([](const std::string& kind, int mlp_hidden_layers, Index mlp_hidden_width,
                         Index mlp_output_length, bool mlp_activation_on_output,
                         Index biohash_length, int iom_m, int iom_q, int iom_window) {
                 SchemeConfig c;
                 c.kind = kind_of(kind);
                 c.mlp_hidden_layers = mlp_hidden_layers;
                 c.mlp_hidden_width = mlp_hidden_width;
                 c.mlp_output_length = mlp_output_length;
                 c.mlp_activation_on_output = mlp_activation_on_output;
                 c.biohash_length = biohash_length;
                 c.iom_m = iom_m;
                 c.iom_q = iom_q;
                 c.iom_window = iom_window;
                 return c;
             }),
             py::arg("kind") = "mlp-hash", py::arg("mlp_hidden_layers") = 3,
             py::arg("mlp_hidden_width") = 0, py::arg("mlp_output_length") = 0,
             py::arg("mlp_activation_on_output") = true, py::arg("biohash_length") = 0,
             py::arg("iom_m") = 0, py::arg("iom_q") = 16, py::arg("iom_window") = 16)
        .def_property_readonly("kind", [](const SchemeConfig& c) { return scheme_name(c.kind); })
        .def("output_length", &SchemeConfig::output_length, py::arg("dim"))
        .def("describe", &SchemeConfig::describe, py::arg("dim"))
        .def("params_digest",
             [](const SchemeConfig& c, Index d) { return digest_hex(c.params_digest(d)); },
             py::arg("dim"))
        .def("__repr__",
             [](const SchemeConfig& c) { return "SchemeConfig(" + scheme_name(c.kind) + ")"; });

    py::class_<ProtectedTemplate>(m, "Template")
        .def_property_readonly("scheme",
                               [](const ProtectedTemplate& t) { return scheme_name(t.scheme); })
        .def_property_readonly("length", [](const ProtectedTemplate& t) { return t.length; })
        .def_property_readonly(
            "digest", [](const ProtectedTemplate& t) { return digest_hex(t.params_digest); })
        .def_property_readonly("is_bits", &ProtectedTemplate::is_bits)
        .def("bits", &template_bits, "Unpacked bit template as a boolean array")
        .def("indices", &template_indices, "IoM index template as a uint32 array")
        .def("__eq__",
             [](const ProtectedTemplate& a, const ProtectedTemplate& b) { return a == b; })
        .def("__repr__", [](const ProtectedTemplate& t) {
            return "Template(" + scheme_name(t.scheme) + ", length=" + std::to_string(t.length) +
                   ")";
        });

    m.def(
        "protect",
        [](const Vector& u, std::uint64_t key, const SchemeConfig& cfg) {
            return protect(u, UserKey{key}, cfg);
        },
        py::arg("embedding"), py::arg("key"), py::arg("config") = SchemeConfig{},
        "Protect one embedding under a user key");

    m.def("hamming_score", &hamming_score, py::arg("a"), py::arg("b"),
          "Similarity in [0,1]: 1 - HammingDistance/length");
    m.def("cosine_score", &cosine_score, py::arg("u"), py::arg("v"));

    m.def(
        "identity_key",
        [](std::uint64_t seed, const std::string& id) { return identity_key(UserKey{seed}, id).seed; },
        py::arg("seed"), py::arg("identity_id"),
        "Per-identity key derivation used by the CLI and the protocols");

    m.def(
        "gen_orthonormal_layer",
        [](std::uint64_t key, std::uint64_t layer_index, Index rows, Index cols) {
            return gen_orthonormal_layer(UserKey{key}, layer_index, rows, cols);
        },
        py::arg("key"), py::arg("layer_index"), py::arg("rows"), py::arg("cols"),
        "Seeded orthonormal layer (block Gram-Schmidt of a seeded normal matrix)");

    m.def(
        "synth_dataset",
        [](int identities, int samples, Index dim, double sigma, std::uint64_t seed) {
            SynthParams p;
            p.n_identities = identities;
            p.samples_per_identity = samples;
            p.dim = dim;
            p.within_sigma = sigma;
            p.seed = seed;
            const auto ds = synth_generate(p);
            py::array_t<double> x({identities, samples, static_cast<int>(dim)});
            auto r = x.mutable_unchecked<3>();
            std::vector<std::string> ids;
            for (int i = 0; i < identities; ++i) {
                ids.push_back(ds.identities[static_cast<std::size_t>(i)].id);
                for (int s = 0; s < samples; ++s)
                    for (Index j = 0; j < dim; ++j)
                        r(i, s, j) = ds.identities[static_cast<std::size_t>(i)]
                                         .samples[static_cast<std::size_t>(s)][j];
            }
            return py::make_tuple(ids, x);
        },
        py::arg("identities"), py::arg("samples"), py::arg("dim"), py::arg("sigma") = 0.05,
        py::arg("seed") = 1,
        "Synthetic identity dataset; returns (identity_ids, array[ids, samples, dim])");

    m.def("threshold_at_fmr", &threshold_at_fmr, py::arg("impostor_scores"), py::arg("fmr"),
          "Smallest threshold with impostor pass-rate <= fmr (strictly-above matching)");
    m.def("tmr_at_threshold", &tmr_at_threshold, py::arg("genuine_scores"), py::arg("threshold"));

    m.def(
        "unlinkability",
        [](const std::vector<double>& mated, const std::vector<double>& non_mated, double omega,
           int bins) {
            ScoreSet s;
            for (const double v : mated) s.add_similarity(ScoreSet::Label::Mated, v);
            for (const double v : non_mated) s.add_similarity(ScoreSet::Label::NonMated, v);
            const auto rep = unlinkability_report(s, omega, bins);
            py::dict out;
            out["d_sys"] = rep.d_sys;
            out["score_grid"] = rep.score_grid;
            out["local_measure"] = rep.local_measure;
            return out;
        },
        py::arg("mated"), py::arg("non_mated"), py::arg("omega") = 1.0, py::arg("bins") = 100,
        "Gomez-Barrero style unlinkability: D_sys plus the local curve");

    m.def(
        "invert_template",
        [](const ProtectedTemplate& target, std::uint64_t key, const SchemeConfig& cfg, Index dim,
           int n_starts, long max_evals, double loss_tolerance, Index start_dim, double sigma) {
            AttackConfig a;
            a.n_starts = n_starts;
            a.max_evals = max_evals;
            a.loss_tolerance = loss_tolerance;
            SynthParams p;
            p.dim = start_dim > 0 ? start_dim : dim;
            p.within_sigma = sigma;
            a.distribution.synth = p;
            const auto r = invert_template(target, UserKey{key}, cfg, dim, a);
            py::dict out;
            out["converged"] = r.converged;
            out["final_loss"] = r.final_loss;
            out["evals_used"] = r.evals_used;
            out["best_inverted"] =
                r.best_inverted ? py::cast(*r.best_inverted) : py::object(py::none());
            return out;
        },
        py::arg("target"), py::arg("key"), py::arg("config"), py::arg("dim"),
        py::arg("n_starts") = 10, py::arg("max_evals") = 0, py::arg("loss_tolerance") = 0.0,
        py::arg("start_dim") = 0, py::arg("sigma") = 0.05,
        "Full-disclosure inversion of one protected template");
}
