#include "mlphash/attack.hpp"

#include "mlphash/eval.hpp"
#include "mlphash/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mlphash {

Index StartDistribution::dim() const {
    if (synth) return synth->dim;
    return mean.size();
}

StartDistribution StartDistribution::from_dataset(const IdentityDataset& ds) {
    ds.validate();
    StartDistribution dist;
    if (ds.synth_origin) {
        dist.synth = ds.synth_origin;
        return dist;
    }
    std::size_t n = 0;
    Vector mean = Vector::Zero(ds.dim);
    Vector m2 = Vector::Zero(ds.dim);
    for (const auto& ident : ds.identities) {
        for (const auto& s : ident.samples) {
            ++n;
            const Vector delta = s - mean;
            mean += delta / static_cast<double>(n);
            m2 += delta.cwiseProduct(s - mean);
        }
    }
    dist.mean = mean;
    dist.stddev = n > 1 ? Vector((m2 / static_cast<double>(n - 1)).cwiseSqrt())
                        : Vector(Vector::Zero(ds.dim));
    return dist;
}

Vector StartDistribution::draw(SeededStream& stream) const {
    if (synth) {
        // A fresh sample from the synthetic population: random class mean on
        // the unit sphere plus within-class noise, re-normalized.
        Vector center(synth->dim);
        stream.fill_normal(center);
        const double cn = center.norm();
        if (cn > 0.0) center /= cn;
        Vector noise(synth->dim);
        stream.fill_normal(noise);
        Vector s = center + synth->within_sigma * noise;
        const double sn = s.norm();
        if (sn > 0.0) s /= sn;
        return s;
    }
    if (mean.size() == 0) throw InvalidParameter("start distribution is empty");
    Vector g(mean.size());
    stream.fill_normal(g);
    return mean + stddev.cwiseProduct(g);
}

void AttackConfig::validate() const {
    if (n_starts < 1) throw InvalidParameter("attack needs at least one start");
    if (max_evals < 0) throw InvalidParameter("evaluation budget cannot be negative");
    if (margin < 0.0 || !std::isfinite(margin))
        throw InvalidParameter("hinge margin must be finite and non-negative");
    if (fmr_points.empty()) throw InvalidParameter("need at least one FMR operating point");
    for (double f : fmr_points)
        if (!(f > 0.0 && f < 1.0)) throw InvalidParameter("FMR operating points must lie in (0, 1)");
    if (n_victims < 0) throw InvalidParameter("victim count cannot be negative");
}

bool AttackResult::any_converged() const {
    return std::any_of(converged.begin(), converged.end(), [](bool c) { return c; });
}

double inversion_loss(const Vector& x, const ProtectedTemplate& target,
                      const SchemeMaterial& mat, const SchemeConfig& scheme, double margin) {
    if (x.size() != mat.dim)
        throw DimensionMismatch("inversion_loss: guess length " + std::to_string(x.size()) +
                                " != material dimension " + std::to_string(mat.dim));
    if (target.scheme != mat.kind || target.params_digest != mat.digest)
        throw SchemeMismatch("inversion_loss: target does not match the supplied material");
    if (!all_finite(x)) throw NonFiniteInput("inversion_loss: non-finite guess");

    switch (mat.kind) {
        case SchemeKind::MlpHash: {
            const auto trace = mlp_forward(x, mat.mats, scheme.mlp_params(mat.dim));
            if (target.length != trace.gamma.size())
                throw LengthMismatch("inversion_loss: target length mismatch");
            double loss = 0.0;
            for (Index i = 0; i < trace.gamma.size(); ++i) {
                const double sign = target.bit(i) ? 1.0 : -1.0;
                loss += std::max(0.0, margin - sign * (trace.gamma[i] - trace.tau));
            }
            return loss;
        }
        case SchemeKind::BioHash: {
            const Vector y = mat.mats[0] * x;
            if (target.length != y.size())
                throw LengthMismatch("inversion_loss: target length mismatch");
            double loss = 0.0;
            for (Index i = 0; i < y.size(); ++i) {
                const double sign = target.bit(i) ? 1.0 : -1.0;
                loss += std::max(0.0, margin - sign * y[i]);
            }
            return loss;
        }
        case SchemeKind::IomGrp: {
            if (target.indices.size() != mat.mats.size())
                throw LengthMismatch("inversion_loss: target length mismatch");
            double loss = 0.0;
            for (std::size_t j = 0; j < mat.mats.size(); ++j) {
                const Vector z = mat.mats[j] * x;
                const auto t = static_cast<Index>(target.indices[j]);
                if (t >= z.size()) throw LengthMismatch("inversion_loss: target index out of range");
                // Includes the p == t term, which is exactly `margin`; drop it.
                loss += (z.array() - z[t] + margin).max(0.0).sum() - margin;
            }
            return loss;
        }
        case SchemeKind::IomUrp: {
            if (target.indices.size() != mat.perms.size())
                throw LengthMismatch("inversion_loss: target length mismatch");
            const auto window = static_cast<Index>(scheme.iom_window);
            double loss = 0.0;
            for (std::size_t j = 0; j < mat.perms.size(); ++j) {
                const auto& perm = mat.perms[j];
                const auto t = static_cast<Index>(target.indices[j]);
                if (t >= window) throw LengthMismatch("inversion_loss: target index out of range");
                const double vt = x[perm[static_cast<std::size_t>(t)]];
                for (Index p = 0; p < window; ++p) {
                    if (p == t) continue;
                    loss += std::max(0.0, margin + x[perm[static_cast<std::size_t>(p)]] - vt);
                }
            }
            return loss;
        }
        case SchemeKind::Unprotected:
            throw InvalidParameter("the unprotected baseline has no inversion target");
    }
    throw InvalidParameter("unknown scheme");
}

double inversion_loss(const Vector& x, const ProtectedTemplate& target, UserKey key,
                      const SchemeConfig& scheme, double margin) {
    return inversion_loss(x, target, make_material(key, scheme, x.size()), scheme, margin);
}

LinearTarget linear_project(const Vector& u, UserKey key) {
    if (u.size() < 1) throw InvalidParameter("linear_project: empty embedding");
    if (!all_finite(u)) throw NonFiniteInput("linear_project: non-finite embedding");
    LinearTarget t;
    // The H = 0 network's single layer, stream 1, square: an orthogonal map.
    t.m = gen_orthonormal_layer(key, 1, u.size(), u.size());
    t.y = t.m.transpose() * u;
    return t;
}

Vector invert_linear(const LinearTarget& t) { return t.m * t.y; }

double linear_loss(const Vector& x, const LinearTarget& t) {
    if (x.size() != t.m.rows())
        throw DimensionMismatch("linear_loss: guess length " + std::to_string(x.size()) +
                                " != layer dimension " + std::to_string(t.m.rows()));
    return (t.m.transpose() * x - t.y).squaredNorm();
}

namespace detail {

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             SeededStream& stream, const NelderMeadOptions& opts) {
    const Index n = x0.size();
    if (n < 1) throw InvalidParameter("nelder_mead: empty start point");
    if (opts.max_evals < 1) throw InvalidParameter("nelder_mead: no evaluation budget");
    const auto dn = static_cast<double>(n);
    // Dimension-adaptive coefficients (Gao & Han): reflection, expansion,
    // contraction, shrink.
    const double alpha = 1.0;
    const double beta = 1.0 + 2.0 / dn;
    const double gamma = 0.75 - 1.0 / (2.0 * dn);
    const double delta = 1.0 - 1.0 / dn;

    NelderMeadResult out;
    out.x = x0;
    out.loss = f(x0);
    out.evals = 1;

    auto track = [&](const Vector& x, double fx) {
        if (fx < out.loss) {
            out.loss = fx;
            out.x = x;
        }
    };
    auto done = [&] { return out.evals >= opts.max_evals || out.loss <= opts.target_loss; };

    const std::size_t m = static_cast<std::size_t>(n) + 1;
    std::vector<Vector> xs(m);
    std::vector<double> fs(m);
    Vector sum(n);

    double step = opts.initial_step / std::sqrt(dn);
    bool first = true;
    while (!done()) {
        // (Re)build the simplex around the incumbent; restarts flip edge
        // directions at random and use a smaller scale.
        if (!first) ++out.restarts;
        xs[0] = out.x;
        fs[0] = out.loss;
        for (std::size_t i = 1; i < m && !done(); ++i) {
            xs[i] = xs[0];
            const double h = first ? step : (stream.uniform01() < 0.5 ? -step : step);
            xs[i][static_cast<Index>(i - 1)] += h;
            fs[i] = f(xs[i]);
            ++out.evals;
            track(xs[i], fs[i]);
        }
        first = false;
        if (done()) break;
        sum.setZero();
        for (const auto& x : xs) sum += x;

        while (!done()) {
            // Best, worst and second-worst by linear scan; ties resolve to the
            // lowest index, keeping every run deterministic.
            std::size_t ib = 0, iw = 0;
            for (std::size_t i = 1; i < m; ++i) {
                if (fs[i] < fs[ib]) ib = i;
                if (fs[i] > fs[iw]) iw = i;
            }
            std::size_t is = ib;
            for (std::size_t i = 0; i < m; ++i)
                if (i != iw && fs[i] > fs[is]) is = i;

            const double f_spread = fs[iw] - fs[ib];
            if (f_spread <= 1e-13 * std::max(1.0, std::abs(fs[ib])) &&
                (xs[iw] - xs[ib]).lpNorm<Eigen::Infinity>() <= 1e-9)
                break;  // collapsed: restart around the incumbent

            const Vector c = (sum - xs[iw]) / dn;
            auto replace_worst = [&](const Vector& x, double fx) {
                sum += x - xs[iw];
                xs[iw] = x;
                fs[iw] = fx;
            };
            auto shrink = [&] {
                for (std::size_t i = 0; i < m && !done(); ++i) {
                    if (i == ib) continue;
                    xs[i] = xs[ib] + delta * (xs[i] - xs[ib]);
                    fs[i] = f(xs[i]);
                    ++out.evals;
                    track(xs[i], fs[i]);
                }
                sum.setZero();
                for (const auto& x : xs) sum += x;
            };

            const Vector xr = c + alpha * (c - xs[iw]);
            const double fr = f(xr);
            ++out.evals;
            track(xr, fr);
            if (fr < fs[ib]) {
                if (done()) break;
                const Vector xe = c + beta * (xr - c);
                const double fe = f(xe);
                ++out.evals;
                track(xe, fe);
                if (fe < fr)
                    replace_worst(xe, fe);
                else
                    replace_worst(xr, fr);
            } else if (fr < fs[is]) {
                replace_worst(xr, fr);
            } else if (fr < fs[iw]) {
                if (done()) break;
                const Vector xc = c + gamma * (xr - c);
                const double fc = f(xc);
                ++out.evals;
                track(xc, fc);
                if (fc <= fr)
                    replace_worst(xc, fc);
                else
                    shrink();
            } else {
                if (done()) break;
                const Vector xc = c - gamma * (c - xs[iw]);
                const double fc = f(xc);
                ++out.evals;
                track(xc, fc);
                if (fc < fs[iw])
                    replace_worst(xc, fc);
                else
                    shrink();
            }
        }
        step = std::max(step * 0.3, 1e-10);
    }
    return out;
}

}  // namespace detail

namespace {

using LossFn = std::function<double(const Vector&)>;
using ConvergedFn = std::function<bool(const Vector&, double)>;

AttackResult run_starts(const LossFn& loss, const ConvergedFn& is_converged, Index d,
                        const AttackConfig& cfg, std::uint64_t stream_base, double target_loss) {
    cfg.validate();
    if (cfg.distribution.empty())
        throw InvalidParameter("attack needs a start distribution (fill it from the dataset)");
    if (cfg.distribution.dim() != d)
        throw DimensionMismatch("start distribution dimension " +
                                std::to_string(cfg.distribution.dim()) +
                                " != embedding dimension " + std::to_string(d));
    AttackResult res;
    detail::NelderMeadOptions opts;
    opts.max_evals = cfg.evals(d);
    opts.target_loss = target_loss;
    double best_loss = std::numeric_limits<double>::infinity();
    for (int s = 0; s < cfg.n_starts; ++s) {
        SeededStream stream(UserKey{cfg.seed}, stream_base + static_cast<std::uint64_t>(s));
        const Vector x0 = cfg.distribution.draw(stream);
        const auto r = detail::nelder_mead(loss, x0, stream, opts);
        res.evals_used += r.evals;
        const bool conv = is_converged(r.x, r.loss);
        res.converged.push_back(conv);
        res.final_loss.push_back(r.loss);
        if (conv && r.loss < best_loss) {
            best_loss = r.loss;
            res.best_inverted = r.x;
        }
    }
    return res;
}

}  // namespace

AttackResult invert_template(const ProtectedTemplate& target, UserKey key,
                             const SchemeConfig& scheme, Index d, const AttackConfig& cfg,
                             std::uint64_t stream_base) {
    const SchemeMaterial mat = make_material(key, scheme, d);
    if (target.scheme != mat.kind || target.params_digest != mat.digest)
        throw SchemeMismatch("invert_template: target does not match the scheme configuration");
    const LossFn loss = [&](const Vector& x) {
        return inversion_loss(x, target, mat, scheme, cfg.margin);
    };
    const ConvergedFn conv = [&](const Vector& x, double l) {
        if (cfg.loss_tolerance < 0.0) return false;
        if (cfg.loss_tolerance > 0.0) return l <= cfg.loss_tolerance;
        // Default: the verification re-hash must reproduce the target exactly.
        return protect_with(x, mat, scheme) == target;
    };
    const double target_loss = cfg.loss_tolerance > 0.0 ? cfg.loss_tolerance : 0.0;
    return run_starts(loss, conv, d, cfg, stream_base, target_loss);
}

AttackResult invert_linear_target(const LinearTarget& target, const AttackConfig& cfg,
                                  std::uint64_t stream_base) {
    const Index d = target.m.rows();
    const LossFn loss = [&](const Vector& x) { return linear_loss(x, target); };
    // Squared error <= 1e-12 is recovery to about 1e-6 in norm (the layer is
    // an isometry); that is the "exact" criterion for the continuous target.
    const double tol = cfg.loss_tolerance > 0.0 ? cfg.loss_tolerance : 1e-12;
    const ConvergedFn conv = [&](const Vector&, double l) {
        if (cfg.loss_tolerance < 0.0) return false;
        return l <= tol;
    };
    return run_starts(loss, conv, d, cfg, stream_base, tol);
}

AttackReport success_attack_rate(const IdentityDataset& ds, const SchemeConfig& scheme,
                                 const AttackConfig& cfg) {
    cfg.validate();
    ds.validate();
    if (!cfg.linear_sanity && scheme.kind == SchemeKind::Unprotected)
        throw InvalidParameter("the unprotected baseline has no template to attack");
    const std::size_t n_id = ds.n_identities();
    if (n_id < 2) throw InvalidParameter("impostor thresholds need at least two identities");

    AttackConfig eff = cfg;
    if (eff.distribution.empty()) eff.distribution = StartDistribution::from_dataset(ds);
    if (eff.distribution.dim() != ds.dim)
        throw DimensionMismatch("start distribution does not match the dataset dimension");

    const std::size_t n_victims =
        eff.n_victims > 0 ? std::min(static_cast<std::size_t>(eff.n_victims), n_id) : n_id;

    std::vector<double> impostors;
    impostors.reserve(n_id * (n_id - 1) / 2);
    for (std::size_t i = 0; i < n_id; ++i)
        for (std::size_t j = i + 1; j < n_id; ++j)
            impostors.push_back(cosine_score(ds.sample(static_cast<int>(i), 0),
                                             ds.sample(static_cast<int>(j), 0)));

    AttackReport rep;
    rep.scheme = eff.linear_sanity ? "linear-sanity" : scheme_name(scheme.kind);
    rep.dim = ds.dim;
    rep.config = eff;
    for (double f : eff.fmr_points) rep.thresholds.push_back(threshold_at_fmr(impostors, f));

    rep.victims.resize(n_victims);
    parallel_for(n_victims, [&](std::size_t v) {
        const auto& ident = ds.identities[v];
        const Vector& u = ident.samples[0];
        const UserKey key = identity_key(UserKey{eff.seed}, ident.id);
        const auto stream_base =
            static_cast<std::uint64_t>(v) * static_cast<std::uint64_t>(eff.n_starts) + 1;
        AttackResult r = eff.linear_sanity
                             ? invert_linear_target(linear_project(u, key), eff, stream_base)
                             : invert_template(protect(u, key, scheme), key, scheme, ds.dim, eff,
                                               stream_base);
        r.victim_id = ident.id;
        if (r.best_inverted) {
            const double sim =
                r.best_inverted->norm() > 0.0 ? cosine_score(*r.best_inverted, u) : -1.0;
            r.unprotected_similarity = sim;
            for (double t : rep.thresholds) r.success.push_back(sim > t);
        } else {
            r.success.assign(rep.thresholds.size(), false);
        }
        rep.victims[v] = std::move(r);
    });

    rep.sar.assign(eff.fmr_points.size(), 0.0);
    for (const auto& r : rep.victims)
        for (std::size_t p = 0; p < r.success.size(); ++p)
            if (r.success[p]) rep.sar[p] += 1.0;
    for (auto& s : rep.sar) s /= static_cast<double>(n_victims);
    return rep;
}

}  // namespace mlphash
