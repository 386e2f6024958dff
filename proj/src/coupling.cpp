#include "jellium/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "jellium/errors.hpp"
#include "jellium/parallel.hpp"

namespace jellium {

void CouplingParams::validate() const {
    strip.validate();
    if (R < 1) throw InvalidParams("R must be >= 1");
    if (!(delta > 0.0 && delta < 0.5)) throw InvalidParams("delta must lie in (0, 1/2)");
    if (!(eps > 0.0 && 12.0 * eps < delta))
        throw InvalidParams("coupling needs 0 < 12 eps < delta for a valid kernel");
    if (!(h > 0.0)) throw InvalidParams("h must be positive");
    screening().reg.validate();
}

double CouplingParams::delta1() const { return (delta - 12.0 * eps) / (1.0 - 12.0 * eps); }

ScreeningParams CouplingParams::screening() const {
    ScreeningParams s;
    s.reg = RegularityParams::relaxed(M, eps, R, xi);
    s.h = h;
    s.continuum_check = false;
    s.tparams.quadrature = quadrature;
    return s;
}

KernelWeights kernel_weights(const Rational& delta, const Rational& eps) {
    const Rational one(1), c = Rational(12) * eps;
    if (!(c < delta) || !(delta < one)) throw InvalidParams("kernel weights need 12 eps < delta < 1");
    KernelWeights w;
    w.keep = one - delta;
    w.global = (delta - c) / (one - c);
    w.collar = delta - w.global;
    w.bulk_density = w.keep / (one - c) + w.global;
    w.collar_density = w.global + w.collar / c;
    return w;
}

namespace {

Point collar_start(Rng& rng, const CouplingParams& p) {
    const double w = p.collar_width();
    Point z = sample_start(rng, 0.0, 2.0 * w, p.strip.k);
    if (z(0) >= w) z(0) += p.R - 2.0 * w;
    return z;
}

}  // namespace

CoupledPair sample_coupled(Rng& rng, const CouplingParams& params) {
    params.validate();
    const StripParams& sp = params.strip;
    const long R = params.R;
    CoupledPair out;
    std::bernoulli_distribution coin(0.5);
    const bool dependent = coin(rng) && !params.force_independent;

    if (!dependent) {
        out.branch = CouplingBranch::independent;
        out.omega_p = sample_poisson(rng, BoxDomain(0, R), 1.0, sp);
        out.omega_b = sample_binomial(rng, R, sp);
        for (const Bridge& b : out.omega_b) out.z_b.push_back(b.start());
        out.labels.assign(R, Provenance::fresh);
        return out;
    }

    out.branch = CouplingBranch::dependent;
    const auto [lo, hi] = params.bulk();
    const double c = 12.0 * params.eps;
    std::poisson_distribution<long> bulk_count((1.0 - c) * R), collar_count(c * R);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 - params.delta, global = params.delta1();

    out.r_p = bulk_count(rng);
    std::vector<Bridge> pb, bb;
    for (long i = 0; i < out.r_p; ++i) {
        Point z = sample_start(rng, lo, hi, sp.k);
        Eigen::MatrixXd inc = sample_bridge_increments(rng, sp);
        if (i < R) {
            const double v = u(rng);
            Point zb;
            if (v < keep) {
                zb = z;
                out.labels.push_back(Provenance::kept);
            } else if (v < keep + global) {
                zb = sample_start(rng, 0.0, double(R), sp.k);
                out.labels.push_back(Provenance::resampled_global);
            } else {
                zb = collar_start(rng, params);
                out.labels.push_back(Provenance::resampled_collar);
            }
            out.z_b.push_back(zb);
            bb.emplace_back(zb, inc);
        }
        out.z_p.push_back(z);
        pb.emplace_back(std::move(z), std::move(inc));
    }
    for (long i = out.r_p; i < R; ++i) {
        Point z = sample_start(rng, 0.0, double(R), sp.k);
        out.z_b.push_back(z);
        out.labels.push_back(Provenance::fresh);
        bb.emplace_back(std::move(z), sample_bridge_increments(rng, sp));
    }
    const long nc = collar_count(rng);
    for (long i = 0; i < nc; ++i) {
        Point z = collar_start(rng, params);
        pb.emplace_back(std::move(z), sample_bridge_increments(rng, sp));
    }
    out.omega_p = Config(sp, std::move(pb));
    out.omega_b = Config(sp, std::move(bb));
    return out;
}

double sup_distance(const Bridge& a, const Bridge& b, FcMetric metric) {
    if (a.n_time() != b.n_time()) throw InvalidParams("sup_distance needs shared time nodes");
    double d = 0.0;
    for (int j = 0; j < a.n_time(); ++j) {
        const double dx = a.x_at(j) - b.x_at(j);
        if (metric == FcMetric::x_only) {
            d = std::max(d, std::abs(dx));
            continue;
        }
        const Point pa = a.node(j), pb = b.node(j);
        double s = dx * dx;
        for (int c = 1; c < pa.size(); ++c) {
            const double dy = std::abs(pa(c) - pb(c));
            const double t = std::min(dy, 1.0 - dy);
            s += t * t;
        }
        d = std::max(d, std::sqrt(s));
    }
    return d;
}

bool check_fc(const CoupledPair& pair, const Config& css, const std::optional<ScreeningPlan>& plan,
              const CouplingParams& params) {
    for (const Bridge& b : css) {
        bool near = false;
        for (const Bridge& b2 : pair.omega_b)
            if (sup_distance(b, b2, params.metric) <= 1.0 / 16) {
                near = true;
                break;
            }
        if (!near) return false;
    }
    if (plan) {
        const double lo = plan->x_plus(), hi = double(params.R) - lo;
        if (!(project_x(pair.omega_b, lo, hi) == project_x(css, lo, hi))) return false;
    }
    return true;
}

namespace {

FcCount make_count(long n, long hits, long total) {
    FcCount c;
    c.n = n;
    c.hits = hits;
    c.p = total ? double(hits) / double(total) : 0.0;
    c.ci = wilson_interval(hits, total);
    return c;
}

}  // namespace

FcEstimate estimate_fc_probability(const CouplingParams& params, long n_samples, std::uint64_t seed,
                                   const GreensKernel& kernel) {
    params.validate();
    if (n_samples < 100) throw InvalidParams("estimate_fc_probability needs n_samples >= 100");
    const ScreeningParams sp = params.screening();
    FcEstimate est;
    est.samples.resize(n_samples);
    parallel_for(static_cast<std::size_t>(n_samples), [&](std::size_t i) {
        FcSample& s = est.samples[i];
        s.seed = seed + i;
        std::seed_seq ss{s.seed};
        Rng rng(ss);
        const CoupledPair pair = sample_coupled(rng, params);
        const ScreenedCss sc = screen_css(pair.omega_p, sp, kernel);
        s.branch = pair.branch;
        s.regular = sc.regular;
        s.fc = check_fc(pair, sc.css, sc.plan, params);
    });
    std::array<long, 2> bn{}, bh{}, rn{}, rh{};
    for (const FcSample& s : est.samples) {
        const int b = static_cast<int>(s.branch), r = s.regular ? 1 : 0;
        ++bn[b];
        ++rn[r];
        if (s.fc) {
            ++est.hits;
            ++bh[b];
            ++rh[r];
        }
    }
    est.n = n_samples;
    est.p_hat = double(est.hits) / double(n_samples);
    est.ci = wilson_interval(est.hits, n_samples);
    for (int i = 0; i < 2; ++i) {
        est.by_branch[i] = make_count(bn[i], bh[i], n_samples);
        est.by_regular[i] = make_count(rn[i], rh[i], n_samples);
    }
    return est;
}

std::string fc_csv(const CouplingParams& params, const FcEstimate& est) {
    std::ostringstream os;
    os.precision(17);
    os << "R,delta,eps,M,branch,regular,fc,seed\n";
    for (const FcSample& s : est.samples)
        os << params.R << ',' << params.delta << ',' << params.eps << ',' << params.M << ',' << to_string(s.branch)
           << ',' << int(s.regular) << ',' << int(s.fc) << ',' << s.seed << '\n';
    return os.str();
}

double estimate_q0(Rng& rng, const StripParams& strip, long n) {
    if (n < 1) throw InvalidParams("estimate_q0 needs n >= 1");
    std::vector<double> terms(n);
    for (long i = 0; i < n; ++i) {
        const Eigen::MatrixXd inc = sample_bridge_increments(rng, strip);
        const double range = inc.col(0).maxCoeff() - inc.col(0).minCoeff();
        terms[i] = std::max(0.125 - range, 0.0);
    }
    return 16.0 * pairwise_sum(terms) / double(n);
}

double crystal_fc_probability(long R, double q0) {
    return std::exp(std::lgamma(double(R) + 1.0) + R * std::log(q0 / (16.0 * R)));
}

BlockCoupling sample_block_coupling(Rng& rng, const CouplingParams& params, long m, long max_attempts) {
    if (m < 1) throw InvalidParams("block coupling needs m >= 1");
    const long R = params.R;
    BlockCoupling out;
    while (out.attempts < max_attempts) {
        ++out.attempts;
        Config p(params.strip), b(params.strip);
        for (long i = 0; i < m; ++i) {
            const CoupledPair pair = sample_coupled(rng, params);
            p = merge(p, shift(pair.omega_p, -i * R));
            b = merge(b, shift(pair.omega_b, -i * R));
        }
        bool ok = true;
        for (long i = 0; i < m && ok; ++i) ok = long(project_x(b, double(i * R), double((i + 1) * R)).size()) == R;
        if (ok) {
            out.omega_p = std::move(p);
            out.omega_b = std::move(b);
            return out;
        }
    }
    throw InvalidParams("block coupling rejection exceeded max_attempts");
}

const char* to_string(CouplingBranch b) { return b == CouplingBranch::dependent ? "dependent" : "independent"; }

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::kept: return "kept";
        case Provenance::resampled_global: return "resampled-global";
        case Provenance::resampled_collar: return "resampled-collar";
        case Provenance::fresh: return "fresh";
    }
    return "?";
}

nlohmann::json to_json(const FcEstimate& est) {
    auto count = [](const FcCount& c) {
        return nlohmann::json{{"n", c.n}, {"hits", c.hits}, {"p", c.p}, {"ci", {c.ci.first, c.ci.second}}};
    };
    return {{"n", est.n},
            {"hits", est.hits},
            {"p_hat", est.p_hat},
            {"ci", {est.ci.first, est.ci.second}},
            {"by_branch", {{"independent", count(est.by_branch[0])}, {"dependent", count(est.by_branch[1])}}},
            {"by_regular", {{"irregular", count(est.by_regular[0])}, {"regular", count(est.by_regular[1])}}}};
}

}  // namespace jellium
