#include "jellium/gibbs.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include "jellium/energy.hpp"
#include "jellium/parallel.hpp"

namespace jellium {

void ProposalMix::validate() const {
    if (p_relocate < 0 || p_repath < 0 || p_local < 0)
        throw InvalidParams("proposal probabilities must be non-negative");
    if (std::abs(p_relocate + p_repath + p_local - 1.0) > 1e-12)
        throw InvalidParams("proposal probabilities must sum to 1");
    if (!(sigma_x > 0.0)) throw InvalidParams("sigma_x must be positive");
}

void ChainOptions::validate() const {
    if (steps < 1) throw InvalidParams("steps must be >= 1");
    if (thin < 1) throw InvalidParams("thin must be >= 1");
    if (burnin < 0) throw InvalidParams("burnin must be >= 0");
    if (!(interaction >= 0.0)) throw InvalidParams("interaction must be >= 0");
    if (verify_every < 0) throw InvalidParams("verify_every must be >= 0");
}

namespace {

StripParams strip_params(const Config& c, const GreensKernel& kernel) {
    StripParams p;
    p.k = c.k();
    p.beta = c.beta();
    p.n_time = c.n_time();
    p.eta = kernel.eta();
    return p;
}

Config replaced(const Config& c, std::size_t m, Bridge b) {
    std::vector<Bridge> bs = c.bridges();
    bs[m] = std::move(b);
    return c.with_bridges(std::move(bs));
}

}  // namespace

ChainState::ChainState(Config init, const GreensKernel& kernel, std::uint64_t seed, double interaction_)
    : config(std::move(init)),
      dom(0, static_cast<long>(config.size())),
      interaction(interaction_),
      rng(seed) {
    if (config.empty()) throw InvalidParams("chain needs at least one bridge");
    if (config.k() != kernel.k()) throw InvalidParams("kernel and configuration dimension differ");
    for (const Bridge& b : config)
        if (!dom.contains(b.start()(0)))
            throw InvalidParams("initial starts must lie in Lambda_N = [0, " + std::to_string(dom.x_hi) + ")");
    cached_energy = path_energy(config, dom, kernel);
}

double bridge_energy(const Config& config, std::size_t m, const Bridge& b, const BoxDomain& dom,
                     const GreensKernel& kernel) {
    const std::vector<double> w = trapezoid_weights(config.n_time(), config.beta());
    const double lo = double(dom.x_lo), hi = double(dom.x_hi);
    double s = 0.0;
    for (int t = 0; t < config.n_time(); ++t) {
        const Point z = b.node(t);
        double e = -background_potential(z(0), lo, hi, kernel.eta(), kernel.k());
        for (std::size_t j = 0; j < config.size(); ++j)
            if (j != m) e += eval_g_eta_eta(kernel, z - config[j].node(t));
        s += w[t] * e;
    }
    return s;
}

double delta_energy(const Config& config, std::size_t m, const Bridge& b, const BoxDomain& dom,
                    const GreensKernel& kernel) {
    return bridge_energy(config, m, b, dom, kernel) - bridge_energy(config, m, config[m], dom, kernel);
}

double acceptance_probability(double delta, double interaction) {
    const double d = interaction * delta;
    return d <= 0.0 ? 1.0 : std::exp(-d);
}

MoveRecord mcmc_step(ChainState& state, const ProposalMix& mix, const GreensKernel& kernel) {
    const Config& c = state.config;
    const StripParams p = strip_params(c, kernel);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);

    MoveRecord rec;
    rec.index = pick(state.rng);
    const Bridge& old = c[rec.index];
    const double u = unif(state.rng);
    std::optional<Bridge> proposal;
    if (u < mix.p_relocate) {
        rec.kind = MoveKind::relocate;
        proposal.emplace(sample_start(state.rng, double(state.dom.x_lo), double(state.dom.x_hi), p.k),
                         old.increments());
    } else if (u < mix.p_relocate + mix.p_repath) {
        rec.kind = MoveKind::repath;
        proposal.emplace(old.start(), sample_bridge_increments(state.rng, p));
    } else {
        rec.kind = MoveKind::local;
        std::normal_distribution<double> nudge(0.0, mix.sigma_x);
        Point s = old.start();
        s(0) += nudge(state.rng);
        // Outside Lambda_N the reference density vanishes.
        if (state.dom.contains(s(0))) proposal.emplace(std::move(s), old.increments());
        else rec.in_support = false;
    }
    const double accept_u = unif(state.rng);
    ++state.step_count;
    if (proposal) {
        rec.delta = delta_energy(c, rec.index, *proposal, state.dom, kernel);
        if (accept_u < acceptance_probability(rec.delta, state.interaction)) {
            rec.accepted = true;
            state.config = replaced(c, rec.index, std::move(*proposal));
            state.cached_energy += rec.delta;
            ++state.accepted;
        }
    }
    if (state.verify_every > 0 && state.step_count % state.verify_every == 0) {
        const double full = path_energy(state.config, state.dom, kernel);
        if (std::abs(full - state.cached_energy) > 1e-9 * std::max(1.0, std::abs(full)))
            throw EnergyDrift("cached energy " + std::to_string(state.cached_energy) + " vs recomputed " +
                              std::to_string(full));
        state.cached_energy = full;
    }
    return rec;
}

ChainState mcmc_step(ChainState state, const ProposalMix& mix, const GreensKernel& kernel, MoveRecord* record) {
    MoveRecord r = mcmc_step(state, mix, kernel);
    if (record) *record = r;
    return state;
}

ChainResult run_chain(const Config& init, const ChainOptions& opts, const ProposalMix& mix,
                      const GreensKernel& kernel) {
    opts.validate();
    mix.validate();
    ChainState state(init, kernel, opts.seed, opts.interaction);
    state.verify_every = opts.verify_every;
    ChainResult res;
    res.samples.reserve(opts.steps / opts.thin);
    for (std::int64_t s = 1; s <= opts.burnin + opts.steps; ++s) {
        mcmc_step(state, mix, kernel);
        if (s > opts.burnin && (s - opts.burnin) % opts.thin == 0) {
            res.samples.push_back(state.config);
            res.energies.push_back(state.cached_energy);
        }
    }
    res.acceptance_rate = state.acceptance_rate();
    return res;
}

std::vector<ChainResult> run_chains(const Config& init, int chains, const ChainOptions& opts, const ProposalMix& mix,
                                    const GreensKernel& kernel) {
    if (chains < 1) throw InvalidParams("chains must be >= 1");
    std::vector<ChainResult> out(chains);
    parallel_for(chains, [&](std::size_t c) {
        ChainOptions o = opts;
        o.seed = opts.seed + c;
        out[c] = run_chain(init, o, mix, kernel);
    });
    return out;
}

nlohmann::json checkpoint_to_json(const ChainState& state) {
    std::ostringstream rng;
    rng << state.rng;
    return {{"config", to_json(state.config)},
            {"domain", {state.dom.x_lo, state.dom.x_hi}},
            {"cached_energy", state.cached_energy},
            {"step_count", state.step_count},
            {"accepted", state.accepted},
            {"interaction", state.interaction},
            {"verify_every", state.verify_every},
            {"rng_state", rng.str()}};
}

ChainState checkpoint_from_json(const nlohmann::json& j) {
    ChainState s;
    s.config = config_from_json(j.at("config"));
    s.dom = BoxDomain(j.at("domain").at(0).get<long>(), j.at("domain").at(1).get<long>());
    s.cached_energy = j.at("cached_energy").get<double>();
    s.step_count = j.at("step_count").get<std::int64_t>();
    s.accepted = j.at("accepted").get<std::int64_t>();
    s.interaction = j.at("interaction").get<double>();
    s.verify_every = j.at("verify_every").get<int>();
    std::istringstream rng(j.at("rng_state").get<std::string>());
    rng >> s.rng;
    if (rng.fail()) throw InvalidParams("malformed rng_state in checkpoint");
    return s;
}

LatticeToy lattice_transition_matrix(const std::vector<double>& sites, int n_bridges, const StripParams& params,
                                     const GreensKernel& kernel) {
    params.validate();
    if (sites.empty() || n_bridges < 1) throw InvalidParams("lattice toy needs sites and bridges");
    const BoxDomain dom(0, n_bridges);
    for (double x : sites)
        if (!dom.contains(x)) throw InvalidParams("lattice sites must lie in [0, N)");
    LatticeToy toy;
    toy.sites = sites;
    toy.n_bridges = n_bridges;
    const int m = static_cast<int>(sites.size());
    std::size_t n_states = 1;
    for (int i = 0; i < n_bridges; ++i) n_states *= m;

    // Bridge b keeps transverse coordinates (b + 1/2) / N so starts stay distinct.
    auto bridge_at = [&](int b, int site) {
        Point s = Point::Constant(params.k + 1, (b + 0.5) / n_bridges);
        s(0) = sites[site];
        return Bridge::constant(std::move(s), params.n_time);
    };
    // Index = sum idx[b] m^b.
    auto decode = [&](std::size_t s) {
        std::vector<int> idx(n_bridges);
        for (int b = 0; b < n_bridges; ++b, s /= m) idx[b] = static_cast<int>(s % m);
        return idx;
    };
    auto config_of = [&](const std::vector<int>& idx) {
        std::vector<Bridge> bs;
        for (int b = 0; b < n_bridges; ++b) bs.push_back(bridge_at(b, idx[b]));
        return Config(params, std::move(bs));
    };

    toy.states.resize(n_states);
    toy.energy.resize(n_states);
    toy.transition = Eigen::MatrixXd::Zero(n_states, n_states);
    parallel_for(n_states, [&](std::size_t s) {
        const std::vector<int> idx = decode(s);
        toy.states[s] = idx;
        const Config c = config_of(idx);
        toy.energy[s] = path_energy(c, dom, kernel);
        std::size_t stride = 1;
        for (int b = 0; b < n_bridges; ++b, stride *= m) {
            // Locate bridge b inside the canonically ordered config.
            const Bridge mine = bridge_at(b, idx[b]);
            std::size_t pos = 0;
            while (!(c[pos] == mine)) ++pos;
            for (int site = 0; site < m; ++site) {
                if (site == idx[b]) continue;
                const double d = delta_energy(c, pos, bridge_at(b, site), dom, kernel);
                const std::size_t t = s + site * stride - idx[b] * stride;
                toy.transition(s, t) = acceptance_probability(d) / (double(n_bridges) * m);
            }
        }
        toy.transition(s, s) = 1.0 - toy.transition.row(s).sum();
    });
    return toy;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P) {
    const Eigen::Index n = P.rows();
    Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(n, n);
    A.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    return A.fullPivLu().solve(rhs);
}

}  // namespace jellium
