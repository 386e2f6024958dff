#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "jellium/core_model.hpp"
#include "jellium/errors.hpp"
#include "jellium/greens.hpp"

namespace jellium {

class EnergyDrift : public NumericalError {
public:
    explicit EnergyDrift(const std::string& what) : NumericalError("EnergyDrift", what) {}
};

struct ProposalMix {
    double p_relocate = 0.4;
    double p_repath = 0.4;
    double p_local = 0.2;
    double sigma_x = 0.3;
    void validate() const;
};

// Markov chain on N bridges with starts in Lambda_N = [0, N] x D, targeting
// exp(-interaction * int_0^beta H^eta_{Lambda_N}) against the reference measure.
struct ChainState {
    Config config;
    BoxDomain dom;
    double cached_energy = 0.0;  // path_energy(config, dom)
    std::int64_t step_count = 0;
    std::int64_t accepted = 0;
    double interaction = 1.0;  // 0 samples the reference measure
    int verify_every = 1000;   // full recompute period; 0 disables
    Rng rng;

    ChainState() = default;
    ChainState(Config init, const GreensKernel& kernel, std::uint64_t seed, double interaction = 1.0);
    double acceptance_rate() const { return step_count ? double(accepted) / double(step_count) : 0.0; }
};

enum class MoveKind { relocate, repath, local };

struct MoveRecord {
    MoveKind kind = MoveKind::relocate;
    std::size_t index = 0;
    double delta = 0.0;
    bool in_support = true;  // false when a nudge leaves Lambda_N
    bool accepted = false;
};

// int_0^beta of the terms of H^eta that involve bridge m, with the bridge
// replaced by `b`: sum_{j != m} g^{eta,eta} - B(b(t)).
double bridge_energy(const Config& config, std::size_t m, const Bridge& b, const BoxDomain& dom,
                     const GreensKernel& kernel);
// Energy change from replacing bridge m by b, from the pair terms of bridge m only.
double delta_energy(const Config& config, std::size_t m, const Bridge& b, const BoxDomain& dom,
                    const GreensKernel& kernel);
double acceptance_probability(double delta, double interaction = 1.0);

// One Metropolis step in place. Rejected moves leave the configuration untouched.
MoveRecord mcmc_step(ChainState& state, const ProposalMix& mix, const GreensKernel& kernel);
// Value form.
ChainState mcmc_step(ChainState state, const ProposalMix& mix, const GreensKernel& kernel, MoveRecord* record);

struct ChainOptions {
    std::int64_t steps = 1000;
    std::int64_t thin = 1;
    std::int64_t burnin = 0;
    std::uint64_t seed = 1;
    double interaction = 1.0;
    int verify_every = 1000;
    void validate() const;
};

struct ChainResult {
    std::vector<Config> samples;
    std::vector<double> energies;  // path energy of each sample
    double acceptance_rate = 0.0;
};

// Runs burnin + steps steps and keeps every thin-th state after burn-in.
ChainResult run_chain(const Config& init, const ChainOptions& opts, const ProposalMix& mix,
                      const GreensKernel& kernel);
// Independent chains in parallel; chain c uses seed opts.seed + c.
std::vector<ChainResult> run_chains(const Config& init, int chains, const ChainOptions& opts, const ProposalMix& mix,
                                    const GreensKernel& kernel);

nlohmann::json checkpoint_to_json(const ChainState& state);
ChainState checkpoint_from_json(const nlohmann::json& j);

// Toy chain: N constant bridges, bridge b on one of `sites` at transverse
// coordinates (b + 1/2) / N; a move picks a bridge and a site uniformly and
// accepts with the chain's Metropolis rule.
struct LatticeToy {
    std::vector<double> sites;
    int n_bridges = 2;
    std::vector<std::vector<int>> states;  // site index per bridge
    Eigen::MatrixXd transition;            // row-stochastic
    Eigen::VectorXd energy;                // full path_energy per state
};
LatticeToy lattice_transition_matrix(const std::vector<double>& sites, int n_bridges, const StripParams& params,
                                     const GreensKernel& kernel);
// Left eigenvector of P for eigenvalue 1, normalized to sum 1.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P);

}  // namespace jellium
