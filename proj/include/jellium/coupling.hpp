#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jellium/core_model.hpp"
#include "jellium/greens.hpp"
#include "jellium/numerics.hpp"
#include "jellium/screening.hpp"

namespace jellium {

enum class CouplingBranch { independent, dependent };
enum class Provenance { kept, resampled_global, resampled_collar, fresh };
// x_only compares x-coordinates only; euclidean adds the torus distance in y.
enum class FcMetric { x_only, euclidean };

struct CouplingParams {
    long R = 2;
    double delta = 0.4;
    double eps = 0.01;
    double M = 3.0;
    double xi = 2.0;
    StripParams strip{1, 1e-3, 0.125, 8};
    FieldQuadrature quadrature{1.0 / 4, 4};  // for the truncated energy of omega^P
    FcMetric metric = FcMetric::x_only;
    bool force_independent = false;
    double h = 1.0 / 32;

    void validate() const;
    // (delta - 12 eps) / (1 - 12 eps).
    double delta1() const;
    double collar_width() const { return 6.0 * eps * R; }
    // Lambda_{R,eps} = [6 eps R, R - 6 eps R].
    std::pair<double, double> bulk() const { return {collar_width(), R - collar_width()}; }
    ScreeningParams screening() const;
};

// Weights of K_reg and the resulting start density of Z^B on the bulk and the
// collar, times R; both densities are exactly 1 for a valid kernel.
struct KernelWeights {
    Rational keep, global, collar;
    Rational bulk_density, collar_density;
    Rational total() const { return keep + global + collar; }
};
KernelWeights kernel_weights(const Rational& delta, const Rational& eps);

struct CoupledPair {
    Config omega_p;
    Config omega_b;
    CouplingBranch branch = CouplingBranch::independent;
    long r_p = 0;  // Poisson count on Lambda_{R,eps} (dependent branch)
    // Index-ordered data for i = 1..R; z_p has r_p entries.
    std::vector<Point> z_p, z_b;
    std::vector<Provenance> labels;
};

CoupledPair sample_coupled(Rng& rng, const CouplingParams& params);

// Every Css bridge has an omega_B bridge within sup-distance 1/16; with a plan,
// additionally omega_B and Css agree exactly on starts in [x_+, R - x_+).
bool check_fc(const CoupledPair& pair, const Config& css, const std::optional<ScreeningPlan>& plan,
              const CouplingParams& params);
double sup_distance(const Bridge& a, const Bridge& b, FcMetric metric);

struct FcSample {
    CouplingBranch branch = CouplingBranch::independent;
    bool regular = false;
    bool fc = false;
    std::uint64_t seed = 0;
};

struct FcCount {
    long n = 0, hits = 0;
    double p = 0.0;  // hits / total samples, a joint probability
    std::pair<double, double> ci{0.0, 1.0};
};

struct FcEstimate {
    long n = 0, hits = 0;
    double p_hat = 0.0;
    std::pair<double, double> ci{0.0, 1.0};
    std::array<FcCount, 2> by_branch;   // indexed by CouplingBranch
    std::array<FcCount, 2> by_regular;  // [irregular, regular]
    std::vector<FcSample> samples;
};

// Sample i uses seed + i. Throws InvalidParams when n_samples < 100.
FcEstimate estimate_fc_probability(const CouplingParams& params, long n_samples, std::uint64_t seed,
                                   const GreensKernel& kernel);
std::string fc_csv(const CouplingParams& params, const FcEstimate& est);

// 16 E[(1/8 - range of b_x)_+]: with p the chance that a uniform bridge stays
// within 1/16 of a fixed constant, q0 = 16 R p.
double estimate_q0(Rng& rng, const StripParams& strip, long n);
// R! (q0 / (16 R))^R.
double crystal_fc_probability(long R, double q0);

struct BlockCoupling {
    Config omega_p, omega_b;
    long attempts = 0;
};
// m shifted block pairs, rejected until #omega_B in every block K_i is R.
BlockCoupling sample_block_coupling(Rng& rng, const CouplingParams& params, long m, long max_attempts = 1000);

const char* to_string(CouplingBranch b);
const char* to_string(Provenance p);
nlohmann::json to_json(const FcEstimate& est);

}  // namespace jellium
