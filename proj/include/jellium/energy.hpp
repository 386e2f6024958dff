#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "jellium/core_model.hpp"
#include "jellium/fields.hpp"
#include "jellium/greens.hpp"

namespace jellium {

// Pointwise E = sum_b grad g^eta(z - c_b) - int_{[a,b] x D} grad g (k = 1).
class FieldEvaluator {
public:
    FieldEvaluator(std::vector<Eigen::Vector2d> centers, double a, double b, double eta);
    FieldEvaluator(const Config& config, const BoxDomain& dom, double eta, int t);

    Eigen::Vector2d operator()(double x, double y) const;
    const std::vector<Eigen::Vector2d>& centers() const { return c_; }
    double eta() const { return eta_; }
    double bg_lo() const { return a_; }
    double bg_hi() const { return b_; }
    // Centres with x in [lo, hi].
    std::pair<std::size_t, std::size_t> range(double lo, double hi) const;

private:
    std::vector<Eigen::Vector2d> c_;  // sorted by x, y reduced to [0, 1)
    std::vector<double> xs_;
    double a_, b_, eta_;
};

// Tensor Gauss rule on cells of side `cell`; cells cut by a shell are split
// along the circle so each piece has an analytic integrand.
struct FieldQuadrature {
    double cell = 1.0 / 16;
    int order = 8;
};

// int_{[lo, hi] x D} |E|^2 dz.
double integrate_field_energy(const FieldEvaluator& E, double lo, double hi, const FieldQuadrature& q = {});
// int_D |E(x, y)|^2 dy.
double integrate_line_energy(const FieldEvaluator& E, double x, int order = 8);

// Mean of Phi(x + s) over the sphere s of radius eta, where
// Phi(x) = int_a^b -|x - x'| / 2 dx' is the potential of the background.
double background_potential(double x, double a, double b, double eta, int k);

// Trapezoid weights of the n time nodes on [0, beta].
std::vector<double> trapezoid_weights(int n, double beta);

// Smeared classical energy H^eta of points in the background window dom.
double classical_energy(const std::vector<Point>& points, const BoxDomain& dom, const GreensKernel& kernel);
// int_0^beta H^eta(omega(t)) dt by the trapezoid rule on the path nodes.
double path_energy(const Config& config, const BoxDomain& dom, const GreensKernel& kernel);

struct EnergyReport {
    double classical = 0.0;  // H^eta at t = 0
    double path = 0.0;       // (1/beta) int H^eta dt
    double field = 0.0;      // (1/2 beta) int |grad V|^2
    double self_term = 0.0;  // (N/2) g^{eta,eta}(0)
    double split_residual = 0.0;
    double window_lo = 0.0, window_hi = 0.0;
    double relative_residual() const { return split_residual / std::max(std::abs(field), 1e-300); }
};
nlohmann::json to_json(const EnergyReport& r);

// Both sides of the split identity. The field side integrates over a window
// grown until the edge field is below 1e-12; quadrature cell is 4 grid.h.
EnergyReport verify_split(const Config& config, const BoxDomain& dom, const GreensKernel& kernel, const Grid& grid);

// (1/2 beta) int over [lo, hi] x D x [0, beta] of |grad V_t|^2.
double restricted_field_energy(const Config& config, const BoxDomain& dom, double eta, double lo, double hi,
                               const FieldQuadrature& q = {});

// mu_t(region [lo, hi]) from the rasterized charge on a grid of spacing h.
double net_charge(const Config& config, const BoxDomain& dom, int t, double lo, double hi, double eta, double h);
// Exact mu_t((-inf, x] x D): background length minus shell fractions left of x.
double net_charge_left(const Config& config, const BoxDomain& dom, int t, double x, double eta);
// Fraction of the sphere of radius eta about cx lying in {x' <= x}.
double shell_fraction_left(double cx, double x, double eta, int k);

// #{b : inf_t |b_x(t) - x| <= 1}.
int count_near(const Config& config, double x);

struct ImbalanceReport {
    double lhs = 0.0;
    double flux_term = 0.0;
    int count_term = 0;
    double rhs = 0.0;
    bool holds = false;
};
nlohmann::json to_json(const ImbalanceReport& r);

// |mu_0((-inf, x_-])| <= ((1/beta) int |grad V_t(x_-, .)|^2)^{1/2} + count(x_-).
ImbalanceReport check_imbalance_bound(const Config& config, const BoxDomain& dom, const GreensKernel& kernel,
                                      double x_minus);
// |mu_0([x_-, x_+])| <= ((4/beta) sum_s int |grad V_t(x_s, .)|^2)^{1/2} + sum_s count(x_s).
ImbalanceReport check_imbalance_bound2(const Config& config, const BoxDomain& dom, const GreensKernel& kernel,
                                       double x_minus, double x_plus);

struct TruncatedEnergyParams {
    std::vector<long> margins{1, 2, 4};
    bool lattice_fill = true;
    int descent_iters = 0;
    FieldQuadrature quadrature{1.0 / 8, 6};
    // User-supplied feasible extensions: window Lambda and the bridges added outside K.
    std::vector<std::pair<BoxDomain, std::vector<Bridge>>> extensions;
    void validate() const;
};

struct TruncatedEnergyResult {
    double value = std::numeric_limits<double>::infinity();
    long best_margin = -1;
    std::vector<double> candidates;  // per margin, +inf when infeasible
    BoxDomain window;                // Lambda of the best candidate
    std::vector<Bridge> collar;      // bridges the best candidate adds outside K
};

// Upper approximation of tH_K: minimum over the candidate extensions of the
// K-restricted field energy.
TruncatedEnergyResult truncated_energy_report(const Config& config, const BoxDomain& K,
                                              const TruncatedEnergyParams& params, const GreensKernel& kernel);
double truncated_energy(const Config& config, const BoxDomain& K, const TruncatedEnergyParams& params,
                        const GreensKernel& kernel);
// Collar for margin w: c time-constant bridges on a lattice in [K.lo - w, K.lo) and [K.hi, K.hi + w).
std::vector<Bridge> lattice_collar(const BoxDomain& K, long w, long count, int k, int n_time);

}  // namespace jellium
