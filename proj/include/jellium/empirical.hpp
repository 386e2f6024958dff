#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "jellium/core_model.hpp"
#include "jellium/energy.hpp"
#include "jellium/numerics.hpp"

namespace jellium {

struct EmpiricalMeasure {
    std::vector<std::pair<Config, double>> atoms;

    double total_weight() const;
    template <typename F>
    double expect(F&& f) const {
        std::vector<double> terms;
        terms.reserve(atoms.size());
        for (const auto& [c, w] : atoms) terms.push_back(w * f(c));
        return pairwise_sum(terms);
    }
};

// (1/N) sum_{i < N} delta_{theta_i omega}.
EmpiricalMeasure empirical_field(const Config& config, long N);
// (1/m) sum_i delta_{theta_{(i-1)R}(omega_{K_i})}, K_i = [(i-1)R, iR) x D. Throws BadPartition unless N = mR.
EmpiricalMeasure block_average(const Config& config, long N, long R, long m);

struct RegularityParams {
    double M = 3.0;
    double eps = 0.04;
    long R = 40;
    double xi = 2.0;
    bool paper_scale = false;

    // xi = eps^{-3}; requires R > (2/eps)^8.
    static RegularityParams paper(double M, double eps, long R);
    // Desk-scale values with free xi.
    static RegularityParams relaxed(double M, double eps, long R, double xi);
    void validate() const;
    bool paper_constraints_hold() const;

    double dense_threshold() const { return 4.0 * xi / eps; }
    // Admissible x_0 for dense abscissas: [2R^{7/8}, R - 2R^{7/8}] with paper_scale, [eps R, R - eps R] relaxed.
    std::pair<double, double> dense_window() const;
    std::pair<double, double> tame_window() const { return {eps * R, R - eps * R}; }
    double range_threshold() const;  // eps^{-7/3}
};

struct RegularityRecord {
    bool regular = false;
    bool energy_ok = false;
    bool range_ok = false;
    double energy = 0.0;
    double range_sum = 0.0;  // sum_b (psi(b)^{7/6} - eps^{-7/3})_+ over omega_{Lambda_R}
};

// Both clauses, given the truncated-energy surrogate of omega.
RegularityRecord classify_regular(const Config& config, const RegularityParams& params, double truncated_energy);
RegularityRecord classify_regular(const Config& config, const RegularityParams& params, const GreensKernel& kernel,
                                  const TruncatedEnergyParams& tparams = {});

struct Interval {
    double lo = 0.0, hi = 0.0;  // closed
    double length() const { return hi - lo; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

// #{b in omega_{Lambda_R} : |b_x(0) - x0| <= xi}.
int dense_count(const Config& config, const RegularityParams& params, double x0);
// Exact set of x0 in the dense window with dense_count >= 4 xi / eps, by an
// event sweep over the window ends s +- xi.
std::vector<Interval> dense_abscissas(const Config& config, const RegularityParams& params);
double total_length(const std::vector<Interval>& set);

// Throws OutOfRange unless x0 lies in [eps R, R - eps R].
bool is_tame(double x0, const Config& config, const RegularityParams& params);

struct RegularFractionRow {
    double M = 0.0, eps = 0.0;
    long R = 0;
    long regular = 0, total = 0;
    double fraction() const { return total ? double(regular) / double(total) : 0.0; }
};
// energies[i] is the truncated-energy surrogate of samples[i].
std::vector<RegularFractionRow> regular_fraction(const std::vector<Config>& samples,
                                                 const std::vector<double>& energies,
                                                 const std::vector<RegularityParams>& params_list);

struct FreeEnergyEstimate {
    double w_m_r = 0.0;
    double ent_hat = 0.0;
    double f_hat = 0.0;
    double beta = 1.0;
    double ci_w = 0.0, ci_ent = 0.0, ci_f = 0.0;

    // f_hat = w_m_r + ent_hat / beta.
    static FreeEnergyEstimate combine(const MeanCI& w, const MeanCI& ent, double beta);
};

// Truncated energy of each window sample, in parallel.
std::vector<double> truncated_energies(const std::vector<Config>& samples, long R, const GreensKernel& kernel,
                                       const TruncatedEnergyParams& tparams = {});
// Mean of min(tH / R, M) with a batch-means CI. tH is an upper surrogate, so
// the estimate is biased upward.
MeanCI estimate_wmr(const std::vector<double>& energies, double M, long R, int batches = 10);

struct EntropyOptions {
    int psi_bins = 10;
    int reference_draws = 100000;
    std::uint64_t seed = 2024;
    int batches = 10;
    double level = 0.99;
    std::size_t min_samples = 1000;
};

struct EntropyEstimate {
    double value = 0.0;  // max(raw, 0)
    double raw = 0.0;
    double half_width = 0.0;
    double count_part = 0.0;
    double psi_part = 0.0;
    int feature_resolution = 1;
};

// Plug-in relative entropy per unit length of coarse features against the
// unit Poisson reference: per-subcell start counts (subcell width
// 1/feature_resolution, exact Poisson reference) plus intensity times the
// KL of quantized psi (reference quantiles by Monte Carlo). Miller-Madow
// corrected. Sums marginal KLs, so it is a lower estimate of ent.
EntropyEstimate estimate_entropy(const std::vector<Config>& samples, long R, int feature_resolution,
                                 const EntropyOptions& opts = {});
// Count part only, for one sample set (used per batch).
double count_feature_kl(const std::vector<Config>& samples, long R, int feature_resolution);

// (1/R) mean over samples of sum_b (psi(b)^{7/6} - zeta)_+, one value per zeta.
std::vector<double> psi_tail_profile(const std::vector<Config>& samples, long R, const std::vector<double>& zetas);
// Least-squares slope of log(values) against log(xs).
double loglog_slope(const std::vector<double>& xs, const std::vector<double>& values);

struct FubRangeCheck {
    long windows = 0;
    long violations = 0;  // windows [i, i + R] with omega outside Theta
    double bound = 0.0;   // 2 sum_b (psi(b) - R^{7/8} + 2)_+
    bool holds() const { return double(violations) <= bound; }
};
// Enumerates every integer window of length R that any bridge can reach.
FubRangeCheck check_fub_range(const Config& config, long R);

struct EdenseCheck {
    bool constants_ok = false;
    bool energy_ok = false;
    bool range_ok = false;
    double field_energy = 0.0;
    double dense_measure = 0.0;
    double bound = 0.0;  // eps R
    bool hypotheses() const { return constants_ok && energy_ok && range_ok; }
    bool conclusion() const { return dense_measure <= bound; }
    bool holds() const { return !hypotheses() || conclusion(); }
};
// With paper_scale: M > 2, eps < 1/M^2, R > (2/eps)^8, energy < MR, psi < R^{7/8}.
// Relaxed: psi < xi and the margin 2 xi + eta below the dense window is at
// least 8M/R, which is what the counting argument needs.
EdenseCheck check_edense(const Config& config, const RegularityParams& params, double field_energy, double eta);
// Same with (1/2 beta) int_{Lambda_R} |grad V_t(omega, Lambda_R)|^2 computed by quadrature.
EdenseCheck check_edense(const Config& config, const RegularityParams& params, double eta,
                         const FieldQuadrature& q = {1.0 / 8, 6});

struct EstimateRow {
    double M = 0.0, eps = 0.0;
    long R = 0;
    FreeEnergyEstimate estimate;
};
std::string estimate_table_csv(const std::vector<EstimateRow>& rows);

}  // namespace jellium
