#include <algorithm>
#include <cmath>
#include <map>

#include <boost/math/distributions/poisson.hpp>
#include <gtest/gtest.h>

#include "jellium/coupling.hpp"
#include "jellium/errors.hpp"

using namespace jellium;

namespace {

CouplingParams tiny() { return CouplingParams{}; }

CouplingParams wide() {
    CouplingParams p;
    p.R = 10;
    p.delta = 0.4;
    p.eps = 0.01;
    return p;
}

Point pt(double x, double y) {
    Point p(2);
    p << x, y;
    return p;
}

Config constants(const std::vector<double>& xs, const StripParams& sp) {
    std::vector<Bridge> bs;
    for (double x : xs) bs.push_back(Bridge::constant(pt(x, 0.0), sp.n_time));
    return Config(sp, bs);
}

// Poisson count histogram test for starts in [lo, hi).
double poisson_count_pvalue(const std::vector<Config>& samples, double lo, double hi) {
    std::map<long, double> hist;
    long max_n = 0;
    for (const Config& c : samples) {
        const long n = static_cast<long>(project_x(c, lo, hi).size());
        hist[n] += 1.0;
        max_n = std::max(max_n, n);
    }
    const boost::math::poisson_distribution<> pois(hi - lo);
    std::vector<double> obs, expd;
    const double total = double(samples.size());
    for (long n = 0; n <= max_n; ++n) {
        obs.push_back(hist.count(n) ? hist[n] : 0.0);
        expd.push_back(total * (n < max_n ? boost::math::pdf(pois, n) : boost::math::cdf(complement(pois, n - 1))));
    }
    return chi2_gof(obs, expd);
}

}  // namespace

TEST(KernelWeightsTest, ExactDensities) {
    const KernelWeights w = kernel_weights(Rational(3, 8), Rational(1, 100));
    EXPECT_EQ(w.total(), Rational(1));
    EXPECT_EQ(w.keep, Rational(5, 8));
    EXPECT_EQ(w.bulk_density, Rational(1));
    EXPECT_EQ(w.collar_density, Rational(1));
    for (int d = 2; d < 50; ++d) {
        const KernelWeights v = kernel_weights(Rational(d, 100), Rational(1, 1000));
        EXPECT_EQ(v.total(), Rational(1));
        EXPECT_EQ(v.bulk_density, Rational(1));
        EXPECT_EQ(v.collar_density, Rational(1));
    }
    EXPECT_THROW(kernel_weights(Rational(1, 10), Rational(1, 100)), InvalidParams);
}

TEST(CouplingParamsTest, Validation) {
    CouplingParams p = tiny();
    EXPECT_NO_THROW(p.validate());
    EXPECT_NEAR(p.delta1(), 0.28 / 0.88, 1e-15);
    p.delta = 0.6;
    EXPECT_THROW(p.validate(), InvalidParams);
    p = tiny();
    p.delta = 0.1;
    EXPECT_THROW(p.validate(), InvalidParams);
}

TEST(SampleCoupled, KeepRate) {
    CouplingParams p = wide();
    p.delta = 0.1;
    p.eps = 0.005;
    Rng rng(11);
    long draws = 0, kept = 0;
    while (draws < 10000) {
        const CoupledPair pair = sample_coupled(rng, p);
        if (pair.branch != CouplingBranch::dependent) continue;
        for (Provenance l : pair.labels) {
            if (l == Provenance::fresh) continue;
            ++draws;
            kept += l == Provenance::kept;
        }
    }
    const double rate = double(kept) / draws, se = std::sqrt(0.09 / draws);
    EXPECT_NEAR(rate, 0.9, 3.0 * se);
}

TEST(SampleCoupled, LabelsAndProvenance) {
    const CouplingParams p = wide();
    Rng rng(3);
    const auto [lo, hi] = p.bulk();
    int dependent = 0;
    for (int s = 0; s < 300; ++s) {
        const CoupledPair pair = sample_coupled(rng, p);
        ASSERT_EQ(pair.omega_b.size(), std::size_t(p.R));
        ASSERT_EQ(pair.labels.size(), std::size_t(p.R));
        ASSERT_EQ(pair.z_b.size(), std::size_t(p.R));
        std::vector<double> xs;
        for (const Point& z : pair.z_b) xs.push_back(z(0));
        std::vector<double> bx;
        for (const Bridge& b : pair.omega_b) bx.push_back(b.start()(0));
        std::sort(xs.begin(), xs.end());
        EXPECT_EQ(xs, bx);
        if (pair.branch == CouplingBranch::independent) {
            for (Provenance l : pair.labels) EXPECT_EQ(l, Provenance::fresh);
            continue;
        }
        ++dependent;
        EXPECT_EQ(pair.z_p.size(), std::size_t(pair.r_p));
        for (long i = 0; i < p.R; ++i) {
            const Provenance l = pair.labels[i];
            EXPECT_EQ(l == Provenance::fresh, i >= pair.r_p);
            if (l == Provenance::kept) EXPECT_EQ(pair.z_b[i], pair.z_p[i]);
            const double x = pair.z_b[i](0);
            if (l == Provenance::resampled_collar) EXPECT_TRUE(x < lo || x >= hi);
            EXPECT_GE(x, 0.0);
            EXPECT_LT(x, double(p.R));
        }
        for (const Point& z : pair.z_p) {
            EXPECT_GE(z(0), lo);
            EXPECT_LT(z(0), hi);
        }
    }
    EXPECT_GT(dependent, 100);
}

TEST(SampleCoupled, FirstMarginalIsPoisson) {
    const CouplingParams p = wide();
    Rng rng(5);
    std::vector<Config> ps;
    for (int s = 0; s < 10000; ++s) ps.push_back(sample_coupled(rng, p).omega_p);
    EXPECT_GT(poisson_count_pvalue(ps, 0.0, 10.0), 0.01);
    EXPECT_GT(poisson_count_pvalue(ps, 0.0, 0.6), 0.01);
    EXPECT_GT(poisson_count_pvalue(ps, 0.3, 4.0), 0.01);
    EXPECT_GT(poisson_count_pvalue(ps, 9.0, 10.0), 0.01);
}

TEST(SampleCoupled, SecondMarginalIsBinomial) {
    const CouplingParams p = wide();
    Rng rng(7);
    std::vector<double> bins(20, 0.0);
    const int j = 3;
    const double t = p.strip.beta * j / (p.strip.n_time - 1);
    const double var = t * (p.strip.beta - t) / p.strip.beta;
    double ss = 0.0;
    long n = 0;
    for (int s = 0; s < 10000; ++s) {
        const CoupledPair pair = sample_coupled(rng, p);
        ASSERT_EQ(pair.omega_b.size(), std::size_t(p.R));
        for (const Bridge& b : pair.omega_b) {
            bins[static_cast<int>(b.start()(0) / p.R * bins.size())] += 1.0;
            ss += b.increments()(j, 0) * b.increments()(j, 0);
            ++n;
        }
    }
    const std::vector<double> expd(bins.size(), double(n) / bins.size());
    EXPECT_GT(chi2_gof(bins, expd), 0.01);
    // sum of squares / var ~ chi2(n).
    const double upper = chi2_pvalue(ss / var, static_cast<int>(n));
    EXPECT_GT(2.0 * std::min(upper, 1.0 - upper), 0.01);
}

TEST(CheckFc, IdenticalIsTrue) {
    const CouplingParams p = wide();
    const Config css = constants({0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.5}, p.strip);
    CoupledPair pair;
    pair.omega_b = css;
    EXPECT_TRUE(check_fc(pair, css, std::nullopt, p));
    ScreeningPlan plan;
    plan.R = p.R;
    plan.left.x_plus = 2.0;
    EXPECT_TRUE(check_fc(pair, css, plan, p));
}

TEST(CheckFc, ThresholdOneSixteenth) {
    const CouplingParams p = wide();
    const Config css = constants({0.5, 1.5, 2.5}, p.strip);
    CoupledPair pair;
    pair.omega_b = constants({0.5, 1.5, 2.6}, p.strip);
    EXPECT_FALSE(check_fc(pair, css, std::nullopt, p));
    pair.omega_b = constants({0.5, 1.5, 2.5625}, p.strip);
    EXPECT_TRUE(check_fc(pair, css, std::nullopt, p));
}

TEST(CheckFc, RegularClauseNeedsExactMatch) {
    const CouplingParams p = wide();
    const Config css = constants({0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.5}, p.strip);
    CoupledPair pair;
    pair.omega_b = constants({0.5, 1.5, 2.5, 3.5, 4.51, 5.5, 6.5, 7.5, 8.5, 9.5}, p.strip);
    EXPECT_TRUE(check_fc(pair, css, std::nullopt, p));
    ScreeningPlan plan;
    plan.R = p.R;
    plan.left.x_plus = 2.0;
    EXPECT_FALSE(check_fc(pair, css, plan, p));
    // A difference outside [x_+, R - x_+) only needs closeness.
    pair.omega_b = constants({0.51, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.5}, p.strip);
    EXPECT_TRUE(check_fc(pair, css, plan, p));
}

TEST(SupDistance, MetricsAndTorus) {
    StripParams sp;
    sp.n_time = 3;
    Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(3, 2);
    inc(1, 0) = 0.05;
    const Bridge a(pt(1.0, 0.98), inc), b = Bridge::constant(pt(1.0, 0.02), 3);
    EXPECT_NEAR(sup_distance(a, b, FcMetric::x_only), 0.05, 1e-12);
    EXPECT_NEAR(sup_distance(a, b, FcMetric::euclidean), std::hypot(0.05, 0.04), 1e-12);
}

TEST(FcOracle, CrystalFormula) {
    EXPECT_DOUBLE_EQ(crystal_fc_probability(2, 2.0), 2.0 / 256.0);
    EXPECT_NEAR(crystal_fc_probability(3, 1.5), 6.0 * std::pow(1.5 / 48.0, 3), 1e-15);
    StripParams frozen;
    frozen.beta = 1e-14;
    Rng rng(1);
    EXPECT_NEAR(estimate_q0(rng, frozen, 100), 2.0, 1e-5);
}

TEST(EstimateFc, TinyRegimeIsPositive) {
    const CouplingParams p = tiny();
    const GreensKernel kernel(p.strip);
    const FcEstimate est = estimate_fc_probability(p, 2000, 100, kernel);
    EXPECT_GT(est.p_hat, 0.0);
    EXPECT_LE(est.p_hat, 1.0);
    EXPECT_LE(est.ci.first, est.p_hat);
    EXPECT_GE(est.ci.second, est.p_hat);
    EXPECT_GE(est.ci.first, 0.0);
    EXPECT_LE(est.ci.second, 1.0);
    EXPECT_EQ(est.by_branch[0].n + est.by_branch[1].n, est.n);
    EXPECT_EQ(est.by_regular[0].hits + est.by_regular[1].hits, est.hits);

    Rng rng(9);
    const double q0 = estimate_q0(rng, p.strip, 200000);
    const double joint = 0.5 * crystal_fc_probability(p.R, q0);
    EXPECT_GE(joint, est.by_branch[0].ci.first);
    EXPECT_LE(joint, est.by_branch[0].ci.second);
}

TEST(EstimateFc, ForcedIndependentMatchesFormula) {
    CouplingParams p = tiny();
    p.force_independent = true;
    const GreensKernel kernel(p.strip);
    const FcEstimate est = estimate_fc_probability(p, 2000, 500, kernel);
    EXPECT_EQ(est.by_branch[1].n, 0);
    Rng rng(10);
    const double q0 = estimate_q0(rng, p.strip, 200000);
    const double target = crystal_fc_probability(p.R, q0);
    EXPECT_GE(target, est.ci.first);
    EXPECT_LE(target, est.ci.second);
}

TEST(EstimateFc, DeterministicCsv) {
    const CouplingParams p = tiny();
    const GreensKernel kernel(p.strip);
    const std::string a = fc_csv(p, estimate_fc_probability(p, 200, 42, kernel));
    const std::string b = fc_csv(p, estimate_fc_probability(p, 200, 42, kernel));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.substr(0, a.find('\n')), "R,delta,eps,M,branch,regular,fc,seed");
    EXPECT_THROW(estimate_fc_probability(p, 50, 1, kernel), InvalidParams);
}

TEST(BlockCouplingTest, EveryBlockHoldsR) {
    const CouplingParams p = wide();
    Rng rng(4);
    const BlockCoupling bc = sample_block_coupling(rng, p, 3);
    EXPECT_EQ(bc.omega_b.size(), std::size_t(3 * p.R));
    for (long i = 0; i < 3; ++i)
        EXPECT_EQ(project_x(bc.omega_b, double(i * p.R), double((i + 1) * p.R)).size(), std::size_t(p.R));
    EXPECT_GE(bc.attempts, 1);
}
