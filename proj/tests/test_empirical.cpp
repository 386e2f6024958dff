#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "jellium/empirical.hpp"
#include "jellium/errors.hpp"

using namespace jellium;

namespace {

Point pt(double x, double y) {
    Point p(2);
    p << x, y;
    return p;
}

StripParams params(int n_time = 8, double beta = 1.0) {
    StripParams p;
    p.n_time = n_time;
    p.beta = beta;
    return p;
}

Config constant_config(const std::vector<std::pair<double, double>>& starts, int n_time = 2) {
    std::vector<Bridge> bs;
    for (auto [x, y] : starts) bs.push_back(Bridge::constant(pt(x, y), n_time));
    return Config(params(n_time), bs);
}

Config crystal(long R, int n_time = 2) {
    std::vector<std::pair<double, double>> s;
    for (long i = 0; i < R; ++i) s.push_back({i + 0.5, 0.0});
    return constant_config(s, n_time);
}

bool near(const Config& a, const Config& b, double tol = 1e-12) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if ((a[i].start() - b[i].start()).norm() > tol || !(a[i].increments() - b[i].increments()).isZero(tol))
            return false;
    return true;
}

double count_in_unit(const Config& c) {
    double n = 0;
    for (const Bridge& b : c) n += b.start()(0) >= 0 && b.start()(0) < 1;
    return n;
}

}  // namespace

TEST(EmpiricalField, SingleAtomForNEqualsOne) {
    Config w = constant_config({{0.2, 0.1}, {0.7, 0.4}});
    EmpiricalMeasure e = empirical_field(w, 1);
    ASSERT_EQ(e.atoms.size(), 1u);
    EXPECT_TRUE(e.atoms[0].first == w);
    EXPECT_EQ(e.atoms[0].second, 1.0);
    EXPECT_THROW(empirical_field(w, 0), InvalidParams);
}

TEST(EmpiricalField, LocalExpectationIsShiftAverage) {
    Rng rng(1);
    Config w = sample_binomial(rng, 7, params());
    EmpiricalMeasure e = empirical_field(w, 7);
    EXPECT_EQ(e.atoms.size(), 7u);
    EXPECT_NEAR(e.total_weight(), 1.0, 1e-15);
    // f = number of starts in [0, 1); shifted evaluations count starts in [i, i + 1).
    EXPECT_NEAR(e.expect(count_in_unit), 1.0, 1e-12);
}

TEST(EmpiricalField, IntegerShiftCovariance) {
    Rng rng(2);
    Config w = sample_binomial(rng, 5, params());
    EmpiricalMeasure a = empirical_field(w, 5);
    EmpiricalMeasure b = empirical_field(shift(w, 1), 5);
    // theta_i theta_1 = theta_{i+1}: only the boundary atom differs.
    for (int i = 0; i + 1 < 5; ++i) EXPECT_TRUE(near(b.atoms[i].first, a.atoms[i + 1].first));
    EXPECT_FALSE(near(b.atoms[4].first, a.atoms[0].first));
}

TEST(BlockAverage, Basics) {
    Config w = constant_config({{0.5, 0.1}, {2.0, 0.4}, {3.99, 0.2}, {5.5, 0.9}});
    EmpiricalMeasure one = block_average(w, 6, 6, 1);
    ASSERT_EQ(one.atoms.size(), 1u);
    EXPECT_TRUE(one.atoms[0].first == w);
    EmpiricalMeasure three = block_average(w, 6, 2, 3);
    ASSERT_EQ(three.atoms.size(), 3u);
    std::size_t total = 0;
    for (const auto& [c, wt] : three.atoms) {
        total += c.size();
        EXPECT_EQ(wt, 1.0 / 3);
        for (const Bridge& b : c) {
            EXPECT_GE(b.start()(0), 0.0);
            EXPECT_LT(b.start()(0), 2.0);
        }
    }
    EXPECT_EQ(total, w.size());
    // Half-open: x = 2 belongs to the second block.
    EXPECT_EQ(three.atoms[0].first.size(), 1u);
    EXPECT_EQ(three.atoms[1].first.size(), 2u);
    EXPECT_THROW(block_average(w, 6, 4, 2), BadPartition);
}

TEST(RegularityParams, Validation) {
    EXPECT_NO_THROW(RegularityParams::relaxed(3, 0.04, 40, 2));
    EXPECT_THROW(RegularityParams::relaxed(2, 0.04, 40, 2), InvalidParams);
    EXPECT_THROW(RegularityParams::relaxed(3, 0.2, 40, 2), InvalidParams);
    EXPECT_THROW(RegularityParams::paper(3, 0.1, 1000), InvalidParams);
    RegularityParams p = RegularityParams::paper(3, 0.1, 30'000'000'000L);
    EXPECT_NEAR(p.xi, 1000.0, 1e-9);
    EXPECT_TRUE(p.paper_constraints_hold());
    EXPECT_FALSE(RegularityParams{}.paper_constraints_hold());
}

TEST(ClassifyRegular, ConstantBridgesPassRangeClause) {
    RegularityRecord r = classify_regular(crystal(40), RegularityParams{}, 0.0);
    EXPECT_TRUE(r.range_ok);
    EXPECT_EQ(r.range_sum, 0.0);
    EXPECT_TRUE(r.regular);
    EXPECT_FALSE(classify_regular(crystal(40), RegularityParams{}, 1e6).energy_ok);
}

TEST(ClassifyRegular, LongBridgeIsIrregularAtFullScale) {
    const long R = 30'000'000'000L;
    RegularityParams p = RegularityParams::paper(3, 0.1, R);
    Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(3, 2);
    inc(1, 0) = std::pow(double(R), 0.875);
    Config w(params(3), {Bridge(pt(10.0, 0.0), inc)});
    RegularityRecord r = classify_regular(w, p, 0.0);
    EXPECT_FALSE(r.range_ok);
    EXPECT_FALSE(r.regular);
}

TEST(ClassifyRegular, MonotoneInM) {
    Rng rng(3);
    Config w = sample_binomial(rng, 40, params(8, 4.0));
    for (double e : {10.0, 100.0, 119.0, 200.0}) {
        bool prev = false;
        for (double M : {3.0, 4.0, 6.0, 10.0}) {
            const bool reg = classify_regular(w, RegularityParams::relaxed(M, 0.005, 40, 2), e).regular;
            EXPECT_TRUE(!prev || reg);
            prev = reg;
        }
    }
}

TEST(DenseAbscissas, EmptyConfig) {
    EXPECT_TRUE(dense_abscissas(Config(params()), RegularityParams{}).empty());
}

TEST(DenseAbscissas, CoLocatedBridges) {
    RegularityParams p = RegularityParams::relaxed(3, 0.1, 40, 0.5);  // threshold 20
    std::vector<std::pair<double, double>> s;
    for (int i = 0; i < 20; ++i) s.push_back({10.0, i / 20.0});
    std::vector<Interval> d = dense_abscissas(constant_config(s), p);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0], (Interval{9.5, 10.5}));
    // Clipped by the window [4, 36].
    s.clear();
    for (int i = 0; i < 20; ++i) s.push_back({4.2, i / 20.0});
    d = dense_abscissas(constant_config(s), p);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0], (Interval{4.0, 4.7}));
    s.pop_back();
    EXPECT_TRUE(dense_abscissas(constant_config(s), p).empty());
}

TEST(DenseAbscissas, SweepMatchesGridEvaluation) {
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RegularityParams p = RegularityParams::relaxed(3, 0.1, 12, 0.75);  // threshold 30
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<std::pair<double, double>> s;
        // Two clumps over a sparse background.
        for (int i = 0; i < 24; ++i) s.push_back({3.0 + 1.2 * u(rng), u(rng)});
        for (int i = 0; i < 20; ++i) s.push_back({7.0 + 0.8 * u(rng), u(rng)});
        for (int i = 0; i < 12; ++i) s.push_back({12 * u(rng), u(rng)});
        Config w = constant_config(s);
        std::vector<Interval> d = dense_abscissas(w, p);
        auto member = [&](double x) {
            for (const Interval& iv : d)
                if (x >= iv.lo && x <= iv.hi) return true;
            return false;
        };
        auto near_edge = [&](double x) {
            for (const Bridge& b : w)
                if (std::abs(std::abs(b.start()(0) - x) - p.xi) < 1e-9) return true;
            return false;
        };
        double grid_measure = 0.0;
        for (double x = p.eps * 12; x <= 12 - p.eps * 12; x += 1e-3) {
            const bool dense = dense_count(w, p, x) >= p.dense_threshold();
            if (!near_edge(x)) EXPECT_EQ(member(x), dense) << x;
            grid_measure += dense * 1e-3;
        }
        EXPECT_NEAR(total_length(d), grid_measure, 2e-3 * (2 * d.size() + 1));
    }
}

TEST(IsTame, Examples) {
    RegularityParams p = RegularityParams::relaxed(3, 0.1, 40, 2);  // threshold 80
    EXPECT_TRUE(is_tame(10.0, Config(params()), p));
    EXPECT_THROW(is_tame(1.0, Config(params()), p), OutOfRange);
    // Start at x0 + 2 xi whose path reaches x0.
    Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(3, 2);
    inc(1, 0) = -4.0;
    Config far(params(3), {Bridge(pt(14.0, 0.0), inc)});
    EXPECT_FALSE(is_tame(10.0, far, p));
    EXPECT_TRUE(is_tame(20.0, far, p));
    std::vector<std::pair<double, double>> s;
    for (int i = 0; i < 80; ++i) s.push_back({9.0 + i / 40.0, 0.5});
    EXPECT_FALSE(is_tame(10.0, constant_config(s), p));
    s.pop_back();
    EXPECT_TRUE(is_tame(10.0, constant_config(s), p));
}

TEST(EstimateWmr, CrystalHasZeroVariance) {
    std::vector<double> e(50, 17.25);
    MeanCI w = estimate_wmr(e, 10.0, 8);
    EXPECT_EQ(w.mean, 17.25 / 8);
    EXPECT_EQ(w.half_width, 0.0);
}

TEST(EstimateWmr, TruncationAndMonotonicity) {
    Rng rng(5);
    std::exponential_distribution<double> ex(0.1);
    std::vector<double> e(200);
    for (double& v : e) v = ex(rng);
    EXPECT_EQ(estimate_wmr(e, 1e-6, 8).mean, 1e-6);
    double prev = -1;
    for (double M : {0.1, 0.5, 1.0, 2.0, 5.0, 100.0}) {
        const double m = estimate_wmr(e, M, 8).mean;
        EXPECT_GE(m, prev);
        prev = m;
    }
}

TEST(EstimateWmr, CrystalSamplesThroughTruncatedEnergy) {
    std::vector<Config> samples(3, crystal(4));
    GreensKernel k{StripParams{}};
    std::vector<double> e = truncated_energies(samples, 4, k);
    EXPECT_EQ(e[0], e[1]);
    EXPECT_EQ(estimate_wmr(e, 100.0, 4).half_width, 0.0);
}

TEST(FreeEnergyEstimate, CombineIsExact) {
    FreeEnergyEstimate f = FreeEnergyEstimate::combine({1.5, 0.1}, {0.25, 0.05}, 2.0);
    EXPECT_EQ(f.f_hat, f.w_m_r + f.ent_hat / f.beta);
    EXPECT_EQ(f.ci_f, 0.1 + 0.025);
    EXPECT_NE(estimate_table_csv({{3, 0.04, 40, f}}).find("M,eps,R,w_m_r,ent_hat,f_hat,ci"), std::string::npos);
}

TEST(RegularFraction, MonotoneAndBounded) {
    Rng rng(6);
    std::vector<Config> samples;
    std::vector<double> energies;
    std::uniform_real_distribution<double> u(0.0, 400.0);
    for (int i = 0; i < 60; ++i) {
        samples.push_back(sample_binomial(rng, 40, params(8, 2.0)));
        energies.push_back(u(rng));
    }
    std::vector<RegularityParams> ps;
    for (double M : {3.0, 5.0, 8.0, 12.0}) ps.push_back(RegularityParams::relaxed(M, 0.006, 40, 2));
    auto rows = regular_fraction(samples, energies, ps);
    double prev = 0;
    for (const auto& r : rows) {
        EXPECT_GE(r.fraction(), prev);
        EXPECT_LE(r.fraction(), 1.0);
        prev = r.fraction();
    }
}

TEST(RegularFraction, CrystalLikeReachesOne) {
    Rng rng(7);
    std::normal_distribution<double> jitter(0.0, 0.05);
    std::vector<Config> samples;
    for (int i = 0; i < 6; ++i) {
        std::vector<std::pair<double, double>> s;
        for (int j = 0; j < 6; ++j) s.push_back({j + 0.5 + jitter(rng), 0.5 + jitter(rng)});
        samples.push_back(constant_config(s));
    }
    GreensKernel k{StripParams{}};
    std::vector<double> e = truncated_energies(samples, 6, k);
    std::vector<RegularityParams> ps;
    for (double M : {2.5, 4.0, 8.0, 16.0, 64.0}) ps.push_back(RegularityParams::relaxed(M, 0.1 / M / M, 6, 1));
    auto rows = regular_fraction(samples, e, ps);
    EXPECT_EQ(rows.back().fraction(), 1.0);
}

TEST(EstimateEntropy, PoissonReferenceIsZero) {
    Rng rng(8);
    const long R = 6;
    std::vector<Config> samples;
    for (int i = 0; i < 4000; ++i) samples.push_back(sample_poisson(rng, BoxDomain(0, R), 1.0, params()));
    EntropyEstimate e = estimate_entropy(samples, R, 2);
    EXPECT_GE(e.value, 0.0);
    EXPECT_LE(std::abs(e.raw), e.half_width);
    EXPECT_LT(e.half_width, 0.02);
}

TEST(EstimateEntropy, IntensityTwoMatchesClosedForm) {
    Rng rng(9);
    const long R = 6;
    std::vector<Config> samples;
    for (int i = 0; i < 4000; ++i) samples.push_back(sample_poisson(rng, BoxDomain(0, R), 2.0, params()));
    EntropyEstimate e = estimate_entropy(samples, R, 1);
    EXPECT_NEAR(e.raw, 2 * std::log(2.0) - 1, e.half_width);
    EXPECT_GT(e.count_part, 10 * std::abs(e.psi_part));
}

TEST(EstimateEntropy, RequiresEnoughSamples) {
    std::vector<Config> samples(10, crystal(4));
    EXPECT_THROW(estimate_entropy(samples, 4, 1), InvalidParams);
}

TEST(EstimateEntropy, NonNegativeOnCrystal) {
    std::vector<Config> samples(1000, crystal(4, 8));
    EntropyEstimate e = estimate_entropy(samples, 4, 1);
    EXPECT_GT(e.value, 0.5);
}

TEST(PsiTail, PoissonSamplesDecayFastEnough) {
    Rng rng(10);
    const long R = 10;
    std::vector<Config> samples;
    for (int i = 0; i < 2000; ++i) samples.push_back(sample_poisson(rng, BoxDomain(0, R), 1.0, params(16)));
    std::vector<double> zetas;
    for (int i = 0; i <= 6; ++i) zetas.push_back(0.1 * std::pow(10.0, i / 6.0));
    std::vector<double> f = psi_tail_profile(samples, R, zetas);
    for (std::size_t i = 1; i < f.size(); ++i) EXPECT_LE(f[i], f[i - 1]);
    EXPECT_LE(loglog_slope(zetas, f), -5.0 / 8 + 0.2);
}

TEST(LoglogSlope, ExactPowerLaw) {
    std::vector<double> x{1, 2, 4, 8}, y;
    for (double v : x) y.push_back(3 * std::pow(v, -1.5));
    EXPECT_NEAR(loglog_slope(x, y), -1.5, 1e-12);
}

TEST(FubRange, CountBoundOverAllWindows) {
    Rng rng(11);
    std::uniform_int_distribution<int> nb(1, 4);
    std::uniform_real_distribution<double> lb(3.0, 5.0);
    const long R = 300;
    long total_violations = 0;
    for (int rep = 0; rep < 20; ++rep) {
        StripParams p = params(64, std::pow(10.0, lb(rng)));
        Config w = sample_poisson(rng, BoxDomain(0, 40), 0.05 + 0.05 * nb(rng), p);
        FubRangeCheck c = check_fub_range(w, R);
        EXPECT_TRUE(c.holds()) << c.violations << " > " << c.bound;
        total_violations += c.violations;
    }
    EXPECT_GT(total_violations, 0);
}

TEST(FubRange, ShortWindowsNeverFail) {
    Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(3, 2);
    inc(1, 0) = 50;
    FubRangeCheck c = check_fub_range(Config(params(3), {Bridge(pt(0.5, 0), inc)}), 8);
    EXPECT_EQ(c.violations, 0);
    EXPECT_GT(c.windows, 50);
}

TEST(Edense, RelaxedBoundOnCrystalAndClumps) {
    RegularityParams p = RegularityParams::relaxed(3, 0.1, 64, 1);  // threshold 40 within +-1
    const double eta = 0.125;
    EdenseCheck c = check_edense(crystal(64), p, eta, {0.25, 4});
    EXPECT_TRUE(c.constants_ok);
    EXPECT_TRUE(c.hypotheses());
    EXPECT_EQ(c.dense_measure, 0.0);
    EXPECT_TRUE(c.holds());
    // A clump dense enough to violate the conclusion must break the energy hypothesis.
    std::vector<std::pair<double, double>> s;
    for (int i = 0; i < 240; ++i) s.push_back({20.0 + 10.0 * i / 240.0, (i % 7) / 7.0});
    EdenseCheck d = check_edense(constant_config(s), p, eta, {0.25, 4});
    EXPECT_FALSE(d.conclusion());
    EXPECT_FALSE(d.energy_ok);
    EXPECT_TRUE(d.holds());
}
