#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "jellium/errors.hpp"
#include "jellium/screening.hpp"

using namespace jellium;

namespace {

Point pt(double x, double y) {
    Point p(2);
    p << x, y;
    return p;
}

StripParams strip(int n_time = 4) {
    StripParams p;
    p.n_time = n_time;
    return p;
}

Config constants(const std::vector<double>& xs, int n_time = 4) {
    std::vector<Bridge> bs;
    for (double x : xs) bs.push_back(Bridge::constant(pt(x, 0.0), n_time));
    return Config(strip(n_time), bs);
}

Config lattice(long R, int n_time = 4) {
    std::vector<double> xs;
    for (long i = 0; i < R; ++i) xs.push_back(i + 0.5);
    return constants(xs, n_time);
}

// Brownian bridges started near the lattice sites.
Config jittered(long R, std::uint64_t seed, int n_time = 4, double jitter = 0.3) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-jitter, jitter), uy(0.0, 1.0);
    const StripParams p = strip(n_time);
    std::vector<Bridge> bs;
    for (long i = 0; i < R; ++i) bs.emplace_back(pt(i + 0.5 + u(rng), uy(rng)), sample_bridge_increments(rng, p));
    return Config(p, bs);
}

ScreeningParams desk() {
    ScreeningParams p;
    p.reg = RegularityParams::relaxed(3.0, 0.04, 40, 2.0);
    return p;
}

TimeField zero_field(const Grid& g, int n_time) {
    TimeField f;
    f.slices.assign(n_time, GridField(g));
    return f;
}

std::vector<double> xs_of(const Config& c) {
    std::vector<double> xs;
    for (const Bridge& b : c) xs.push_back(b.start()(0));
    std::sort(xs.begin(), xs.end());
    return xs;
}

}  // namespace

TEST(Regularize, NoBridgesInTubeLeavesConfigUnchanged) {
    const Config c = constants({1.5, 20.5, 38.5});
    EXPECT_TRUE(regularize(c, 10.0, 40, 2.0) == c);
}

TEST(Regularize, SingleBridgeGoesToThreeQuarters) {
    const Config c = constants({9.2, 20.5, 31.0});
    const Config r = regularize(c, 10.0, 40, 2.0);
    ASSERT_EQ(r.size(), c.size());
    EXPECT_EQ(xs_of(r), (std::vector<double>{10.75, 20.5, 29.25}));
    for (const Bridge& b : r) EXPECT_EQ(b.start()(1), 0.0);
}

TEST(Regularize, PreservesCountAndSpacing) {
    const Config c = jittered(40, 3);
    const Config r = regularize(c, 9.625, 40, 2.0);
    EXPECT_EQ(r.size(), c.size());
    std::vector<double> moved;
    for (double x : xs_of(r))
        if (x >= 10.125 && x <= 10.625) moved.push_back(x);
    const int n = static_cast<int>(moved.size());
    ASSERT_GT(n, 1);
    EXPECT_NEAR(moved.front(), 9.625 + 0.5 + 1.0 / (4 * n), 1e-12);
    for (int i = 1; i < n; ++i) EXPECT_NEAR(moved[i] - moved[i - 1], 1.0 / (2 * n), 1e-12);
}

TEST(Crystal, IrregularFillForRFour) {
    EXPECT_EQ(xs_of(crystal(4, lattice(1))), (std::vector<double>{0.5, 1.5, 2.5, 3.5}));
    ScreeningParams p = desk();
    p.reg.R = 4;
    EXPECT_EQ(xs_of(build_css(lattice(2), std::nullopt, p)), (std::vector<double>{0.5, 1.5, 2.5, 3.5}));
}

TEST(SidePlan, LatticeAtFirstCandidate) {
    // Lattice at i + 1/2, x0 = 9.625: four bridges move into [10.125, 10.625], so
    // 8 remain left of x0 and d0 = 8 - 9.625.
    const Config ext = regularize(lattice(40), 9.625, 40, 2.0);
    const SidePlan s = side_plan(ext, BoxDomain(0, 40), 9.625, 2.0);
    EXPECT_DOUBLE_EQ(s.d0, -1.625);
    EXPECT_EQ(s.x_minus, 6);
    EXPECT_EQ(s.a_plus, 2);
    EXPECT_DOUBLE_EQ(s.ell, 1.8125);
    EXPECT_DOUBLE_EQ(s.x_plus, 11.625);
    EXPECT_TRUE(s.exact_ok);
    EXPECT_FALSE(s.degenerate);
}

TEST(SidePlan, DegenerateIntegerBoundary) {
    const SidePlan s = side_plan(lattice(40), BoxDomain(0, 40), 10.0, 2.0);
    EXPECT_EQ(s.d0, 0.0);
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.x_minus, 9);
    EXPECT_EQ(s.a_plus, 1);
    EXPECT_EQ(s.ell, 1.0);
    EXPECT_TRUE(s.exact_ok);
}

TEST(SidePlan, CollarCountsTowardsDeficit) {
    // Window [-2, 40]: two collar bridges left of 0 add to the count.
    std::vector<double> xs{-1.5, -0.5};
    for (long i = 0; i < 40; ++i) xs.push_back(i + 0.5);
    const SidePlan s = side_plan(constants(xs), BoxDomain(-2, 40), 10.0, 2.0);
    EXPECT_EQ(s.d0, 0.0);
}

TEST(SidePlan, LargeDeficitViolatesInvariant) {
    const Config ext = constants({20.5, 21.5});
    EXPECT_THROW(side_plan(ext, BoxDomain(0, 40), 10.0, 2.0), NoGoodBoundary);
}

TEST(SidePlan, InvariantsOverRandomBoundaries) {
    Rng rng(11);
    std::uniform_int_distribution<int> face(9 * 32, 14 * 32);
    for (int trial = 0; trial < 50; ++trial) {
        const double x0 = face(rng) / 32.0;
        const Config ext = regularize(jittered(40, trial), x0, 40, 2.0);
        const SidePlan s = side_plan(ext, BoxDomain(0, 40), x0, 2.0);
        EXPECT_GE(s.ell, 2.0 / 3.0);
        EXPECT_LE(s.ell, 2.0);
        EXPECT_GE(x0, 2.0 * std::abs(s.d0));
        EXPECT_NEAR(s.a_plus * s.ell, x0 - s.x_minus, 1e-12);
        EXPECT_NEAR(std::round(x0 + s.d0), x0 + s.d0, 1e-12);
        EXPECT_TRUE(s.exact_ok);
    }
}

TEST(ChooseBoundary, ZeroFieldLatticeTakesFirstCandidate) {
    const ScreeningParams p = desk();
    const Config w = lattice(40);
    const ScreeningPlan plan = choose_boundary(w, w, BoxDomain(0, 40), zero_field(p.grid(), 4), p);
    EXPECT_DOUBLE_EQ(plan.x0(), 9.625);
    EXPECT_EQ(plan.left.moved, 4);
    EXPECT_EQ(plan.right.moved, 4);
    EXPECT_EQ(plan.right.x_minus, plan.left.x_minus);
}

TEST(ChooseBoundary, LineEnergyBoundSkipsLoadedFaces) {
    // |E_x| = 10 on the faces in [9.6, 10.5]: each such face has line energy 100,
    // above the bound total / (eps R) = (29 * 100 / 32) / 1.6.
    const ScreeningParams p = desk();
    const Grid g = p.grid();
    TimeField f = zero_field(g, 4);
    for (GridField& s : f.slices)
        for (int i = 0; i <= g.nx; ++i)
            if (g.face_x(i) >= 9.6 && g.face_x(i) <= 10.5) s.ex.row(i).setConstant(10.0);
    const Config w = lattice(40);
    const ScreeningPlan plan = choose_boundary(w, w, BoxDomain(0, 40), f, p);
    EXPECT_DOUBLE_EQ(plan.x0(), 10.53125);
}

TEST(ChooseBoundary, DenseClusterEverywhereFails) {
    ScreeningParams p;
    p.reg = RegularityParams::relaxed(3.0, 0.1, 40, 1.0);
    p.interval_lo = 9.0;
    p.interval_hi = 14.0;
    // 200 starts spread over [8, 15]: about 57 within distance 1 of any candidate, threshold 40.
    std::vector<double> xs;
    for (int i = 0; i < 200; ++i) xs.push_back(8.0 + 7.0 * i / 200.0);
    const Config w = constants(xs);
    EXPECT_THROW(choose_boundary(w, w, BoxDomain(0, 200), zero_field(p.grid(), 4), p), NoGoodBoundary);
}

TEST(ChooseBoundary, RejectsIntervalOutsideTameRange) {
    ScreeningParams p = desk();
    const Config w = lattice(40);
    EXPECT_THROW(choose_boundary(w, w, BoxDomain(0, 40), zero_field(p.grid(), 4), p, Interval{0.5, 10.0}),
                 InvalidParams);
}

TEST(BuildCss, UnitLatticeFillForZeroDeficit) {
    const ScreeningParams p = desk();
    ScreeningPlan plan;
    plan.R = 40;
    plan.window = BoxDomain(0, 40);
    plan.left = side_plan(lattice(40), plan.window, 10.0, 2.0);
    plan.right = plan.left;
    const Config w = constants({13.0, 14.5, 20.25, 21.5, 26.0});
    // Not neutral on its own: the fill only covers [0, 10) and [30, 40).
    EXPECT_THROW(build_css(w, plan, p), NeutralityBroken);

    std::vector<double> xs;
    for (long i = 12; i < 28; ++i) xs.push_back(i + 0.25);
    for (double x : {10.2, 10.4, 29.6, 29.8}) xs.push_back(x);  // moved into [x0 + 1/2, x0 + 1] by regularization
    const Config full = constants(xs);
    const Config css = build_css(full, plan, p);
    ASSERT_EQ(css.size(), 40u);
    std::vector<double> left;
    for (double x : xs_of(css))
        if (x < 10.0) left.push_back(x);
    std::vector<double> lattice_left;
    for (int i = 0; i < 10; ++i) lattice_left.push_back(i + 0.5);
    EXPECT_EQ(left, lattice_left);
    EXPECT_TRUE(project_x(css, 12.0, 28.0) == project_x(full, 12.0, 28.0));
}

TEST(BuildCss, PrintedPlacementPutsLastBridgeAtXPlus) {
    const Config ext = regularize(lattice(40), 9.625, 40, 2.0);
    const SidePlan s = side_plan(ext, BoxDomain(0, 40), 9.625, 2.0);
    const std::vector<double> printed = layer_starts(s, 2.0, CssPlacement::printed);
    ASSERT_EQ(printed.size(), 2u);
    EXPECT_DOUBLE_EQ(printed.back(), s.x_plus);
    const std::vector<double> centred = layer_starts(s, 2.0, CssPlacement::centered);
    EXPECT_DOUBLE_EQ(centred[0], 6.0 + 0.5 * 1.8125);
    EXPECT_DOUBLE_EQ(centred[1], 6.0 + 1.5 * 1.8125);
}

TEST(Reflect, InvolutionAndDivergence) {
    const Grid g(0.0, 4.0, 1.0 / 32);
    const Config c = jittered(4, 5);
    const GridField f = gradient_field(c, BoxDomain(0, 4), GreensKernel(strip()), g, 1);
    const GridField ff = reflect(reflect(f));
    EXPECT_TRUE((ff.ex == f.ex).all() && (ff.ey == f.ey).all());
    ChargeDensity d(g);
    d.rho = discrete_divergence(f);
    ChargeDensity rd(g);
    rd.rho = discrete_divergence(reflect(f));
    EXPECT_LT((rd.rho - reflect(d).rho).abs().maxCoeff(), 1e-9);
}

TEST(AssembleField, CrystalCellsAreNeumannAndFluxFree) {
    ScreeningParams p = desk();
    const Config css = crystal(40, lattice(1));
    const Assembly a = assemble_field(css, {}, std::nullopt, p, 0.125);
    const GridField& f = a.field.slices[0];
    const ChargeDensity rho = rasterize_charge(css, BoxDomain(0, 40), 0, p.grid(), 0.125);
    EXPECT_LT((discrete_divergence(f) - rho.rho).abs().maxCoeff(), 1e-9);
    for (int i = 0; i <= 40; ++i) EXPECT_LT(f.ex.row(i * 32).abs().maxCoeff(), 1e-12);
    EXPECT_DOUBLE_EQ(a.energy[0], a.phi0[0]);
}

TEST(AssembleField, ZeroBoundaryDataGivesNoLinearPart) {
    // d0 = 0 with integer x0: one unit layer cell and zero flux at x0, so the
    // layer field is the plain cell solve.
    ScreeningParams p = desk();
    const Config css = crystal(40, lattice(1));
    ScreeningPlan plan;
    plan.R = 40;
    plan.window = BoxDomain(0, 40);
    plan.left = side_plan(css, plan.window, 10.0, 2.0);
    plan.right = plan.left;
    const Assembly crystal_field = assemble_field(css, {}, std::nullopt, p, 0.125);
    TimeField base = crystal_field.field;
    base.slices.resize(4, base.slices[0]);
    const Assembly a = assemble_field(css, base, plan, p, 0.125);
    EXPECT_LT((a.field.slices[2].ex - crystal_field.field.slices[0].ex).abs().maxCoeff(), 1e-12);
    EXPECT_LT((a.field.slices[2].ey - crystal_field.field.slices[0].ey).abs().maxCoeff(), 1e-12);
}

TEST(AssembleField, PrintedPlacementBreaksCellNeutrality) {
    ScreeningParams p = desk();
    p.placement = CssPlacement::printed;
    const Config w = lattice(40);
    const ScreeningPlan plan = choose_boundary(w, w, BoxDomain(0, 40), zero_field(p.grid(), 4), p);
    const Config css = build_css(w, plan, p);
    const TimeField base = gradient_time_field(regularize(w, plan, p), BoxDomain(0, 40), GreensKernel(strip()), p.grid());
    EXPECT_THROW(assemble_field(css, base, plan, p, 0.125), CellNotNeutral);
}

TEST(ScreeningReport, LatticePassesAllCertificates) {
    const ScreeningResult r = screening_report(lattice(40), desk(), GreensKernel(strip()));
    const ScreeningCert& c = r.cert;
    ASSERT_TRUE(r.plan.has_value()) << c.failure;
    EXPECT_TRUE(c.regular_branch);
    EXPECT_FALSE(c.plan_failed);
    EXPECT_TRUE(c.middle_match);
    EXPECT_TRUE(c.x_plus_inside);
    EXPECT_LT(c.compatible_resid, 1e-6);
    EXPECT_LT(c.boundary_flux, 1e-8);
    EXPECT_TRUE(c.ledger_ok);
    EXPECT_TRUE(c.exact_cells_ok);
    EXPECT_TRUE(c.helmholtz_discrete_ok);
    EXPECT_TRUE(c.helmholtz_continuum_ok) << c.strip_energy << " " << c.scr_energy << " " << c.disc_error;
    EXPECT_TRUE(c.passed());
    EXPECT_EQ(r.css.size(), 40u);
    EXPECT_EQ(c.placements_beyond_x0, 0);
}

TEST(ScreeningReport, JitteredBridgesPass) {
    for (std::uint64_t seed : {1u, 2u}) {
        const ScreeningResult r = screening_report(jittered(40, seed), desk(), GreensKernel(strip()));
        const ScreeningCert& c = r.cert;
        EXPECT_TRUE(c.regular_branch);
        EXPECT_FALSE(c.plan_failed) << c.failure;
        EXPECT_TRUE(c.middle_match);
        EXPECT_TRUE(c.passed()) << to_json(r)["cert"].dump();
        EXPECT_TRUE(std::isfinite(c.phi_emp));
        EXPECT_GT(c.decay.points, 3);
        EXPECT_GT(c.decay.rate, 0.0);
    }
}

TEST(ScreeningReport, IrregularInputGetsCrystal) {
    std::vector<double> xs;
    for (int i = 0; i < 40; ++i) xs.push_back(0.05 + 0.1 * i);
    const ScreeningResult r = screening_report(constants(xs), desk(), GreensKernel(strip()));
    EXPECT_FALSE(r.cert.regular_branch);
    EXPECT_FALSE(r.plan.has_value());
    EXPECT_TRUE(r.css == crystal(40, constants(xs)));
    EXPECT_LT(r.cert.compatible_resid, 1e-6);
    EXPECT_LT(r.cert.boundary_flux, 1e-8);
    EXPECT_TRUE(r.cert.passed());
}

TEST(ScreeningReport, OverfullWindowIsIrregular) {
    std::vector<double> xs;
    for (int i = 0; i < 60; ++i) xs.push_back(0.5 + 39.0 * i / 60.0);
    const ScreeningResult r = screening_report(constants(xs), desk(), GreensKernel(strip()));
    EXPECT_FALSE(r.cert.regular_branch);
    EXPECT_FALSE(std::isfinite(r.cert.truncated_energy));
    EXPECT_TRUE(r.cert.passed());
}

TEST(ScreeningReport, ResidualUnderRefinement) {
    ScreeningParams coarse = desk(), fine = desk();
    coarse.continuum_check = fine.continuum_check = false;
    fine.h = 1.0 / 64;
    const Config w = jittered(40, 7, 3);
    const double rc = screening_report(w, coarse, GreensKernel(strip(3))).cert.compatible_resid;
    const double rf = screening_report(w, fine, GreensKernel(strip(3))).cert.compatible_resid;
    EXPECT_TRUE(rf <= rc / 4.0 || (rc < 1e-10 && rf < 1e-10)) << rc << " " << rf;
}

TEST(ScreeningReport, DeterministicAndSerializable) {
    ScreeningParams p = desk();
    p.continuum_check = false;
    const Config w = jittered(40, 9);
    const nlohmann::json a = to_json(screening_report(w, p, GreensKernel(strip())));
    const nlohmann::json b = to_json(screening_report(w, p, GreensKernel(strip())));
    EXPECT_EQ(a.dump(), b.dump());
    for (const char* key : {"middle_match", "compatible_resid", "boundary_flux", "energy_lhs", "phi0", "regular_branch"})
        EXPECT_TRUE(a["cert"].contains(key)) << key;
    EXPECT_EQ(a["plan"]["left"]["x0"].get<double>() + a["plan"]["left"]["d0"].get<double>(),
              std::round(a["plan"]["left"]["x0"].get<double>() + a["plan"]["left"]["d0"].get<double>()));
}

TEST(ScreeningParamsTest, Validation) {
    ScreeningParams p = desk();
    EXPECT_NO_THROW(p.validate());
    EXPECT_DOUBLE_EQ(p.interval().lo, 9.6);
    EXPECT_DOUBLE_EQ(p.interval().hi, 14.0);
    p.h = 0.3;
    EXPECT_THROW(p.validate(), InvalidParams);
    p = desk();
    p.interval_hi = 25.0;
    EXPECT_THROW(p.validate(), InvalidParams);
}
