#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jellium/core_model.hpp"
#include "jellium/empirical.hpp"
#include "jellium/energy.hpp"
#include "jellium/fields.hpp"
#include "jellium/greens.hpp"

namespace jellium {

// Where the a_+ layer bridges in [x_-, x_0) go: cell centres x_- + (i - 1/2) ell,
// or x_- + i (x_+ - x_-) / a_+ as printed (the last one lands right of x_0).
enum class CssPlacement { centered, printed };

struct ScreeningParams {
    RegularityParams reg;
    double h = 1.0 / 32;
    // Candidate interval for x0; NaN means [6 eps R, 10 eps R - xi].
    double interval_lo = std::numeric_limits<double>::quiet_NaN();
    double interval_hi = std::numeric_limits<double>::quiet_NaN();
    CssPlacement placement = CssPlacement::centered;
    TruncatedEnergyParams tparams;
    bool continuum_check = true;
    FieldQuadrature quadrature{1.0 / 8, 6};

    void validate() const;
    Interval interval() const;
    Grid grid() const { return Grid(0.0, double(reg.R), h); }
};

// One side of the plan, in the frame where the side sits at the left end
// (the right side is stored as distances from R).
struct SidePlan {
    double x0 = 0.0;
    double x_plus = 0.0;
    double d0 = 0.0;
    long x_minus = 0;
    long a_plus = 0;
    double ell = 0.0;
    bool degenerate = false;  // d0 = 0 with integer x0, replaced by x_- = x0 - 1
    bool exact_ok = false;    // a_+ ell = x0 - x_- and ell (1 + d0 / (x0 - x_-)) = 1 in rationals
    int moved = 0;            // bridges regularized at this side
};

struct ScreeningPlan {
    long R = 0;
    BoxDomain window;  // Lambda of the extension
    SidePlan left, right;

    double x0() const { return left.x0; }
    double x_plus() const { return left.x_plus; }
};

// Line and slab energies of a TimeField, integrated over D x [0, beta].
double line_energy(const TimeField& field, double x);
double slab_energy(const TimeField& field, double lo, double hi);

// Smallest grid face x0 in the interval that is tame at x0 and R - x0 for
// `config` and passes both good-boundary energy bounds for `field`; then the
// side plans from the regularized extension. Throws NoGoodBoundary.
ScreeningPlan choose_boundary(const Config& config, const Config& extension, const BoxDomain& window,
                              const TimeField& field, const ScreeningParams& params, const Interval& interval);
ScreeningPlan choose_boundary(const Config& config, const Config& extension, const BoxDomain& window,
                              const TimeField& field, const ScreeningParams& params);

// Side plan for boundary x0 from the regularized extension (left frame).
SidePlan side_plan(const Config& regularized_extension, const BoxDomain& window, double x0, double xi);

// Bridges starting in [x0 - xi, x0 + xi] become n constants at
// x0 + 1/2 + 1/(4n) + (i-1)/(2n), y = 0; mirrored at R - x0.
Config regularize(const Config& config, double x0, long R, double xi);
Config regularize(const Config& config, const ScreeningPlan& plan, const ScreeningParams& params);

// R constants at (i + 1/2, 0).
Config crystal(long R, const Config& like);
// Irregular branch when plan is empty. Throws NeutralityBroken unless #Css = R.
Config build_css(const Config& config, const std::optional<ScreeningPlan>& plan, const ScreeningParams& params);
// Starts of the Css layer bridges at one side (left frame).
std::vector<double> layer_starts(const SidePlan& side, double xi, CssPlacement placement);

struct Assembly {
    TimeField field;
    std::vector<double> energy;  // int_{Lambda_R} |E^scr_t|^2 per time node
    std::vector<double> phi0;    // region energies with |E1 + E2|^2 <= 2|E1|^2 + 2|E2|^2
    bool per_cell_left = true, per_cell_right = true;
};

// E^scr from Css and the field of the regularized extension (regular branch),
// or per-cell Neumann solves of the crystal (plan empty). Throws CellNotNeutral.
Assembly assemble_field(const Config& css, const TimeField& base_field, const std::optional<ScreeningPlan>& plan,
                        const ScreeningParams& params, double eta);

struct DecayFit {
    double c = 0.0, rate = 0.0, r2 = 0.0;
    int points = 0;
};

struct ScreeningCert {
    bool regular_branch = false;
    bool plan_failed = false;
    std::string failure;
    bool middle_match = false;
    bool x_plus_inside = false;  // x0 + xi <= 10 eps R
    double compatible_resid = 0.0;
    double boundary_flux = 0.0;
    double energy_lhs = 0.0;  // (1/2 R beta) int |E^scr|^2
    double phi0 = 0.0;        // (1/2 R beta) int phi0_t
    bool ledger_ok = false;   // energy_t <= phi0_t at every node
    double base_energy = std::numeric_limits<double>::quiet_NaN();  // (1/2 R beta) int |E~|^2
    double phi_emp = std::numeric_limits<double>::quiet_NaN();      // (phi0 - base) / M
    double truncated_energy = std::numeric_limits<double>::infinity();
    long best_margin = -1;
    bool exact_cells_ok = false;
    int placements_beyond_x0 = 0;
    bool per_cell_left = true, per_cell_right = true;
    double gradient_energy = 0.0;  // discrete Neumann energy of Css, (1/2 beta) int
    double scr_energy = 0.0;       // (1/2 beta) int |E^scr|^2
    bool helmholtz_discrete_ok = false;
    bool continuum_checked = false;
    double strip_energy = 0.0;  // full-strip energy of grad V(Css) by quadrature
    double disc_error = 0.0;    // |grid - quadrature| energy of grad V(Css) on Lambda_R
    bool helmholtz_continuum_ok = false;
    DecayFit decay;
    std::vector<double> energy_t, phi0_t;

    bool passed() const;
};

struct ScreeningResult {
    Config css;
    TimeField field;
    std::optional<ScreeningPlan> plan;
    ScreeningCert cert;
};

// Css and plan only, without field assembly or certificates.
struct ScreenedCss {
    Config css;
    std::optional<ScreeningPlan> plan;
    bool regular = false;
    double truncated_energy = std::numeric_limits<double>::infinity();
    std::string failure;
};
ScreenedCss screen_css(const Config& config, const ScreeningParams& params, const GreensKernel& kernel);

ScreeningResult screening_report(const Config& config, const ScreeningParams& params, const GreensKernel& kernel);

nlohmann::json to_json(const ScreeningPlan& plan);
nlohmann::json to_json(const ScreeningResult& result);

// Mirror x -> R - x of a field on [0, R] and of a density.
GridField reflect(const GridField& f);
ChargeDensity reflect(const ChargeDensity& rho);

}  // namespace jellium
