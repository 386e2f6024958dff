#include "jellium/screening.hpp"

#include <algorithm>
#include <cmath>

#include "jellium/errors.hpp"
#include "jellium/numerics.hpp"
#include "jellium/parallel.hpp"

namespace jellium {

void ScreeningParams::validate() const {
    reg.validate();
    tparams.validate();
    if (!(h > 0.0) || std::abs(1.0 / h - std::round(1.0 / h)) > 1e-9)
        throw InvalidParams("screening grid spacing must be 1/n");
    // An empty interval is allowed: every plan then fails with NoGoodBoundary.
    const Interval iv = interval();
    if (iv.lo <= iv.hi && (iv.lo < reg.eps * reg.R - 1e-12 || iv.hi > 0.5 * reg.R + 1e-12))
        throw InvalidParams("candidate interval must lie in [eps R, R/2]");
}

Interval ScreeningParams::interval() const {
    const double lo = std::isnan(interval_lo) ? 6.0 * reg.eps * reg.R : interval_lo;
    const double hi = std::isnan(interval_hi) ? 10.0 * reg.eps * reg.R - reg.xi : interval_hi;
    return {lo, hi};
}

namespace {

Config reflect_config(const Config& c, long R) {
    std::vector<Bridge> out;
    out.reserve(c.size());
    for (const Bridge& b : c) {
        Point s = b.start();
        s(0) = double(R) - s(0);
        Eigen::MatrixXd inc = b.increments();
        inc.col(0) *= -1.0;
        out.emplace_back(std::move(s), std::move(inc));
    }
    return c.with_bridges(std::move(out));
}

Bridge constant_at(double x, const Config& like) {
    Point p = Point::Zero(like.k() + 1);
    p(0) = x;
    return Bridge::constant(std::move(p), like.n_time());
}

Rational abs(const Rational& r) { return r < Rational(0) ? -r : r; }

struct SideEnergies {
    double cells = 0.0, e1 = 0.0, e2 = 0.0;
    bool per_cell = true;
};

// Fills the faces of `out` on [0, x0] for one side in the left frame.
SideEnergies assemble_side(GridField& out, const ChargeDensity& rho, const GridField& base, const SidePlan& s,
                           const std::vector<double>& starts, double eta) {
    const Grid& g = rho.grid;
    const double h = g.h, x0 = s.x0, xm = double(s.x_minus);
    SideEnergies en;
    for (long c = 0; c < s.x_minus; ++c) paste(out, solve_neumann(restrict_density(rho, double(c), double(c + 1))));
    if (s.x_minus > 0) en.cells = 2.0 * slice_energy(out, 0.0, xm);

    const int i0 = g.face_index(x0);
    const Grid lg = g.sub(xm, x0);
    const Eigen::ArrayXXd boundary = base.ex.row(i0);
    GridField e1(lg);
    for (int k = 0; k <= lg.nx; ++k) e1.ex.row(k) = ((lg.face_x(k) - xm) / (x0 - xm)) * boundary;

    const double flux = boundary.sum() * h;
    for (long c = 0; c < s.a_plus; ++c) {
        const double lo = xm + c * s.ell, hi = lo + s.ell;
        int inside = 0, cut = 0;
        for (double x : starts) {
            if (x >= lo + eta && x <= hi - eta) ++inside;
            else if (x > lo - eta && x < hi + eta) ++cut;
        }
        const double total = s.ell * (1.0 - flux / (x0 - xm)) - inside;
        if (cut > 0 || std::abs(total) > 1e-6)
            throw CellNotNeutral("layer cell [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                 "] carries charge " + std::to_string(total) +
                                 (cut ? " with a shell on its boundary" : ""));
    }

    ChargeDensity r2 = restrict_density(rho, xm, x0);
    for (int j = 0; j < g.ny; ++j) r2.rho.col(j) -= boundary(0, j) / (x0 - xm);
    const double q = s.ell / h;
    en.per_cell = std::abs(q - std::round(q)) < 1e-9;
    GridField e2(lg);
    if (en.per_cell) {
        const int m = static_cast<int>(std::lround(q));
        for (long c = 0; c < s.a_plus; ++c)
            paste(e2, solve_neumann(restrict_density(r2, lg.face_x(int(c) * m), lg.face_x(int(c + 1) * m))));
    } else {
        e2 = solve_neumann(r2);
    }
    en.e1 = 2.0 * slice_energy(e1, xm, x0);
    en.e2 = 2.0 * slice_energy(e2, xm, x0);
    paste(out, e1 + e2);
    return en;
}

double trapezoid(const std::vector<double>& v, double beta) {
    const std::vector<double> w = trapezoid_weights(static_cast<int>(v.size()), beta);
    double s = 0.0;
    for (std::size_t t = 0; t < v.size(); ++t) s += w[t] * v[t];
    return s;
}

DecayFit fit_decay(const TimeField& before, const TimeField& after, double from, double to) {
    const Grid& g = before.slices.at(0).grid;
    std::vector<double> ds, ls;
    for (int i = 0; i <= g.nx; ++i) {
        const double x = g.face_x(i);
        if (x < from + 0.25 || x > to) continue;
        double m = 0.0;
        for (std::size_t t = 0; t < before.slices.size(); ++t) {
            m = std::max(m, (after.slices[t].ex.row(i) - before.slices[t].ex.row(i)).abs().maxCoeff());
            if (i < g.nx) m = std::max(m, (after.slices[t].ey.row(i) - before.slices[t].ey.row(i)).abs().maxCoeff());
        }
        if (m > 1e-13) {
            ds.push_back(x - from);
            ls.push_back(std::log(m));
        }
    }
    DecayFit fit;
    fit.points = static_cast<int>(ds.size());
    if (ds.size() < 3) return fit;
    const double n = double(ds.size());
    double sd = 0, sl = 0, sdd = 0, sdl = 0;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        sd += ds[k];
        sl += ls[k];
        sdd += ds[k] * ds[k];
        sdl += ds[k] * ls[k];
    }
    const double slope = (n * sdl - sd * sl) / (n * sdd - sd * sd);
    const double icpt = (sl - slope * sd) / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        ss_res += std::pow(ls[k] - icpt - slope * ds[k], 2);
        ss_tot += std::pow(ls[k] - sl / n, 2);
    }
    fit.c = std::exp(icpt);
    fit.rate = -slope;
    fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

}  // namespace

GridField reflect(const GridField& f) {
    GridField out(f.grid);
    const int nx = f.grid.nx;
    for (int i = 0; i <= nx; ++i) out.ex.row(i) = -f.ex.row(nx - i);
    for (int i = 0; i < nx; ++i) out.ey.row(i) = f.ey.row(nx - 1 - i);
    return out;
}

ChargeDensity reflect(const ChargeDensity& rho) {
    ChargeDensity out(rho.grid);
    out.rho = rho.rho.colwise().reverse();
    return out;
}

double line_energy(const TimeField& field, double x) {
    const std::size_t n = field.slices.size();
    if (n == 0) return 0.0;
    const std::vector<double> w = trapezoid_weights(static_cast<int>(n), field.beta);
    double s = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const GridField& f = field.slices[t];
        const int i = f.grid.face_index(x), nx = f.grid.nx;
        Eigen::ArrayXXd ey;
        if (i == 0) ey = f.ey.row(0);
        else if (i == nx) ey = f.ey.row(nx - 1);
        else ey = 0.5 * (f.ey.row(i - 1) + f.ey.row(i));
        s += w[t] * (f.ex.row(i).square().sum() + ey.square().sum()) * f.grid.h;
    }
    return s;
}

double slab_energy(const TimeField& field, double lo, double hi) {
    return 2.0 * field.beta * field_energy(field, lo, hi);
}

Config regularize(const Config& config, double x0, long R, double xi) {
    const double centres[2] = {x0, double(R) - x0};
    std::vector<Bridge> keep;
    int moved[2] = {0, 0};
    for (const Bridge& b : config) {
        const double x = b.start()(0);
        if (std::abs(x - centres[0]) <= xi) ++moved[0];
        else if (std::abs(x - centres[1]) <= xi) ++moved[1];
        else keep.push_back(b);
    }
    for (int side = 0; side < 2; ++side) {
        const int n = moved[side];
        const double dir = side == 0 ? 1.0 : -1.0;
        for (int i = 1; i <= n; ++i)
            keep.push_back(constant_at(centres[side] + dir * (0.5 + 1.0 / (4.0 * n) + (i - 1) / (2.0 * n)), config));
    }
    return config.with_bridges(std::move(keep));
}

Config regularize(const Config& config, const ScreeningPlan& plan, const ScreeningParams& params) {
    return regularize(config, plan.x0(), plan.R, params.reg.xi);
}

SidePlan side_plan(const Config& ext, const BoxDomain& window, double x0, double xi) {
    SidePlan s;
    s.x0 = x0;
    s.x_plus = x0 + xi;
    long count = 0;
    for (const Bridge& b : ext) count += b.start()(0) < x0;
    const Rational X0 = Rational::from_dyadic(x0);
    const Rational d0 = Rational(count) - (X0 - Rational(window.x_lo));
    if (X0 < Rational(2) * abs(d0))
        throw NoGoodBoundary("plan invariant x0 >= 2|d0| fails at x0 = " + std::to_string(x0) +
                             " (d0 = " + std::to_string(d0.to_double()) + ")");
    Rational xm = (X0 - Rational(2) * abs(d0)).floor();
    Rational ap = X0 - xm + d0;
    if (ap == Rational(0)) {
        s.degenerate = true;
        xm = X0 - Rational(1);
        ap = Rational(1);
    }
    if (ap.den() != 1) throw NoGoodBoundary("a_+ is not an integer; x0 + d0 must be integral");
    const Rational ell = (X0 - xm) / ap;
    if (ell < Rational(2, 3) || Rational(2) < ell)
        throw NoGoodBoundary("plan invariant 2/3 <= ell <= 2 fails (ell = " + std::to_string(ell.to_double()) + ")");
    if (xm < Rational(0)) throw NoGoodBoundary("x_- is negative");
    s.d0 = d0.to_double();
    s.x_minus = xm.num();
    s.a_plus = ap.num();
    s.ell = ell.to_double();
    s.exact_ok = ap * ell == X0 - xm && ell * (Rational(1) + d0 / (X0 - xm)) == Rational(1);
    return s;
}

ScreeningPlan choose_boundary(const Config& config, const Config& extension, const BoxDomain& window,
                              const TimeField& field, const ScreeningParams& params, const Interval& interval) {
    params.validate();
    const RegularityParams& reg = params.reg;
    const long R = reg.R;
    if (interval.lo > interval.hi) throw NoGoodBoundary("empty candidate interval for x0");
    if (interval.lo < reg.eps * R - 1e-12 || interval.hi > 0.5 * R + 1e-12)
        throw InvalidParams("candidate interval must lie in [eps R, R/2]");
    if (field.slices.empty()) throw InvalidParams("choose_boundary needs a field");
    const Grid& g = field.slices[0].grid;
    if (std::abs(g.x_lo) > 1e-12 || std::abs(g.x_hi - R) > 1e-12)
        throw InvalidParams("boundary field must live on [0, R]");

    const double total = slab_energy(field, 0.0, double(R));
    const double sq = std::sqrt(double(R));
    const int i_lo = static_cast<int>(std::ceil(interval.lo / g.h - 1e-9));
    const int i_hi = static_cast<int>(std::floor(interval.hi / g.h + 1e-9));
    for (int i = i_lo; i <= i_hi; ++i) {
        const double x0 = g.face_x(i);
        if (!is_tame(x0, config, reg) || !is_tame(double(R) - x0, config, reg)) continue;
        if (line_energy(field, x0) + line_energy(field, double(R) - x0) > total / (reg.eps * R)) continue;
        const double j_hi = std::min(double(R), std::ceil((x0 + sq) / g.h - 1e-9) * g.h);
        if (slab_energy(field, x0, j_hi) + slab_energy(field, double(R) - j_hi, double(R) - x0) >
            total / (reg.eps * sq))
            continue;

        ScreeningPlan plan;
        plan.R = R;
        plan.window = window;
        const Config ext = regularize(extension, x0, R, reg.xi);
        plan.left = side_plan(ext, window, x0, reg.xi);
        plan.right = side_plan(reflect_config(ext, R), BoxDomain(R - window.x_hi, R - window.x_lo), x0, reg.xi);
        for (const Bridge& b : config) {
            const double x = b.start()(0);
            if (std::abs(x - x0) <= reg.xi) ++plan.left.moved;
            else if (std::abs(x - (double(R) - x0)) <= reg.xi) ++plan.right.moved;
        }
        return plan;
    }
    throw NoGoodBoundary("no candidate x0 in [" + std::to_string(interval.lo) + ", " + std::to_string(interval.hi) +
                         "] is tame with both energy bounds");
}

ScreeningPlan choose_boundary(const Config& config, const Config& extension, const BoxDomain& window,
                              const TimeField& field, const ScreeningParams& params) {
    return choose_boundary(config, extension, window, field, params, params.interval());
}

Config crystal(long R, const Config& like) {
    std::vector<Bridge> bs;
    for (long i = 0; i < R; ++i) bs.push_back(constant_at(i + 0.5, like));
    return like.with_bridges(std::move(bs));
}

std::vector<double> layer_starts(const SidePlan& s, double xi, CssPlacement placement) {
    std::vector<double> xs;
    const double xm = double(s.x_minus);
    for (long i = 1; i <= s.a_plus; ++i)
        xs.push_back(placement == CssPlacement::centered ? xm + (i - 0.5) * s.ell
                                                          : xm + i * (s.x0 + xi - xm) / double(s.a_plus));
    return xs;
}

Config build_css(const Config& config, const std::optional<ScreeningPlan>& plan, const ScreeningParams& params) {
    const long R = params.reg.R;
    if (!plan) return crystal(R, config);
    const double x0 = plan->x0();
    std::vector<Bridge> bs = project_x(regularize(config, *plan, params), x0, double(R) - x0).bridges();
    for (int side = 0; side < 2; ++side) {
        const SidePlan& s = side == 0 ? plan->left : plan->right;
        std::vector<double> xs = layer_starts(s, params.reg.xi, params.placement);
        for (long i = 1; i <= s.x_minus; ++i) xs.push_back(i - 0.5);
        for (double x : xs) bs.push_back(constant_at(side == 0 ? x : double(R) - x, config));
    }
    if (static_cast<long>(bs.size()) != R)
        throw NeutralityBroken("Css has " + std::to_string(bs.size()) + " bridges, expected " + std::to_string(R));
    return config.with_bridges(std::move(bs));
}

Assembly assemble_field(const Config& css, const TimeField& base, const std::optional<ScreeningPlan>& plan,
                        const ScreeningParams& params, double eta) {
    const long R = params.reg.R;
    const Grid g = params.grid();
    const BoxDomain LR(0, R);
    const int n = css.n_time();
    Assembly a;
    a.field.beta = css.beta();
    a.field.slices.resize(n);
    a.energy.assign(n, 0.0);
    a.phi0.assign(n, 0.0);

    if (!plan) {
        const ChargeDensity rho = rasterize_charge(css, LR, 0, g, eta);
        GridField out(g);
        for (long c = 0; c < R; ++c) paste(out, solve_neumann(rho, BoxDomain(c, c + 1)));
        const double e = 2.0 * slice_energy(out, 0.0, double(R));
        for (int t = 0; t < n; ++t) {
            a.field.slices[t] = out;
            a.energy[t] = a.phi0[t] = e;
        }
        return a;
    }

    if (static_cast<int>(base.slices.size()) != n) throw InvalidParams("base field needs one slice per time node");
    const double x0 = plan->x0();
    const std::vector<double> left = layer_starts(plan->left, params.reg.xi, params.placement);
    const std::vector<double> right = layer_starts(plan->right, params.reg.xi, params.placement);
    std::vector<SideEnergies> el(n), er(n);
    parallel_for(n, [&](std::size_t t) {
        const GridField& b = base.slices[t];
        if (!(b.grid == g)) throw InvalidParams("base field grid differs from the screening grid");
        const ChargeDensity rho = rasterize_charge(css, LR, static_cast<int>(t), g, eta);
        GridField out = b;
        el[t] = assemble_side(out, rho, b, plan->left, left, eta);
        GridField mirrored = reflect(out);
        er[t] = assemble_side(mirrored, reflect(rho), reflect(b), plan->right, right, eta);
        out = reflect(mirrored);
        a.energy[t] = 2.0 * slice_energy(out, 0.0, double(R));
        a.phi0[t] = 2.0 * slice_energy(out, x0, double(R) - x0) + el[t].cells + 2.0 * (el[t].e1 + el[t].e2) +
                    er[t].cells + 2.0 * (er[t].e1 + er[t].e2);
        a.field.slices[t] = std::move(out);
    });
    a.per_cell_left = el[0].per_cell;
    a.per_cell_right = er[0].per_cell;
    return a;
}

bool ScreeningCert::passed() const {
    const bool middle = !(regular_branch && !plan_failed && x_plus_inside) || middle_match;
    return middle && compatible_resid <= 1e-6 && boundary_flux <= 1e-8 && ledger_ok && exact_cells_ok &&
           helmholtz_discrete_ok && (!continuum_checked || helmholtz_continuum_ok);
}

ScreenedCss screen_css(const Config& config, const ScreeningParams& params, const GreensKernel& kernel) {
    params.validate();
    if (config.k() != 1 || kernel.k() != 1) throw UnsupportedDimension("screening implemented for k = 1");
    const long R = params.reg.R;
    const BoxDomain LR(0, R);
    for (const Bridge& b : config)
        if (!LR.contains(b.start()(0))) throw InvalidParams("screening needs all starts in [0, R)");

    ScreenedCss out;
    std::optional<TruncatedEnergyResult> tr;
    try {
        tr = truncated_energy_report(config, LR, params.tparams, kernel);
        out.truncated_energy = tr->value;
    } catch (const InfeasibleNeutrality&) {
    }
    out.regular = classify_regular(config, params.reg, out.truncated_energy).regular;
    if (tr && out.regular) {
        try {
            const Interval iv = params.interval();
            if (iv.lo > iv.hi) throw NoGoodBoundary("empty candidate interval for x0");
            const Config ext = merge(config, config.with_bridges(tr->collar));
            const TimeField base = gradient_time_field(ext, tr->window, kernel, params.grid());
            ScreeningPlan plan = choose_boundary(config, ext, tr->window, base, params);
            out.css = build_css(config, plan, params);
            out.plan = plan;
        } catch (const NumericalError& e) {
            out.failure = e.what();
        }
    }
    if (!out.plan) out.css = crystal(R, config);
    return out;
}

ScreeningResult screening_report(const Config& config, const ScreeningParams& params, const GreensKernel& kernel) {
    params.validate();
    if (config.k() != 1 || kernel.k() != 1) throw UnsupportedDimension("screening implemented for k = 1");
    const RegularityParams& reg = params.reg;
    const long R = reg.R;
    const BoxDomain LR(0, R);
    for (const Bridge& b : config)
        if (!LR.contains(b.start()(0))) throw InvalidParams("screening needs all starts in [0, R)");
    const Grid g = params.grid();
    const double eta = kernel.eta();

    ScreeningResult res;
    ScreeningCert& cert = res.cert;
    std::optional<TruncatedEnergyResult> tr;
    try {
        tr = truncated_energy_report(config, LR, params.tparams, kernel);
    } catch (const InfeasibleNeutrality&) {
    }
    if (tr) {
        cert.truncated_energy = tr->value;
        cert.best_margin = tr->best_margin;
    }
    cert.regular_branch = classify_regular(config, reg, cert.truncated_energy).regular;

    TimeField base;
    if (tr) {
        const Config ext = merge(config, config.with_bridges(tr->collar));
        base = gradient_time_field(ext, tr->window, kernel, g);
        cert.base_energy = field_energy(base, 0.0, double(R)) / double(R);
        if (cert.regular_branch) {
            try {
                ScreeningPlan plan = choose_boundary(config, ext, tr->window, base, params);
                for (const SidePlan* s : {&plan.left, &plan.right})
                    for (double x : layer_starts(*s, reg.xi, params.placement)) cert.placements_beyond_x0 += x >= s->x0;
                const TimeField base_reg = gradient_time_field(regularize(ext, plan, params), tr->window, kernel, g);
                Config css = build_css(config, plan, params);
                Assembly a = assemble_field(css, base_reg, plan, params, eta);
                cert.decay = fit_decay(base, base_reg, plan.x_plus(), 0.5 * R);
                cert.per_cell_left = a.per_cell_left;
                cert.per_cell_right = a.per_cell_right;
                cert.energy_t = std::move(a.energy);
                cert.phi0_t = std::move(a.phi0);
                res.field = std::move(a.field);
                res.css = std::move(css);
                res.plan = plan;
            } catch (const NumericalError& e) {
                cert.plan_failed = true;
                cert.failure = e.what();
            }
        }
    }
    if (!res.plan) {
        res.css = crystal(R, config);
        Assembly a = assemble_field(res.css, {}, std::nullopt, params, eta);
        cert.energy_t = std::move(a.energy);
        cert.phi0_t = std::move(a.phi0);
        res.field = std::move(a.field);
    }

    // Certification.
    const int n = config.n_time();
    std::vector<double> resid(n), flux(n), grad(n);
    parallel_for(n, [&](std::size_t t) {
        const GridField& f = res.field.slices[t];
        const ChargeDensity rho = rasterize_charge(res.css, LR, static_cast<int>(t), g, eta);
        resid[t] = (discrete_divergence(f) - rho.rho).abs().maxCoeff();
        flux[t] = std::max(f.ex.row(0).abs().maxCoeff(), f.ex.row(g.nx).abs().maxCoeff());
        grad[t] = 2.0 * slice_energy(solve_neumann(rho), 0.0, double(R));
    });
    cert.compatible_resid = *std::max_element(resid.begin(), resid.end());
    cert.boundary_flux = *std::max_element(flux.begin(), flux.end());
    cert.ledger_ok = true;
    cert.helmholtz_discrete_ok = true;
    for (int t = 0; t < n; ++t) {
        cert.ledger_ok &= cert.energy_t[t] <= cert.phi0_t[t] * (1.0 + 1e-12) + 1e-14;
        cert.helmholtz_discrete_ok &= grad[t] <= cert.energy_t[t] * (1.0 + 1e-10) + 1e-12;
    }
    const double beta = config.beta();
    cert.scr_energy = field_energy(res.field, 0.0, double(R));
    cert.gradient_energy = trapezoid(grad, beta) / (2.0 * beta);
    cert.energy_lhs = cert.scr_energy / double(R);
    cert.phi0 = trapezoid(cert.phi0_t, beta) / (2.0 * beta * R);
    if (!std::isnan(cert.base_energy)) cert.phi_emp = (cert.phi0 - cert.base_energy) / reg.M;
    cert.exact_cells_ok = !res.plan || (res.plan->left.exact_ok && res.plan->right.exact_ok);
    if (res.plan) {
        cert.x_plus_inside = res.plan->x_plus() <= 10.0 * reg.eps * R + 1e-12;
        const double lo = 10.0 * reg.eps * R, hi = double(R) - lo;
        cert.middle_match = lo < hi && project_x(res.css, lo, hi) == project_x(config, lo, hi);
    }

    if (params.continuum_check) {
        cert.continuum_checked = true;
        cert.strip_energy = restricted_field_energy(res.css, LR, eta, -3.0, R + 3.0, params.quadrature);
        const double quad = restricted_field_energy(res.css, LR, eta, 0.0, double(R), params.quadrature);
        const double grid = field_energy(gradient_time_field(res.css, LR, kernel, g), 0.0, double(R));
        cert.disc_error = std::abs(grid - quad);
        cert.helmholtz_continuum_ok = cert.strip_energy <= cert.scr_energy + 2.0 * cert.disc_error + 1e-9;
    }
    return res;
}

nlohmann::json to_json(const ScreeningPlan& plan) {
    auto side = [](const SidePlan& s) {
        return nlohmann::json{{"x0", s.x0},           {"x_plus", s.x_plus},     {"d0", s.d0},
                              {"x_minus", s.x_minus}, {"a_plus", s.a_plus},     {"ell", s.ell},
                              {"degenerate", s.degenerate}, {"exact_ok", s.exact_ok}, {"moved", s.moved}};
    };
    return {{"R", plan.R},
            {"window", {plan.window.x_lo, plan.window.x_hi}},
            {"left", side(plan.left)},
            {"right_mirrored", side(plan.right)}};
}

nlohmann::json to_json(const ScreeningResult& r) {
    const ScreeningCert& c = r.cert;
    nlohmann::json cert = {{"regular_branch", c.regular_branch},
                           {"plan_failed", c.plan_failed},
                           {"failure", c.failure},
                           {"middle_match", c.middle_match},
                           {"x_plus_inside", c.x_plus_inside},
                           {"compatible_resid", c.compatible_resid},
                           {"boundary_flux", c.boundary_flux},
                           {"energy_lhs", c.energy_lhs},
                           {"phi0", c.phi0},
                           {"ledger_ok", c.ledger_ok},
                           {"base_energy", std::isnan(c.base_energy) ? nlohmann::json() : nlohmann::json(c.base_energy)},
                           {"phi_emp", std::isnan(c.phi_emp) ? nlohmann::json() : nlohmann::json(c.phi_emp)},
                           {"truncated_energy",
                            std::isfinite(c.truncated_energy) ? nlohmann::json(c.truncated_energy) : nlohmann::json()},
                           {"best_margin", c.best_margin},
                           {"exact_cells_ok", c.exact_cells_ok},
                           {"placements_beyond_x0", c.placements_beyond_x0},
                           {"per_cell_left", c.per_cell_left},
                           {"per_cell_right", c.per_cell_right},
                           {"gradient_energy", c.gradient_energy},
                           {"scr_energy", c.scr_energy},
                           {"helmholtz_discrete_ok", c.helmholtz_discrete_ok},
                           {"continuum_checked", c.continuum_checked},
                           {"strip_energy", c.strip_energy},
                           {"disc_error", c.disc_error},
                           {"helmholtz_continuum_ok", c.helmholtz_continuum_ok},
                           {"decay", {{"c", c.decay.c}, {"rate", c.decay.rate}, {"r2", c.decay.r2},
                                      {"points", c.decay.points}}},
                           {"energy_t", c.energy_t},
                           {"phi0_t", c.phi0_t},
                           {"passed", c.passed()}};
    return {{"plan", r.plan ? to_json(*r.plan) : nlohmann::json()}, {"css", to_json(r.css)}, {"cert", cert}};
}

}  // namespace jellium
