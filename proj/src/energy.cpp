#include "jellium/energy.hpp"

#include <algorithm>
#include <cmath>

#include "jellium/errors.hpp"
#include "jellium/numerics.hpp"
#include "jellium/parallel.hpp"

namespace jellium {

namespace {

constexpr double kFarField = 6.0;

double reduce01(double y) { return y - std::floor(y); }

// Mean over the sphere s of (d - s_x)_+^2.
double shell_mean_sq_plus(double d, double eta, int k) {
    if (d >= eta) return d * d + eta * eta / (k == 1 ? 2.0 : 3.0);
    if (d <= -eta) return 0.0;
    if (k == 1) {
        const double p0 = std::acos(d / eta), s0 = std::sin(p0);
        const double v = 2.0 * (M_PI - p0) * d * d + 4.0 * d * eta * s0 + eta * eta * ((M_PI - p0) - s0 * std::cos(p0));
        return v / (2.0 * M_PI);
    }
    return std::pow(d + eta, 3) / (6.0 * eta);
}

struct Circle {
    double cx, cy;
};

// Circle intersects the closed rectangle's boundary or interior as a curve.
bool cuts(const Circle& c, double eta, double x0, double x1, double y0, double y1) {
    const double dx = std::max({x0 - c.cx, 0.0, c.cx - x1});
    const double dy = std::max({y0 - c.cy, 0.0, c.cy - y1});
    const double fx = std::max(std::abs(c.cx - x0), std::abs(c.cx - x1));
    const double fy = std::max(std::abs(c.cy - y0), std::abs(c.cy - y1));
    return dx * dx + dy * dy <= eta * eta && eta * eta <= fx * fx + fy * fy;
}

double sq(const Eigen::Vector2d& v) { return v.squaredNorm(); }

double gauss_line(const FieldEvaluator& E, double x, double y0, double y1, const GaussRule& gl) {
    const double c = 0.5 * (y0 + y1), h = 0.5 * (y1 - y0);
    double s = 0.0;
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) s += gl.weights[k] * sq(E(x, c + h * gl.nodes[k]));
    return s * h;
}

// int over the cell of |E|^2, splitting along the given circles.
double cut_cell(const FieldEvaluator& E, const std::vector<Circle>& circles, double x0, double x1, double y0,
                double y1, const GaussRule& gl) {
    const double eta = E.eta();
    std::vector<double> xb{x0, x1};
    auto add_x = [&](double v) {
        if (v > x0 && v < x1) xb.push_back(v);
    };
    for (const Circle& c : circles) {
        add_x(c.cx - eta);
        add_x(c.cx + eta);
        for (double yb : {y0, y1}) {
            const double d = yb - c.cy;
            if (std::abs(d) < eta) {
                const double w = std::sqrt(eta * eta - d * d);
                add_x(c.cx - w);
                add_x(c.cx + w);
            }
        }
    }
    // Circle-circle crossings change the order of the y-breaks.
    for (std::size_t i = 0; i < circles.size(); ++i)
        for (std::size_t j = i + 1; j < circles.size(); ++j) {
            const double dx = circles[j].cx - circles[i].cx, dy = circles[j].cy - circles[i].cy;
            const double d2 = dx * dx + dy * dy;
            if (d2 == 0.0 || d2 >= 4.0 * eta * eta) continue;
            const double hh = std::sqrt(eta * eta - 0.25 * d2), d = std::sqrt(d2);
            const double mx = circles[i].cx + 0.5 * dx, my = circles[i].cy + 0.5 * dy;
            for (double s : {-1.0, 1.0}) {
                const double px = mx - s * hh * dy / d, py = my + s * hh * dx / d;
                if (py >= y0 && py <= y1) add_x(px);
            }
        }
    std::sort(xb.begin(), xb.end());
    double total = 0.0;
    std::vector<double> yb;
    for (std::size_t s = 0; s + 1 < xb.size(); ++s) {
        const double u = xb[s], L = xb[s + 1] - u;
        if (L <= 0.0) continue;
        for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
            // Smoothstep map: regularizes square-root behaviour at tangencies.
            const double t = 0.5 * (gl.nodes[k] + 1.0);
            const double x = u + L * t * t * (3.0 - 2.0 * t);
            const double jac = L * 6.0 * t * (1.0 - t) * 0.5;
            yb.assign({y0, y1});
            for (const Circle& c : circles) {
                const double d = x - c.cx;
                if (std::abs(d) < eta) {
                    const double w = std::sqrt(eta * eta - d * d);
                    for (double v : {c.cy - w, c.cy + w})
                        if (v > y0 && v < y1) yb.push_back(v);
                }
            }
            std::sort(yb.begin(), yb.end());
            double line = 0.0;
            for (std::size_t r = 0; r + 1 < yb.size(); ++r)
                if (yb[r + 1] > yb[r]) line += gauss_line(E, x, yb[r], yb[r + 1], gl);
            total += gl.weights[k] * jac * line;
        }
    }
    return total;
}

}  // namespace

FieldEvaluator::FieldEvaluator(std::vector<Eigen::Vector2d> centers, double a, double b, double eta)
    : c_(std::move(centers)), a_(a), b_(b), eta_(eta) {
    for (auto& c : c_) c(1) = reduce01(c(1));
    std::sort(c_.begin(), c_.end(), [](const auto& p, const auto& q) { return p(0) < q(0); });
    xs_.resize(c_.size());
    for (std::size_t i = 0; i < c_.size(); ++i) xs_[i] = c_[i](0);
}

FieldEvaluator::FieldEvaluator(const Config& config, const BoxDomain& dom, double eta, int t)
    : FieldEvaluator(
          [&] {
              if (config.k() != 1) throw UnsupportedDimension("pointwise fields implemented for k = 1 only");
              std::vector<Eigen::Vector2d> c;
              for (const Bridge& b : config) {
                  const Point p = b.node(t);
                  c.emplace_back(p(0), p(1));
              }
              return c;
          }(),
          double(dom.x_lo), double(dom.x_hi), eta) {}

std::pair<std::size_t, std::size_t> FieldEvaluator::range(double lo, double hi) const {
    const std::size_t i0 = std::lower_bound(xs_.begin(), xs_.end(), lo) - xs_.begin();
    const std::size_t i1 = std::upper_bound(xs_.begin(), xs_.end(), hi) - xs_.begin();
    return {i0, i1};
}

Eigen::Vector2d FieldEvaluator::operator()(double x, double y) const {
    const auto [k0, k1] = range(x - kFarField, x + kFarField);
    Eigen::Vector2d e(-0.5 * double(k0) + 0.5 * double(c_.size() - k1) + std::clamp(x, a_, b_) - 0.5 * (a_ + b_),
                      0.0);
    for (std::size_t k = k0; k < k1; ++k) e += strip1::grad_g_eta(x - c_[k](0), y - c_[k](1), eta_);
    return e;
}

double integrate_field_energy(const FieldEvaluator& E, double lo, double hi, const FieldQuadrature& q) {
    if (!(hi > lo)) return 0.0;
    const GaussRule& gl = gauss_legendre(q.order);
    std::vector<double> xb{lo, hi};
    for (double v = std::ceil(lo / q.cell) * q.cell; v < hi; v += q.cell)
        if (v > lo) xb.push_back(v);
    for (double v : {E.bg_lo(), E.bg_hi()})
        if (v > lo && v < hi) xb.push_back(v);
    std::sort(xb.begin(), xb.end());
    xb.erase(std::unique(xb.begin(), xb.end(), [](double u, double v) { return v - u < 1e-13; }), xb.end());
    const int ny = std::max(1, static_cast<int>(std::lround(1.0 / q.cell)));
    const double hy = 1.0 / ny, eta = E.eta();

    std::vector<double> part(xb.size() - 1, 0.0);
    parallel_for(part.size(), [&](std::size_t s) {
        const double x0 = xb[s], x1 = xb[s + 1];
        const auto [k0, k1] = E.range(x0 - eta, x1 + eta);
        std::vector<Circle> circles;
        double acc = 0.0;
        for (int j = 0; j < ny; ++j) {
            const double y0 = j * hy, y1 = (j + 1) * hy;
            circles.clear();
            for (std::size_t k = k0; k < k1; ++k)
                for (int m = -1; m <= 1; ++m) {
                    const Circle c{E.centers()[k](0), E.centers()[k](1) + m};
                    if (cuts(c, eta, x0, x1, y0, y1)) circles.push_back(c);
                }
            if (circles.empty()) {
                const double cx = 0.5 * (x0 + x1), hx = 0.5 * (x1 - x0);
                double cell = 0.0;
                for (std::size_t a = 0; a < gl.nodes.size(); ++a)
                    cell += gl.weights[a] * gauss_line(E, cx + hx * gl.nodes[a], y0, y1, gl);
                acc += cell * hx;
            } else {
                acc += cut_cell(E, circles, x0, x1, y0, y1, gl);
            }
        }
        part[s] = acc;
    });
    return pairwise_sum(part);
}

double integrate_line_energy(const FieldEvaluator& E, double x, int order) {
    const GaussRule& gl = gauss_legendre(order);
    const double eta = E.eta();
    std::vector<double> yb;
    for (int j = 0; j <= 16; ++j) yb.push_back(j / 16.0);
    const auto [k0, k1] = E.range(x - eta, x + eta);
    for (std::size_t k = k0; k < k1; ++k) {
        const double d = x - E.centers()[k](0);
        if (std::abs(d) >= eta) continue;
        const double w = std::sqrt(eta * eta - d * d);
        for (double v : {E.centers()[k](1) - w, E.centers()[k](1) + w}) yb.push_back(reduce01(v));
    }
    std::sort(yb.begin(), yb.end());
    double s = 0.0;
    for (std::size_t r = 0; r + 1 < yb.size(); ++r)
        if (yb[r + 1] > yb[r]) s += gauss_line(E, x, yb[r], yb[r + 1], gl);
    return s;
}

std::vector<double> trapezoid_weights(int n, double beta) {
    if (n == 1) return {beta};
    std::vector<double> w(n, beta / (n - 1));
    w.front() *= 0.5;
    w.back() *= 0.5;
    return w;
}

double background_potential(double x, double a, double b, double eta, int k) {
    const double q = -0.25 * ((x - a) * (x - a) + (b - x) * (b - x)) - eta * eta / (k == 1 ? 4.0 : 6.0);
    return q + 0.5 * shell_mean_sq_plus(a - x, eta, k) + 0.5 * shell_mean_sq_plus(x - b, eta, k);
}

double classical_energy(const std::vector<Point>& points, const BoxDomain& dom, const GreensKernel& kernel) {
    const double a = double(dom.x_lo), b = double(dom.x_hi), L = b - a;
    const std::size_t n = points.size();
    std::vector<double> terms;
    terms.reserve(n * (n + 1) / 2 + 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) terms.push_back(eval_g_eta_eta(kernel, points[i] - points[j]));
    for (const Point& p : points) terms.push_back(-background_potential(p(0), a, b, kernel.eta(), kernel.k()));
    terms.push_back(-L * L * L / 12.0);
    return pairwise_sum(terms);
}

double path_energy(const Config& config, const BoxDomain& dom, const GreensKernel& kernel) {
    const std::vector<double> w = trapezoid_weights(config.n_time(), config.beta());
    std::vector<double> e(w.size());
    parallel_for(w.size(), [&](std::size_t t) { e[t] = classical_energy(config.positions(int(t)), dom, kernel); });
    double s = 0.0;
    for (std::size_t t = 0; t < w.size(); ++t) s += w[t] * e[t];
    return s;
}

nlohmann::json to_json(const EnergyReport& r) {
    return {{"classical", r.classical},
            {"path", r.path},
            {"field", r.field},
            {"self_term", r.self_term},
            {"split_residual", r.split_residual},
            {"relative_residual", r.relative_residual()},
            {"window", {r.window_lo, r.window_hi}}};
}

namespace {

double max_edge_field(const FieldEvaluator& E, double x) {
    double m = 0.0;
    for (int j = 0; j < 8; ++j) m = std::max(m, E(x, j / 8.0).norm());
    return m;
}

}  // namespace

EnergyReport verify_split(const Config& config, const BoxDomain& dom, const GreensKernel& kernel, const Grid& grid) {
    if (config.k() != 1 || kernel.k() != 1) throw UnsupportedDimension("split identity check implemented for k = 1");
    if (static_cast<long>(config.size()) != dom.length())
        throw NotNeutral("verify_split needs #omega = |dom| (" + std::to_string(config.size()) + " vs " +
                         std::to_string(dom.length()) + ")");
    const double eta = kernel.eta();
    double xmin = double(dom.x_lo), xmax = double(dom.x_hi);
    for (const Bridge& b : config) {
        xmin = std::min(xmin, b.x_min() - eta);
        xmax = std::max(xmax, b.x_max() + eta);
    }
    const FieldQuadrature q{4.0 * grid.h, 8};
    const int n = config.n_time();
    std::vector<FieldEvaluator> evals;
    for (int t = 0; t < n; ++t) evals.emplace_back(config, dom, eta, t);
    double W = 3.0;
    for (;; W += 2.0) {
        double edge = 0.0;
        for (const auto& E : evals)
            edge = std::max({edge, max_edge_field(E, std::floor(xmin) - W), max_edge_field(E, std::ceil(xmax) + W)});
        if (edge < 1e-12 || W > 20.0) break;
    }
    EnergyReport r;
    r.window_lo = std::floor(xmin) - W;
    r.window_hi = std::ceil(xmax) + W;
    const std::vector<double> w = trapezoid_weights(n, config.beta());
    double field = 0.0;
    for (int t = 0; t < n; ++t) field += w[t] * integrate_field_energy(evals[t], r.window_lo, r.window_hi, q);
    r.field = field / (2.0 * config.beta());
    r.path = path_energy(config, dom, kernel) / config.beta();
    r.classical = classical_energy(config.positions(0), dom, kernel);
    r.self_term = 0.5 * double(config.size()) * eval_g_eta_eta(kernel, Point::Zero(2));
    r.split_residual = std::abs(r.path - (r.field - r.self_term));
    return r;
}

double restricted_field_energy(const Config& config, const BoxDomain& dom, double eta, double lo, double hi,
                               const FieldQuadrature& q) {
    const std::vector<double> w = trapezoid_weights(config.n_time(), config.beta());
    double s = 0.0;
    for (int t = 0; t < config.n_time(); ++t)
        s += w[t] * integrate_field_energy(FieldEvaluator(config, dom, eta, t), lo, hi, q);
    return s / (2.0 * config.beta());
}

double net_charge(const Config& config, const BoxDomain& dom, int t, double lo, double hi, double eta, double h) {
    if (!std::isfinite(lo)) {
        double xmin = double(dom.x_lo);
        for (const Bridge& b : config) xmin = std::min(xmin, b.x_at(t) - eta);
        lo = std::floor(std::min(xmin, hi)) - 1.0;
        lo = hi - h * std::ceil((hi - lo) / h);
    }
    if (hi <= lo) return 0.0;
    return rasterize_charge(config, dom, t, Grid(lo, hi, h), eta).total();
}

double shell_fraction_left(double cx, double x, double eta, int k) {
    const double d = x - cx;
    if (d >= eta) return 1.0;
    if (d <= -eta) return 0.0;
    if (k == 1) return 1.0 - std::acos(d / eta) / M_PI;
    return 0.5 * (1.0 + d / eta);
}

double net_charge_left(const Config& config, const BoxDomain& dom, int t, double x, double eta) {
    double s = std::clamp(x, double(dom.x_lo), double(dom.x_hi)) - double(dom.x_lo);
    for (const Bridge& b : config) s -= shell_fraction_left(b.x_at(t), x, eta, config.k());
    return s;
}

int count_near(const Config& config, double x) {
    int c = 0;
    for (const Bridge& b : config)
        if (x_distance(b, x) <= 1.0) ++c;
    return c;
}

nlohmann::json to_json(const ImbalanceReport& r) {
    return {{"lhs", r.lhs}, {"flux_term", r.flux_term}, {"count_term", r.count_term}, {"rhs", r.rhs}, {"holds", r.holds}};
}

namespace {

void require_neutral(const Config& config, const BoxDomain& dom) {
    if (static_cast<long>(config.size()) != dom.length()) throw NotNeutral("configuration is not neutral in dom");
}

double time_avg_line_energy(const Config& config, const BoxDomain& dom, double eta, double x) {
    const std::vector<double> w = trapezoid_weights(config.n_time(), config.beta());
    double s = 0.0;
    for (int t = 0; t < config.n_time(); ++t) s += w[t] * integrate_line_energy(FieldEvaluator(config, dom, eta, t), x);
    return s / config.beta();
}

void finish(ImbalanceReport& r) {
    r.rhs = r.flux_term + r.count_term;
    r.holds = r.lhs <= r.rhs * (1.0 + 1e-12) + 1e-12;
}

}  // namespace

ImbalanceReport check_imbalance_bound(const Config& config, const BoxDomain& dom, const GreensKernel& kernel,
                                      double x_minus) {
    require_neutral(config, dom);
    if (x_minus < dom.x_lo || x_minus > dom.x_hi) throw OutOfRange("x_- must lie in [L_-, L_+]");
    ImbalanceReport r;
    r.lhs = std::abs(net_charge_left(config, dom, 0, x_minus, kernel.eta()));
    r.flux_term = std::sqrt(time_avg_line_energy(config, dom, kernel.eta(), x_minus));
    r.count_term = count_near(config, x_minus);
    finish(r);
    return r;
}

ImbalanceReport check_imbalance_bound2(const Config& config, const BoxDomain& dom, const GreensKernel& kernel,
                                       double x_minus, double x_plus) {
    require_neutral(config, dom);
    if (!(dom.x_lo <= x_minus && x_minus <= x_plus && x_plus <= dom.x_hi))
        throw OutOfRange("need L_- <= x_- <= x_+ <= L_+");
    const double eta = kernel.eta();
    ImbalanceReport r;
    r.lhs = std::abs(net_charge_left(config, dom, 0, x_plus, eta) - net_charge_left(config, dom, 0, x_minus, eta));
    r.flux_term = std::sqrt(4.0 * (time_avg_line_energy(config, dom, eta, x_minus) +
                                   time_avg_line_energy(config, dom, eta, x_plus)));
    r.count_term = count_near(config, x_minus) + count_near(config, x_plus);
    finish(r);
    return r;
}

void TruncatedEnergyParams::validate() const {
    if (margins.empty()) throw InvalidParams("truncated energy needs at least one margin");
    for (std::size_t i = 0; i < margins.size(); ++i) {
        if (margins[i] < 0) throw InvalidParams("margins must be nonnegative");
        if (i > 0 && margins[i] <= margins[i - 1]) throw InvalidParams("margins must be increasing");
    }
    if (descent_iters < 0) throw InvalidParams("descent_iters must be nonnegative");
    if (!(quadrature.cell > 0.0) || quadrature.order < 1) throw InvalidParams("quadrature needs cell > 0 and order >= 1");
}

std::vector<Bridge> lattice_collar(const BoxDomain& K, long w, long count, int k, int n_time) {
    std::vector<Bridge> out;
    if (count <= 0) return out;
    if (w <= 0) throw InfeasibleNeutrality("no collar to place bridges in");
    const long cl = count / 2, cr = count - cl;
    auto place = [&](double lo, long c) {
        for (long i = 0; i < c; ++i) {
            Point p = Point::Zero(k + 1);
            p(0) = lo + (i + 0.5) * double(w) / double(c);
            out.push_back(Bridge::constant(p, n_time));
        }
    };
    place(double(K.x_lo - w), cl);
    place(double(K.x_hi), cr);
    return out;
}

TruncatedEnergyResult truncated_energy_report(const Config& config, const BoxDomain& K,
                                              const TruncatedEnergyParams& params, const GreensKernel& kernel) {
    params.validate();
    if (config.k() != 1 || kernel.k() != 1) throw UnsupportedDimension("truncated energy implemented for k = 1");
    for (const Bridge& b : config)
        if (!K.contains(b.start()(0))) throw InvalidParams("truncated energy needs all bridges to start in K");
    const long N = static_cast<long>(config.size());
    std::vector<long> margins = params.margins;
    if (N == K.length() && margins.front() != 0) margins.insert(margins.begin(), 0);

    TruncatedEnergyResult res;
    for (long w : margins) {
        const BoxDomain lam(K.x_lo - w, K.x_hi + w);
        const long c = lam.length() - N;
        double e = std::numeric_limits<double>::infinity();
        std::vector<Bridge> collar;
        if (c >= 0 && (c == 0 || w > 0) && params.lattice_fill) {
            collar = lattice_collar(K, w, c, 1, config.n_time());
            auto energy = [&](const std::vector<Bridge>& col) {
                std::vector<Bridge> all = config.bridges();
                all.insert(all.end(), col.begin(), col.end());
                return restricted_field_energy(config.with_bridges(all), lam, kernel.eta(), double(K.x_lo),
                                               double(K.x_hi), params.quadrature);
            };
            e = energy(collar);
            // Coordinate descent on the collar positions.
            for (int it = 0; it < params.descent_iters; ++it) {
                const double step = 0.25 / (it + 1);
                for (std::size_t i = 0; i < collar.size(); ++i) {
                    const bool left = collar[i].start()(0) < K.x_lo;
                    const double lo = left ? double(K.x_lo - w) : double(K.x_hi);
                    const double hi = left ? double(K.x_lo) : double(K.x_hi + w);
                    for (int c2 = 0; c2 < 2; ++c2)
                        for (double sgn : {-1.0, 1.0}) {
                            Point p = collar[i].start();
                            p(c2) += sgn * step;
                            if (p(0) < lo || p(0) >= hi) continue;
                            std::vector<Bridge> trial = collar;
                            trial[i] = Bridge::constant(p, config.n_time());
                            const double et = energy(trial);
                            if (et < e) {
                                e = et;
                                collar = std::move(trial);
                            }
                        }
                }
            }
        }
        res.candidates.push_back(e);
        if (e < res.value) {
            res.value = e;
            res.best_margin = w;
            res.window = lam;
            res.collar = collar;
        }
    }
    for (const auto& [lam, extra] : params.extensions) {
        if (lam.x_lo > K.x_lo || lam.x_hi < K.x_hi) throw InvalidParams("extension window must contain K");
        if (lam.length() != N + static_cast<long>(extra.size())) throw NotNeutral("extension is not neutral");
        for (const Bridge& b : extra)
            if (K.contains(b.start()(0))) throw InvalidParams("extension bridges must start outside K");
        std::vector<Bridge> all = config.bridges();
        all.insert(all.end(), extra.begin(), extra.end());
        const double e = restricted_field_energy(config.with_bridges(all), lam, kernel.eta(), double(K.x_lo),
                                                 double(K.x_hi), params.quadrature);
        res.candidates.push_back(e);
        if (e < res.value) {
            res.value = e;
            res.best_margin = lam.x_hi - K.x_hi;
            res.window = lam;
            res.collar = extra;
        }
    }
    if (!std::isfinite(res.value)) throw InfeasibleNeutrality("K is overfull for every margin");
    return res;
}

double truncated_energy(const Config& config, const BoxDomain& K, const TruncatedEnergyParams& params,
                        const GreensKernel& kernel) {
    return truncated_energy_report(config, K, params, kernel).value;
}

}  // namespace jellium
