#include "jellium/greens.hpp"

#include <algorithm>
#include <cmath>

#include "jellium/errors.hpp"
#include "jellium/numerics.hpp"

namespace jellium {

namespace {

constexpr double kPi = M_PI;
constexpr double kTwoPi = 2.0 * M_PI;

double sgn(double v) { return (v > 0.0) - (v < 0.0); }
double reduce(double y) { return y - std::floor(y + 0.5); }

void require_dim(const GreensKernel& kernel, const Point& dz) {
    if (kernel.k() != 1 && kernel.k() != 2)
        throw UnsupportedDimension("Green's function implemented for k = 1, 2 only");
    if (dz.size() != kernel.k() + 1) throw InvalidParams("displacement dimension does not match kernel");
}

// Mean over phi of ln max(|d - eta e^{i phi}|, eta), for 0 <= d < 2 eta.
double log_ring_mean(double d, double eta) {
    const double phis = std::acos(std::min(1.0, d / (2.0 * eta)));
    const double inner = 2.0 * phis * std::log(eta);
    const double outer = 2.0 * gauss_integrate(
                                    [&](double phi) {
                                        return 0.5 * std::log(d * d + eta * eta - 2.0 * d * eta * std::cos(phi));
                                    },
                                    phis, kPi, 32);
    return (inner + outer) / kTwoPi;
}

// ---- k = 2 -------------------------------------------------------------

constexpr double kAlpha = 4.0;
constexpr int kImages = 2;
constexpr int kRecip = 9;
constexpr int kSeriesCut = 10;
constexpr double kSeriesSwitch = 0.6;

double g2_series(double x, double y1, double y2, int nmax) {
    double sum = -0.5 * std::abs(x);
    for (int n1 = -nmax; n1 <= nmax; ++n1) {
        for (int n2 = -nmax; n2 <= nmax; ++n2) {
            if (n1 == 0 && n2 == 0) continue;
            const double nn = std::sqrt(double(n1 * n1 + n2 * n2));
            sum += std::exp(-kTwoPi * nn * std::abs(x)) * std::cos(kTwoPi * (n1 * y1 + n2 * y2)) / (4.0 * kPi * nn);
        }
    }
    return sum;
}

Eigen::Vector3d grad_g2_series(double x, double y1, double y2, int nmax) {
    Eigen::Vector3d g(-0.5 * sgn(x), 0.0, 0.0);
    for (int n1 = -nmax; n1 <= nmax; ++n1) {
        for (int n2 = -nmax; n2 <= nmax; ++n2) {
            if (n1 == 0 && n2 == 0) continue;
            const double nn = std::sqrt(double(n1 * n1 + n2 * n2));
            const double e = std::exp(-kTwoPi * nn * std::abs(x));
            const double ph = kTwoPi * (n1 * y1 + n2 * y2);
            g(0) -= 0.5 * sgn(x) * e * std::cos(ph);
            const double s = e * std::sin(ph) / (2.0 * nn);
            g(1) -= n1 * s;
            g(2) -= n2 * s;
        }
    }
    return g;
}

// Ewald evaluation; with `regular` the direct 1/(4 pi r) term is removed.
double g2_ewald(double x, double y1, double y2, bool regular) {
    double real = 0.0;
    for (int m1 = -kImages; m1 <= kImages; ++m1) {
        for (int m2 = -kImages; m2 <= kImages; ++m2) {
            const double a = y1 + m1, b = y2 + m2;
            const double r = std::sqrt(x * x + a * a + b * b);
            if (m1 == 0 && m2 == 0 && regular) {
                real += (r < 1e-8) ? -kAlpha / (2.0 * std::pow(kPi, 1.5)) : -std::erf(kAlpha * r) / (4.0 * kPi * r);
            } else {
                if (r == 0.0) throw SingularPoint("Green's function evaluated at its singularity");
                real += std::erfc(kAlpha * r) / (4.0 * kPi * r);
            }
        }
    }
    double recip = 0.0;
    for (int n1 = -kRecip; n1 <= kRecip; ++n1) {
        for (int n2 = -kRecip; n2 <= kRecip; ++n2) {
            if (n1 == 0 && n2 == 0) continue;
            const double G = kTwoPi * std::sqrt(double(n1 * n1 + n2 * n2));
            const double bracket = std::exp(G * x) * std::erfc(G / (2.0 * kAlpha) + kAlpha * x) +
                                   std::exp(-G * x) * std::erfc(G / (2.0 * kAlpha) - kAlpha * x);
            recip += std::cos(kTwoPi * (n1 * y1 + n2 * y2)) * bracket / (4.0 * G);
        }
    }
    const double zero =
        -0.5 * (x * std::erf(kAlpha * x) + std::exp(-kAlpha * kAlpha * x * x) / (kAlpha * std::sqrt(kPi)));
    return real + recip + zero;
}

Eigen::Vector3d grad_g2_ewald(double x, double y1, double y2, bool regular) {
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    for (int m1 = -kImages; m1 <= kImages; ++m1) {
        for (int m2 = -kImages; m2 <= kImages; ++m2) {
            const Eigen::Vector3d rv(x, y1 + m1, y2 + m2);
            const double r = rv.norm();
            if (m1 == 0 && m2 == 0 && regular) {
                // gradient of -erf(alpha r)/(4 pi r)
                double dr;
                if (r < 1e-4) {
                    g += rv * (std::pow(kAlpha, 3) / (3.0 * std::pow(kPi, 1.5)));
                    continue;
                }
                dr = -((2.0 * kAlpha / std::sqrt(kPi)) * std::exp(-kAlpha * kAlpha * r * r) * r - std::erf(kAlpha * r)) /
                     (4.0 * kPi * r * r);
                g += rv * (dr / r);
            } else {
                if (r == 0.0) throw SingularPoint("Green's function gradient evaluated at its singularity");
                const double dr = -(std::erfc(kAlpha * r) / r +
                                    (2.0 * kAlpha / std::sqrt(kPi)) * std::exp(-kAlpha * kAlpha * r * r)) /
                                  (4.0 * kPi * r);
                g += rv * (dr / r);
            }
        }
    }
    for (int n1 = -kRecip; n1 <= kRecip; ++n1) {
        for (int n2 = -kRecip; n2 <= kRecip; ++n2) {
            if (n1 == 0 && n2 == 0) continue;
            const double G = kTwoPi * std::sqrt(double(n1 * n1 + n2 * n2));
            const double ep = std::exp(G * x) * std::erfc(G / (2.0 * kAlpha) + kAlpha * x);
            const double em = std::exp(-G * x) * std::erfc(G / (2.0 * kAlpha) - kAlpha * x);
            const double ph = kTwoPi * (n1 * y1 + n2 * y2);
            g(0) += std::cos(ph) * (ep - em) / 4.0;
            const double s = -std::sin(ph) * (ep + em) / (4.0 * G) * kTwoPi;
            g(1) += n1 * s;
            g(2) += n2 * s;
        }
    }
    g(0) += -0.5 * std::erf(kAlpha * x);
    return g;
}

double g2(double x, double y1, double y2) {
    y1 = reduce(y1);
    y2 = reduce(y2);
    if (std::abs(x) >= kSeriesSwitch) return g2_series(x, y1, y2, kSeriesCut);
    if (x == 0.0 && y1 == 0.0 && y2 == 0.0) throw SingularPoint("Green's function evaluated at its singularity");
    return g2_ewald(x, y1, y2, false);
}

double h2(double x, double y1, double y2) {
    y1 = reduce(y1);
    y2 = reduce(y2);
    if (std::abs(x) >= kSeriesSwitch)
        return g2_series(x, y1, y2, kSeriesCut) - 1.0 / (4.0 * kPi * std::sqrt(x * x + y1 * y1 + y2 * y2));
    return g2_ewald(x, y1, y2, true);
}

Eigen::Vector3d grad_g2(double x, double y1, double y2) {
    y1 = reduce(y1);
    y2 = reduce(y2);
    if (std::abs(x) >= kSeriesSwitch) return grad_g2_series(x, y1, y2, kSeriesCut);
    return grad_g2_ewald(x, y1, y2, false);
}

Eigen::Vector3d grad_h2(double x, double y1, double y2) {
    y1 = reduce(y1);
    y2 = reduce(y2);
    if (std::abs(x) >= kSeriesSwitch) {
        const Eigen::Vector3d z(x, y1, y2);
        const double r = z.norm();
        return grad_g2_series(x, y1, y2, kSeriesCut) + z / (4.0 * kPi * r * r * r);
    }
    return grad_g2_ewald(x, y1, y2, true);
}

double reduced_norm(const Point& dz) {
    double s = dz(0) * dz(0);
    for (int c = 1; c < dz.size(); ++c) {
        const double y = reduce(dz(c));
        s += y * y;
    }
    return std::sqrt(s);
}

}  // namespace

Point reduce_displacement(const Point& dz) {
    Point r = dz;
    for (int c = 1; c < r.size(); ++c) r(c) = reduce(r(c));
    return r;
}

namespace strip1 {

double g(double x, double y) {
    y = reduce(y);
    const double u = kTwoPi * std::abs(x);
    const double e1 = std::expm1(-u);
    const double s = std::sin(kPi * y);
    const double A = e1 * e1 + 4.0 * std::exp(-u) * s * s;
    if (A == 0.0) throw SingularPoint("Green's function evaluated at its singularity");
    return -0.5 * std::abs(x) - std::log(A) / (4.0 * kPi);
}

Eigen::Vector2d grad_g(double x, double y) {
    y = reduce(y);
    const double u = kTwoPi * std::abs(x);
    const double r = std::exp(-u);
    const double e1 = std::expm1(-u);
    const double s = std::sin(kPi * y);
    const double A = e1 * e1 + 4.0 * r * s * s;
    if (A == 0.0) throw SingularPoint("Green's function gradient evaluated at its singularity");
    const double th = kTwoPi * y;
    return {-sgn(x) * (0.5 + r * (std::cos(th) - r) / A), -r * std::sin(th) / A};
}

double h(double x, double y) {
    y = reduce(y);
    const double rho2 = x * x + y * y;
    if (rho2 == 0.0) return -std::log(kTwoPi) / kTwoPi;
    const double u = kTwoPi * std::abs(x);
    const double e1 = std::expm1(-u);
    const double s = std::sin(kPi * y);
    const double ratio = e1 * e1 / rho2 + 4.0 * std::exp(-u) * s * s / rho2;
    return -0.5 * std::abs(x) - std::log(ratio) / (4.0 * kPi);
}

Eigen::Vector2d grad_h(double x, double y) {
    y = reduce(y);
    const double rho2 = x * x + y * y;
    if (rho2 == 0.0) return Eigen::Vector2d::Zero();
    return grad_g(x, y) + Eigen::Vector2d(x, y) / (kTwoPi * rho2);
}

double g_eta(double x, double y, double eta) {
    y = reduce(y);
    const double rho = std::hypot(x, y);
    if (rho >= eta) return g(x, y);
    return -std::log(eta) / kTwoPi + h(x, y);
}

double g_eta_eta(double x, double y, double eta) {
    y = reduce(y);
    const double rho = std::hypot(x, y);
    if (rho >= 2.0 * eta) return g(x, y);
    return h(x, y) - log_ring_mean(rho, eta) / kTwoPi;
}

Eigen::Vector2d grad_g_eta(double x, double y, double eta) {
    y = reduce(y);
    if (x * x + y * y >= eta * eta) return grad_g(x, y);
    return grad_h(x, y);
}

namespace {

// sum_{n>=1} r^n sin(n theta) / n
double S(double r, double theta) { return std::atan2(r * std::sin(theta), 1.0 - r * std::cos(theta)); }

double wrap_angle(double th) {
    th = std::fmod(th, kTwoPi);
    if (th < 0.0) th += kTwoPi;
    return th;
}

// Distance from 0 to the set [Y0, Y1] + Z.
double periodic_gap(double Y0, double Y1) {
    if (Y1 - Y0 >= 1.0) return 0.0;
    const double a = Y0 - std::floor(Y0);
    const double b = a + (Y1 - Y0);
    if (b >= 1.0) return 0.0;
    return std::min(a, 1.0 - b);
}

double S1(double theta) {
    const double th = wrap_angle(theta);
    return th == 0.0 ? 0.0 : 0.5 * (kPi - th);
}

}  // namespace

double flux_x(double X, double Y0, double Y1) {
    const double s = sgn(X);
    if (s == 0.0) return 0.0;
    const double r = std::exp(-kTwoPi * std::abs(X));
    return -0.5 * s * (Y1 - Y0) - (s / kTwoPi) * (S(r, kTwoPi * Y1) - S(r, kTwoPi * Y0));
}

double flux_y(double Y, double X0, double X1) {
    const double th = wrap_angle(kTwoPi * Y);
    if (th == 0.0) return 0.0;
    const double s1 = S1(th);
    const double r0 = std::exp(-kTwoPi * std::abs(X0));
    const double r1 = std::exp(-kTwoPi * std::abs(X1));
    return -(sgn(X1) * (s1 - S(r1, th)) - sgn(X0) * (s1 - S(r0, th))) / kTwoPi;
}

double flux_x_eta(double X, double Y0, double Y1, double eta) {
    const double gap = periodic_gap(Y0, Y1);
    if (X * X + gap * gap >= eta * eta) return flux_x(X, Y0, Y1);
    const double len = Y1 - Y0, mid = reduce(0.5 * (Y0 + Y1));
    const double a = mid - 0.5 * len, b = mid + 0.5 * len;
    if (len < 1.0 && X * X + a * a < eta * eta && X * X + b * b < eta * eta) {
        // Face inside the disk: the field is grad h.
        if (X == 0.0) return 0.0;
        return flux_x(X, Y0, Y1) + (std::atan(b / X) - std::atan(a / X)) / kTwoPi;
    }
    std::vector<double> breaks{0.0, kTwoPi};
    if (std::abs(X) < eta) {
        const double a = std::acos(X / eta);
        breaks.push_back(a);
        breaks.push_back(kTwoPi - a);
    }
    for (double Ye : {Y0, Y1}) {
        const double yr = reduce(Ye);
        breaks.push_back(wrap_angle(std::atan2(yr, X)));
    }
    auto f = [&](double phi) {
        const double cx = eta * std::cos(phi), cy = eta * std::sin(phi);
        return flux_x(X - cx, Y0 - cy, Y1 - cy);
    };
    return integrate_piecewise(f, breaks, 1e-15) / kTwoPi;
}

double flux_y_eta(double Y, double X0, double X1, double eta) {
    const double yr = reduce(Y);
    const double gx = (X0 <= 0.0 && X1 >= 0.0) ? 0.0 : std::min(std::abs(X0), std::abs(X1));
    if (yr * yr + gx * gx >= eta * eta) return flux_y(Y, X0, X1);
    if (X0 * X0 + yr * yr < eta * eta && X1 * X1 + yr * yr < eta * eta) {
        if (yr == 0.0) return 0.0;
        return flux_y(Y, X0, X1) + (std::atan(X1 / yr) - std::atan(X0 / yr)) / kTwoPi;
    }
    std::vector<double> breaks{0.0, kTwoPi};
    if (std::abs(yr) < eta) {
        const double a = std::asin(yr / eta);
        breaks.push_back(wrap_angle(a));
        breaks.push_back(wrap_angle(kPi - a));
    }
    for (double Xe : {X0, X1}) breaks.push_back(wrap_angle(std::atan2(yr, Xe)));
    auto f = [&](double phi) {
        const double cx = eta * std::cos(phi), cy = eta * std::sin(phi);
        return flux_y(Y - cy, X0 - cx, X1 - cx);
    };
    return integrate_piecewise(f, breaks, 1e-15) / kTwoPi;
}

}  // namespace strip1

double eval_g(const GreensKernel& kernel, const Point& dz) {
    require_dim(kernel, dz);
    if (kernel.k() == 1) {
        if (dz(0) == 0.0 && reduce(dz(1)) == 0.0) throw SingularPoint("eval_g at dz = 0");
        return strip1::g(dz(0), dz(1));
    }
    return g2(dz(0), dz(1), dz(2));
}

double eval_g_series(const GreensKernel& kernel, const Point& dz) {
    require_dim(kernel, dz);
    if (reduced_norm(dz) == 0.0) throw SingularPoint("eval_g_series at dz = 0");
    const int nmax = kernel.n_max;
    if (kernel.k() == 2) return g2_series(dz(0), dz(1), dz(2), nmax);
    double sum = -0.5 * std::abs(dz(0));
    for (int n = nmax; n >= 1; --n) {
        sum += std::exp(-kTwoPi * n * std::abs(dz(0))) * std::cos(kTwoPi * n * dz(1)) / (kTwoPi * n);
    }
    return sum;
}

double series_tail_bound(const GreensKernel& kernel, double dx) {
    dx = std::abs(dx);
    if (dx == 0.0) return std::numeric_limits<double>::infinity();
    const double q = std::exp(-kTwoPi * (kernel.n_max + 1) * dx) / (-std::expm1(-kTwoPi * dx));
    if (kernel.k() == 1) return q / (kTwoPi * (kernel.n_max + 1));
    return 2.0 * q / kPi;
}

double eval_h(const GreensKernel& kernel, const Point& dz) {
    require_dim(kernel, dz);
    if (kernel.k() == 1) return strip1::h(dz(0), dz(1));
    return h2(dz(0), dz(1), dz(2));
}

double eval_g_eta(const GreensKernel& kernel, const Point& dz) {
    require_dim(kernel, dz);
    const double eta = kernel.eta();
    if (kernel.k() == 1) return strip1::g_eta(dz(0), dz(1), eta);
    const double rho = reduced_norm(dz);
    if (rho >= eta) return g2(dz(0), dz(1), dz(2));
    return h2(dz(0), dz(1), dz(2)) + 1.0 / (4.0 * kPi * eta);
}

double eval_g_eta_eta(const GreensKernel& kernel, const Point& dz) {
    require_dim(kernel, dz);
    const double eta = kernel.eta();
    if (kernel.k() == 1) return strip1::g_eta_eta(dz(0), dz(1), eta);
    const double rho = reduced_norm(dz);
    if (rho >= 2.0 * eta) return g2(dz(0), dz(1), dz(2));
    return h2(dz(0), dz(1), dz(2)) + (1.0 - rho / (4.0 * eta)) / (4.0 * kPi * eta);
}

Point grad_g(const GreensKernel& kernel, const Point& dz) {
    require_dim(kernel, dz);
    if (kernel.k() == 1) {
        if (dz(0) == 0.0 && reduce(dz(1)) == 0.0) throw SingularPoint("grad_g at dz = 0");
        return strip1::grad_g(dz(0), dz(1));
    }
    if (reduced_norm(dz) == 0.0) throw SingularPoint("grad_g at dz = 0");
    return grad_g2(dz(0), dz(1), dz(2));
}

Point grad_g_eta(const GreensKernel& kernel, const Point& dz) {
    require_dim(kernel, dz);
    const double eta = kernel.eta();
    if (kernel.k() == 1) return strip1::grad_g_eta(dz(0), dz(1), eta);
    if (reduced_norm(dz) >= eta) return grad_g2(dz(0), dz(1), dz(2));
    return grad_h2(dz(0), dz(1), dz(2));
}

SphereRule sphere_rule(int k, double eta, int nodes) {
    SphereRule rule;
    if (k == 1) {
        for (int i = 0; i < nodes; ++i) {
            const double phi = kTwoPi * (i + 0.5) / nodes;
            Point p(2);
            p << eta * std::cos(phi), eta * std::sin(phi);
            rule.offsets.push_back(p);
            rule.weights.push_back(1.0 / nodes);
        }
    } else if (k == 2) {
        const int nth = std::max(2, nodes / 2);
        const GaussRule& gl = gauss_legendre(nth);
        for (int i = 0; i < nth; ++i) {
            const double u = gl.nodes[i], s = std::sqrt(1.0 - u * u);
            for (int j = 0; j < nodes; ++j) {
                const double phi = kTwoPi * (j + 0.5) / nodes;
                Point p(3);
                p << eta * u, eta * s * std::cos(phi), eta * s * std::sin(phi);
                rule.offsets.push_back(p);
                rule.weights.push_back(0.5 * gl.weights[i] / nodes);
            }
        }
    } else {
        throw UnsupportedDimension("sphere rule implemented for k = 1, 2 only");
    }
    return rule;
}

double eval_g_eta_quadrature(const GreensKernel& kernel, const Point& dz, int nodes) {
    const SphereRule rule = sphere_rule(kernel.k(), kernel.eta(), nodes);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.offsets.size(); ++i) sum += rule.weights[i] * eval_g(kernel, dz - rule.offsets[i]);
    return sum;
}

double eval_g_eta_eta_quadrature(const GreensKernel& kernel, const Point& dz, int nodes) {
    const SphereRule a = sphere_rule(kernel.k(), kernel.eta(), nodes);
    // Second rule rotated so that no node pair coincides at dz = 0.
    SphereRule b = sphere_rule(kernel.k(), kernel.eta(), nodes + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.offsets.size(); ++i)
        for (std::size_t j = 0; j < b.offsets.size(); ++j)
            sum += a.weights[i] * b.weights[j] * eval_g(kernel, dz + a.offsets[i] - b.offsets[j]);
    return sum;
}

}  // namespace jellium
