#include "jellium/fields.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>

#include "jellium/errors.hpp"
#include "jellium/parallel.hpp"

namespace jellium {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
// Beyond this x-distance a ring's field is -sgn(dx)/2 e_x to round-off.
constexpr double kFarField = 6.0;

bool near_integer(double v) { return std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, std::abs(v)); }

using CArray = Eigen::ArrayXXcd;

// F(j, m) = exp(-2 pi i j m / n); symmetric.
const Eigen::MatrixXcd& dft_matrix(int n) {
    thread_local std::vector<Eigen::MatrixXcd> cache;
    if (static_cast<int>(cache.size()) <= n) cache.resize(n + 1);
    Eigen::MatrixXcd& F = cache[n];
    if (F.rows() != n) {
        F.resize(n, n);
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m) F(j, m) = std::polar(1.0, -kTwoPi * double((long(j) * m) % n) / n);
    }
    return F;
}

Eigen::ArrayXXd inverse_dft(const CArray& X) {
    const int n = static_cast<int>(X.cols());
    return (X.matrix() * dft_matrix(n).conjugate()).real().array() / double(n);
}

}  // namespace

Grid::Grid(double lo, double hi, double h_) : x_lo(lo), x_hi(hi), h(h_) {
    if (!(h > 0.0) || !near_integer(1.0 / h)) throw InvalidParams("grid spacing must satisfy 1/h integer");
    if (!(hi > lo) || !near_integer((hi - lo) / h)) throw InvalidParams("grid length must be a multiple of h");
    nx = static_cast<int>(std::lround((hi - lo) / h));
    ny = static_cast<int>(std::lround(1.0 / h));
}

int Grid::face_index(double x) const {
    const double s = (x - x_lo) / h;
    const long i = std::lround(s);
    if (std::abs(s - i) > 1e-7 || i < 0 || i > nx)
        throw OutOfRange("x = " + std::to_string(x) + " is not a face of the grid");
    return static_cast<int>(i);
}

Grid Grid::sub(double lo, double hi) const {
    const int i0 = face_index(lo), i1 = face_index(hi);
    Grid g = *this;
    g.x_lo = face_x(i0);
    g.x_hi = face_x(i1);
    g.nx = i1 - i0;
    if (g.nx <= 0) throw OutOfRange("empty sub-grid");
    return g;
}

double field_energy(const TimeField& fields, double lo, double hi) {
    const std::size_t n = fields.slices.size();
    if (n == 0) return 0.0;
    if (n == 1) return slice_energy(fields.slices[0], lo, hi);
    const double dt = fields.beta / double(n - 1);
    double s = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double w = (t == 0 || t + 1 == n) ? 0.5 * dt : dt;
        s += w * slice_energy(fields.slices[t], lo, hi);
    }
    return s / fields.beta;
}

void deposit_ring(ChargeDensity& rho, const Eigen::Vector2d& center, double eta, double weight) {
    const Grid& g = rho.grid;
    const double cx = center(0), cy = center(1);
    std::vector<double> phis{0.0, kTwoPi};
    auto add = [&](double phi) {
        phi = std::fmod(phi, kTwoPi);
        if (phi < 0.0) phi += kTwoPi;
        phis.push_back(phi);
    };
    const int i0 = std::max(0, static_cast<int>(std::ceil((cx - eta - g.x_lo) / g.h)));
    const int i1 = std::min(g.nx, static_cast<int>(std::floor((cx + eta - g.x_lo) / g.h)));
    for (int i = i0; i <= i1; ++i) {
        const double c = (g.face_x(i) - cx) / eta;
        if (std::abs(c) >= 1.0) continue;
        add(std::acos(c));
        add(-std::acos(c));
    }
    const long j0 = static_cast<long>(std::ceil((cy - eta) / g.h));
    const long j1 = static_cast<long>(std::floor((cy + eta) / g.h));
    for (long j = j0; j <= j1; ++j) {
        const double s = (j * g.h - cy) / eta;
        if (std::abs(s) >= 1.0) continue;
        add(std::asin(s));
        add(M_PI - std::asin(s));
    }
    std::sort(phis.begin(), phis.end());
    const double scale = weight / (kTwoPi * g.cell_area());
    for (std::size_t k = 0; k + 1 < phis.size(); ++k) {
        const double dphi = phis[k + 1] - phis[k];
        if (dphi <= 0.0) continue;
        const double pm = 0.5 * (phis[k] + phis[k + 1]);
        const double x = cx + eta * std::cos(pm), y = cy + eta * std::sin(pm);
        const long ix = static_cast<long>(std::floor((x - g.x_lo) / g.h));
        if (ix < 0 || ix >= g.nx) continue;
        long iy = static_cast<long>(std::floor(y / g.h)) % g.ny;
        if (iy < 0) iy += g.ny;
        rho.rho(ix, iy) += scale * dphi;
    }
}

void deposit_background(ChargeDensity& rho, double a, double b, double weight) {
    const Grid& g = rho.grid;
    for (int i = 0; i < g.nx; ++i) {
        const double ov = std::min(b, g.face_x(i + 1)) - std::max(a, g.face_x(i));
        if (ov > 0.0) rho.rho.row(i) += weight * ov / g.h;
    }
}

ChargeDensity rasterize_charge(const Config& config, const BoxDomain& dom, int t, const Grid& grid,
                               double eta) {
    if (config.k() != 1) throw UnsupportedDimension("grid fields implemented for k = 1 only");
    if (grid.h > eta / 4.0 * (1.0 + 1e-12)) throw GridTooCoarse("grid spacing must be at most eta/4");
    ChargeDensity rho(grid);
    for (const Bridge& b : config) {
        const Point p = b.node(t);
        deposit_ring(rho, Eigen::Vector2d(p(0), p(1)), eta, -1.0);
    }
    deposit_background(rho, double(dom.x_lo), double(dom.x_hi), 1.0);
    return rho;
}

ChargeDensity restrict_density(const ChargeDensity& rho, double lo, double hi) {
    ChargeDensity out(rho.grid.sub(lo, hi));
    const int i0 = rho.grid.face_index(lo);
    out.rho = rho.rho.middleRows(i0, out.grid.nx);
    return out;
}

NeumannSolution solve_neumann_potential(const ChargeDensity& density) {
    const Grid& g = density.grid;
    const int nx = g.nx, ny = g.ny;
    const double h = g.h, length = nx * h;
    const double total = density.total();
    if (std::abs(total) > 1e-8 * length)
        throw NotNeutral("Neumann problem needs a neutral density (total " + std::to_string(total) + ")");
    const Eigen::ArrayXXd r = density.rho - density.rho.mean();

    const Eigen::MatrixXcd& F = dft_matrix(ny);
    const CArray R = (r.matrix().cast<std::complex<double>>() * F).array();
    CArray U(nx, ny), Ex(nx + 1, ny), Ey(nx, ny);
    Ex.setZero();

    // Mode 0: cumulative flux, then a mean-zero potential.
    {
        Eigen::ArrayXd u0(nx);
        double e = 0.0, u = 0.0;
        for (int i = 0; i < nx; ++i) {
            if (i > 0) u += h * e;
            u0(i) = u;
            e += h * R(i, 0).real() / ny;
            if (i + 1 < nx) Ex(i + 1, 0) = ny * e;
        }
        u0 -= u0.mean();
        U.col(0) = (ny * u0).cast<std::complex<double>>();
    }
    // Modes m != 0: Neumann tridiagonal system in x, solved by the Thomas algorithm.
    std::vector<double> cp(nx);
    std::vector<std::complex<double>> dp(nx);
    for (int m = 1; m < ny; ++m) {
        const double s = std::sin(M_PI * m / ny);
        const double c = -4.0 * s * s;
        auto diag = [&](int i) {
            if (nx == 1) return c;
            return (i == 0 || i == nx - 1 ? -1.0 : -2.0) + c;
        };
        cp[0] = (nx > 1 ? 1.0 : 0.0) / diag(0);
        dp[0] = h * h * R(0, m) / diag(0);
        for (int i = 1; i < nx; ++i) {
            const double den = diag(i) - cp[i - 1];
            cp[i] = (i + 1 < nx ? 1.0 : 0.0) / den;
            dp[i] = (h * h * R(i, m) - dp[i - 1]) / den;
        }
        U(nx - 1, m) = dp[nx - 1];
        for (int i = nx - 2; i >= 0; --i) U(i, m) = dp[i] - cp[i] * U(i + 1, m);
        for (int i = 1; i < nx; ++i) Ex(i, m) = (U(i, m) - U(i - 1, m)) / h;
    }
    for (int m = 0; m < ny; ++m) {
        const std::complex<double> shift = 1.0 - std::polar(1.0, -kTwoPi * m / ny);
        Ey.col(m) = U.col(m) * shift / h;
    }

    NeumannSolution sol{GridField(g), inverse_dft(U)};
    sol.field.ex = inverse_dft(Ex);
    sol.field.ex.row(0).setZero();
    sol.field.ex.row(nx).setZero();
    sol.field.ey = inverse_dft(Ey);

    const double scale = std::max(r.abs().maxCoeff(), 1e-300);
    const double res = (discrete_divergence(sol.field) - r).abs().maxCoeff();
    if (r.abs().maxCoeff() > 0.0 && res > 1e-10 * scale)
        throw SolverDiverged("Neumann residual " + std::to_string(res / scale) + " above tolerance");
    return sol;
}

GridField solve_neumann(const ChargeDensity& rho) { return solve_neumann_potential(rho).field; }

GridField solve_neumann(const ChargeDensity& rho, const BoxDomain& cell) {
    return solve_neumann(restrict_density(rho, double(cell.x_lo), double(cell.x_hi)));
}

GridField gradient_field(const std::vector<Eigen::Vector2d>& centers, double a, double b, double eta,
                         const Grid& grid) {
    std::vector<Eigen::Vector2d> c = centers;
    std::sort(c.begin(), c.end(), [](const auto& p, const auto& q) { return p(0) < q(0); });
    std::vector<double> xs(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) xs[i] = c[i](0);
    const long n = static_cast<long>(c.size());
    const double h = grid.h;
    const int nx = grid.nx, ny = grid.ny;
    GridField f(grid);

    auto range = [&](double lo, double hi) {
        const long i0 = std::lower_bound(xs.begin(), xs.end(), lo) - xs.begin();
        const long i1 = std::upper_bound(xs.begin(), xs.end(), hi) - xs.begin();
        return std::pair{i0, i1};
    };
    parallel_for(static_cast<std::size_t>(2 * nx + 1), [&](std::size_t task) {
        if (task <= static_cast<std::size_t>(nx)) {
            const int i = static_cast<int>(task);
            const double X = grid.face_x(i);
            const auto [k0, k1] = range(X - kFarField, X + kFarField);
            // Rings left of the face push +x-field -1/2 each, rings right of it +1/2.
            const double far = -0.5 * double(k0) + 0.5 * double(n - k1);
            const double bg = std::clamp(X, a, b) - 0.5 * (a + b);
            for (int j = 0; j < ny; ++j) {
                double s = 0.0;
                for (long k = k0; k < k1; ++k)
                    s += strip1::flux_x_eta(X - c[k](0), j * h - c[k](1), (j + 1) * h - c[k](1), eta);
                f.ex(i, j) = s / h + far + bg;
            }
        } else {
            const int i = static_cast<int>(task) - nx - 1;
            const double X0 = grid.face_x(i), X1 = grid.face_x(i + 1);
            const auto [k0, k1] = range(X0 - kFarField, X1 + kFarField);
            for (int j = 0; j < ny; ++j) {
                double s = 0.0;
                for (long k = k0; k < k1; ++k)
                    s += strip1::flux_y_eta(j * h - c[k](1), X0 - c[k](0), X1 - c[k](0), eta);
                f.ey(i, j) = s / h;
            }
        }
    });
    return f;
}

GridField gradient_field(const Config& config, const BoxDomain& dom, const GreensKernel& kernel, const Grid& grid,
                         int t) {
    if (config.k() != 1 || kernel.k() != 1) throw UnsupportedDimension("grid fields implemented for k = 1 only");
    std::vector<Eigen::Vector2d> centers;
    centers.reserve(config.size());
    for (const Bridge& b : config) {
        const Point p = b.node(t);
        centers.emplace_back(p(0), p(1));
    }
    return gradient_field(centers, double(dom.x_lo), double(dom.x_hi), kernel.eta(), grid);
}

TimeField gradient_time_field(const Config& config, const BoxDomain& dom, const GreensKernel& kernel,
                              const Grid& grid) {
    TimeField tf;
    tf.beta = config.beta();
    for (int t = 0; t < config.n_time(); ++t) tf.slices.push_back(gradient_field(config, dom, kernel, grid, t));
    return tf;
}

void paste(GridField& dst, const GridField& src) {
    if (dst.grid.h != src.grid.h) throw InvalidParams("paste needs equal grid spacing");
    const int i0 = dst.grid.face_index(src.grid.x_lo);
    if (i0 + src.grid.nx > dst.grid.nx) throw OutOfRange("pasted field exceeds destination grid");
    dst.ex.middleRows(i0, src.grid.nx + 1) = src.ex;
    dst.ey.middleRows(i0, src.grid.nx) = src.ey;
}

void write_field_dump(const std::string& path, const GridField& field, int time_node) {
    const Grid& g = field.grid;
    nlohmann::json header = {{"dom", {g.x_lo, g.x_hi}}, {"h", g.h},         {"layout", "mac"},
                             {"time_node", time_node}, {"nx", g.nx},        {"ny", g.ny},
                             {"order", "ex then ey, column-major, float64"}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidParams("cannot open " + path);
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(field.ex.data()), sizeof(double) * field.ex.size());
    out.write(reinterpret_cast<const char*>(field.ey.data()), sizeof(double) * field.ey.size());
}

GridField read_field_dump(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidParams("cannot open " + path);
    std::string line;
    std::getline(in, line);
    const auto header = nlohmann::json::parse(line);
    GridField f(Grid(header["dom"][0].get<double>(), header["dom"][1].get<double>(), header["h"].get<double>()));
    in.read(reinterpret_cast<char*>(f.ex.data()), sizeof(double) * f.ex.size());
    in.read(reinterpret_cast<char*>(f.ey.data()), sizeof(double) * f.ey.size());
    if (!in) throw InvalidParams("truncated field dump " + path);
    return f;
}

}  // namespace jellium
