#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jellium/core_model.hpp"
#include "jellium/greens.hpp"

namespace jellium {

// Uniform MAC grid on [x_lo, x_hi] x [0, 1) (k = 1). Cell (i, j) is
// [x_lo + i h, x_lo + (i+1) h] x [j h, (j+1) h]; x-faces sit at x_lo + i h,
// i = 0..nx, and y-faces at y = j h, j = 0..ny-1 (periodic).
struct Grid {
    double x_lo = 0.0;
    double x_hi = 1.0;
    double h = 1.0 / 64;
    int nx = 64;
    int ny = 64;

    Grid() = default;
    Grid(double lo, double hi, double h);
    Grid(const BoxDomain& dom, double h) : Grid(double(dom.x_lo), double(dom.x_hi), h) {}

    double face_x(int i) const { return x_lo + i * h; }
    double center_x(int i) const { return x_lo + (i + 0.5) * h; }
    double center_y(int j) const { return (j + 0.5) * h; }
    double cell_area() const { return h * h; }
    // Index of the x-face at x; throws OutOfRange unless x is a face of this grid.
    int face_index(double x) const;
    Grid sub(double lo, double hi) const;
    friend bool operator==(const Grid& a, const Grid& b) {
        return a.x_lo == b.x_lo && a.x_hi == b.x_hi && a.h == b.h;
    }
};

// Face-averaged field values: ex is (nx+1) x ny on x-faces, ey is nx x ny on
// y-faces (ey(i, j) on the bottom face of cell (i, j)).
template <typename Scalar>
struct GridFieldT {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Grid grid;
    Array ex;
    Array ey;

    GridFieldT() = default;
    explicit GridFieldT(const Grid& g) : grid(g), ex(Array::Zero(g.nx + 1, g.ny)), ey(Array::Zero(g.nx, g.ny)) {}
};
using GridField = GridFieldT<double>;

template <typename Scalar>
GridFieldT<Scalar> operator+(GridFieldT<Scalar> a, const GridFieldT<Scalar>& b) {
    a.ex += b.ex;
    a.ey += b.ey;
    return a;
}
template <typename Scalar>
GridFieldT<Scalar> operator-(GridFieldT<Scalar> a, const GridFieldT<Scalar>& b) {
    a.ex -= b.ex;
    a.ey -= b.ey;
    return a;
}
template <typename Scalar>
GridFieldT<Scalar> operator*(Scalar s, GridFieldT<Scalar> a) {
    a.ex *= s;
    a.ey *= s;
    return a;
}

// Cell-averaged charge density.
template <typename Scalar>
struct ChargeDensityT {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Grid grid;
    Array rho;

    ChargeDensityT() = default;
    explicit ChargeDensityT(const Grid& g) : grid(g), rho(Array::Zero(g.nx, g.ny)) {}
    Scalar total() const { return rho.sum() * Scalar(grid.cell_area()); }
};
using ChargeDensity = ChargeDensityT<double>;

// Standard staggered divergence, periodic in y.
template <typename Scalar>
typename ChargeDensityT<Scalar>::Array discrete_divergence(const GridFieldT<Scalar>& f) {
    const int nx = f.grid.nx, ny = f.grid.ny;
    typename ChargeDensityT<Scalar>::Array d(nx, ny);
    const Scalar inv_h = Scalar(1.0 / f.grid.h);
    for (int j = 0; j < ny; ++j) {
        const int jp = (j + 1) % ny;
        for (int i = 0; i < nx; ++i)
            d(i, j) = (f.ex(i + 1, j) - f.ex(i, j) + f.ey(i, jp) - f.ey(i, j)) * inv_h;
    }
    return d;
}

// (1/2) sum of |E|^2 h^2 over faces of [lo, hi]; x-faces on the boundary of
// the region carry half weight so the energy is additive over adjacent regions.
template <typename Scalar>
Scalar slice_energy(const GridFieldT<Scalar>& f, double lo, double hi) {
    const Grid& g = f.grid;
    lo = std::max(lo, g.x_lo);
    hi = std::min(hi, g.x_hi);
    if (hi <= lo) return Scalar(0);
    const int i0 = g.face_index(lo), i1 = g.face_index(hi);
    Scalar s = Scalar(0.5) * (f.ex.row(i0).square().sum() + f.ex.row(i1).square().sum());
    for (int i = i0 + 1; i < i1; ++i) s += f.ex.row(i).square().sum();
    for (int i = i0; i < i1; ++i) s += f.ey.row(i).square().sum();
    return Scalar(0.5) * s * Scalar(g.cell_area());
}

// Field at every time node of a path configuration.
struct TimeField {
    double beta = 1.0;
    std::vector<GridField> slices;
};

// (1/2 beta) * trapezoid in time of the slice sums of |E|^2 h^2 over region.
double field_energy(const TimeField& fields, double lo, double hi);
inline double field_energy(const TimeField& fields, const BoxDomain& region) {
    return field_energy(fields, double(region.x_lo), double(region.x_hi));
}

// Adds weight * (uniform measure on the circle of radius eta about center),
// split by exact arc length per cell. Mass leaving the x-range is dropped.
void deposit_ring(ChargeDensity& rho, const Eigen::Vector2d& center, double eta, double weight = -1.0);
// Adds weight * 1_{[a, b] x D}, split by overlap length per cell column.
void deposit_background(ChargeDensity& rho, double a, double b, double weight = 1.0);

// -sum_b delta^eta_{b(t)} + 1_dom on the grid.
ChargeDensity rasterize_charge(const Config& config, const BoxDomain& dom, int t, const Grid& grid,
                               double eta);

// Cells of rho between faces lo and hi.
ChargeDensity restrict_density(const ChargeDensity& rho, double lo, double hi);

struct NeumannSolution {
    GridField field;
    Eigen::ArrayXXd potential;  // mean-zero cell-centred u
};

// E = grad u with div E = rho, E_x = 0 on both x-boundaries, periodic in y.
NeumannSolution solve_neumann_potential(const ChargeDensity& rho);
GridField solve_neumann(const ChargeDensity& rho);
GridField solve_neumann(const ChargeDensity& rho, const BoxDomain& cell);

// E = grad V for V = int g (sum delta^eta_{b(t)} - 1_dom), as exact face
// averages (k = 1).
GridField gradient_field(const Config& config, const BoxDomain& dom, const GreensKernel& kernel, const Grid& grid,
                         int t);
// Same for explicit ring centres and background interval [a, b].
GridField gradient_field(const std::vector<Eigen::Vector2d>& centers, double a, double b, double eta,
                         const Grid& grid);
TimeField gradient_time_field(const Config& config, const BoxDomain& dom, const GreensKernel& kernel,
                              const Grid& grid);

// Field copied into the matching faces of a larger grid (x-faces shared with
// the boundary are overwritten).
void paste(GridField& dst, const GridField& src);

// Flat binary dump: one JSON header line, then ex and ey as little-endian
// doubles in column-major order.
void write_field_dump(const std::string& path, const GridField& field, int time_node);
GridField read_field_dump(const std::string& path);

}  // namespace jellium
