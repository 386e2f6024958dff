#pragma once

#include <vector>

#include <Eigen/Dense>

#include "jellium/core_model.hpp"

namespace jellium {

struct GreensKernel {
    StripParams params;
    int n_max = 32;        // Fourier cutoff of the truncated series
    int smear_nodes = 64;  // nodes of the sphere quadrature rule

    GreensKernel() = default;
    explicit GreensKernel(const StripParams& p, int n_max_ = 32, int smear_nodes_ = 64)
        : params(p), n_max(n_max_), smear_nodes(smear_nodes_) {}
    double eta() const { return params.eta; }
    int k() const { return params.k; }
};

struct SmearedCharge {
    Point center;
    double radius;
};

// Strip Green's function, n_max -> infinity limit of the eigenfunction series.
double eval_g(const GreensKernel& kernel, const Point& dz);
// Series truncated at |n|_inf <= n_max.
double eval_g_series(const GreensKernel& kernel, const Point& dz);
// Bound on the omitted terms of eval_g_series at x-distance |dx| > 0.
double series_tail_bound(const GreensKernel& kernel, double dx);

double eval_g_eta(const GreensKernel& kernel, const Point& dz);
double eval_g_eta_eta(const GreensKernel& kernel, const Point& dz);
Point grad_g(const GreensKernel& kernel, const Point& dz);
Point grad_g_eta(const GreensKernel& kernel, const Point& dz);

// Regular part h = g - (local Coulomb singularity); harmonic for |z| < 1.
double eval_h(const GreensKernel& kernel, const Point& dz);

// Quadrature rule on the sphere of radius eta: offsets and weights summing to 1.
struct SphereRule {
    std::vector<Point> offsets;
    std::vector<double> weights;
};
SphereRule sphere_rule(int k, double eta, int nodes);

// Smeared kernels by brute-force sphere quadrature of eval_g (test oracle).
double eval_g_eta_quadrature(const GreensKernel& kernel, const Point& dz, int nodes);
double eval_g_eta_eta_quadrature(const GreensKernel& kernel, const Point& dz, int nodes);

// Reduces transverse coordinates of a displacement to [-1/2, 1/2).
Point reduce_displacement(const Point& dz);

// Fast k=1 routines on (x, y) displacements; y need not be reduced.
namespace strip1 {

double g(double x, double y);
Eigen::Vector2d grad_g(double x, double y);
double h(double x, double y);
Eigen::Vector2d grad_h(double x, double y);
double g_eta(double x, double y, double eta);
double g_eta_eta(double x, double y, double eta);
Eigen::Vector2d grad_g_eta(double x, double y, double eta);

// Flux of grad g (point source at the origin) through the vertical segment
// {X} x [Y0, Y1] and the horizontal segment [X0, X1] x {Y}.
double flux_x(double X, double Y0, double Y1);
double flux_y(double Y, double X0, double X1);
// Same, for the smeared source delta^eta centred at the origin.
double flux_x_eta(double X, double Y0, double Y1, double eta);
double flux_y_eta(double Y, double X0, double X1, double eta);

}  // namespace strip1

}  // namespace jellium
