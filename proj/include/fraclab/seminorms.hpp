#pragma once

#include "fraclab/grid.hpp"
#include "fraclab/kernels.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace fraclab {

struct SeminormResult {
    double value = 0.0;
    std::string kind;
    double alpha = 0.0;
    double p = 2.0;
    int node_count = 0;
    int h_count = 0;
    Point argmax_h{0.0, 0.0};
    double tail_radius = 0.0; // where quadrature handed over to the analytic tail
};

/// Dyadic grid-aligned translation set: +-k*spacing*e_axis for
/// k in {1..8, 16, 32, ...}, |h| strictly below cap, every axis.
std::vector<Point> dyadic_h_grid(const Grid& g, double cap);

/// Discrete L^p norm over a node set with cell weights spacing^N.
double lp_norm(const GridFunction& u, const std::vector<int>& nodes, double p);

/// Gagliardo seminorm [u]_{W^{alpha,p}(E)} over the ball E. The singular
/// double integral is computed with product-integration shell weights (the
/// kernel is integrated exactly over the Voronoi shell of each lattice
/// offset) plus a self-shell term fed by the discrete gradient; the exact
/// diagonal pair x = y never enters.
SeminormResult gagliardo(const GridFunction& u, const Ball& E, double alpha, double p);

/// sup_{h in h_grid} || delta_h u / |h|^alpha ||_{L^p(E)}.
SeminormResult nikolskii_sup(const GridFunction& u, const Ball& E, double alpha,
                             double p, const std::vector<Point>& h_grid);

/// sup_{h in h_grid} || delta2_h u / |h|^alpha ||_{L^p(box)}, exterior rule
/// honored at the rim. Requires alpha in (0,2).
SeminormResult besov2_sup(const GridFunction& u, double alpha, double p,
                          const std::vector<Point>& h_grid);

/// Weighted norm of X^p_s: (integral of |u|^p (1+|x|)^{-N-sp})^{1/p}, box
/// quadrature plus analytic/radial-quadrature tail. Throws a divergence
/// error when the exterior rule grows too fast against the weight.
SeminormResult xps_norm(const GridFunction& u, const FractionalParams& par);

/// Snail(u; x, E) = [ |E|^{sp/N} int_{R^N \ E} |u(y)|^p |x-y|^{-N-sp} dy ]^{1/p}.
double snail(const GridFunction& u, const Point& x, const Ball& E,
             const FractionalParams& par);

/// <u>_{X^p_s(F;E)} = ( int_E |u|^p + int_F Snail(u;x,E)^p dx )^{1/p}.
SeminormResult x_bracket(const GridFunction& u, const Ball& F, const Ball& E,
                         const FractionalParams& par);

/// <u>_{Y^{t,p}_s(F;E)}: sup over h of ( int_F Snail(delta_h u/|h|^t; x,E)^p )^{1/p},
/// every |h| < d(F,E)/2 enforced.
SeminormResult y_bracket(const GridFunction& u, const Ball& F, const Ball& E,
                         const FractionalParams& par, const std::vector<Point>& h_grid);

struct ARBreakdown {
    double total = 0.0;
    // R^{sp}[u]^p, ||u||^p/(s(1-s)), <u>_X^p/s, R^{tp}<u>_Y^p,
    // R^{spp'} R^{sp'}[(1-s)f]^{p'}, R^{spp'} ||(1-s)f||^{p'}/(s(1-s))
    std::array<double, 6> summands{};
};

/// The composite quantity A_R(u, f) on balls centered at the origin.
ARBreakdown composite_AR(const GridFunction& u, const GridFunction& f, double R,
                         const FractionalParams& par);

} // namespace fraclab
