#pragma once

#include "fraclab/grid.hpp"

#include <vector>

namespace fraclab {

/// Exact lattice shift; h must be an integer multiple of the spacing per axis.
struct Translation {
    Point h{0.0, 0.0};
    std::array<int, 2> steps{0, 0};
};

Translation make_translation(const Grid& g, const Point& h); // throws on misalignment

GridFunction translate(const GridFunction& u, const Point& h);
GridFunction delta_h(const GridFunction& u, const Point& h);  // u(.+h) - u
GridFunction delta2_h(const GridFunction& u, const Point& h); // u(.+2h) - 2u(.+h) + u

/// C^2 radial cut-off: 1 on B_r, 0 outside B_{(R+r)/2}, quintic in between.
/// Bounds are measured on a dense radial sample; c_grad/c_hess are the
/// dimensionless constants with the (R-r) powers factored out.
struct Cutoff {
    double inner_radius = 0.5;  // r
    double outer_radius = 1.0;  // R
    int dim = 1;
    double grad_bound = 0.0;    // sup |grad eta|
    double hess_bound = 0.0;    // sup |D^2 eta|

    double support_radius() const { return 0.5 * (inner_radius + outer_radius); }
    double value(const Point& x) const;
    double c_grad() const { return grad_bound * (outer_radius - inner_radius); }
    double c_hess() const {
        return hess_bound * (outer_radius - inner_radius) * (outer_radius - inner_radius);
    }
};

Cutoff make_cutoff(double r, double R, int dim = 1);

/// Nodewise product u * eta with zero exterior (eta is supported in the box).
GridFunction cutoff_product(const GridFunction& u, const Cutoff& eta);

/// Central differences in the interior, one-sided at the box faces.
std::vector<GridFunction> discrete_gradient(const GridFunction& u);

/// Heat smoothing psi_t = K_t * psi. Exterior data are split off exactly
/// (affine and Gaussian rules convolve in closed form; the in-box residual is
/// integrated by trapezoid). Needs time >~ spacing^2 to be meaningful.
GridFunction heat_smooth(const GridFunction& u, double time);

} // namespace fraclab
