#pragma once

#include "fraclab/grid.hpp"

#include <functional>
#include <vector>

namespace fraclab {

/// Gauss-Legendre nodes and weights on [-1,1] (cached per order).
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussRule& gauss_legendre(int order);

/// Integral of F over [r0, inf) for integrands decaying like r^{-1-q},
/// via the substitution v = (r0/r)^q which maps the pure power law to a
/// constant. Exact for F = c r^{-1-q}; 48-point Gauss otherwise.
double power_tail_quad(const std::function<double(double)>& F, double r0, double q,
                       int order = 48);

/// Distance from x inside the box [-L,L]^dim to the box boundary along the
/// unit direction e.
double ray_box_exit(const Point& x, const Point& e, double L, int dim);

/// Product-integration weights for sums of |u(x+z)-u(x)|^p |z|^{-exponent}
/// on the lattice: the nodal difference is modeled as |z/z_k|^p times its
/// value at the offset z_k, and |z|^{p-exponent} is integrated exactly over
/// the Voronoi shell (closed form in 1D, per-cell Gauss in 2D). Exact for
/// affine u; the k = 0 cell is handled separately (self-shell).
double shell_weight_1d(int k, double spacing, double exponent, double p);
double shell_weight_2d(int kx, int ky, double spacing, double exponent, double p);

/// Self-shell constant: integral of |z . e|^p |z|^{-exponent} over
/// |z| < spacing/2, averaged over directions e; multiplies |grad u|^p.
double self_shell_constant(int dim, double p, double exponent, double spacing);

/// Angular mean of |cos theta|^p.
double angular_mean_abs_cos_pow(double p);

} // namespace fraclab
