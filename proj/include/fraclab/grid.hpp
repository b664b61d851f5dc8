#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace fraclab {

/// A point of R^N with N <= 2; the second component is 0 and ignored in 1D.
using Point = std::array<double, 2>;

double norm2(const Point& z, int dim);

struct Ball {
    Point center{0.0, 0.0};
    double radius = 1.0;

    bool contains(const Point& x, int dim) const;
};

/// Distance from a ball F to the complement of a larger ball E,
/// d(F,E) = dist(F, R^N \ E). Negative if F is not contained in E.
double ball_gap(const Ball& F, const Ball& E, int dim);

enum class TestFunctionTag {
    Constant,
    Affine,
    Power,             // x -> |x|^beta
    Bump,              // smooth, supported on |x| < radius, value 1 at 0
    Gaussian,          // exp(-|x|^2 / (2 sigma^2))
    TruncatedParabola, // (1 - (|x|/radius)^2)_+^s_exp
    PowerKnots,        // sum_k c_k |x - x_k|^beta under a C^2 plateau window
    Lacunary,          // gaussian envelope times sum_j lam^{-alpha j} cos(k0 lam^j x + phi_j)
};

/// Closed-form functions on all of R^N used as oracle inputs.
struct TestFunction {
    TestFunctionTag tag = TestFunctionTag::Constant;
    double c = 1.0;          // Constant
    Point a{0.0, 0.0};       // Affine slope
    double b = 0.0;          // Affine offset
    double beta = 0.5;       // Power / PowerKnots exponent
    double sigma = 1.0;      // Gaussian
    double radius = 1.0;     // Bump / TruncatedParabola support
    double s_exp = 0.5;      // TruncatedParabola exponent
    std::vector<double> knots;          // PowerKnots 1D knot positions
    std::vector<double> knot_weights;   // optional signed weights (default 1)
    double lac_alpha = 1.5;             // Lacunary smoothness order
    double lac_lambda = 1.26;           // Lacunary frequency ratio
    double lac_k0 = 1.0;                // Lacunary base frequency
    int lac_levels = 12;                // Lacunary mode count
    double plateau_inner = 1.0;         // PowerKnots window: 1 on |x| < inner
    double plateau_outer = 2.0;         //   0 on |x| > outer, quintic in between

    double eval(const Point& x, int dim) const;

    static TestFunction constant(double c);
    static TestFunction affine(Point a, double b);
    static TestFunction affine1d(double a, double b);
    static TestFunction power(double beta);
    static TestFunction bump(double radius);
    static TestFunction gaussian(double sigma);
    static TestFunction truncated_parabola(double s_exp, double radius = 1.0);
    static TestFunction power_knots(double beta, std::vector<double> knots,
                                    double inner, double outer);
    /// scale-free oscillatory profile of smoothness order alpha: modes k0 lam^j,
    /// amplitudes (k0 lam^j)^{-alpha}, j < levels, under exp(-x^2/(2 sigma^2))
    static TestFunction lacunary(double alpha, double lam, double k0, int levels,
                                 double sigma);
};

enum class ExteriorKind { Zero, Affine, ClosedForm, Difference };

/// Symbolic datum on R^N \ box. Exact everywhere; truncation_radius marks
/// where quadrature hands over to analytic radial tails. The Difference kind
/// is base(. + h) - base(.), produced by the difference operators so that
/// tail integrals of delta_h u stay exact.
struct ExteriorRule {
    ExteriorKind kind = ExteriorKind::Zero;
    Point a{0.0, 0.0};
    double b = 0.0;
    TestFunction form;
    double truncation_radius = 8.0;
    std::shared_ptr<const ExteriorRule> base; // Difference
    Point shift{0.0, 0.0};                    // Difference

    double eval(const Point& x, int dim) const;
    bool is_zero() const;

    /// Growth order g with |rule(x)| <= C (1+|x|)^g as |x| -> inf;
    /// decaying/compact rules report a negative order.
    double growth_exponent() const;

    static ExteriorRule zero(double truncation_radius = 8.0);
    static ExteriorRule affine(Point a, double b, double truncation_radius = 8.0);
    static ExteriorRule affine1d(double a, double b, double truncation_radius = 8.0);
    static ExteriorRule closed_form(TestFunction f, double truncation_radius = 8.0);
    static ExteriorRule constant(double c, double truncation_radius = 8.0);
    static ExteriorRule difference(const ExteriorRule& base, const Point& h);
};

/// Uniform Cartesian grid over [-L, L]^N, N in {1,2}.
struct Grid {
    int dim = 1;
    double box_halfwidth = 1.0; // L
    int n_per_axis = 9;         // nodes per axis
    double spacing = 0.25;      // 2L/(n-1)

    int node_count() const;
    double coord(int i) const { return -box_halfwidth + i * spacing; }
    Point node(int flat) const;
    int flat(int ix, int iy = 0) const { return ix + n_per_axis * iy; }
    bool index_in_box(int i) const { return i >= 0 && i < n_per_axis; }
    bool operator==(const Grid&) const = default;
};

Grid make_grid(int dim, double box_halfwidth, int n_per_axis);

/// Real values on the grid nodes plus an exterior extension rule.
struct GridFunction {
    Grid grid;
    std::vector<double> values;
    ExteriorRule exterior;

    double at(int flat) const { return values[static_cast<size_t>(flat)]; }
    double& at(int flat) { return values[static_cast<size_t>(flat)]; }

    /// Value of the extended function at lattice coordinates (ix, iy), which
    /// may lie outside the box; exterior indices evaluate the rule at the
    /// exact lattice point.
    double lattice_value(int ix, int iy = 0) const;

    /// Evaluation anywhere: nearest-node lookup inside the box, rule outside.
    double eval(const Point& x) const;
};

GridFunction sample(const TestFunction& f, const Grid& g, ExteriorRule rule);

/// Nodes x with |x - center| < radius, in flat-index order.
std::vector<int> restrict_nodes(const Grid& g, const Ball& ball);

/// All node indices of the grid.
std::vector<int> all_nodes(const Grid& g);

void write_csv(std::ostream& os, const GridFunction& u);

} // namespace fraclab
