#include "fraclab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace fraclab {

double norm2(const Point& z, int dim) {
    return dim == 1 ? std::abs(z[0]) : std::hypot(z[0], z[1]);
}

bool Ball::contains(const Point& x, int dim) const {
    const Point d{x[0] - center[0], x[1] - center[1]};
    return norm2(d, dim) < radius;
}

double ball_gap(const Ball& F, const Ball& E, int dim) {
    const Point d{F.center[0] - E.center[0], F.center[1] - E.center[1]};
    return E.radius - norm2(d, dim) - F.radius;
}

namespace {

// quintic step: 1 at tau<=0, 0 at tau>=1, C^2 across both ends
double quintic_step_down(double tau) {
    if (tau <= 0.0) return 1.0;
    if (tau >= 1.0) return 0.0;
    return 1.0 - tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

} // namespace

double TestFunction::eval(const Point& x, int dim) const {
    const double r = norm2(x, dim);
    switch (tag) {
    case TestFunctionTag::Constant:
        return c;
    case TestFunctionTag::Affine:
        return a[0] * x[0] + (dim == 2 ? a[1] * x[1] : 0.0) + b;
    case TestFunctionTag::Power:
        return std::pow(r, beta);
    case TestFunctionTag::Bump: {
        const double q = r / radius;
        if (q >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - q * q));
    }
    case TestFunctionTag::Gaussian:
        return c * std::exp(-r * r / (2.0 * sigma * sigma));
    case TestFunctionTag::TruncatedParabola: {
        const double q = 1.0 - (r / radius) * (r / radius);
        return q > 0.0 ? std::pow(q, s_exp) : 0.0;
    }
    case TestFunctionTag::PowerKnots: {
        double w = 1.0;
        if (r >= plateau_outer) return 0.0;
        if (r > plateau_inner)
            w = quintic_step_down((r - plateau_inner) / (plateau_outer - plateau_inner));
        double sum = 0.0;
        for (size_t j = 0; j < knots.size(); ++j) {
            const double cj = j < knot_weights.size() ? knot_weights[j] : 1.0;
            sum += cj * std::pow(std::abs(x[0] - knots[j]), beta);
        }
        return w * sum;
    }
    case TestFunctionTag::Lacunary: {
        const double env = std::exp(-r * r / (2.0 * sigma * sigma));
        double sum = 0.0;
        double freq = lac_k0;
        for (int j = 0; j < lac_levels; ++j) {
            const double phase = 2.39996322972865332 * j; // decorrelating phases
            sum += std::pow(freq, -lac_alpha) * std::cos(freq * x[0] + phase);
            freq *= lac_lambda;
        }
        return env * sum;
    }
    }
    return 0.0;
}

TestFunction TestFunction::constant(double c) {
    TestFunction f;
    f.tag = TestFunctionTag::Constant;
    f.c = c;
    return f;
}
TestFunction TestFunction::affine(Point a, double b) {
    TestFunction f;
    f.tag = TestFunctionTag::Affine;
    f.a = a;
    f.b = b;
    return f;
}
TestFunction TestFunction::affine1d(double a, double b) { return affine({a, 0.0}, b); }
TestFunction TestFunction::power(double beta) {
    TestFunction f;
    f.tag = TestFunctionTag::Power;
    f.beta = beta;
    return f;
}
TestFunction TestFunction::bump(double radius) {
    TestFunction f;
    f.tag = TestFunctionTag::Bump;
    f.radius = radius;
    return f;
}
TestFunction TestFunction::gaussian(double sigma) {
    TestFunction f;
    f.tag = TestFunctionTag::Gaussian;
    f.sigma = sigma;
    return f;
}
TestFunction TestFunction::truncated_parabola(double s_exp, double radius) {
    TestFunction f;
    f.tag = TestFunctionTag::TruncatedParabola;
    f.s_exp = s_exp;
    f.radius = radius;
    return f;
}
TestFunction TestFunction::lacunary(double alpha, double lam, double k0, int levels,
                                    double sigma) {
    TestFunction f;
    f.tag = TestFunctionTag::Lacunary;
    f.lac_alpha = alpha;
    f.lac_lambda = lam;
    f.lac_k0 = k0;
    f.lac_levels = levels;
    f.sigma = sigma;
    return f;
}

TestFunction TestFunction::power_knots(double beta, std::vector<double> knots,
                                       double inner, double outer) {
    TestFunction f;
    f.tag = TestFunctionTag::PowerKnots;
    f.beta = beta;
    f.knots = std::move(knots);
    f.plateau_inner = inner;
    f.plateau_outer = outer;
    return f;
}

double ExteriorRule::eval(const Point& x, int dim) const {
    switch (kind) {
    case ExteriorKind::Zero:
        return 0.0;
    case ExteriorKind::Affine:
        return a[0] * x[0] + (dim == 2 ? a[1] * x[1] : 0.0) + b;
    case ExteriorKind::ClosedForm:
        return form.eval(x, dim);
    case ExteriorKind::Difference: {
        const Point xs{x[0] + shift[0], x[1] + shift[1]};
        return base->eval(xs, dim) - base->eval(x, dim);
    }
    }
    return 0.0;
}

bool ExteriorRule::is_zero() const {
    if (kind == ExteriorKind::Zero) return true;
    if (kind == ExteriorKind::Difference) return base->is_zero();
    return false;
}

double ExteriorRule::growth_exponent() const {
    switch (kind) {
    case ExteriorKind::Zero:
        return -1e9;
    case ExteriorKind::Affine:
        return (a[0] != 0.0 || a[1] != 0.0) ? 1.0 : 0.0;
    case ExteriorKind::ClosedForm:
        switch (form.tag) {
        case TestFunctionTag::Constant:
            return form.c == 0.0 ? -1e9 : 0.0;
        case TestFunctionTag::Affine:
            return (form.a[0] != 0.0 || form.a[1] != 0.0) ? 1.0 : 0.0;
        case TestFunctionTag::Power:
            return form.beta;
        default:
            return -1e9; // compactly supported or Gaussian-enveloped decay
        }
    case ExteriorKind::Difference: {
        const double g = base->growth_exponent();
        // a first difference lowers polynomial growth by one order
        if (g <= -1e8) return g;
        return g - 1.0;
    }
    }
    return 0.0;
}

ExteriorRule ExteriorRule::zero(double trunc) {
    ExteriorRule r;
    r.kind = ExteriorKind::Zero;
    r.truncation_radius = trunc;
    return r;
}
ExteriorRule ExteriorRule::affine(Point a, double b, double trunc) {
    ExteriorRule r;
    r.kind = ExteriorKind::Affine;
    r.a = a;
    r.b = b;
    r.truncation_radius = trunc;
    return r;
}
ExteriorRule ExteriorRule::affine1d(double a, double b, double trunc) {
    return affine({a, 0.0}, b, trunc);
}
ExteriorRule ExteriorRule::closed_form(TestFunction f, double trunc) {
    ExteriorRule r;
    r.kind = ExteriorKind::ClosedForm;
    r.form = std::move(f);
    r.truncation_radius = trunc;
    return r;
}
ExteriorRule ExteriorRule::constant(double c, double trunc) {
    return closed_form(TestFunction::constant(c), trunc);
}
ExteriorRule ExteriorRule::difference(const ExteriorRule& base, const Point& h) {
    ExteriorRule r;
    r.kind = ExteriorKind::Difference;
    r.base = std::make_shared<ExteriorRule>(base);
    r.shift = h;
    r.truncation_radius = base.truncation_radius;
    return r;
}

int Grid::node_count() const {
    return dim == 1 ? n_per_axis : n_per_axis * n_per_axis;
}

Point Grid::node(int flat) const {
    if (dim == 1) return {coord(flat), 0.0};
    return {coord(flat % n_per_axis), coord(flat / n_per_axis)};
}

Grid make_grid(int dim, double box_halfwidth, int n_per_axis) {
    if (dim != 1 && dim != 2)
        throw std::invalid_argument("make_grid: dim must be 1 or 2");
    if (!(box_halfwidth > 0.0))
        throw std::invalid_argument("make_grid: box_halfwidth must be positive");
    if (n_per_axis < 8)
        throw std::invalid_argument("make_grid: n_per_axis must be >= 8");
    Grid g;
    g.dim = dim;
    g.box_halfwidth = box_halfwidth;
    g.n_per_axis = n_per_axis;
    g.spacing = 2.0 * box_halfwidth / (n_per_axis - 1);
    return g;
}

double GridFunction::lattice_value(int ix, int iy) const {
    const bool inside = grid.index_in_box(ix) && (grid.dim == 1 || grid.index_in_box(iy));
    if (inside) return at(grid.flat(ix, grid.dim == 1 ? 0 : iy));
    const Point x{grid.coord(ix), grid.dim == 2 ? grid.coord(iy) : 0.0};
    return exterior.eval(x, grid.dim);
}

double GridFunction::eval(const Point& x) const {
    const double L = grid.box_halfwidth;
    const bool inside =
        std::abs(x[0]) <= L && (grid.dim == 1 || std::abs(x[1]) <= L);
    if (!inside) return exterior.eval(x, grid.dim);
    const auto nearest = [&](double v) {
        int i = static_cast<int>(std::lround((v + L) / grid.spacing));
        return std::clamp(i, 0, grid.n_per_axis - 1);
    };
    return at(grid.flat(nearest(x[0]), grid.dim == 2 ? nearest(x[1]) : 0));
}

GridFunction sample(const TestFunction& f, const Grid& g, ExteriorRule rule) {
    GridFunction u;
    u.grid = g;
    u.exterior = std::move(rule);
    u.values.resize(static_cast<size_t>(g.node_count()));
    for (int i = 0; i < g.node_count(); ++i) {
        const double v = f.eval(g.node(i), g.dim);
        if (!std::isfinite(v)) {
            const Point x = g.node(i);
            throw std::runtime_error("sample: non-finite value at node (" +
                                     std::to_string(x[0]) + ", " + std::to_string(x[1]) + ")");
        }
        u.at(i) = v;
    }
    return u;
}

std::vector<int> restrict_nodes(const Grid& g, const Ball& ball) {
    std::vector<int> out;
    for (int i = 0; i < g.node_count(); ++i)
        if (ball.contains(g.node(i), g.dim)) out.push_back(i);
    return out;
}

std::vector<int> all_nodes(const Grid& g) {
    std::vector<int> out(static_cast<size_t>(g.node_count()));
    for (int i = 0; i < g.node_count(); ++i) out[static_cast<size_t>(i)] = i;
    return out;
}

void write_csv(std::ostream& os, const GridFunction& u) {
    const char* kind = "zero";
    std::string params;
    switch (u.exterior.kind) {
    case ExteriorKind::Zero:
        break;
    case ExteriorKind::Affine:
        kind = "affine";
        params = std::to_string(u.exterior.a[0]) + ";" + std::to_string(u.exterior.a[1]) +
                 ";" + std::to_string(u.exterior.b);
        break;
    case ExteriorKind::ClosedForm:
        kind = "closed_form";
        params = std::to_string(static_cast<int>(u.exterior.form.tag));
        break;
    case ExteriorKind::Difference:
        kind = "difference";
        break;
    }
    os << "# dim,L,n,exterior_kind,params\n";
    os << "# " << u.grid.dim << "," << u.grid.box_halfwidth << "," << u.grid.n_per_axis
       << "," << kind << "," << params << "\n";
    os.precision(17);
    for (int i = 0; i < u.grid.node_count(); ++i) {
        const Point x = u.grid.node(i);
        os << x[0];
        if (u.grid.dim == 2) os << "," << x[1];
        os << "," << u.at(i) << "\n";
    }
}

} // namespace fraclab
