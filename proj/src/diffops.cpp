#include "fraclab/diffops.hpp"

#include <cmath>
#include <stdexcept>

namespace fraclab {

Translation make_translation(const Grid& g, const Point& h) {
    Translation t;
    t.h = h;
    for (int ax = 0; ax < g.dim; ++ax) {
        const double q = h[static_cast<size_t>(ax)] / g.spacing;
        const double r = std::round(q);
        if (std::abs(q - r) > 1e-9 * std::max(1.0, std::abs(q)))
            throw std::invalid_argument(
                "translation not grid-aligned: h must be an integer multiple of the spacing");
        t.steps[static_cast<size_t>(ax)] = static_cast<int>(r);
    }
    return t;
}

GridFunction translate(const GridFunction& u, const Point& h) {
    const Translation t = make_translation(u.grid, h);
    GridFunction out;
    out.grid = u.grid;
    out.values.resize(u.values.size());
    // the translate of u inherits a shifted view of the exterior; stored as a
    // plain copy since downstream users only take differences
    out.exterior = u.exterior;
    const int n = u.grid.n_per_axis;
    if (u.grid.dim == 1) {
        for (int i = 0; i < n; ++i) out.at(i) = u.lattice_value(i + t.steps[0]);
    } else {
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix)
                out.at(u.grid.flat(ix, iy)) =
                    u.lattice_value(ix + t.steps[0], iy + t.steps[1]);
    }
    return out;
}

GridFunction delta_h(const GridFunction& u, const Point& h) {
    GridFunction out = translate(u, h);
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] -= u.values[i];
    out.exterior = ExteriorRule::difference(u.exterior, h);
    return out;
}

GridFunction delta2_h(const GridFunction& u, const Point& h) {
    return delta_h(delta_h(u, h), h);
}

namespace {

// quintic step 1 -> 0 over tau in [0,1], C^2 at both ends
double qstep(double tau) {
    if (tau <= 0.0) return 1.0;
    if (tau >= 1.0) return 0.0;
    return 1.0 - tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}
double qstep_d1(double tau) {
    if (tau <= 0.0 || tau >= 1.0) return 0.0;
    const double o = 1.0 - tau;
    return -30.0 * tau * tau * o * o;
}
double qstep_d2(double tau) {
    if (tau <= 0.0 || tau >= 1.0) return 0.0;
    return -60.0 * tau + 180.0 * tau * tau - 120.0 * tau * tau * tau;
}

} // namespace

double Cutoff::value(const Point& x) const {
    const double rho = norm2(x, dim);
    const double m = support_radius();
    if (rho <= inner_radius) return 1.0;
    if (rho >= m) return 0.0;
    return qstep((rho - inner_radius) / (m - inner_radius));
}

Cutoff make_cutoff(double r, double R, int dim) {
    if (!(r > 0.0) || !(r < R))
        throw std::invalid_argument("make_cutoff: requires 0 < r < R");
    Cutoff eta;
    eta.inner_radius = r;
    eta.outer_radius = R;
    eta.dim = dim;
    const double m = eta.support_radius();
    const double w = m - r;
    const int samples = 4096;
    double gmax = 0.0, hmax = 0.0;
    for (int i = 1; i < samples; ++i) {
        const double tau = static_cast<double>(i) / samples;
        const double rho = r + tau * w;
        const double d1 = qstep_d1(tau) / w;
        const double d2 = qstep_d2(tau) / (w * w);
        gmax = std::max(gmax, std::abs(d1));
        double h = std::abs(d2);
        if (dim == 2) h = std::max(h, std::abs(d1) / rho); // radial Hessian block
        hmax = std::max(hmax, h);
    }
    eta.grad_bound = gmax;
    eta.hess_bound = hmax;
    return eta;
}

GridFunction cutoff_product(const GridFunction& u, const Cutoff& eta) {
    if (eta.support_radius() > u.grid.box_halfwidth + 1e-12)
        throw std::invalid_argument("cutoff_product: cutoff support must lie in the box");
    GridFunction out;
    out.grid = u.grid;
    out.exterior = ExteriorRule::zero(u.exterior.truncation_radius);
    out.values.resize(u.values.size());
    for (int i = 0; i < u.grid.node_count(); ++i)
        out.at(i) = u.at(i) * eta.value(u.grid.node(i));
    return out;
}

std::vector<GridFunction> discrete_gradient(const GridFunction& u) {
    const Grid& g = u.grid;
    const int n = g.n_per_axis;
    const double d = g.spacing;
    std::vector<GridFunction> grad(static_cast<size_t>(g.dim));
    for (auto& c : grad) {
        c.grid = g;
        c.exterior = ExteriorRule::zero(u.exterior.truncation_radius);
        c.values.assign(u.values.size(), 0.0);
    }
    auto axis_diff = [&](int i, int stride, int pos) {
        // pos: index along the axis
        if (pos == 0) return (u.at(i + stride) - u.at(i)) / d;
        if (pos == n - 1) return (u.at(i) - u.at(i - stride)) / d;
        return (u.at(i + stride) - u.at(i - stride)) / (2.0 * d);
    };
    if (g.dim == 1) {
        for (int i = 0; i < n; ++i) grad[0].at(i) = axis_diff(i, 1, i);
    } else {
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) {
                const int i = g.flat(ix, iy);
                grad[0].at(i) = axis_diff(i, 1, ix);
                grad[1].at(i) = axis_diff(i, n, iy);
            }
    }
    return grad;
}

namespace {

// 1D trapezoid convolution with the heat kernel of a function carried only on
// the grid line (zero outside the box)
std::vector<double> convolve_line(const std::vector<double>& v, int n, double spacing,
                                  double time) {
    std::vector<double> out(static_cast<size_t>(n), 0.0);
    const double norm = 1.0 / std::sqrt(4.0 * M_PI * time);
    // kernel values at lattice offsets, cut where negligible
    const double sig = std::sqrt(2.0 * time);
    const int kmax = std::min(n - 1, static_cast<int>(std::ceil(10.0 * sig / spacing)) + 2);
    std::vector<double> ker(static_cast<size_t>(kmax) + 1);
    for (int k = 0; k <= kmax; ++k) {
        const double z = k * spacing;
        ker[static_cast<size_t>(k)] = norm * std::exp(-z * z / (4.0 * time));
    }
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = std::max(0, i - kmax); j <= std::min(n - 1, i + kmax); ++j) {
            double w = (j == 0 || j == n - 1) ? 0.5 : 1.0; // trapezoid ends
            acc += ker[static_cast<size_t>(std::abs(i - j))] * v[static_cast<size_t>(j)] * w;
        }
        out[static_cast<size_t>(i)] = acc * spacing;
    }
    return out;
}

} // namespace

GridFunction heat_smooth(const GridFunction& u, double time) {
    if (!(time > 0.0)) throw std::invalid_argument("heat_smooth: time must be positive");
    const Grid& g = u.grid;

    // split off the exterior datum as a globally defined closed form whose
    // heat convolution is exact; the residual has zero exterior
    TestFunction global;
    bool have_global = false;
    ExteriorRule out_rule = ExteriorRule::zero(u.exterior.truncation_radius);
    switch (u.exterior.kind) {
    case ExteriorKind::Zero:
        break;
    case ExteriorKind::Affine:
        global = TestFunction::affine(u.exterior.a, u.exterior.b);
        have_global = true;
        out_rule = u.exterior;
        break;
    case ExteriorKind::ClosedForm:
        switch (u.exterior.form.tag) {
        case TestFunctionTag::Constant:
        case TestFunctionTag::Affine:
        case TestFunctionTag::Gaussian:
            global = u.exterior.form;
            have_global = true;
            break;
        case TestFunctionTag::Bump:
        case TestFunctionTag::TruncatedParabola:
            // compactly supported: exterior already zero beyond the support
            if (u.exterior.form.radius > g.box_halfwidth)
                throw std::invalid_argument("heat_smooth: support exceeds the box");
            break;
        case TestFunctionTag::PowerKnots:
            if (u.exterior.form.plateau_outer > g.box_halfwidth)
                throw std::invalid_argument("heat_smooth: support exceeds the box");
            break;
        case TestFunctionTag::Lacunary:
            if (g.box_halfwidth < 3.0 * u.exterior.form.sigma)
                throw std::invalid_argument("heat_smooth: envelope exceeds the box");
            break;
        default:
            throw std::invalid_argument("heat_smooth: unsupported exterior rule");
        }
        if (have_global) out_rule = u.exterior;
        break;
    case ExteriorKind::Difference:
        throw std::invalid_argument("heat_smooth: difference exterior not supported");
    }

    // smoothed global part (closed forms: affine invariant, Gaussian widens)
    TestFunction global_t = global;
    if (have_global && global.tag == TestFunctionTag::Gaussian) {
        const double s2 = global.sigma * global.sigma + 2.0 * time;
        global_t.sigma = std::sqrt(s2);
        global_t.c = global.c * std::pow(global.sigma * global.sigma / s2, 0.5 * g.dim);
        out_rule = ExteriorRule::closed_form(global_t, u.exterior.truncation_radius);
    }

    const int n = g.n_per_axis;
    GridFunction out;
    out.grid = g;
    out.exterior = out_rule;
    out.values.assign(u.values.size(), 0.0);

    // residual on the lattice
    std::vector<double> res(u.values.size());
    for (int i = 0; i < g.node_count(); ++i) {
        double base = 0.0;
        if (have_global) base = global.eval(g.node(i), g.dim);
        res[static_cast<size_t>(i)] = u.at(i) - base;
    }

    if (g.dim == 1) {
        auto conv = convolve_line(res, n, g.spacing, time);
        for (int i = 0; i < n; ++i) {
            double base = 0.0;
            if (have_global) base = global_t.eval(g.node(i), 1);
            out.at(i) = base + conv[static_cast<size_t>(i)];
        }
        return out;
    }

    // 2D: separable Gaussian, two 1D passes over the residual
    std::vector<double> tmp(res.size(), 0.0);
    std::vector<double> line(static_cast<size_t>(n));
    for (int iy = 0; iy < n; ++iy) { // smooth along x
        for (int ix = 0; ix < n; ++ix) line[static_cast<size_t>(ix)] = res[static_cast<size_t>(g.flat(ix, iy))];
        auto conv = convolve_line(line, n, g.spacing, time);
        for (int ix = 0; ix < n; ++ix) tmp[static_cast<size_t>(g.flat(ix, iy))] = conv[static_cast<size_t>(ix)];
    }
    for (int ix = 0; ix < n; ++ix) { // smooth along y
        for (int iy = 0; iy < n; ++iy) line[static_cast<size_t>(iy)] = tmp[static_cast<size_t>(g.flat(ix, iy))];
        auto conv = convolve_line(line, n, g.spacing, time);
        for (int iy = 0; iy < n; ++iy) {
            const int i = g.flat(ix, iy);
            double base = 0.0;
            if (have_global) base = global_t.eval(g.node(i), 2);
            out.at(i) = base + conv[static_cast<size_t>(iy)];
        }
    }
    return out;
}

} // namespace fraclab
