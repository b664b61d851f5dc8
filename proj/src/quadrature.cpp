#include "fraclab/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace fraclab {

const GaussRule& gauss_legendre(int order) {
    static std::map<int, GaussRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;
    GaussRule rule;
    rule.nodes.resize(static_cast<size_t>(order));
    rule.weights.resize(static_cast<size_t>(order));
    for (int i = 0; i < order; ++i) {
        // Newton iteration from the Chebyshev initial guess
        double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = order * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[static_cast<size_t>(order - 1 - i)] = x;
        rule.weights[static_cast<size_t>(order - 1 - i)] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    return cache.emplace(order, std::move(rule)).first->second;
}

double power_tail_quad(const std::function<double(double)>& F, double r0, double q,
                       int order) {
    if (!(q > 0.0))
        throw std::invalid_argument("power_tail_quad: decay exponent must be positive");
    const GaussRule& gl = gauss_legendre(order);
    double acc = 0.0;
    for (int i = 0; i < order; ++i) {
        const double v = 0.5 * (gl.nodes[static_cast<size_t>(i)] + 1.0); // (0,1)
        const double w = 0.5 * gl.weights[static_cast<size_t>(i)];
        const double r = r0 * std::pow(v, -1.0 / q);
        acc += w * F(r) * (r0 / q) * std::pow(v, -1.0 - 1.0 / q);
    }
    return acc;
}

double ray_box_exit(const Point& x, const Point& e, double L, int dim) {
    double t = 1e300;
    for (int ax = 0; ax < dim; ++ax) {
        const double ei = e[static_cast<size_t>(ax)];
        if (ei == 0.0) continue;
        const double bound = ei > 0.0 ? L : -L;
        t = std::min(t, (bound - x[static_cast<size_t>(ax)]) / ei);
    }
    return t;
}

double shell_weight_1d(int k, double spacing, double exponent, double p) {
    const double zk = std::abs(k) * spacing;
    const double lo = (std::abs(k) - 0.5) * spacing;
    const double hi = (std::abs(k) + 0.5) * spacing;
    const double e1 = p - exponent + 1.0; // > 0 whenever alpha < 1 resp. s < 1
    return std::pow(zk, -p) * (std::pow(hi, e1) - std::pow(lo, e1)) / e1;
}

double shell_weight_2d(int kx, int ky, double spacing, double exponent, double p) {
    const bool near = std::max(std::abs(kx), std::abs(ky)) <= 3;
    const int sub = near ? 8 : 1;
    const GaussRule& gl = gauss_legendre(4);
    const double zk = std::hypot(kx * spacing, ky * spacing);
    const double x0 = (kx - 0.5) * spacing, y0 = (ky - 0.5) * spacing;
    const double h = spacing / sub;
    double acc = 0.0;
    for (int sx = 0; sx < sub; ++sx)
        for (int sy = 0; sy < sub; ++sy) {
            const double cx = x0 + sx * h, cy = y0 + sy * h;
            for (size_t i = 0; i < gl.nodes.size(); ++i)
                for (size_t j = 0; j < gl.nodes.size(); ++j) {
                    const double zx = cx + 0.5 * h * (gl.nodes[i] + 1.0);
                    const double zy = cy + 0.5 * h * (gl.nodes[j] + 1.0);
                    const double r = std::hypot(zx, zy);
                    acc += 0.25 * h * h * gl.weights[i] * gl.weights[j] *
                           std::pow(r, p - exponent);
                }
        }
    return std::pow(zk, -p) * acc;
}

double angular_mean_abs_cos_pow(double p) {
    return std::tgamma(0.5 * (p + 1.0)) / (std::sqrt(M_PI) * std::tgamma(0.5 * p + 1.0));
}

double self_shell_constant(int dim, double p, double exponent, double spacing) {
    const double rad = 0.5 * spacing;
    const double q = p - exponent + dim; // radial exponent + dim - 1 integrates to this power
    if (!(q > 0.0))
        throw std::invalid_argument("self_shell_constant: non-integrable self shell");
    if (dim == 1) return 2.0 * std::pow(rad, q) / q;
    return angular_mean_abs_cos_pow(p) * 2.0 * M_PI * std::pow(rad, q) / q;
}

} // namespace fraclab
