#include "fraclab/seminorms.hpp"

#include "fraclab/diffops.hpp"
#include "fraclab/parallel.hpp"
#include "fraclab/quadrature.hpp"

#include <cmath>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace fraclab {

std::vector<Point> dyadic_h_grid(const Grid& g, double cap) {
    std::vector<Point> out;
    std::vector<int> ks;
    for (int k = 1; k <= 8; ++k) ks.push_back(k);
    for (int k = 16; k < g.n_per_axis; k *= 2) ks.push_back(k);
    for (int ax = 0; ax < g.dim; ++ax)
        for (int k : ks) {
            const double h = k * g.spacing;
            if (!(h < cap)) break;
            for (double sgn : {1.0, -1.0}) {
                Point hp{0.0, 0.0};
                hp[static_cast<size_t>(ax)] = sgn * h;
                out.push_back(hp);
            }
        }
    return out;
}

double lp_norm(const GridFunction& u, const std::vector<int>& nodes, double p) {
    const double w = std::pow(u.grid.spacing, u.grid.dim);
    double acc = 0.0;
    for (int i : nodes) acc += std::pow(std::abs(u.at(i)), p) * w;
    return std::pow(acc, 1.0 / p);
}

namespace {

std::vector<char> node_mask(const Grid& g, const std::vector<int>& nodes) {
    std::vector<char> mask(static_cast<size_t>(g.node_count()), 0);
    for (int i : nodes) mask[static_cast<size_t>(i)] = 1;
    return mask;
}

double ball_measure(const Ball& E, int dim) {
    return dim == 1 ? 2.0 * E.radius : M_PI * E.radius * E.radius;
}

double box_weight(const Grid& g, int flat);

// measure of (node cell) \ E, cells clipped against both the box faces and
// the ball boundary; the snail integrand is steep near dE and plain
// node-subset weights would leave an O(spacing) rim error
double cell_measure_outside(const Grid& g, int flat, const Ball& E) {
    const double d = g.spacing;
    if (g.dim == 1) {
        const double x = g.coord(flat);
        double lo = std::max(x - 0.5 * d, -g.box_halfwidth);
        double hi = std::min(x + 0.5 * d, g.box_halfwidth);
        if (hi <= lo) return 0.0;
        // remove the overlap with (c - R, c + R)
        const double el = E.center[0] - E.radius, er = E.center[0] + E.radius;
        const double ov = std::max(0.0, std::min(hi, er) - std::max(lo, el));
        return (hi - lo) - ov;
    }
    const Point y = g.node(flat);
    const double dist = norm2({y[0] - E.center[0], y[1] - E.center[1]}, 2);
    const double half_diag = 0.5 * d * std::sqrt(2.0);
    const double wfull = box_weight(g, flat);
    if (dist >= E.radius + half_diag) return wfull;
    if (dist <= E.radius - half_diag) return 0.0;
    // straddling cell: 8x8 subsample of the clipped fraction
    const int sub = 8;
    int outside = 0;
    for (int sx = 0; sx < sub; ++sx)
        for (int sy = 0; sy < sub; ++sy) {
            const Point q{y[0] + d * ((sx + 0.5) / sub - 0.5),
                          y[1] + d * ((sy + 0.5) / sub - 0.5)};
            if (!E.contains(q, 2)) ++outside;
        }
    return wfull * outside / (sub * sub);
}

// trapezoid cell weight: half at box faces so node cells tile [-L,L]^N exactly
// and box quadrature meets the analytic tails without overlap
double box_weight(const Grid& g, int flat) {
    const int n = g.n_per_axis;
    double w = g.spacing;
    const int ix = g.dim == 1 ? flat : flat % n;
    if (ix == 0 || ix == n - 1) w *= 0.5;
    if (g.dim == 2) {
        const int iy = flat / n;
        double wy = g.spacing;
        if (iy == 0 || iy == n - 1) wy *= 0.5;
        w *= wy;
    }
    return w;
}

// growth check for |rule|^p against a tail kernel r^{-1-q_decay}; throws when
// the integral cannot converge
const char* rule_name(const ExteriorRule& rule) {
    switch (rule.kind) {
    case ExteriorKind::Zero: return "zero";
    case ExteriorKind::Affine: return "affine";
    case ExteriorKind::ClosedForm: return "closed_form";
    case ExteriorKind::Difference: return "difference";
    }
    return "?";
}

void check_tail_convergence(const ExteriorRule& rule, double p, double q_decay,
                            const char* who) {
    const double growth = rule.growth_exponent();
    if (growth <= -1e8) return;
    if (growth * p >= q_decay)
        throw std::domain_error(std::string(who) + ": exterior rule '" + rule_name(rule) +
                                "' has a non-integrable tail against the weight "
                                "(growth exponent " +
                                std::to_string(growth) + ")");
}

// int_{R^N \ box} |rule(y)|^p W(x,y) dy with W = |x-y|^{-N-sp}; x inside the box
double exterior_tail_xy(const GridFunction& u, const Point& x,
                        const FractionalParams& par, const char* who) {
    const ExteriorRule& rule = u.exterior;
    if (rule.is_zero()) return 0.0;
    const double sp = par.sp();
    check_tail_convergence(rule, par.p, sp, who);
    const double growth = std::max(0.0, rule.growth_exponent());
    const double q = sp - growth * par.p; // effective decay of the integrand
    const double L = u.grid.box_halfwidth;
    const int dim = u.grid.dim;
    if (dim == 1) {
        double acc = 0.0;
        for (double sgn : {1.0, -1.0}) {
            const Point e{sgn, 0.0};
            const double r0 = ray_box_exit(x, e, L, 1);
            acc += power_tail_quad(
                [&](double r) {
                    const Point y{x[0] + sgn * r, 0.0};
                    const double g = rule.eval(y, 1);
                    return std::pow(std::abs(g), par.p) * std::pow(r, -1.0 - sp);
                },
                r0, q);
        }
        return acc;
    }
    const int nang = 256;
    double acc = 0.0;
    for (int a = 0; a < nang; ++a) {
        const double th = 2.0 * M_PI * (a + 0.5) / nang;
        const Point e{std::cos(th), std::sin(th)};
        const double r0 = ray_box_exit(x, e, L, 2);
        acc += power_tail_quad(
                   [&](double r) {
                       const Point y{x[0] + r * e[0], x[1] + r * e[1]};
                       const double g = rule.eval(y, 2);
                       return std::pow(std::abs(g), par.p) * std::pow(r, -1.0 - sp);
                   },
                   r0, q) *
               (2.0 * M_PI / nang);
    }
    return acc;
}

} // namespace

SeminormResult gagliardo(const GridFunction& u, const Ball& E, double alpha, double p) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("gagliardo: alpha must lie in (0,1)");
    const Grid& g = u.grid;
    const auto nodes = restrict_nodes(g, E);
    const auto mask = node_mask(g, nodes);
    const double d = g.spacing;
    const double cellw = std::pow(d, g.dim);
    const double expo = g.dim + alpha * p;
    double sum = 0.0;
    if (g.dim == 1) {
        const int n = g.n_per_axis;
        sum = tiled_sum(
            n - 1,
            [&](std::int64_t kb, std::int64_t ke) {
                double acc = 0.0;
                for (std::int64_t k = kb + 1; k <= ke; ++k) {
                    const double w2 = 2.0 * shell_weight_1d(static_cast<int>(k), d, expo, p);
                    double s = 0.0;
                    for (int i = 0; i + k < n; ++i) {
                        if (!mask[static_cast<size_t>(i)] ||
                            !mask[static_cast<size_t>(i + k)])
                            continue;
                        s += std::pow(std::abs(u.at(static_cast<int>(i + k)) - u.at(i)), p);
                    }
                    acc += w2 * s;
                }
                return acc;
            },
            8);
    } else {
        const int n = g.n_per_axis;
        // half-space offsets (ky > 0) or (ky = 0, kx > 0), each counted twice;
        // the weight table is cached so repeated calls pay only the pair sum
        struct WeightTable {
            double spacing, expo, p;
            int n;
            std::vector<std::array<int, 2>> offsets;
            std::vector<double> w;
        };
        static std::mutex cache_mtx;
        static std::vector<std::shared_ptr<const WeightTable>> cache;
        std::shared_ptr<const WeightTable> table;
        {
            std::lock_guard<std::mutex> lock(cache_mtx);
            for (const auto& t : cache)
                if (t->spacing == d && t->expo == expo && t->p == p && t->n == n)
                    table = t;
        }
        if (!table) {
            auto t = std::make_shared<WeightTable>();
            t->spacing = d;
            t->expo = expo;
            t->p = p;
            t->n = n;
            for (int ky = 0; ky < n; ++ky)
                for (int kx = (ky == 0 ? 1 : -(n - 1)); kx < n; ++kx) {
                    t->offsets.push_back({kx, ky});
                    t->w.push_back(shell_weight_2d(kx, ky, d, expo, p));
                }
            std::lock_guard<std::mutex> lock(cache_mtx);
            if (cache.size() > 16) cache.clear();
            cache.push_back(t);
            table = t;
        }
        const auto& offsets = table->offsets;
        const auto& wtab = table->w;
        sum = tiled_sum(
            static_cast<std::int64_t>(offsets.size()),
            [&](std::int64_t ob, std::int64_t oe) {
                double acc = 0.0;
                for (std::int64_t o = ob; o < oe; ++o) {
                    const auto [kx, ky] = offsets[static_cast<size_t>(o)];
                    const double w2 = 2.0 * wtab[static_cast<size_t>(o)];
                    double s = 0.0;
                    const int x0 = std::max(0, -kx), x1 = std::min(n, n - kx);
                    const int y0 = std::max(0, -ky), y1 = std::min(n, n - ky);
                    for (int iy = y0; iy < y1; ++iy)
                        for (int ix = x0; ix < x1; ++ix) {
                            const int i = g.flat(ix, iy);
                            const int j = g.flat(ix + kx, iy + ky);
                            if (!mask[static_cast<size_t>(i)] ||
                                !mask[static_cast<size_t>(j)])
                                continue;
                            s += std::pow(std::abs(u.at(j) - u.at(i)), p);
                        }
                    acc += w2 * s;
                }
                return acc;
            },
            16);
    }
    sum *= cellw;
    // self shell via the discrete gradient
    const double cself = self_shell_constant(g.dim, p, expo, d);
    const auto grad = discrete_gradient(u);
    double self = 0.0;
    for (int i : nodes) {
        double gn = std::abs(grad[0].at(i));
        if (g.dim == 2) gn = std::hypot(grad[0].at(i), grad[1].at(i));
        self += std::pow(gn, p);
    }
    sum += self * cself * cellw;

    SeminormResult r;
    r.kind = "gagliardo";
    r.alpha = alpha;
    r.p = p;
    r.node_count = static_cast<int>(nodes.size());
    r.value = std::pow(sum, 1.0 / p);
    return r;
}

SeminormResult nikolskii_sup(const GridFunction& u, const Ball& E, double alpha,
                             double p, const std::vector<Point>& h_grid) {
    if (h_grid.empty())
        throw std::invalid_argument("nikolskii_sup: h_grid must be nonempty");
    const auto nodes = restrict_nodes(u.grid, E);
    SeminormResult r;
    r.kind = "nikolskii";
    r.alpha = alpha;
    r.p = p;
    r.node_count = static_cast<int>(nodes.size());
    r.h_count = static_cast<int>(h_grid.size());
    for (const Point& h : h_grid) {
        const GridFunction d = delta_h(u, h);
        const double q = lp_norm(d, nodes, p) / std::pow(norm2(h, u.grid.dim), alpha);
        if (q > r.value) {
            r.value = q;
            r.argmax_h = h;
        }
    }
    return r;
}

SeminormResult besov2_sup(const GridFunction& u, double alpha, double p,
                          const std::vector<Point>& h_grid) {
    if (!(alpha > 0.0 && alpha < 2.0))
        throw std::invalid_argument("besov2_sup: alpha must lie in (0,2)");
    if (h_grid.empty())
        throw std::invalid_argument("besov2_sup: h_grid must be nonempty");
    const auto nodes = all_nodes(u.grid);
    SeminormResult r;
    r.kind = "besov2";
    r.alpha = alpha;
    r.p = p;
    r.node_count = static_cast<int>(nodes.size());
    r.h_count = static_cast<int>(h_grid.size());
    for (const Point& h : h_grid) {
        const GridFunction d2 = delta2_h(u, h);
        const double q = lp_norm(d2, nodes, p) / std::pow(norm2(h, u.grid.dim), alpha);
        if (q > r.value) {
            r.value = q;
            r.argmax_h = h;
        }
    }
    return r;
}

SeminormResult xps_norm(const GridFunction& u, const FractionalParams& par) {
    const Grid& g = u.grid;
    const double sp = par.sp();
    check_tail_convergence(u.exterior, par.p, sp, "xps_norm");
    double acc = 0.0;
    for (int i = 0; i < g.node_count(); ++i) {
        const Point x = g.node(i);
        acc += std::pow(std::abs(u.at(i)), par.p) *
               std::pow(1.0 + norm2(x, g.dim), -(g.dim + sp)) * box_weight(g, i);
    }
    // tail over R^N \ box against the weight (1+|x|)^{-N-sp}
    double tail = 0.0;
    const double L = g.box_halfwidth;
    if (!u.exterior.is_zero()) {
        const double growth = std::max(0.0, u.exterior.growth_exponent());
        const double q = sp - growth * par.p;
        if (g.dim == 1) {
            // integrate in rho = 1 + |y| from rho0 = 1 + L; pure power law for
            // constant rules, so the tail is exact there
            for (double sgn : {1.0, -1.0})
                tail += power_tail_quad(
                    [&](double rho) {
                        const Point y{sgn * (rho - 1.0), 0.0};
                        return std::pow(std::abs(u.exterior.eval(y, 1)), par.p) *
                               std::pow(rho, -1.0 - sp);
                    },
                    1.0 + L, q);
        } else {
            const int nang = 256;
            for (int a = 0; a < nang; ++a) {
                const double th = 2.0 * M_PI * (a + 0.5) / nang;
                const Point e{std::cos(th), std::sin(th)};
                const double r0 = ray_box_exit({0.0, 0.0}, e, L, 2);
                tail += power_tail_quad(
                           [&](double r) {
                               const Point y{r * e[0], r * e[1]};
                               return std::pow(std::abs(u.exterior.eval(y, 2)), par.p) *
                                      std::pow(1.0 + r, -2.0 - sp) * r;
                           },
                           r0, q) *
                       (2.0 * M_PI / nang);
            }
        }
    }
    SeminormResult r;
    r.kind = "xps";
    r.alpha = par.s;
    r.p = par.p;
    r.node_count = g.node_count();
    r.tail_radius = L;
    r.value = std::pow(acc + tail, 1.0 / par.p);
    return r;
}

double snail(const GridFunction& u, const Point& x, const Ball& E,
             const FractionalParams& par) {
    if (!E.contains(x, u.grid.dim))
        throw std::domain_error("snail: x must lie inside E");
    const Grid& g = u.grid;
    const double sp = par.sp();
    double acc = 0.0;
    for (int i = 0; i < g.node_count(); ++i) {
        const Point y = g.node(i);
        const Point d{x[0] - y[0], x[1] - y[1]};
        const double r = norm2(d, g.dim);
        if (r == 0.0) continue;
        const double w = cell_measure_outside(g, i, E);
        if (w == 0.0) continue;
        acc += std::pow(std::abs(u.at(i)), par.p) * std::pow(r, -(g.dim + sp)) * w;
    }
    acc += exterior_tail_xy(u, x, par, "snail");
    return std::pow(std::pow(ball_measure(E, g.dim), sp / g.dim) * acc, 1.0 / par.p);
}

SeminormResult x_bracket(const GridFunction& u, const Ball& F, const Ball& E,
                         const FractionalParams& par) {
    if (ball_gap(F, E, u.grid.dim) <= 0.0)
        throw std::invalid_argument("x_bracket: F must be compactly contained in E");
    const auto enodes = restrict_nodes(u.grid, E);
    const auto fnodes = restrict_nodes(u.grid, F);
    const double cellw = std::pow(u.grid.spacing, u.grid.dim);
    const double lpE = std::pow(lp_norm(u, enodes, par.p), par.p);
    double snail_part = 0.0;
    for (int i : fnodes)
        snail_part += std::pow(snail(u, u.grid.node(i), E, par), par.p) * cellw;
    SeminormResult r;
    r.kind = "x_bracket";
    r.alpha = par.s;
    r.p = par.p;
    r.node_count = static_cast<int>(enodes.size());
    r.value = std::pow(lpE + snail_part, 1.0 / par.p);
    return r;
}

SeminormResult y_bracket(const GridFunction& u, const Ball& F, const Ball& E,
                         const FractionalParams& par, const std::vector<Point>& h_grid) {
    const double gap = ball_gap(F, E, u.grid.dim);
    if (gap <= 0.0)
        throw std::invalid_argument("y_bracket: F must be compactly contained in E");
    if (h_grid.empty())
        throw std::invalid_argument("y_bracket: h_grid must be nonempty");
    const auto fnodes = restrict_nodes(u.grid, F);
    const double cellw = std::pow(u.grid.spacing, u.grid.dim);
    SeminormResult r;
    r.kind = "y_bracket";
    r.alpha = par.t;
    r.p = par.p;
    r.node_count = static_cast<int>(fnodes.size());
    r.h_count = static_cast<int>(h_grid.size());
    for (const Point& h : h_grid) {
        const double hn = norm2(h, u.grid.dim);
        if (!(hn < 0.5 * gap))
            throw std::invalid_argument(
                "y_bracket: |h| must be below d(F,E)/2 (got |h| = " + std::to_string(hn) +
                ", bound " + std::to_string(0.5 * gap) + ")");
        const GridFunction d = delta_h(u, h);
        double acc = 0.0;
        for (int i : fnodes)
            acc += std::pow(snail(d, u.grid.node(i), E, par), par.p) * cellw;
        const double q = std::pow(acc, 1.0 / par.p) / std::pow(hn, par.t);
        if (q > r.value) {
            r.value = q;
            r.argmax_h = h;
        }
    }
    return r;
}

ARBreakdown composite_AR(const GridFunction& u, const GridFunction& f, double R,
                         const FractionalParams& par) {
    const Grid& g = u.grid;
    if (!(R > 0.0) || R > g.box_halfwidth + 1e-12)
        throw std::domain_error("composite_AR: ball B_R must fit inside the box");
    const double s = par.s, p = par.p, t = par.t;
    const double pc = par.p_conj();
    const Ball BR{{0.0, 0.0}, R};
    const Ball B34{{0.0, 0.0}, 0.75 * R};
    const Ball B78{{0.0, 0.0}, 0.875 * R};
    const auto rnodes = restrict_nodes(g, BR);

    ARBreakdown out;
    out.summands[0] = std::pow(R, s * p) * std::pow(gagliardo(u, BR, s, p).value, p);
    out.summands[1] = std::pow(lp_norm(u, rnodes, p), p) / (s * (1.0 - s));
    out.summands[2] = std::pow(x_bracket(u, B34, BR, par).value, p) / s;
    const auto hg = dyadic_h_grid(g, 0.5 * ball_gap(B34, B78, g.dim));
    out.summands[3] =
        std::pow(R, t * p) * std::pow(y_bracket(u, B34, B78, par, hg).value, p);
    const double fsem = (1.0 - s) * gagliardo(f, BR, s, pc).value;
    const double flp = (1.0 - s) * lp_norm(f, rnodes, pc);
    const double rspp = std::pow(R, s * p * pc);
    out.summands[4] = rspp * std::pow(R, s * pc) * std::pow(fsem, pc);
    out.summands[5] = rspp * std::pow(flp, pc) / (s * (1.0 - s));
    for (double v : out.summands) out.total += v;
    return out;
}

} // namespace fraclab
