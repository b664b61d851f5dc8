#include "fraclab/regularity.hpp"

#include "fraclab/diffops.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace fraclab {

double gamma_recursion(const FractionalParams& par, int i) {
    double g = par.s;
    for (int k = 0; k < i; ++k) g = (g + par.t + par.sp()) / par.p;
    return g;
}

double gamma_closed_form(const FractionalParams& par, int i) {
    const double kappa = (par.t + par.sp()) / (par.p - 1.0);
    const double pi = std::pow(par.p, -static_cast<double>(i));
    return par.s * pi + kappa * (1.0 - pi);
}

RegularityScheme classify_regime(const FractionalParams& par, std::optional<double> tau) {
    par.validate();
    RegularityScheme sch;
    sch.params = par;
    const double s = par.s, p = par.p, t = par.t;
    sch.kappa = (t + par.sp()) / (p - 1.0);
    sch.Gamma = (1.0 + t + par.sp()) / p;
    sch.regime = (t + par.sp() <= p - 1.0) ? Regime::CaseI : Regime::CaseII;

    if (sch.regime == Regime::CaseI) {
        sch.tau = tau.value_or(0.5 * (s + sch.kappa));
        if (!(sch.tau >= s && sch.tau < sch.kappa))
            throw std::invalid_argument("classify_regime: case i needs tau in [s, kappa)");
        const double thr = (std::log(sch.kappa - s) - std::log(sch.kappa - sch.tau)) /
                           std::log(p);
        sch.i0 = static_cast<int>(std::floor(thr)) + 1; // min integer strictly above
        sch.i0 = std::max(sch.i0, 1);
    } else {
        sch.tau = tau.value_or(0.5 * (sch.Gamma - 1.0));
        if (!(sch.tau < sch.Gamma - 1.0) || !(sch.tau > 0.0))
            throw std::invalid_argument(
                "classify_regime: case ii needs tau in (0, Gamma - 1)");
        const double thr = (std::log(sch.kappa - s) - std::log(sch.kappa - 1.0)) /
                           std::log(p);
        const double r = std::round(thr);
        if (std::abs(thr - r) < 1e-12 && r >= 1.0) {
            sch.i0 = static_cast<int>(r); // gamma_{i0} = 1 borderline
            sch.borderline_gamma_one = true;
        } else {
            sch.i0 = std::max(1, static_cast<int>(std::ceil(thr)));
        }
    }
    sch.gamma.resize(static_cast<size_t>(sch.i0) + 3);
    sch.gamma[0] = s;
    for (int i = 0; i + 1 < static_cast<int>(sch.gamma.size()); ++i)
        sch.gamma[static_cast<size_t>(i) + 1] =
            (sch.gamma[static_cast<size_t>(i)] + t + par.sp()) / p;
    return sch;
}

bool robust_constant_regime(const FractionalParams& par, double ell0) {
    par.validate();
    if (!(ell0 > par.p))
        throw std::invalid_argument("robust_constant_regime: ell0 > p required");
    return par.t + par.s * (par.p + 1.0) >= ell0;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_loglog: need >= 2 matching points");
    const int n = static_cast<int>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double lx = std::log(x[static_cast<size_t>(i)]);
        const double ly = std::log(y[static_cast<size_t>(i)]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    SlopeFit f;
    f.points = n;
    const double det = n * sxx - sx * sx;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / n;
    for (int i = 0; i < n; ++i) {
        const double e = std::log(y[static_cast<size_t>(i)]) -
                         (f.intercept + f.slope * std::log(x[static_cast<size_t>(i)]));
        f.residual += e * e;
    }
    f.residual = std::sqrt(f.residual / n);
    return f;
}

double grad_lp_norm(const GridFunction& u, const std::vector<int>& nodes, double p) {
    const auto grad = discrete_gradient(u);
    const double w = std::pow(u.grid.spacing, u.grid.dim);
    double acc = 0.0;
    for (int i : nodes) {
        double gn = std::abs(grad[0].at(i));
        if (u.grid.dim == 2) gn = std::hypot(grad[0].at(i), grad[1].at(i));
        acc += std::pow(gn, p) * w;
    }
    return std::pow(acc, 1.0 / p);
}

namespace {

GridFunction gf_scale(const GridFunction& u, double c) {
    GridFunction out = u;
    for (auto& v : out.values) v *= c;
    return out;
}

// ||delta_h (vector field)||_{L^p(nodes)}, euclidean norm across components
double vector_diff_lp(const std::vector<GridFunction>& comps, const Point& h,
                      const std::vector<int>& nodes, double p) {
    std::vector<GridFunction> diffs;
    diffs.reserve(comps.size());
    for (const auto& c : comps) diffs.push_back(delta_h(c, h));
    const double w = std::pow(comps[0].grid.spacing, comps[0].grid.dim);
    double acc = 0.0;
    for (int i : nodes) {
        double q = 0.0;
        for (const auto& d : diffs) q += d.at(i) * d.at(i);
        acc += std::pow(q, 0.5 * p) * w;
    }
    return std::pow(acc, 1.0 / p);
}

// distinct translation magnitudes, keeping the max over same-|h| directions
std::vector<std::pair<double, double>> sup_by_magnitude(const GridFunction& u,
                                                        const std::vector<int>& nodes,
                                                        double p,
                                                        const std::vector<Point>& h_grid) {
    std::map<double, double> by_mag;
    for (const Point& h : h_grid) {
        const double hn = norm2(h, u.grid.dim);
        const double v = lp_norm(delta_h(u, h), nodes, p);
        auto [it, fresh] = by_mag.emplace(hn, v);
        if (!fresh) it->second = std::max(it->second, v);
    }
    return {by_mag.begin(), by_mag.end()};
}

// scheme left-hand side at one h: [delta_h(u eta)/|h|^{(gamma+t)/p}]^p_{W^{s,p}(B_R)}
double scheme_lhs(const GridFunction& u, const Cutoff& eta, const Point& h, double gamma,
                  const FractionalParams& par, const Ball& BR) {
    const GridFunction ue = cutoff_product(u, eta);
    GridFunction d = delta_h(ue, h);
    const double hn = norm2(h, u.grid.dim);
    d = gf_scale(d, std::pow(hn, -(gamma + par.t) / par.p));
    return std::pow(gagliardo(d, BR, par.s, par.p).value, par.p);
}

} // namespace

OrderReport estimate_order(const GridFunction& u, const Ball& ball, double p,
                           const std::vector<Point>& h_dyadic) {
    const double margin =
        u.grid.box_halfwidth - (norm2(ball.center, u.grid.dim) + ball.radius);
    std::vector<Point> usable;
    for (const Point& h : h_dyadic)
        if (norm2(h, u.grid.dim) < 0.5 * margin) usable.push_back(h);
    const auto nodes = restrict_nodes(u.grid, ball);
    auto samples = sup_by_magnitude(u, nodes, p, usable);
    if (samples.size() < 4)
        throw std::invalid_argument("estimate_order: need >= 4 usable dyadic magnitudes "
                                    "inside dist(ball, box)/2");
    OrderReport rep;
    rep.samples = samples;
    std::vector<double> hs, vs;
    for (auto& [h, v] : samples) {
        hs.push_back(h);
        vs.push_back(v);
    }
    rep.fit = fit_loglog(hs, vs);
    rep.capped = rep.fit.slope > 1.0;
    rep.tau_hat = std::min(rep.fit.slope, 1.0);

    const auto grad = discrete_gradient(u);
    std::map<double, double> by_mag;
    for (const Point& h : usable) {
        const double hn = norm2(h, u.grid.dim);
        const double v = vector_diff_lp(grad, h, nodes, p);
        auto [it, fresh] = by_mag.emplace(hn, v);
        if (!fresh) it->second = std::max(it->second, v);
    }
    std::vector<double> ghs, gvs;
    for (auto& [h, v] : by_mag) {
        ghs.push_back(h);
        gvs.push_back(std::max(v, 1e-300));
    }
    rep.gradient_fit = fit_loglog(ghs, gvs);
    return rep;
}

VerificationReport verify_caccioppoli(const GridFunction& u, const GridFunction& f,
                                      double r, double R, double gamma,
                                      const FractionalParams& par,
                                      const std::vector<Point>& h_set) {
    par.validate();
    if (!(gamma >= par.s && gamma <= 1.0))
        throw std::invalid_argument("verify_caccioppoli: gamma must lie in [s, 1]");
    const int dim = u.grid.dim;
    const double L = u.grid.box_halfwidth;
    const double cap = 0.25 * std::min({L - R, R - r, 1.0});
    if (!(cap > 0.0))
        throw std::invalid_argument("verify_caccioppoli: B_R must fit in the box");
    if (h_set.empty())
        throw std::invalid_argument("verify_caccioppoli: empty h set");
    for (const Point& h : h_set)
        if (!(norm2(h, dim) < cap))
            throw std::invalid_argument("verify_caccioppoli: |h| must stay below "
                                        "min(dist, R-r, 1)/4");

    const double s = par.s, p = par.p, t = par.t, pc = par.p_conj(), sp = par.sp();
    const double h0 = cap;
    const Cutoff eta = make_cutoff(r, R, dim);
    const Ball BR{{0, 0}, R};
    const auto rnodes = restrict_nodes(u.grid, BR);
    const Ball Bmid{{0, 0}, 0.5 * (R + r)};
    const Ball Bmid_h{{0, 0}, 0.5 * (R + r) + h0};
    const Ball BRh{{0, 0}, R + h0};
    const auto rhnodes = restrict_nodes(u.grid, BRh);

    // h-independent right-hand side pieces
    const double ratio_Rr = R / (R - r);
    const double T2 = std::pow(ratio_Rr, p) * std::pow(h0, -(gamma + t)) *
                      (std::pow(gagliardo(u, BRh, s, p).value, p) +
                       std::pow(lp_norm(u, rhnodes, p), p) /
                           (s * (1.0 - s) * std::pow(R, sp)));
    const double T3 = (1.0 / s) * std::pow((R + r) / (R - r), dim) *
                      std::pow((R + 1.0) / (R - r), sp) * std::pow(R - r, -sp) *
                      std::pow(x_bracket(u, Bmid_h, BRh, par).value, p);
    const auto hy = dyadic_h_grid(u.grid, 0.25 * (R - r));
    const double T4 = std::pow(R, -sp) * std::pow(y_bracket(u, Bmid, BR, par, hy).value, p);

    VerificationReport rep;
    rep.target = "caccioppoli";
    for (const Point& h : h_set) {
        const double hn = norm2(h, dim);
        const double lhs = scheme_lhs(u, eta, h, gamma, par, BR);
        const double T1 = std::pow(ratio_Rr, p) / ((1.0 - s) * s) * std::pow(R - r, -sp) *
                          std::pow(lp_norm(delta_h(u, h), rnodes, p) / std::pow(hn, gamma),
                                   p);
        const double T5 = std::pow(1.0 - s, 1.0 / (p - 1.0)) * std::pow(R, s * pc) *
                          std::pow(lp_norm(delta_h(f, h), rnodes, pc) / std::pow(hn, s),
                                   pc);
        const double rhs = T1 + T2 + T3 + T4 + T5;
        RatioRow row;
        row.label = "h";
        row.h = hn;
        row.lhs = lhs;
        row.rhs = rhs;
        row.ratio = rhs > 0.0 ? lhs / rhs : 0.0;
        rep.rows.push_back(row);
        rep.max_ratio = std::max(rep.max_ratio, row.ratio);
    }
    rep.pass = std::isfinite(rep.max_ratio);
    return rep;
}

VerificationReport verify_improvement(const GridFunction& u, double r, double R,
                                      double gamma, const FractionalParams& par,
                                      double h0) {
    par.validate();
    if (!(gamma >= par.s && gamma <= 1.0))
        throw std::invalid_argument("verify_improvement: gamma must lie in [s, 1]");
    const int dim = u.grid.dim;
    const double L = u.grid.box_halfwidth;
    if (!(h0 > 0.0 && h0 < 0.25 * std::min({L - R, R - r, 1.0})))
        throw std::invalid_argument("verify_improvement: h0 must satisfy the cap "
                                    "min(dist, R-r, 1)/4");
    const double s = par.s, p = par.p, t = par.t, sp = par.sp();
    const double Gamma = (gamma + t + sp) / p;
    if (!(Gamma < 2.0))
        throw std::logic_error("verify_improvement: Gamma >= 2 cannot occur for "
                               "admissible parameters");
    const Cutoff eta = make_cutoff(r, R, dim);
    const Ball BR{{0, 0}, R};
    const Ball Br{{0, 0}, r};
    const Ball BRh{{0, 0}, R + h0};
    const auto h_small = dyadic_h_grid(u.grid, h0);
    if (h_small.empty())
        throw std::invalid_argument("verify_improvement: no grid-aligned h below h0; "
                                    "refine the grid");

    double M = 0.0;
    for (const Point& h : h_small) M = std::max(M, scheme_lhs(u, eta, h, gamma, par, BR));

    const double u_lp_pow = std::pow(lp_norm(u, restrict_nodes(u.grid, BRh), p), p);
    const double bracket = (1.0 - s) * M + std::pow(h0, -Gamma * p) * u_lp_pow;
    const double shape = std::pow(R / r, dim) * std::pow(R / h0, 1.0 + p);

    VerificationReport rep;
    rep.target = "improvement";

    const GridFunction ue = cutoff_product(u, eta);
    const auto h_wide = dyadic_h_grid(u.grid, u.grid.box_halfwidth);
    const double besov_pow = std::pow(besov2_sup(ue, Gamma, p, h_wide).value, p);
    RatioRow row1;
    row1.label = "besov_vs_scheme";
    row1.lhs = besov_pow;
    row1.rhs = (1.0 / s) * shape * bracket;
    row1.ratio = row1.lhs / row1.rhs;
    rep.rows.push_back(row1);

    RatioRow row2;
    row2.h = h0;
    if (std::abs(Gamma - 1.0) < 1e-12) {
        const double tau = 0.5;
        double lhs = 0.0;
        for (const Point& h : h_small) {
            const double hn = norm2(h, dim);
            lhs = std::max(lhs,
                           std::pow(lp_norm(delta_h(u, h), restrict_nodes(u.grid, Br), p) /
                                        std::pow(hn, tau),
                                    p));
        }
        row2.label = "first_diff_tau_half";
        row2.lhs = lhs;
        row2.rhs =
            shape / std::pow(1.0 - tau, p) * ((1.0 - s) * M + std::pow(h0, -p) * u_lp_pow);
        rep.note = "Gamma = 1 borderline";
    } else if (Gamma < 1.0) {
        double lhs = 0.0;
        for (const Point& h : h_small) {
            const double hn = norm2(h, dim);
            lhs = std::max(lhs,
                           std::pow(lp_norm(delta_h(u, h), restrict_nodes(u.grid, Br), p) /
                                        std::pow(hn, Gamma),
                                    p));
        }
        row2.label = "first_diff_Gamma";
        row2.lhs = lhs;
        row2.rhs = shape / (s * std::pow(1.0 - Gamma, p)) * bracket;
    } else {
        row2.label = "gradient_lp";
        row2.lhs = std::pow(grad_lp_norm(u, restrict_nodes(u.grid, Br), p), p);
        row2.rhs = shape / std::pow(Gamma - 1.0, p) * bracket;
    }
    row2.ratio = row2.lhs / row2.rhs;
    rep.rows.push_back(row2);

    rep.max_ratio = std::max(row1.ratio, row2.ratio);
    rep.pass = std::isfinite(rep.max_ratio);
    return rep;
}

EmbeddingReport verify_besov_embedding(const TestFunction& psi, double alpha, double p,
                                       const Grid& grid,
                                       const std::vector<double>& heat_times) {
    if (!(alpha > 1.0 && alpha < 2.0))
        throw std::invalid_argument(
            "verify_besov_embedding: alpha must lie in (1,2) (the embedding fails at 1)");
    const GridFunction u = sample(psi, grid, ExteriorRule::zero());
    const auto nodes = all_nodes(grid);
    EmbeddingReport rep;
    rep.alpha = alpha;
    rep.p = p;
    rep.lp = lp_norm(u, nodes, p);
    rep.grad_lp = grad_lp_norm(u, nodes, p);
    const auto h_wide = dyadic_h_grid(grid, grid.box_halfwidth);
    rep.besov = besov2_sup(u, alpha, p, h_wide).value;
    rep.fitted_C = rep.grad_lp / (rep.lp + rep.besov / (alpha - 1.0));
    rep.predicted_decay = 0.5 * (alpha - 2.0);

    // hessian decay under heat smoothing
    std::vector<double> ts, hs;
    const double d = grid.spacing;
    for (double tt : heat_times) {
        const GridFunction ut = heat_smooth(u, tt);
        double acc = 0.0;
        const double w = std::pow(d, grid.dim);
        if (grid.dim == 1) {
            for (int i = 1; i + 1 < grid.n_per_axis; ++i) {
                const double dd = (ut.at(i + 1) - 2.0 * ut.at(i) + ut.at(i - 1)) / (d * d);
                acc += std::pow(std::abs(dd), p) * w;
            }
        } else {
            const int n = grid.n_per_axis;
            for (int iy = 1; iy + 1 < n; ++iy)
                for (int ix = 1; ix + 1 < n; ++ix) {
                    const int i = grid.flat(ix, iy);
                    const double dxx =
                        (ut.at(i + 1) - 2.0 * ut.at(i) + ut.at(i - 1)) / (d * d);
                    const double dyy =
                        (ut.at(i + n) - 2.0 * ut.at(i) + ut.at(i - n)) / (d * d);
                    const double dxy =
                        (ut.at(grid.flat(ix + 1, iy + 1)) - ut.at(grid.flat(ix + 1, iy - 1)) -
                         ut.at(grid.flat(ix - 1, iy + 1)) +
                         ut.at(grid.flat(ix - 1, iy - 1))) /
                        (4.0 * d * d);
                    acc += std::pow(std::sqrt(dxx * dxx + dyy * dyy + 2.0 * dxy * dxy), p) *
                           w;
                }
        }
        ts.push_back(tt);
        hs.push_back(std::pow(acc, 1.0 / p));
    }
    rep.heat_decay = fit_loglog(ts, hs);

    // first difference of the gradient against the Besov seminorm
    const auto grad = discrete_gradient(u);
    double sup = 0.0;
    for (const Point& h : h_wide) {
        const double hn = norm2(h, grid.dim);
        sup = std::max(sup, vector_diff_lp(grad, h, nodes, p) / std::pow(hn, alpha - 1.0));
    }
    rep.grad_diff_ratio = sup / (rep.besov / ((2.0 - alpha) * (alpha - 1.0)));
    return rep;
}

BBMResult bbm_limit(const GridFunction& u, const Ball& ball, double p,
                    const std::vector<double>& s_list) {
    BBMResult res;
    const auto nodes = restrict_nodes(u.grid, ball);
    res.grad_lp_pow = std::pow(grad_lp_norm(u, nodes, p), p);
    double smax = 0.0;
    for (double s : s_list) smax = std::max(smax, s);
    if (std::pow(u.grid.spacing, 2.0 * (1.0 - smax)) > 0.75)
        res.warning = "grid too coarse to resolve s close to 1";
    for (double s : s_list) {
        BBMRow row;
        row.s = s;
        row.scaled = (1.0 - s) * std::pow(gagliardo(u, ball, s, p).value, p);
        row.ratio = row.scaled / res.grad_lp_pow;
        res.rows.push_back(row);
    }
    return res;
}

SweepResult s_sweep_to_plaplacian(const DirichletProblem& base,
                                  const std::vector<double>& s_list,
                                  const SolverConfig& config) {
    if (base.g.grid.dim != 1)
        throw std::invalid_argument("s_sweep_to_plaplacian: 1D family only");
    const Grid& g = base.g.grid;
    const double p = base.params.p;

    double fconst = base.f.at(0);
    bool fzero = true, fconstant = true;
    for (int i = 0; i < g.node_count(); ++i) {
        if (base.f.at(i) != 0.0) fzero = false;
        if (std::abs(base.f.at(i) - fconst) > 1e-14) fconstant = false;
    }
    SweepResult res;
    std::function<double(double)> uref, urefp;
    if (fzero) {
        res.reference = "affine";
        const ExteriorRule rule = base.g.exterior;
        uref = [rule, &g](double x) { return rule.eval({x, 0.0}, 1); };
        urefp = [rule](double x) {
            const double d = 1e-6;
            return (rule.eval({x + d, 0.0}, 1) - rule.eval({x - d, 0.0}, 1)) / (2.0 * d);
        };
    } else if (fconstant) {
        // -(|u'|^{p-2} u')' = c on (-1,1), u(+-1) = 0 integrates explicitly
        res.reference = "p_laplace_closed_form";
        const double c = fconst, q = 1.0 / (p - 1.0);
        const double amp = std::pow(std::abs(c), q) * (c >= 0 ? 1.0 : -1.0);
        uref = [amp, q, p](double x) {
            return amp * (p - 1.0) / p * (1.0 - std::pow(std::abs(x), 1.0 + q));
        };
        urefp = [amp, q](double x) {
            return -amp * (x >= 0 ? 1.0 : -1.0) * std::pow(std::abs(x), q);
        };
    } else {
        throw std::invalid_argument("s_sweep_to_plaplacian: f must be zero or constant "
                                    "(closed-form reference required)");
    }

    const Ball half{{0, 0}, 0.5};
    const auto omega_nodes = restrict_nodes(g, base.omega);
    const auto half_nodes = restrict_nodes(g, half);
    for (double s : s_list) {
        DirichletProblem pr = base;
        pr.params.s = s;
        pr.kernel.params = pr.params;
        for (auto& v : pr.f.values) v /= (1.0 - s);
        Solution sol = solve_dirichlet(pr, config);

        SweepRow row;
        row.s = s;
        double e1 = 0.0;
        for (int i : omega_nodes) {
            const double diff = sol.u.at(i) - uref(g.node(i)[0]);
            e1 += std::pow(std::abs(diff), p) * g.spacing;
        }
        row.lp_err = std::pow(e1, 1.0 / p);
        const auto grad = discrete_gradient(sol.u);
        double e2 = 0.0;
        for (int i : half_nodes) {
            const double diff = grad[0].at(i) - urefp(g.node(i)[0]);
            e2 += std::pow(std::abs(diff), p) * g.spacing;
        }
        row.grad_err = std::pow(e2, 1.0 / p);
        res.rows.push_back(row);
    }
    return res;
}

IterationTrace iteration_trace(const GridFunction& u, const GridFunction& f,
                               const FractionalParams& par, std::optional<double> tau) {
    const RegularityScheme sch = classify_regime(par, tau);
    IterationTrace tr;
    tr.i0 = sch.i0;
    tr.kappa = sch.kappa;
    tr.h0 = 1.0 / (100.0 * sch.i0);
    const Grid& g = u.grid;
    if (g.box_halfwidth < 1.0)
        throw std::invalid_argument("iteration_trace: unit-ball convention needs L >= 1");
    if (!(g.spacing < tr.h0)) {
        const int needed = static_cast<int>(std::ceil(2.0 * g.box_halfwidth / tr.h0)) + 1;
        throw std::invalid_argument(
            "iteration_trace: spacing must be below h0 = 1/(100 i0); need n >= " +
            std::to_string(needed));
    }
    auto radius = [&](int i) { return 0.75 - (static_cast<double>(i) / sch.i0) * 0.25; };
    tr.all_finite = true;
    for (int i = 0; i < sch.i0; ++i) {
        TraceStage st;
        st.index = i;
        st.gamma_i = sch.gamma[static_cast<size_t>(i)];
        st.r_i = radius(i);
        st.r_next = radius(i + 1);
        const Cutoff eta = make_cutoff(st.r_next, st.r_i, g.dim);
        const Ball Bri{{0, 0}, st.r_i};
        double M = 0.0;
        for (const Point& h : dyadic_h_grid(g, tr.h0))
            M = std::max(M, scheme_lhs(u, eta, h, st.gamma_i, par, Bri));
        st.M_i = M;
        tr.all_finite = tr.all_finite && std::isfinite(M);
        tr.stages.push_back(st);
    }
    tr.A1 = composite_AR(u, f, 1.0, par).total;

    const double g_last = sch.gamma[static_cast<size_t>(sch.i0) - 1];
    const double M_last = tr.stages.back().M_i;
    if (M_last > 0.0 && tr.A1 > 0.0)
        tr.fitted_C3 = par.s * par.s * std::pow(1.0 - g_last, par.p) /
                       std::pow(static_cast<double>(sch.i0), 4.0 * (g.dim + par.p)) *
                       std::pow(M_last / tr.A1, 1.0 / sch.i0);

    if (sch.borderline_gamma_one) {
        // rectified path through the intermediate ball, with beta < 1 lifting
        // the next exponent strictly above 1
        tr.rectified = true;
        const double lo = par.p - par.t - par.sp();
        tr.beta = 0.5 * (std::min(1.0, std::max(lo, 0.0)) + 1.0);
        const double r_i0 = radius(sch.i0), r_prev = radius(sch.i0 - 1);
        const double rtilde = 0.25 * (r_prev + 3.0 * r_i0);
        const double outer = r_i0 + r_prev - rtilde; // support edge (r_i0+r_prev)/2
        const Cutoff eta = make_cutoff(rtilde, outer, g.dim);
        const Ball Bprev{{0, 0}, r_prev};
        TraceStage st;
        st.index = sch.i0;
        st.gamma_i = tr.beta;
        st.r_i = r_prev;
        st.r_next = rtilde;
        double M = 0.0;
        for (const Point& h : dyadic_h_grid(g, tr.h0))
            M = std::max(M, scheme_lhs(u, eta, h, tr.beta, par, Bprev));
        st.M_i = M;
        tr.all_finite = tr.all_finite && std::isfinite(M);
        tr.stages.push_back(st);
    }
    return tr;
}

} // namespace fraclab
