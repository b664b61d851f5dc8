#include "fraclab/kernels.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace fraclab {

void FractionalParams::validate() const {
    if (dim != 1 && dim != 2)
        throw std::invalid_argument("params: dim must be 1 or 2");
    if (!(s > 0.0 && s < 1.0))
        throw std::invalid_argument("params: s must lie in (0,1)");
    if (!(p >= 2.0))
        throw std::invalid_argument("params: p >= 2 required");
    if (!(t >= 0.0))
        throw std::invalid_argument("params: t >= 0 required");
    if (!(t <= s))
        throw std::invalid_argument("params: t <= s required");
    if (!(lambda >= 1.0))
        throw std::invalid_argument("params: Lambda >= 1 required");
}

double Kernel::modulation(const Point& z) const {
    if (custom) return custom(z, params.dim);
    switch (tag) {
    case ModulationTag::None:
        return 1.0;
    case ModulationTag::Angular: {
        const double k = (params.lambda - 1.0) / (params.lambda + 1.0);
        const double theta = std::atan2(z[1], z[0]);
        return 1.0 + k * std::cos(2.0 * theta);
    }
    case ModulationTag::RadialStep:
        return norm2(z, params.dim) < 1.0 ? params.lambda : 1.0 / params.lambda;
    }
    return 1.0;
}

double Kernel::operator()(const Point& z) const {
    const double r = norm2(z, params.dim);
    return modulation(z) * std::pow(r, params.kernel_exponent());
}

Kernel standard_kernel(const FractionalParams& params) {
    params.validate();
    Kernel k;
    k.params = params;
    return k;
}

Kernel modulated_kernel(const FractionalParams& params, ModulationTag tag) {
    params.validate();
    if (tag == ModulationTag::Angular && params.dim == 1 && params.lambda != 1.0)
        throw std::invalid_argument("modulated_kernel: angular modulation needs dim 2 "
                                    "(degenerates to constant only for Lambda = 1)");
    Kernel k;
    k.params = params;
    k.tag = tag;
    const auto check = kernel_bounds_check(k, 512);
    if (!check.ok)
        throw std::invalid_argument("modulated_kernel: modulation violates the "
                                    "ellipticity sandwich");
    return k;
}

Kernel custom_kernel(const FractionalParams& params,
                     std::function<double(const Point&, int)> modulation) {
    params.validate();
    Kernel k;
    k.params = params;
    k.custom = std::move(modulation);
    return k;
}

KernelBoundsReport kernel_bounds_check(const Kernel& k, int probe_count,
                                       std::uint64_t seed) {
    if (probe_count < 1)
        throw std::invalid_argument("kernel_bounds_check: probe_count >= 1 required");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logr(-3.0, 3.0);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
    KernelBoundsReport rep;
    rep.worst_ratio = 1.0;
    for (int i = 0; i < probe_count; ++i) {
        const double r = std::pow(10.0, logr(rng));
        Point z{r, 0.0};
        if (k.params.dim == 2) {
            const double th = ang(rng);
            z = {r * std::cos(th), r * std::sin(th)};
        } else if (i % 2 == 1) {
            z[0] = -z[0];
        }
        const double a = k.modulation(z);
        rep.worst_ratio = std::max({rep.worst_ratio, a, 1.0 / a});
    }
    rep.ok = rep.worst_ratio <= k.params.lambda * (1.0 + 1e-12);
    return rep;
}

double jp(double x, double p) {
    if (x == 0.0) return 0.0;
    return std::pow(std::abs(x), p - 2.0) * x;
}

double vp(double x, double p) {
    if (x == 0.0) return 0.0;
    return std::pow(std::abs(x), 0.5 * (p - 2.0)) * x;
}

bool PointwiseReport::all_ok() const {
    for (const auto& r : rows)
        if (!r.ok) return false;
    return true;
}

namespace {

struct Sides {
    double lhs, rhs, scale;
};

// Both sides of each inequality plus a p-homogeneous magnitude scale; the
// tolerance is relative to the pair magnitude, not to lhs-rhs (near-diagonal
// pairs sit at equality to leading order and would otherwise drown in
// cancellation noise).
Sides eval_inequality(int which, double a, double b, double p) {
    const double m = std::max(std::abs(a), std::abs(b));
    const double ja = jp(a, p), jb = jp(b, p);
    const double va = vp(a, p), vb = vp(b, p);
    const double cp = (p - 1.0) * (2.0 / p) * (2.0 / p);
    Sides s{};
    switch (which) {
    case 0: // (J_p(a)-J_p(b))(a-b) >= (p-1)(2/p)^2 |V_p(a)-V_p(b)|^2
        s.lhs = (ja - jb) * (a - b);
        s.rhs = cp * (va - vb) * (va - vb);
        s.scale = std::abs(s.lhs) + std::abs(s.rhs) + std::pow(m, p);
        break;
    case 1: // |J_p(a)-J_p(b)| <= 2(p-1)/p (|a|^{(p-2)/2}+|b|^{(p-2)/2}) |V_p(a)-V_p(b)|
        s.lhs = 2.0 * (p - 1.0) / p *
                (std::pow(std::abs(a), 0.5 * (p - 2.0)) +
                 std::pow(std::abs(b), 0.5 * (p - 2.0))) *
                std::abs(va - vb);
        s.rhs = std::abs(ja - jb);
        s.scale = std::abs(s.lhs) + std::abs(s.rhs) + std::pow(m, p - 1.0);
        break;
    case 2: // |V_p(a)-V_p(b)|^2 >= |a-b|^p
        s.lhs = (va - vb) * (va - vb);
        s.rhs = std::pow(std::abs(a - b), p);
        s.scale = std::abs(s.lhs) + std::abs(s.rhs) + std::pow(m, p);
        break;
    case 3: // (J_p(a)-J_p(b))(a-b) >= (p-1)(2/p)^2 |a-b|^p
        s.lhs = (ja - jb) * (a - b);
        s.rhs = cp * std::pow(std::abs(a - b), p);
        s.scale = std::abs(s.lhs) + std::abs(s.rhs) + std::pow(m, p);
        break;
    default:
        throw std::logic_error("bad inequality index");
    }
    return s;
}

const char* kInequalityNames[4] = {"monotone", "lipschitz", "holder", "down"};

} // namespace

PointwiseReport verify_pointwise_inequalities(const std::vector<double>& p_list,
                                              long sample_count,
                                              std::uint64_t rng_seed) {
    if (sample_count < 1)
        throw std::invalid_argument("verify_pointwise_inequalities: sample_count >= 1");
    for (double p : p_list)
        if (!(p >= 2.0))
            throw std::invalid_argument("verify_pointwise_inequalities: p >= 2 required");

    PointwiseReport rep;
    for (double p : p_list) {
        std::mt19937_64 rng(rng_seed);
        std::uniform_real_distribution<double> box(-10.0, 10.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<InequalityRow> rows(4);
        for (int q = 0; q < 4; ++q) {
            rows[static_cast<size_t>(q)].name = kInequalityNames[q];
            rows[static_cast<size_t>(q)].p = p;
            rows[static_cast<size_t>(q)].samples = sample_count;
            rows[static_cast<size_t>(q)].worst_rel_slack = 0.0;
        }
        for (long i = 0; i < sample_count; ++i) {
            double a = box(rng);
            double b = box(rng);
            if (i % 8 == 7) // near-diagonal cancellation probe
                b = a + 1e-8 * std::pow(10.0, -6.0 * unit(rng)) * (unit(rng) < 0.5 ? -1 : 1);
            for (int q = 0; q < 4; ++q) {
                const Sides sd = eval_inequality(q, a, b, p);
                const double rel = (sd.lhs - sd.rhs) / sd.scale;
                auto& row = rows[static_cast<size_t>(q)];
                if (rel < row.worst_rel_slack) {
                    row.worst_rel_slack = rel;
                    row.worst_a = a;
                    row.worst_b = b;
                }
                row.max_rel_gap = std::max(row.max_rel_gap,
                                           std::abs(sd.lhs - sd.rhs) / sd.scale);
            }
        }
        for (auto& row : rows) {
            row.ok = row.worst_rel_slack >= -rep.tolerance;
            rep.rows.push_back(row);
        }
    }
    return rep;
}

} // namespace fraclab
