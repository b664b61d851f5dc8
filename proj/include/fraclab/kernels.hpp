#pragma once

#include "fraclab/grid.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fraclab {

/// The parameter tuple (N, s, p, t, Lambda). p >= 2, 0 < s < 1, 0 <= t <= s,
/// Lambda >= 1 throughout.
struct FractionalParams {
    int dim = 1;
    double s = 0.5;
    double p = 2.0;
    double t = 0.0;
    double lambda = 1.0;

    void validate() const; // throws std::invalid_argument quoting the constraint
    double sp() const { return s * p; }
    double p_conj() const { return p / (p - 1.0); }
    double kernel_exponent() const { return dim + s * p; } // N + sp
};

enum class ModulationTag { None, Angular, RadialStep };

/// Kernel K(z) = a(z) |z|^{N+sp} with 1/Lambda <= a(z) <= Lambda and
/// K(z) = K(-z). The modulation a is even by construction.
struct Kernel {
    FractionalParams params;
    ModulationTag tag = ModulationTag::None;
    std::function<double(const Point&, int)> custom; // test hook; overrides tag

    double modulation(const Point& z) const; // a(z)
    double operator()(const Point& z) const; // K(z)
    bool is_standard() const { return tag == ModulationTag::None && !custom; }
};

Kernel standard_kernel(const FractionalParams& params);
Kernel modulated_kernel(const FractionalParams& params, ModulationTag tag);
Kernel custom_kernel(const FractionalParams& params,
                     std::function<double(const Point&, int)> modulation);

struct KernelBoundsReport {
    bool ok = false;
    double worst_ratio = 0.0; // max over probes of max(a, 1/a)
};

KernelBoundsReport kernel_bounds_check(const Kernel& k, int probe_count,
                                       std::uint64_t seed = 1);

/// J_p(x) = |x|^{p-2} x and V_p(x) = |x|^{(p-2)/2} x, both odd, 0 at 0.
double jp(double x, double p);
double vp(double x, double p);

struct InequalityRow {
    std::string name; // monotone | lipschitz | holder | down
    double p = 2.0;
    long samples = 0;
    double worst_rel_slack = 0.0; // min over samples of (lhs-rhs)/scale
    double worst_a = 0.0, worst_b = 0.0;
    double max_rel_gap = 0.0;     // max |lhs-rhs|/scale (equality detection)
    bool ok = false;              // worst_rel_slack >= -tolerance
};

struct PointwiseReport {
    std::vector<InequalityRow> rows;
    double tolerance = 1e-12;
    bool all_ok() const;
};

/// Checks the four scalar inequalities relating J_p and V_p on random pairs
/// in [-10,10]^2 (every eighth pair nudged near the diagonal to probe
/// cancellation). Slack is measured relative to the p-homogeneous magnitude
/// of the pair, tolerance 1e-12. Violating pairs are reported verbatim.
PointwiseReport verify_pointwise_inequalities(const std::vector<double>& p_list,
                                              long sample_count,
                                              std::uint64_t rng_seed);

} // namespace fraclab
