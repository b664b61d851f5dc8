#pragma once

#include "fraclab/seminorms.hpp"
#include "fraclab/solver.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fraclab {

enum class Regime { CaseI, CaseII };

/// Exponent-iteration bookkeeping: gamma_0 = s, gamma_{i+1} = (gamma_i+t+sp)/p,
/// kappa = (t+sp)/(p-1), Gamma = (1+t+sp)/p, and the stage count i0.
struct RegularityScheme {
    FractionalParams params;
    double kappa = 0.0;
    double Gamma = 0.0;
    Regime regime = Regime::CaseI;
    double tau = 0.0;
    int i0 = 1;
    std::vector<double> gamma; // gamma_0 .. gamma_{i0+2}
    bool borderline_gamma_one = false;
};

double gamma_recursion(const FractionalParams& par, int i);
double gamma_closed_form(const FractionalParams& par, int i);

/// Regime split on t+sp <= p-1 (case i, boundary included) vs > (case ii),
/// with the stage count from the closed forms. In case i the target tau must
/// lie in [s, kappa); in case ii tau is optional and defaults to (Gamma-1)/2.
RegularityScheme classify_regime(const FractionalParams& par,
                                 std::optional<double> tau = std::nullopt);

/// One-step regime t + s(p+1) >= ell0 > p, where a single stage suffices.
bool robust_constant_regime(const FractionalParams& par, double ell0);

struct SlopeFit {
    double slope = 0.0, intercept = 0.0, residual = 0.0;
    int points = 0;
};
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct OrderReport {
    SlopeFit fit;
    double tau_hat = 0.0; // slope capped at 1
    bool capped = false;
    SlopeFit gradient_fit; // second pass on the discrete gradient
    std::vector<std::pair<double, double>> samples; // (|h|, ||delta_h u||_{L^p(ball)})
};

/// Least-squares slope of log ||delta_h u||_{L^p(ball)} against log |h| over
/// >= 4 dyadic magnitudes; slopes above 1 are reported capped ("use gradient").
OrderReport estimate_order(const GridFunction& u, const Ball& ball, double p,
                           const std::vector<Point>& h_dyadic);

struct RatioRow {
    std::string label;
    double h = 0.0;
    double lhs = 0.0, rhs = 0.0, ratio = 0.0;
};

struct VerificationReport {
    std::string target;
    std::vector<RatioRow> rows;
    double max_ratio = 0.0;
    bool pass = false;
    std::string note;
};

/// Energy-estimate scheme check, constants stripped: ratio of the seminorm of
/// the cut-off difference quotient to the five right-hand-side terms, per h.
VerificationReport verify_caccioppoli(const GridFunction& u, const GridFunction& f,
                                      double r, double R, double gamma,
                                      const FractionalParams& par,
                                      const std::vector<Point>& h_set);

/// Second-difference improvement check plus the per-regime conclusion
/// (first-difference bound below order 1, gradient bound above it).
VerificationReport verify_improvement(const GridFunction& u, double r, double R,
                                      double gamma, const FractionalParams& par,
                                      double h0);

struct EmbeddingReport {
    double alpha = 0.0, p = 2.0;
    double grad_lp = 0.0, lp = 0.0, besov = 0.0;
    double fitted_C = 0.0;        // ||grad|| / (||psi|| + [psi]_B/(alpha-1))
    SlopeFit heat_decay;          // log ||D^2 psi_t||_p vs log t
    double predicted_decay = 0.0; // (alpha-2)/2
    double grad_diff_ratio = 0.0; // first-difference-of-gradient bound, C stripped
};

/// Besov-to-W^{1,p} embedding quantities for one test function at one alpha.
EmbeddingReport verify_besov_embedding(const TestFunction& psi, double alpha, double p,
                                       const Grid& grid,
                                       const std::vector<double>& heat_times = {0.1, 0.05,
                                                                                0.01});

struct BBMRow {
    double s = 0.0;
    double scaled = 0.0; // (1-s) gagliardo^p
    double ratio = 0.0;  // scaled / int_ball |grad u|^p
};
struct BBMResult {
    std::vector<BBMRow> rows;
    double grad_lp_pow = 0.0;
    std::string warning;
};
BBMResult bbm_limit(const GridFunction& u, const Ball& ball, double p,
                    const std::vector<double>& s_list);

struct SweepRow {
    double s = 0.0;
    double lp_err = 0.0;
    double grad_err = 0.0; // on B_{1/2}
};
struct SweepResult {
    std::vector<SweepRow> rows;
    std::string reference; // affine | p_laplace_closed_form
};

/// Solves the 1D family (-Delta_p)^s u_s = f/(1-s) on omega for each s and
/// reports errors against the local limit solution (the affine extension for
/// f = 0, the closed-form p-Laplace profile for constant f).
SweepResult s_sweep_to_plaplacian(const DirichletProblem& base,
                                  const std::vector<double>& s_list,
                                  const SolverConfig& config);

struct TraceStage {
    int index = 0;
    double gamma_i = 0.0;
    double r_i = 0.0, r_next = 0.0;
    double M_i = 0.0;
};
struct IterationTrace {
    int i0 = 1;
    double h0 = 0.0;
    double kappa = 0.0;
    std::vector<TraceStage> stages;
    double A1 = 0.0;
    double fitted_C3 = 0.0;
    bool rectified = false;
    double beta = 0.0; // rectified-stage exponent
    bool all_finite = false;
};

/// Walks the staged scheme on a solved u (unit-ball convention): radii
/// r_i = 3/4 - i/(4 i0), h0 = 1/(100 i0), M_{gamma_i} per stage, and the
/// fitted envelope constant. Throws a resolution error when spacing >= h0.
IterationTrace iteration_trace(const GridFunction& u, const GridFunction& f,
                               const FractionalParams& par,
                               std::optional<double> tau = std::nullopt);

/// L^p norm of the discrete gradient magnitude over a node set.
double grad_lp_norm(const GridFunction& u, const std::vector<int>& nodes, double p);

} // namespace fraclab
