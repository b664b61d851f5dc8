#pragma once

#include "fraclab/grid.hpp"
#include "fraclab/kernels.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace fraclab {

/// Lower-order term Phi(u) = lambda |u|^{q-2} u with an a-priori sup bound M
/// on the solution, so the local Lipschitz constant of Phi is finite.
struct LowerOrder {
    double lambda = 0.0;
    double q = 2.0;
    double sup_bound = 1.0; // M
};

/// (-Delta_{p,K})^s u = f in omega, u = g outside (g carries box values for
/// pinned nodes and the exterior rule beyond the box).
struct DirichletProblem {
    Ball omega;
    GridFunction f;
    GridFunction g;
    Kernel kernel;
    FractionalParams params;
    std::optional<LowerOrder> lower_order;
};

struct SolverConfig {
    int max_iterations = 40000;
    double gradient_tolerance = 1e-10; // on the sup norm of the reduced gradient
    double initial_step = 1.0;
    double backtrack_shrink = 0.5;
    bool accelerate = true; // momentum with monotone restart
    std::optional<GridFunction> init;
};

struct Solution {
    GridFunction u;
    std::vector<double> energy_history; // nonincreasing
    double final_residual = 0.0;
    int iterations = 0;
    bool used_splitting = false; // lower-order fixed-point fallback taken
};

struct IterationLimitError : std::runtime_error {
    explicit IterationLimitError(std::string msg, std::vector<double> history)
        : std::runtime_error(std::move(msg)), energy_history(std::move(history)) {}
    std::vector<double> energy_history;
};

/// Discrete energy whose first variation is the weak form: shell-weighted
/// double sum over the box, symmetric coupling window into the exterior
/// lattice, renormalized analytic tail beyond, self-shell, minus the load.
/// For growing exterior data the value is the renormalized energy (finite;
/// same minimizers and gradients as the formal one).
double energy(const GridFunction& u, const DirichletProblem& problem);

/// Gradient in the load scale: entry at an interior node x is
/// 2 sum_y J_p(u(x)-u(y))/K(x-y) w + tail terms - f(x); zero at pinned nodes.
/// Contributions are summed in +-paired order so odd integrands cancel
/// exactly (affine data with even kernels are exactly harmonic).
GridFunction energy_gradient(const GridFunction& u, const DirichletProblem& problem);

Solution solve_dirichlet(const DirichletProblem& problem, const SolverConfig& config);

/// max over the bank of |weak form tested with phi - int f phi|; each phi
/// must vanish identically outside omega_prime.
double weak_residual(const GridFunction& u, const DirichletProblem& problem,
                     const std::vector<GridFunction>& test_bank, const Ball& omega_prime);

/// Initial iterate: datum values at pinned nodes, the exterior rule's global
/// formula at free nodes.
GridFunction initial_iterate(const DirichletProblem& problem);

/// Free-node mask (nodes strictly inside omega).
std::vector<char> free_mask(const DirichletProblem& problem);

} // namespace fraclab
