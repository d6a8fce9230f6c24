// scenario_solver.hpp
//
// Strictly convex QP over a polyhedron:
//
//     minimize    quad_weight/2 * ||y||^2 + c^T y
//     subject to  a_i^T y <= b_i,   i = 1..m
//
// This is the scenario program for a regularized-quadratic objective with
// affine scenario constraints. Strong convexity makes the minimizer unique,
// and the solver reports the binding (support) constraints exactly.
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "perfscen/environment.hpp"

namespace perfscen {

struct AffineConstraint {
    Eigen::VectorXd a;
    double b{0.0};
};

struct ScenarioProgram {
    std::size_t dim{0};
    double quad_weight{1.0};
    Eigen::VectorXd linear_term;  // empty means zero
    std::vector<AffineConstraint> constraints;

    void validate() const;
};

struct SolverConfig {
    double kkt_tol{1e-9};
    double feasibility_tol{1e-8};
    double active_tol{1e-7};
    std::size_t max_iterations{0};  // 0: 10 * (m + dim) + 100
};

struct SolverResult {
    Eigen::VectorXd optimum;
    double objective_value{0.0};
    std::vector<std::size_t> active_set;  // every i with |a_i^T y - b_i| <= active_tol
    std::vector<double> multipliers;      // parallel to active_set
    double kkt_residual{0.0};
    std::size_t iterations{0};
};

class InfeasibleProgram : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MaxIterationsReached : public std::runtime_error {
public:
    MaxIterationsReached(const std::string& what, Eigen::VectorXd best)
        : std::runtime_error(what), best_iterate(std::move(best)) {}
    Eigen::VectorXd best_iterate;
};

/// Dual active-set solve (Goldfarb-Idnani specialised to a scaled identity
/// Hessian). Starts at the unconstrained minimizer, adds the most violated
/// constraint each outer step, and certifies infeasibility when a violated
/// constraint admits neither a primal nor a dual step.
SolverResult solve(const ScenarioProgram& program, const SolverConfig& config = {});

/// Margin constraints y_i <w, xi_i> >= 1 - gamma for each labelled sample,
/// objective 1/2 ||w||^2. Returns the empirical best response.
SolverResult solve_svm_scenarios(const std::vector<Scenario>& samples, std::size_t dim,
                                 double gamma = 0.0, const SolverConfig& config = {});

/// The affine form of one margin constraint: a = -y xi, b = -(1 - gamma).
AffineConstraint margin_constraint(const Scenario& s, double gamma = 0.0);

}  // namespace perfscen
