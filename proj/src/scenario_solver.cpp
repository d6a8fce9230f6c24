#include "perfscen/scenario_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "perfscen/error.hpp"

namespace perfscen {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroDirection = 1e-12;
constexpr double kPositiveDual = 1e-12;

// Working form after the change of variables z = sqrt(q) y + c / sqrt(q):
//     minimize 1/2 ||z||^2   subject to   n_i^T z >= c_i,
// with every n_i scaled to unit length.
struct WorkingProblem {
    Eigen::MatrixXd normals;  // d x m, unit columns
    Eigen::VectorXd rhs;      // m
    Eigen::VectorXd scale;    // ||a_i|| / sqrt(q), to map multipliers back
};

// QR factorisation of the active normals, recomputed whenever the set changes.
struct ActiveFactor {
    Eigen::MatrixXd q;  // d x d orthogonal
    Eigen::MatrixXd r;  // k x k upper triangular
    std::size_t k{0};

    void refresh(const Eigen::MatrixXd& normals, const std::vector<std::size_t>& active, std::size_t d) {
        k = active.size();
        if (k == 0) {
            q = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
            r.resize(0, 0);
            return;
        }
        Eigen::MatrixXd n(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
        for (std::size_t j = 0; j < k; ++j) n.col(static_cast<Eigen::Index>(j)) = normals.col(static_cast<Eigen::Index>(active[j]));
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(n);
        q = qr.householderQ();
        r = qr.matrixQR().topLeftCorner(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)).triangularView<Eigen::Upper>();
    }

    // Primal step direction: component of v orthogonal to the active normals.
    Eigen::VectorXd null_projection(const Eigen::VectorXd& v) const {
        const auto kk = static_cast<Eigen::Index>(k);
        const Eigen::MatrixXd j2 = q.rightCols(q.cols() - kk);
        return j2 * (j2.transpose() * v);
    }

    // Dual step direction: coefficients of v in the span of the active normals.
    Eigen::VectorXd dual_direction(const Eigen::VectorXd& v) const {
        const auto kk = static_cast<Eigen::Index>(k);
        if (kk == 0) return {};
        const Eigen::VectorXd j1v = q.leftCols(kk).transpose() * v;
        return r.triangularView<Eigen::Upper>().solve(j1v);
    }
};

double program_objective(const ScenarioProgram& p, const Eigen::VectorXd& y) {
    double f = 0.5 * p.quad_weight * y.squaredNorm();
    if (p.linear_term.size() > 0) f += p.linear_term.dot(y);
    return f;
}

}  // namespace

void ScenarioProgram::validate() const {
    require(dim >= 1, "dim", "must be >= 1");
    require(std::isfinite(quad_weight) && quad_weight > 0.0, "quad_weight", "must be > 0");
    require(linear_term.size() == 0 || static_cast<std::size_t>(linear_term.size()) == dim,
            "linear_term", "must be empty or have length dim");
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        require(static_cast<std::size_t>(constraints[i].a.size()) == dim, "constraints",
                "constraint " + std::to_string(i) + " has the wrong length");
        require(constraints[i].a.allFinite() && std::isfinite(constraints[i].b), "constraints",
                "constraint " + std::to_string(i) + " is not finite");
    }
}

SolverResult solve(const ScenarioProgram& program, const SolverConfig& config) {
    program.validate();
    const std::size_t d = program.dim;
    const auto di = static_cast<Eigen::Index>(d);
    const double q = program.quad_weight;
    const double sq = std::sqrt(q);
    const Eigen::VectorXd c = program.linear_term.size() > 0 ? program.linear_term : Eigen::VectorXd::Zero(di);

    // Zero rows are either vacuous or certify infeasibility on their own.
    std::vector<std::size_t> kept;
    kept.reserve(program.constraints.size());
    for (std::size_t i = 0; i < program.constraints.size(); ++i) {
        const auto& con = program.constraints[i];
        if (con.a.norm() == 0.0) {
            if (con.b < -config.feasibility_tol)
                throw InfeasibleProgram("constraint " + std::to_string(i) + " reads 0 <= " + std::to_string(con.b));
            continue;
        }
        kept.push_back(i);
    }

    WorkingProblem wp;
    const auto m = static_cast<Eigen::Index>(kept.size());
    wp.normals.resize(di, m);
    wp.rhs.resize(m);
    wp.scale.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& con = program.constraints[kept[static_cast<std::size_t>(j)]];
        const double an = con.a.norm();
        // a^T y <= b  <=>  (-a/sqrt(q))^T z >= -(b + a^T c / q)
        wp.normals.col(j) = -con.a / (an);
        wp.rhs[j] = -(con.b + con.a.dot(c) / q) * sq / an;
        wp.scale[j] = an / sq;
    }

    const std::size_t max_iter = config.max_iterations > 0 ? config.max_iterations
                                                           : 10 * (kept.size() + d) + 100;
    // Constraints are added when violated by more than this (in z units).
    const double add_tol = config.kkt_tol;

    Eigen::VectorXd z = Eigen::VectorXd::Zero(di);
    std::vector<std::size_t> active;  // working indices
    std::vector<double> u;            // multipliers of `active`
    ActiveFactor factor;
    factor.refresh(wp.normals, active, d);

    auto to_y = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd { return zz / sq - c / q; };

    std::size_t iterations = 0;
    while (true) {
        // Step 1: most violated constraint.
        Eigen::Index p = -1;
        double worst = -add_tol;
        if (m > 0) {
            const Eigen::VectorXd slack = wp.normals.transpose() * z - wp.rhs;
            for (Eigen::Index j = 0; j < m; ++j) {
                if (slack[j] < worst) {
                    worst = slack[j];
                    p = j;
                }
            }
        }
        if (p < 0) break;

        const Eigen::VectorXd np = wp.normals.col(p);
        double u_new = 0.0;

        // Step 2: move until p becomes active, dropping blockers as needed.
        while (true) {
            if (++iterations > max_iter)
                throw MaxIterationsReached("scenario solver exceeded " + std::to_string(max_iter) + " iterations",
                                           to_y(z));

            const Eigen::VectorXd step = factor.null_projection(np);
            const Eigen::VectorXd dual = factor.dual_direction(np);

            double t1 = kInf;
            std::size_t drop = 0;
            for (std::size_t j = 0; j < active.size(); ++j) {
                if (dual[static_cast<Eigen::Index>(j)] > kPositiveDual) {
                    const double ratio = u[j] / dual[static_cast<Eigen::Index>(j)];
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = j;
                    }
                }
            }

            double t2 = kInf;
            const double curvature = step.dot(np);
            if (step.norm() > kZeroDirection && curvature > 0.0) {
                const double s_p = np.dot(z) - wp.rhs[p];
                t2 = std::max(0.0, -s_p / curvature);
            }

            const double t = std::min(t1, t2);
            if (!std::isfinite(t))
                throw InfeasibleProgram("scenario constraints have an empty intersection");

            for (std::size_t j = 0; j < active.size(); ++j) u[j] -= t * dual[static_cast<Eigen::Index>(j)];
            u_new += t;

            if (std::isfinite(t2)) z += t * step;

            if (t2 <= t1) {
                active.push_back(static_cast<std::size_t>(p));
                u.push_back(u_new);
                factor.refresh(wp.normals, active, d);
                break;
            }
            active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
            u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
            factor.refresh(wp.normals, active, d);
        }
    }

    // Polish: solve the equality-constrained projection on the final working
    // set directly, keeping it only if it stays feasible.
    if (!active.empty()) {
        const auto kk = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd n(di, kk);
        Eigen::VectorXd rhs(kk);
        for (Eigen::Index j = 0; j < kk; ++j) {
            n.col(j) = wp.normals.col(static_cast<Eigen::Index>(active[static_cast<std::size_t>(j)]));
            rhs[j] = wp.rhs[static_cast<Eigen::Index>(active[static_cast<std::size_t>(j)])];
        }
        const Eigen::VectorXd uu = (n.transpose() * n).ldlt().solve(rhs);
        const Eigen::VectorXd zz = n * uu;
        const bool dual_ok = (uu.array() >= -config.kkt_tol).all() && uu.allFinite();
        const bool primal_ok = m == 0 || ((wp.normals.transpose() * zz - wp.rhs).array() >= -add_tol).all();
        if (dual_ok && primal_ok) {
            z = zz;
            for (Eigen::Index j = 0; j < kk; ++j) u[static_cast<std::size_t>(j)] = std::max(0.0, uu[j]);
        }
    }

    SolverResult result;
    result.optimum = to_y(z);
    result.objective_value = program_objective(program, result.optimum);
    result.iterations = iterations;

    // Multipliers in the original scaling, indexed by original constraint.
    std::vector<double> lambda_full(program.constraints.size(), 0.0);
    for (std::size_t j = 0; j < active.size(); ++j)
        lambda_full[kept[active[j]]] = u[j] / wp.scale[static_cast<Eigen::Index>(active[j])];

    for (std::size_t i = 0; i < program.constraints.size(); ++i) {
        const auto& con = program.constraints[i];
        if (std::abs(con.a.dot(result.optimum) - con.b) <= config.active_tol) {
            result.active_set.push_back(i);
            result.multipliers.push_back(lambda_full[i]);
        }
    }

    // KKT residual: stationarity (relative), primal and dual feasibility, and
    // complementary slackness.
    Eigen::VectorXd grad = q * result.optimum + c;
    double grad_scale = std::max({1.0, q * result.optimum.norm(), c.norm()});
    double primal = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < program.constraints.size(); ++i) {
        const auto& con = program.constraints[i];
        const double gap = con.a.dot(result.optimum) - con.b;
        primal = std::max(primal, gap);
        if (lambda_full[i] != 0.0) {
            grad += lambda_full[i] * con.a;
            grad_scale = std::max(grad_scale, lambda_full[i] * con.a.norm());
            comp = std::max(comp, std::abs(lambda_full[i] * gap));
        }
    }
    result.kkt_residual = std::max({grad.norm() / grad_scale, primal, comp});
    return result;
}

AffineConstraint margin_constraint(const Scenario& s, double gamma) {
    return {-static_cast<double>(s.label) * s.features, -(1.0 - gamma)};
}

SolverResult solve_svm_scenarios(const std::vector<Scenario>& samples, std::size_t dim, double gamma,
                                 const SolverConfig& config) {
    ScenarioProgram program;
    program.dim = dim;
    program.constraints.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        require(static_cast<std::size_t>(s.features.size()) == dim, "samples",
                "sample " + std::to_string(i) + " has the wrong feature dimension");
        require(s.label == 1 || s.label == -1, "samples",
                "sample " + std::to_string(i) + " has a label outside {-1,+1}");
        program.constraints.push_back(margin_constraint(s, gamma));
    }
    return solve(program, config);
}

}  // namespace perfscen
