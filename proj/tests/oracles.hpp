// oracles.hpp
//
// Independent reference computations used only by the tests.
#pragma once

#include <boost/math/distributions/binomial.hpp>

#include <cmath>
#include <cstdint>

namespace oracle {

// Direct summation with the binomial coefficient built multiplicatively in
// long double. Accurate for N up to a few thousand.
inline long double binomial_tail_direct(std::uint64_t n, long double eps, std::uint64_t d) {
    long double total = 0.0L;
    for (std::uint64_t i = 0; i < d && i <= n; ++i) {
        long double coeff = 1.0L;
        for (std::uint64_t k = 0; k < i; ++k) coeff = coeff * static_cast<long double>(n - k) / static_cast<long double>(k + 1);
        total += coeff * std::pow(eps, static_cast<long double>(i)) * std::pow(1.0L - eps, static_cast<long double>(n - i));
    }
    return total;
}

// P[Bin(N, eps) <= d-1] via the regularised incomplete beta function.
inline double binomial_tail_boost(std::uint64_t n, double eps, std::uint64_t d) {
    if (d > n) return 1.0;
    boost::math::binomial_distribution<double> dist(static_cast<double>(n), eps);
    return boost::math::cdf(dist, static_cast<double>(d - 1));
}

// Linear scan from N = d using the direct-summation oracle.
inline std::uint64_t minimal_n_scan(double eps, double beta, std::uint64_t d) {
    for (std::uint64_t n = d;; ++n)
        if (binomial_tail_direct(n, eps, d) <= static_cast<long double>(beta)) return n;
}

}  // namespace oracle

#include <Eigen/Dense>

#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "perfscen/scenario_solver.hpp"

namespace oracle {

// Exact minimiser of q/2||y||^2 + c^T y over {a_i^T y <= b_i} by enumerating
// every candidate support set of size <= dim: the optimum is the feasible
// candidate of least objective. Exponential; small instances only.
struct EnumerationResult {
    Eigen::VectorXd y;
    double objective;
};

inline std::optional<EnumerationResult> enumerate_support_sets(const perfscen::ScenarioProgram& p,
                                                               double feas_tol = 1e-9) {
    const auto d = static_cast<Eigen::Index>(p.dim);
    const Eigen::VectorXd c = p.linear_term.size() ? p.linear_term : Eigen::VectorXd::Zero(d);
    const Eigen::VectorXd y0 = -c / p.quad_weight;
    const std::size_t m = p.constraints.size();
    std::optional<EnumerationResult> best;

    auto consider = [&](const Eigen::VectorXd& y) {
        for (const auto& con : p.constraints)
            if (con.a.dot(y) - con.b > feas_tol) return;
        const double f = 0.5 * p.quad_weight * y.squaredNorm() + c.dot(y);
        if (!best || f < best->objective) best = EnumerationResult{y, f};
    };

    consider(y0);
    std::vector<std::size_t> idx;
    auto recurse = [&](auto&& self, std::size_t start) -> void {
        if (!idx.empty()) {
            const auto k = static_cast<Eigen::Index>(idx.size());
            Eigen::MatrixXd a(k, d);
            Eigen::VectorXd b(k);
            for (Eigen::Index r = 0; r < k; ++r) {
                a.row(r) = p.constraints[idx[static_cast<std::size_t>(r)]].a.transpose();
                b[r] = p.constraints[idx[static_cast<std::size_t>(r)]].b;
            }
            // Projection of y0 onto {a y = b}: y = y0 + a^T mu, (a a^T) mu = b - a y0.
            Eigen::FullPivLU<Eigen::MatrixXd> lu(a * a.transpose());
            if (lu.isInvertible()) consider(y0 + a.transpose() * lu.solve(b - a * y0));
        }
        if (idx.size() == p.dim) return;
        for (std::size_t i = start; i < m; ++i) {
            idx.push_back(i);
            self(self, i + 1);
            idx.pop_back();
        }
    };
    recurse(recurse, 0);
    return best;
}

// Hildreth's dual coordinate ascent for q/2||y||^2 + c^T y over {a_i^T y <= b_i}.
inline Eigen::VectorXd hildreth(const perfscen::ScenarioProgram& p, std::size_t sweeps = 200000, double tol = 1e-14) {
    const auto d = static_cast<Eigen::Index>(p.dim);
    const Eigen::VectorXd c = p.linear_term.size() ? p.linear_term : Eigen::VectorXd::Zero(d);
    const std::size_t m = p.constraints.size();
    std::vector<double> lambda(m, 0.0);
    Eigen::VectorXd y = -c / p.quad_weight;
    for (std::size_t s = 0; s < sweeps; ++s) {
        double change = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const auto& con = p.constraints[i];
            const double aa = con.a.squaredNorm() / p.quad_weight;
            const double viol = con.a.dot(y) - con.b;
            const double next = std::max(0.0, lambda[i] + viol / aa);
            const double delta = next - lambda[i];
            if (delta != 0.0) {
                y -= (delta / p.quad_weight) * con.a;
                lambda[i] = next;
                change = std::max(change, std::abs(delta));
            }
        }
        if (change < tol) break;
    }
    return y;
}

// Hard-margin SVM through the origin in 2-D by angular grid search. For a
// direction u the smallest feasible radius is max_i 1 / (y_i <u, xi_i>) and
// is unimodal in the angle, so the best grid angle is refined around itself.
inline double svm_angular_grid(const std::vector<perfscen::Scenario>& samples, double resolution = 1e-3,
                               double final_resolution = 1e-12) {
    auto radius = [&](double theta) {
        const double ux = std::cos(theta), uy = std::sin(theta);
        double r = 0.0;
        for (const auto& s : samples) {
            const double m = s.label * (ux * s.features[0] + uy * s.features[1]);
            if (m <= 0.0) return std::numeric_limits<double>::infinity();
            r = std::max(r, 1.0 / m);
        }
        return r;
    };
    const double two_pi = 2.0 * std::numbers::pi;
    double best_theta = 0.0;
    double best_r = std::numeric_limits<double>::infinity();
    const auto steps = static_cast<std::size_t>(std::ceil(two_pi / resolution));
    for (std::size_t k = 0; k < steps; ++k) {
        const double theta = static_cast<double>(k) * resolution;
        const double r = radius(theta);
        if (r < best_r) {
            best_r = r;
            best_theta = theta;
        }
    }
    for (double h = resolution; h > final_resolution; h /= 10.0) {
        const double lo = best_theta - h;
        for (int k = 0; k <= 20; ++k) {
            const double theta = lo + k * (h / 10.0);
            const double r = radius(theta);
            if (r < best_r) {
                best_r = r;
                best_theta = theta;
            }
        }
    }
    return 0.5 * best_r * best_r;
}

}  // namespace oracle
