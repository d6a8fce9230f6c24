#include "doctest.h"

#include <cmath>
#include <limits>

#include "perfscen/bounds.hpp"
#include "perfscen/error.hpp"
#include "perfscen/fixed_point.hpp"

using namespace perfscen;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }
Eigen::VectorXd v2(double a, double b) { return Eigen::Vector2d(a, b); }

EnvironmentMap tight_gaussian(double lambda, double kappa, double sd) {
    GaussianMixtureBaseline g;
    g.mean_pos = v2(1.0, 1.0);
    g.mean_neg = v2(-1.0, -0.5);
    g.variances = v2(sd * sd, sd * sd);
    return EnvironmentMap(g, ResponseParams{lambda, kappa});
}

RunSettings settings_2d() {
    RunSettings s;
    s.problem.dim = 2;
    s.evaluation.n_eval = 2000;
    return s;
}

// Least-squares slope of log(residual) against t.
double log_slope(const Trace& tr, std::size_t from, std::size_t to) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (std::size_t t = from; t < to; ++t) {
        const double y = std::log(*tr.states[t].residual);
        sx += t;
        sy += y;
        sxx += double(t) * t;
        sxy += t * y;
        n += 1;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("sample_size schedule") {
    Schedule s;
    CHECK(sample_size(s, 0) == 20);
    CHECK(sample_size(s, 9) == 32);
    std::size_t prev = 0;
    bool monotone = true;
    for (std::size_t t = 0; t <= 10000; ++t) {
        const std::size_t n = sample_size(s, t);
        monotone = monotone && n >= prev;
        CHECK_MESSAGE(n == 20 + static_cast<std::size_t>(std::ceil(5.0 * std::log1p(double(t)))), t);
        prev = n;
    }
    CHECK(monotone);
    s.n_max = 25;
    CHECK(sample_size(s, 1000) == 25);
    s.c_log = 0;
    CHECK(sample_size(s, 1000) == 20);
}

TEST_CASE("schedule validation") {
    ProblemSpec p;
    Schedule s;
    s.n0 = 2;
    CHECK_THROWS_AS(s.validate(p), InvalidParameter);
    s.n0 = 20;
    s.c_log = -1;
    CHECK_THROWS_AS(s.validate(p), InvalidParameter);
    s.c_log = 5;
    s.enforce_bound_floor = true;
    CHECK_THROWS_AS(s.validate(p), InvalidParameter);
    s.n0 = bounds::minimal_sample_size(p.epsilon, p.beta, p.dim).n_samples;
    CHECK_NOTHROW(s.validate(p));
    p.epsilon = 1.5;
    CHECK_THROWS_AS(p.validate(), InvalidParameter);
}

TEST_CASE("run_deterministic") {
    SUBCASE("affine contraction") {
        const PhiOracle phi = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(0.5 * x.array() + 1.0); };
        const auto tr = run_deterministic(phi, v1(0.0), 40, 0.0);
        REQUIRE(tr.states.size() == 41);
        for (std::size_t t = 0; t <= 40; ++t)
            CHECK(std::abs(std::abs(tr.states[t].iterate[0] - 2.0) - 2.0 * std::ldexp(1.0, -int(t))) <= 1e-12);
        CHECK(std::abs(log_slope(tr, 0, 30) - std::log(0.5)) <= 0.01 * std::log(2.0));
        const auto conv = run_deterministic(phi, v1(0.0), 200, 1e-9);
        CHECK(conv.summary.converged);
        CHECK(std::abs(conv.summary.final_iterate[0] - 2.0) <= 1e-6);
    }
    SUBCASE("identity") {
        const PhiOracle phi = [](const Eigen::VectorXd& x) { return x; };
        const auto tr = run_deterministic(phi, v2(3, 4), 10, 1e-6);
        CHECK(tr.summary.converged);
        CHECK(tr.summary.steps == 1);
        CHECK(*tr.states[0].residual == 0.0);
    }
    SUBCASE("slow contraction") {
        const PhiOracle phi = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(0.9 * x); };
        const auto tr = run_deterministic(phi, v1(1.0), 1000, 1e-6);
        CHECK(tr.summary.converged);
        CHECK(tr.summary.steps == static_cast<std::size_t>(std::ceil(std::log(1e-6) / std::log(0.9))));
    }
    SUBCASE("zero steps") {
        const PhiOracle phi = [](const Eigen::VectorXd& x) { return x; };
        const auto tr = run_deterministic(phi, v1(1.0), 0, 1e-6);
        CHECK(tr.states.size() == 1);
        CHECK_FALSE(tr.summary.converged);
    }
}

TEST_CASE("estimate_contraction") {
    const PhiOracle affine = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(0.5 * x.array() + 1.0); };
    const PhiOracle constant = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Ones(x.size()); };
    const auto probes = coordinate_probes(v2(0.3, -2.0), 0.7);
    CHECK(probes.size() == 2);
    CHECK(estimate_contraction(affine, probes) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(estimate_contraction(constant, probes) == 0.0);
    CHECK_THROWS_AS(estimate_contraction(affine, {{v1(1), v1(1)}}), InvalidParameter);
}

TEST_CASE("stochastic step on a point mass") {
    const auto env = EnvironmentMap(DiscreteBaseline::from_scenarios({{v2(1, 0), 1}}, {1.0}),
                                    ResponseParams{kInf, 0});
    RunSettings s = settings_2d();
    s.stopping.max_steps = 6;
    s.stopping.residual_tol = 0.0;
    s.stopping.patience = 10;
    const auto tr = run(env, s, 5);
    REQUIRE(tr.states.size() == 7);
    CHECK((tr.states[1].iterate - v2(1, 0)).norm() <= 1e-12);
    CHECK(*tr.states[0].residual == doctest::Approx(1.0));
    for (std::size_t t = 1; t < 6; ++t) CHECK(*tr.states[t].residual == 0.0);
    CHECK(*tr.states[3].violation_estimate == 0.0);
    CHECK_FALSE(tr.states.back().residual.has_value());
}

TEST_CASE("infeasible step keeps the iterate") {
    // Same point with both labels: no separating w exists.
    const auto env = EnvironmentMap(
        DiscreteBaseline::from_scenarios({{v2(1, 0), 1}, {v2(1, 0), -1}}, {0.5, 0.5}), ResponseParams{kInf, 0});
    ProblemSpec p;
    Schedule sch;
    bool flagged = false;
    for (std::uint64_t seed = 0; seed < 5 && !flagged; ++seed) {
        const auto step = step_stochastic(env, p, v2(0.2, 0.3), 0, sch, seed);
        flagged = step.status == SolverStatus::infeasible_fallback;
        if (flagged) {
            CHECK(step.next == v2(0.2, 0.3));
            CHECK(step.residual == 0.0);
        }
    }
    CHECK(flagged);

    RunSettings s = settings_2d();
    s.stopping.max_steps = 5;
    const auto tr = run(env, s, 1);
    CHECK_FALSE(tr.summary.converged);  // fallback steps never count toward patience
}

TEST_CASE("1-D point-mass toy converges to the closed-form fixed point") {
    // xi = 2 + w for y = +1, so phi(w) = 1 / (2 + w) and w* = sqrt(2) - 1.
    const auto env = EnvironmentMap(DiscreteBaseline::from_scenarios({{v1(2.0), 1}}, {1.0}), ResponseParams{1.0, 0.0});
    RunSettings s;
    s.problem.dim = 1;
    s.evaluation.n_eval = 100;
    s.stopping.residual_tol = 1e-9;
    s.stopping.patience = 1;
    const auto tr = run(env, s, 3);
    CHECK(tr.summary.converged);
    CHECK(std::abs(tr.summary.final_iterate[0] - (std::sqrt(2.0) - 1.0)) <= 1e-6);
    // Geometric decay with rate |phi'(w*)| = 1 / (1 + sqrt 2)^2.
    const double k = 1.0 / std::pow(1.0 + std::sqrt(2.0), 2);
    CHECK(std::abs(log_slope(tr, 1, 8) - std::log(k)) <= 0.05 * std::abs(std::log(k)));
}

TEST_CASE("static control") {
    const auto env = tight_gaussian(kInf, 0.0, 1e-3);
    RunSettings s = settings_2d();
    const auto tr = run(env, s, 11);
    CHECK(tr.summary.converged);
    CHECK(tr.summary.steps <= 5);

    // Two consecutive large-N steps differ by sampling noise only.
    const auto noisy = tight_gaussian(kInf, 0.0, 0.3);
    ProblemSpec p;
    Schedule big;
    big.n0 = 2000;
    big.c_log = 0;
    const auto a = step_stochastic(noisy, p, v2(0, 0), 0, big, 21);
    const auto b = step_stochastic(noisy, p, a.next, 1, big, 21);
    const auto stats = measure_scatter(noisy, p, v2(0, 0), 2000, 30, 99);
    CHECK(stats.feasible_runs == 30);
    CHECK(b.residual <= 2.0 * stats.scatter * std::sqrt(2.0));
    CHECK(b.residual > 0.0);
}

TEST_CASE("run determinism and edge cases") {
    const auto env = tight_gaussian(1.0, 1.0, 0.05);
    RunSettings s = settings_2d();
    s.stopping.max_steps = 8;
    s.record_snapshots = true;
    const auto a = run(env, s, 2024);
    const auto b = run(env, s, 2024);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t t = 0; t < a.states.size(); ++t) {
        CHECK(a.states[t].iterate == b.states[t].iterate);
        CHECK(a.states[t].residual == b.states[t].residual);
        CHECK(a.states[t].violation_estimate == b.states[t].violation_estimate);
    }
    CHECK(a.snapshots.size() == a.states.size() - 1);
    for (const auto& snap : a.snapshots) CHECK(snap.samples.size() == sample_size(s.schedule, snap.t));

    s.stopping.max_steps = 0;
    const auto empty = run(env, s, 1);
    CHECK(empty.states.size() == 1);
    CHECK_FALSE(empty.summary.converged);
    CHECK(empty.summary.steps == 0);
    CHECK(empty.states[0].iterate == v2(0, 0));

    s.initial_iterate = Eigen::Vector3d(1, 2, 3);  // wrong dimension
    CHECK_THROWS_AS(run(env, s, 1), InvalidParameter);
}

TEST_CASE("scenario oracle uses common random numbers") {
    const auto env = tight_gaussian(1.0, 1.0, 0.05);
    ProblemSpec p;
    const auto phi = make_scenario_oracle(env, p, 500, StreamKey(4, 0, StreamPurpose::oracle));
    CHECK(phi(v2(0.3, 0.3)) == phi(v2(0.3, 0.3)));
    CHECK(oracle_sample_size(p) == 10 * bounds::minimal_sample_size(0.1, 1e-3, 2).n_samples);
    const double k = estimate_contraction(phi, coordinate_probes(v2(0.5, 0.5), 0.05));
    CHECK(k >= 0.0);
    CHECK(k < 1.0);
}
