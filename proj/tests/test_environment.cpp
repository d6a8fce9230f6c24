#include "doctest.h"

#include <cmath>
#include <limits>

#include "perfscen/environment.hpp"
#include "perfscen/error.hpp"

using namespace perfscen;

namespace {

Eigen::VectorXd v2(double a, double b) { return Eigen::Vector2d(a, b); }

EnvironmentMap gaussian_env(double lambda, double kappa, int sign = 1,
                            RespondLabels labels = RespondLabels::both) {
    GaussianMixtureBaseline g;
    g.mean_pos = v2(1.5, 0.5);
    g.mean_neg = v2(-1.0, -0.5);
    g.variances = v2(0.25, 0.5);
    g.prob_pos = 0.3;
    g.prob_neg = 0.7;
    return EnvironmentMap(g, ResponseParams{lambda, kappa, sign, labels});
}

EnvironmentMap point_env(const Scenario& s, ResponseParams r = {}) {
    return EnvironmentMap(DiscreteBaseline::from_scenarios({s}, {1.0}), r);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("alpha") {
    CHECK(alpha(ResponseParams{1.0, 0.0}, 7.0) == 1.0);
    CHECK(alpha(ResponseParams{1.0, 1.0}, 1.0) == 0.5);
    CHECK(alpha(ResponseParams{2.0, 3.0}, 0.0) == 0.5);
    CHECK(alpha(ResponseParams{std::numeric_limits<double>::infinity(), 1.0}, 3.0) == 0.0);
    CHECK_THROWS_AS(ResponseParams({0.0, 1.0}).validate(), InvalidParameter);
    CHECK_THROWS_AS(ResponseParams({1.0, -1.0}).validate(), InvalidParameter);
    CHECK_THROWS_AS(ResponseParams({1.0, 0.0, 2}).validate(), InvalidParameter);
}

TEST_CASE("respond examples") {
    const auto env = gaussian_env(1.0, 1.0);
    const Scenario s{v2(3, 0), -1};
    CHECK(respond(env, v2(0, 0), s).features == s.features);

    const auto r = respond(env, v2(1, 0), s);
    CHECK(r.features.isApprox(v2(2.5, 0)));
    CHECK(r.label == -1);

    const auto env0 = gaussian_env(1.0, 0.0);
    CHECK(respond(env0, v2(1, 0), Scenario{v2(0, 0), 1}).features == v2(1, 0));

    const auto benign_fixed = gaussian_env(1.0, 0.0, 1, RespondLabels::malicious_only);
    CHECK(respond(benign_fixed, v2(1, 0), Scenario{v2(0, 0), 1}).features == v2(0, 0));
    CHECK(respond(benign_fixed, v2(1, 0), Scenario{v2(0, 0), -1}).features == v2(-1, 0));

    const auto flipped = gaussian_env(1.0, 0.0, -1);
    CHECK(respond(flipped, v2(1, 0), Scenario{v2(0, 0), 1}).features == v2(-1, 0));

    CHECK_THROWS_AS(respond(env, Eigen::Vector3d(1, 0, 0), s), InvalidParameter);
}

TEST_CASE("response displacement is bounded") {
    for (double kappa : {0.0, 0.5, 4.0}) {
        const auto env = gaussian_env(2.0, kappa);
        for (double scale : {0.1, 1.0, 10.0, 1000.0}) {
            const Eigen::VectorXd w = v2(0.6, -0.8) * scale;
            const Scenario s{v2(0.3, 0.1), -1};
            const double shift = (respond(env, w, s).features - s.features).norm();
            CHECK(shift == doctest::Approx(alpha(env.response(), w.norm()) * w.norm()));
            CHECK(shift <= w.norm() / 2.0 + 1e-12);
            if (kappa > 0) CHECK(shift <= 1.0 / kappa + 1e-12);
        }
    }
}

TEST_CASE("baseline validation") {
    CHECK_THROWS_AS(DiscreteBaseline::from_scenarios({{v2(0, 0), 1}}, {0.9}), InvalidParameter);
    CHECK_THROWS_AS(DiscreteBaseline::from_scenarios({{v2(0, 0), 1}, {v2(1, 0), 1}}, {1.5, -0.5}),
                    InvalidParameter);
    CHECK_THROWS_AS(DiscreteBaseline::from_scenarios({{v2(0, 0), 2}}, {1.0}), InvalidParameter);
    GaussianMixtureBaseline g;
    g.mean_pos = v2(0, 0);
    g.mean_neg = v2(0, 0);
    g.variances = v2(1, 0);
    CHECK_THROWS_AS(g.validate(), InvalidParameter);
    g.variances = v2(1, 1);
    g.prob_pos = 0.6;
    CHECK_THROWS_AS(g.validate(), InvalidParameter);
}

TEST_CASE("sample_induced") {
    SUBCASE("point mass") {
        const auto env = point_env({v2(1, 2), -1}, ResponseParams{1.0, 0.0});
        const auto s = sample_induced(env, v2(1, 0), 5, StreamKey(1, 0, StreamPurpose::train));
        REQUIRE(s.size() == 5);
        for (const auto& x : s) {
            CHECK(x.features == v2(0, 2));
            CHECK(x.label == -1);
        }
    }
    SUBCASE("determinism and stream independence") {
        const auto env = gaussian_env(1.0, 1.0);
        const StreamKey key(42, 3, StreamPurpose::train);
        const auto a = sample_induced(env, v2(0.5, 0.5), 200, key);
        const auto b = sample_induced(env, v2(0.5, 0.5), 200, key);
        const auto prefix = sample_induced(env, v2(0.5, 0.5), 50, key);
        const auto other = sample_induced(env, v2(0.5, 0.5), 200, StreamKey(42, 4, StreamPurpose::train));
        bool same = true, differs = false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            same = same && a[i].features == b[i].features && a[i].label == b[i].label;
            differs = differs || a[i].features != other[i].features;
        }
        CHECK(same);
        CHECK(differs);
        for (std::size_t i = 0; i < prefix.size(); ++i) CHECK(prefix[i].features == a[i].features);
    }
    SUBCASE("class frequencies") {
        const auto env = gaussian_env(1.0, 1.0);
        const std::size_t n = 100000;
        const auto s = sample_induced(env, v2(0, 0), n, StreamKey(7, 0, StreamPurpose::train));
        double pos = 0;
        for (const auto& x : s) pos += x.label == 1;
        const double p = 0.3;
        CHECK(std::abs(pos / n - p) <= 3.0 * std::sqrt(p * (1 - p) / n));

        const auto disc = EnvironmentMap(
            DiscreteBaseline::from_scenarios({{v2(0, 0), 1}, {v2(1, 0), -1}, {v2(2, 0), -1}}, {0.2, 0.5, 0.3}),
            ResponseParams{});
        const auto d = sample_induced(disc, v2(0, 0), n, StreamKey(7, 0, StreamPurpose::train));
        double c[3] = {0, 0, 0};
        for (const auto& x : d) c[static_cast<int>(x.features[0])] += 1;
        const double w[3] = {0.2, 0.5, 0.3};
        for (int k = 0; k < 3; ++k) CHECK(std::abs(c[k] / n - w[k]) <= 3.0 * std::sqrt(w[k] * (1 - w[k]) / n));
    }
    SUBCASE("gaussian moments") {
        const auto env = gaussian_env(std::numeric_limits<double>::infinity(), 0.0);
        const std::size_t n = 100000;
        const auto s = sample_induced(env, v2(3, 3), n, StreamKey(9, 0, StreamPurpose::train));
        Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sq = Eigen::Vector2d::Zero();
        std::size_t m = 0;
        for (const auto& x : s)
            if (x.label == -1) {
                sum += x.features;
                sq += (x.features - v2(-1.0, -0.5)).cwiseAbs2();
                ++m;
            }
        const Eigen::Vector2d mean = sum / double(m);
        CHECK(std::abs(mean[0] + 1.0) <= 4.0 * std::sqrt(0.25 / m));
        CHECK(std::abs(mean[1] + 0.5) <= 4.0 * std::sqrt(0.5 / m));
        CHECK(sq[0] / m == doctest::Approx(0.25).epsilon(0.02));
        CHECK(sq[1] / m == doctest::Approx(0.5).epsilon(0.02));
    }
}

TEST_CASE("violation_probability exact and Monte Carlo") {
    SUBCASE("discrete") {
        const auto pm = point_env({v2(2, 0), 1}, ResponseParams{std::numeric_limits<double>::infinity(), 0});
        CHECK(violation_probability(pm, v2(1, 0), v2(1, 0), ExactDiscrete{}) == 0.0);

        const auto two = EnvironmentMap(
            DiscreteBaseline::from_scenarios({{v2(2, 0), 1}, {v2(0.5, 0), 1}}, {0.5, 0.5}),
            ResponseParams{std::numeric_limits<double>::infinity(), 0});
        CHECK(violation_probability(two, v2(1, 0), v2(1, 0), ExactDiscrete{}) == 0.5);
        CHECK(violation_probability(two, v2(1, 0), v2(1, 0), ExactDiscrete{}, 0.6) == 0.0);

        // Response lifts margins by alpha ||w||^2 = 1 here.
        const auto moving = EnvironmentMap(
            DiscreteBaseline::from_scenarios({{v2(2, 0), 1}, {v2(0.5, 0), 1}}, {0.5, 0.5}), ResponseParams{1, 0});
        CHECK(violation_probability(moving, v2(1, 0), v2(1, 0), ExactDiscrete{}) == 0.0);
        CHECK(violation_probability(moving, v2(1, 0), v2(0, 0), ExactDiscrete{}) == 0.5);

        CHECK_THROWS_AS(violation_probability(gaussian_env(1, 1), v2(1, 0), v2(1, 0), ExactDiscrete{}),
                        InvalidParameter);
    }
    SUBCASE("gaussian against the 1-D CDF reduction") {
        for (double lambda : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
            const auto env = gaussian_env(lambda, 0.5);
            const Eigen::VectorXd w = v2(1.2, 0.0);
            const double a = alpha(env.response(), w.norm()) * w.squaredNorm();
            // Violation: y w1 xi01 + a < 1.
            const double pos = normal_cdf(((1 - a) / 1.2 - 1.5) / 0.5);
            const double neg = 1.0 - normal_cdf((-(1 - a) / 1.2 + 1.0) / 0.5);
            const double exact = 0.3 * pos + 0.7 * neg;
            const std::size_t n = 100000;
            const double mc =
                violation_probability(env, w, w, MonteCarlo{n, StreamKey(5, 0, StreamPurpose::evaluate)});
            CHECK(std::abs(mc - exact) <= 3.0 * std::sqrt(exact * (1 - exact) / n));
        }
    }
}

TEST_CASE("margin identity") {
    const auto env = gaussian_env(1.0, 1.0);
    CHECK(margin_identity_check(env, v2(0, 0), {v2(3, 0), -1}) == 0.0);
    CHECK(margin_identity_check(env, v2(1, 0), {v2(3, 0), -1}) <= 1e-15);

    CounterRng rng(StreamKey(123, 0, StreamPurpose::check), 0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double lambda = 0.1 + 3 * rng.uniform(), kappa = 3 * rng.uniform();
        const auto e = gaussian_env(lambda, kappa);
        const Eigen::VectorXd w = v2(3 * rng.normal(), 3 * rng.normal());
        const Scenario s{v2(3 * rng.normal(), 3 * rng.normal()), rng.uniform() < 0.5 ? 1 : -1};
        worst = std::max(worst, margin_identity_check(e, w, s));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("weak continuity at matched seeds") {
    const auto env = gaussian_env(1.0, 1.0);
    const Eigen::VectorXd w = v2(0.7, -0.3);
    const StreamKey key(31, 0, StreamPurpose::check);
    auto mean_tanh = [&](const Eigen::VectorXd& ww) {
        double acc = 0;
        for (const auto& s : sample_induced(env, ww, 20000, key)) acc += std::tanh(s.features.sum());
        return acc / 20000.0;
    };
    const double base = mean_tanh(w);
    double prev = std::numeric_limits<double>::infinity();
    for (double h : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const double diff = std::abs(mean_tanh(w + v2(h, h)) - base);
        CHECK(diff <= prev);
        CHECK(diff <= 4.0 * h);
        prev = diff;
    }
}

TEST_CASE("boundary regularity") {
    const auto env = gaussian_env(1.0, 1.0);
    const Eigen::VectorXd w = v2(0.9, 0.4);
    const auto s = sample_induced(env, w, 100000, StreamKey(17, 0, StreamPurpose::check));
    double prev = 1.0;
    for (double delta : {1e-1, 1e-2, 1e-3}) {
        double frac = 0;
        for (const auto& x : s) frac += std::abs(x.label * w.dot(x.features) - 1.0) < delta;
        frac /= static_cast<double>(s.size());
        CHECK(frac < prev);
        CHECK(frac <= 2.0 * delta);
        prev = frac;
    }
}

TEST_CASE("uniform ball mixture") {
    UniformBallMixture u;
    u.centre_pos = v2(1.0, 2.0);
    u.centre_neg = v2(-3.0, 0.0);
    u.radius = 0.5;
    u.prob_pos = 0.4;
    u.prob_neg = 0.6;
    const EnvironmentMap env(u, ResponseParams{std::numeric_limits<double>::infinity(), 0.0});
    const std::size_t n = 100000;
    const auto s = sample_induced(env, v2(0, 0), n, StreamKey(3, 0, StreamPurpose::train));
    double pos = 0, inner = 0, max_r = 0;
    for (const auto& x : s) {
        const double r = (x.features - (x.label == 1 ? u.centre_pos : u.centre_neg)).norm();
        max_r = std::max(max_r, r);
        inner += r <= 0.25;
        pos += x.label == 1;
    }
    CHECK(max_r <= 0.5);
    CHECK(max_r >= 0.499);
    // Area fraction of the inner half-radius disc is 1/4.
    CHECK(std::abs(inner / n - 0.25) <= 3.0 * std::sqrt(0.25 * 0.75 / n));
    CHECK(std::abs(pos / n - 0.4) <= 3.0 * std::sqrt(0.4 * 0.6 / n));

    u.radius = 0.0;
    CHECK_THROWS_AS(EnvironmentMap(u, ResponseParams{}), InvalidParameter);
    u.radius = 1.0;
    u.centre_neg = Eigen::Vector3d::Zero();
    CHECK_THROWS_AS(EnvironmentMap(u, ResponseParams{}), InvalidParameter);
}
