// game.hpp
//
// Finite game between an optimizer choosing a decision from a grid and an
// agent that reweights a baseline outcome measure nu0. The agent maximises
//
//     U(nu; x) = sum_i r(x, xi_i) nu_i - tau * KL(nu || nu0),
//
// whose maximiser is the exponential tilt nu_i ~ nu0_i exp(r(x, xi_i)/tau).
// Since the action only matters through the measure it induces, the agent's
// action is represented by that measure directly.
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace perfscen::game {

struct DiscreteMeasure {
    std::vector<double> weights;

    void validate() const;  // nonnegative, sums to 1 within 1e-12
    std::size_t size() const { return weights.size(); }
};

struct AgentSpec {
    Eigen::MatrixXd reward;  // reward(j, i) = r(x_j, xi_i)
    double tau{1.0};         // +inf: the agent never deviates from nu0
};

// Tabulated game. Constraint satisfaction of decision y_j at outcome xi_i is
// g(j, i) <= gamma (closed inequality).
struct GameSpec {
    std::vector<std::string> decision_names;
    std::vector<std::string> outcome_names;
    AgentSpec agent;
    DiscreteMeasure baseline;
    Eigen::MatrixXd constraint;  // g(j, i)
    double gamma{0.0};
    double epsilon{0.1};
    Eigen::VectorXd objective;  // f(y_j)

    std::size_t n_decisions() const { return static_cast<std::size_t>(objective.size()); }
    std::size_t n_outcomes() const { return baseline.size(); }

    void validate() const;
};

// Parametric form of the guardrail game: decisions are weight vectors w,
// outcomes are labelled embeddings (xi, y), the agent reward is
// reward_sign * y <w, xi>, g = 1 - y <w, xi>, f = 1/2 ||w||^2.
struct MarginGameParams {
    std::vector<Eigen::VectorXd> decisions;
    std::vector<Eigen::VectorXd> outcomes;
    std::vector<int> labels;
    std::vector<double> baseline;
    double tau{1.0};
    double reward_sign{1.0};
    double gamma{0.0};
    double epsilon{0.1};
};

GameSpec make_margin_game(const MarginGameParams& params);

class NoFeasibleDecision : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AbsoluteContinuityViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// nu_i ~ nu0_i exp(r_i / tau), shifted by max r before exponentiating.
DiscreteMeasure kl_tilt(const DiscreteMeasure& baseline, const Eigen::VectorXd& reward_values, double tau);

/// sum_i r_i nu_i - tau * sum_i nu_i ln(nu_i / nu0_i), with 0 ln 0 = 0.
double agent_utility(const DiscreteMeasure& baseline, const DiscreteMeasure& candidate,
                     const Eigen::VectorXd& reward_values, double tau);

/// Violation mass of decision j under `induced`: sum of nu_i with g(j,i) > gamma.
double violation_mass(const GameSpec& game, std::size_t decision, const DiscreteMeasure& induced);

/// Lowest-index minimiser of f among decisions with violation <= epsilon.
std::size_t optimizer_best_response(const GameSpec& game, const DiscreteMeasure& induced);

/// The agent's best response to decision j.
DiscreteMeasure agent_best_response(const GameSpec& game, std::size_t decision);

struct Equilibrium {
    std::size_t decision{0};
    DiscreteMeasure induced;
};

/// Every grid decision x with optimizer_best_response(kl_tilt(x)) == x.
/// Grids above 10^4 decisions are rejected.
std::vector<Equilibrium> nash_search(const GameSpec& game);

/// Fixed points of the composed map Phi, computed without the game-layer
/// helpers: the induced law enters only through the likelihood ratio
/// L(x, xi) = exp(r(x, xi)/tau) / E_nu0[exp(r(x, .)/tau)], and feasibility is
/// checked as satisfaction mass >= 1 - epsilon.
std::vector<std::size_t> phi_fixed_points(const GameSpec& game);

/// L(x_j, xi_i) for every outcome; all ones when tau is infinite.
std::vector<double> likelihood_ratio(const GameSpec& game, std::size_t decision);

/// Phi(x_j) via the same independent path; nullopt when no decision is feasible.
std::optional<std::size_t> phi_map(const GameSpec& game, std::size_t decision);

inline constexpr std::size_t kMaxGridSize = 10000;

}  // namespace perfscen::game
