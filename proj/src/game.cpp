#include "perfscen/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "perfscen/error.hpp"

namespace perfscen::game {

namespace {

constexpr double kMassTol = 1e-12;

}  // namespace

void DiscreteMeasure::validate() const {
    require(!weights.empty(), "weights", "measure needs a nonempty support");
    double total = 0.0;
    for (double p : weights) {
        require(std::isfinite(p) && p >= 0.0, "weights", "weights must be finite and >= 0");
        total += p;
    }
    require(std::abs(total - 1.0) <= kMassTol, "weights", "weights must sum to 1");
}

void GameSpec::validate() const {
    require(objective.size() > 0, "decision_grid", "grid must be nonempty");
    require(n_decisions() <= kMaxGridSize, "decision_grid", "grid exceeds the exhaustive-search bound of 10^4");
    baseline.validate();
    const auto nd = static_cast<Eigen::Index>(n_decisions());
    const auto no = static_cast<Eigen::Index>(n_outcomes());
    require(agent.reward.rows() == nd && agent.reward.cols() == no, "reward", "table must be decisions x outcomes");
    require(constraint.rows() == nd && constraint.cols() == no, "constraint",
            "table must be decisions x outcomes");
    require(agent.reward.allFinite(), "reward", "must be finite on the support");
    require(constraint.allFinite() && objective.allFinite(), "constraint", "tables must be finite");
    require(agent.tau > 0.0, "tau", "must be > 0");
    require(epsilon > 0.0 && epsilon <= 1.0, "epsilon", "must lie in (0,1]");
    require(decision_names.empty() || decision_names.size() == n_decisions(), "decision_names",
            "length must match the grid");
    require(outcome_names.empty() || outcome_names.size() == n_outcomes(), "outcome_names",
            "length must match the support");

    bool any_feasible = false;
    for (std::size_t j = 0; j < n_decisions() && !any_feasible; ++j) {
        const DiscreteMeasure nu = agent_best_response(*this, j);
        for (std::size_t k = 0; k < n_decisions() && !any_feasible; ++k)
            any_feasible = epsilon >= 1.0 || violation_mass(*this, k, nu) <= epsilon;
    }
    require(any_feasible, "decision_grid", "no grid decision is feasible under any induced measure");
}

GameSpec make_margin_game(const MarginGameParams& params) {
    require(!params.decisions.empty(), "decision_grid", "grid must be nonempty");
    require(!params.outcomes.empty(), "outcomes", "support must be nonempty");
    require(params.outcomes.size() == params.labels.size() && params.outcomes.size() == params.baseline.size(),
            "outcomes", "outcomes, labels and baseline weights must have equal length");
    const auto nd = static_cast<Eigen::Index>(params.decisions.size());
    const auto no = static_cast<Eigen::Index>(params.outcomes.size());

    GameSpec game;
    game.agent.reward.resize(nd, no);
    game.agent.tau = params.tau;
    game.constraint.resize(nd, no);
    game.objective.resize(nd);
    game.baseline.weights = params.baseline;
    game.gamma = params.gamma;
    game.epsilon = params.epsilon;
    for (Eigen::Index j = 0; j < nd; ++j) {
        const Eigen::VectorXd& w = params.decisions[static_cast<std::size_t>(j)];
        game.objective[j] = 0.5 * w.squaredNorm();
        for (Eigen::Index i = 0; i < no; ++i) {
            const auto& xi = params.outcomes[static_cast<std::size_t>(i)];
            require(xi.size() == w.size(), "outcomes", "outcome and decision dimensions differ");
            const int y = params.labels[static_cast<std::size_t>(i)];
            require(y == 1 || y == -1, "labels", "labels must be +1 or -1");
            const double margin = y * w.dot(xi);
            game.agent.reward(j, i) = params.reward_sign * margin;
            game.constraint(j, i) = 1.0 - margin;
        }
    }
    return game;
}

DiscreteMeasure kl_tilt(const DiscreteMeasure& baseline, const Eigen::VectorXd& reward_values, double tau) {
    require(static_cast<std::size_t>(reward_values.size()) == baseline.size(), "reward_values",
            "length must match the support");
    require(tau > 0.0, "tau", "must be > 0");
    if (std::isinf(tau)) return baseline;

    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < baseline.size(); ++i)
        if (baseline.weights[i] > 0.0) shift = std::max(shift, reward_values[static_cast<Eigen::Index>(i)]);

    DiscreteMeasure out;
    out.weights.resize(baseline.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < baseline.size(); ++i) {
        if (baseline.weights[i] == 0.0) continue;
        out.weights[i] = baseline.weights[i] * std::exp((reward_values[static_cast<Eigen::Index>(i)] - shift) / tau);
        total += out.weights[i];
    }
    for (double& p : out.weights) p /= total;
    return out;
}

double agent_utility(const DiscreteMeasure& baseline, const DiscreteMeasure& candidate,
                     const Eigen::VectorXd& reward_values, double tau) {
    require(candidate.size() == baseline.size(), "candidate", "support mismatch");
    require(static_cast<std::size_t>(reward_values.size()) == baseline.size(), "reward_values",
            "length must match the support");
    double reward = 0.0;
    double kl = 0.0;
    for (std::size_t i = 0; i < baseline.size(); ++i) {
        const double nu = candidate.weights[i];
        if (nu == 0.0) continue;
        if (baseline.weights[i] == 0.0)
            throw AbsoluteContinuityViolation("candidate puts mass on outcome " + std::to_string(i) +
                                              " where the baseline has none");
        reward += reward_values[static_cast<Eigen::Index>(i)] * nu;
        kl += nu * std::log(nu / baseline.weights[i]);
    }
    if (std::isinf(tau)) return kl > 0.0 ? -std::numeric_limits<double>::infinity() : reward;
    return reward - tau * kl;
}

double violation_mass(const GameSpec& game, std::size_t decision, const DiscreteMeasure& induced) {
    double mass = 0.0;
    const auto j = static_cast<Eigen::Index>(decision);
    for (std::size_t i = 0; i < induced.size(); ++i)
        if (game.constraint(j, static_cast<Eigen::Index>(i)) > game.gamma) mass += induced.weights[i];
    return mass;
}

std::size_t optimizer_best_response(const GameSpec& game, const DiscreteMeasure& induced) {
    require(induced.size() == game.n_outcomes(), "induced", "support mismatch");
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < game.n_decisions(); ++j) {
        const bool feasible = game.epsilon >= 1.0 || violation_mass(game, j, induced) <= game.epsilon;
        if (!feasible) continue;
        if (!best || game.objective[static_cast<Eigen::Index>(j)] < game.objective[static_cast<Eigen::Index>(*best)])
            best = j;
    }
    if (!best) throw NoFeasibleDecision("no grid decision satisfies the chance constraint");
    return *best;
}

DiscreteMeasure agent_best_response(const GameSpec& game, std::size_t decision) {
    return kl_tilt(game.baseline, game.agent.reward.row(static_cast<Eigen::Index>(decision)).transpose(),
                   game.agent.tau);
}

std::vector<Equilibrium> nash_search(const GameSpec& game) {
    require(game.n_decisions() <= kMaxGridSize, "decision_grid", "grid exceeds the exhaustive-search bound");
    std::vector<Equilibrium> out;
    for (std::size_t j = 0; j < game.n_decisions(); ++j) {
        DiscreteMeasure nu = agent_best_response(game, j);
        try {
            if (optimizer_best_response(game, nu) == j) out.push_back({j, std::move(nu)});
        } catch (const NoFeasibleDecision&) {
        }
    }
    return out;
}

std::vector<double> likelihood_ratio(const GameSpec& game, std::size_t decision) {
    const std::size_t no = game.n_outcomes();
    const auto row = static_cast<Eigen::Index>(decision);
    std::vector<double> ratio(no, 1.0);
    if (std::isinf(game.agent.tau)) return ratio;

    // Centre on the nu0-mean reward; long double keeps E_nu0[L] = 1 tight.
    long double mean_reward = 0.0L;
    for (std::size_t i = 0; i < no; ++i)
        mean_reward += static_cast<long double>(game.baseline.weights[i]) *
                       game.agent.reward(row, static_cast<Eigen::Index>(i));
    long double normaliser = 0.0L;
    std::vector<long double> raw(no);
    for (std::size_t i = 0; i < no; ++i) {
        raw[i] = std::exp((static_cast<long double>(game.agent.reward(row, static_cast<Eigen::Index>(i))) -
                           mean_reward) /
                          static_cast<long double>(game.agent.tau));
        normaliser += static_cast<long double>(game.baseline.weights[i]) * raw[i];
    }
    for (std::size_t i = 0; i < no; ++i) ratio[i] = static_cast<double>(raw[i] / normaliser);
    return ratio;
}

std::optional<std::size_t> phi_map(const GameSpec& game, std::size_t decision) {
    const std::size_t no = game.n_outcomes();
    const std::vector<double> ratio = likelihood_ratio(game, decision);

    std::optional<std::size_t> best;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < game.n_decisions(); ++k) {
        long double satisfied = 0.0L;
        for (std::size_t i = 0; i < no; ++i)
            if (game.constraint(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) <= game.gamma)
                satisfied += static_cast<long double>(ratio[i]) * game.baseline.weights[i];
        if (satisfied < 1.0L - static_cast<long double>(game.epsilon)) continue;
        const double value = game.objective[static_cast<Eigen::Index>(k)];
        if (value < best_value) {
            best_value = value;
            best = k;
        }
    }
    return best;
}

std::vector<std::size_t> phi_fixed_points(const GameSpec& game) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < game.n_decisions(); ++j) {
        const auto image = phi_map(game, j);
        if (image && *image == j) out.push_back(j);
    }
    return out;
}

}  // namespace perfscen::game
