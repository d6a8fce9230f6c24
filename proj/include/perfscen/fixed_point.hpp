// fixed_point.hpp
//
// Best-response iterations. The deterministic form iterates a supplied map
// x_{t+1} = phi(x_t); the stochastic form replaces phi by the scenario
// solve phi_{N_t} on N_t fresh draws from the environment induced by x_t,
// with N_t growing logarithmically in t.
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "perfscen/environment.hpp"
#include "perfscen/scenario_solver.hpp"

namespace perfscen {

// Chance-constrained guardrail problem: minimize quad_weight/2 ||w||^2
// subject to P_w( y <w, xi> >= 1 - gamma ) >= 1 - epsilon.
struct ProblemSpec {
    std::size_t dim{2};
    double epsilon{0.1};
    double gamma{0.0};
    double beta{0.05};
    double quad_weight{1.0};

    void validate() const;
    double objective(const Eigen::VectorXd& w) const { return 0.5 * quad_weight * w.squaredNorm(); }
};

struct Schedule {
    std::size_t n0{20};
    double c_log{5.0};
    std::optional<std::size_t> n_max;
    bool enforce_bound_floor{false};  // require n0 >= minimal_sample_size(eps, beta, d)

    void validate(const ProblemSpec& problem) const;
};

/// min(n_max, n0 + ceil(c_log * ln(1 + t)))
std::size_t sample_size(const Schedule& schedule, std::size_t t);

enum class SolverStatus { ok, infeasible_fallback, none };

const char* to_string(SolverStatus s);
SolverStatus solver_status_from_string(const std::string& s);

// One record per iterate. For every executed step t, `samples_used` is N_t
// and `residual` is ||w_{t+1} - w_t||; the terminal state carries neither.
struct IterationState {
    std::size_t t{0};
    Eigen::VectorXd iterate;
    std::size_t samples_used{0};
    std::optional<double> residual;
    std::optional<double> violation_estimate;
    double objective{0.0};
    SolverStatus solver_status{SolverStatus::none};
};

struct StoppingRule {
    std::size_t max_steps{50};
    double residual_tol{1e-2};
    std::size_t patience{3};

    void validate() const;
};

struct EvaluationConfig {
    std::size_t n_eval{100000};
    std::uint64_t eval_seed_offset{1000003};
};

struct RunSettings {
    ProblemSpec problem;
    Schedule schedule;
    StoppingRule stopping;
    EvaluationConfig evaluation;
    std::optional<Eigen::VectorXd> initial_iterate;  // default: zero
    bool record_snapshots{false};
    std::size_t contraction_probes{0};  // 0 disables the K estimate
    SolverConfig solver;
};

struct Snapshot {
    std::size_t t{0};
    std::vector<Scenario> samples;
};

struct TraceSummary {
    bool converged{false};
    Eigen::VectorXd final_iterate;
    std::optional<double> contraction_estimate;
    std::size_t steps{0};
    double wallclock_seconds{0.0};
};

struct Trace {
    std::uint64_t seed{0};
    std::vector<IterationState> states;
    std::vector<Snapshot> snapshots;
    TraceSummary summary;
};

using PhiOracle = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct StepResult {
    Eigen::VectorXd next;
    std::size_t samples_used{0};
    double residual{0.0};
    SolverStatus status{SolverStatus::ok};
    std::vector<Scenario> samples;
};

/// One stochastic best-response step from `current` at step index t. Samples
/// come from the (seed, t, train) stream. An infeasible scenario program
/// keeps the current iterate and flags the step.
StepResult step_stochastic(const EnvironmentMap& env, const ProblemSpec& problem,
                           const Eigen::VectorXd& current, std::size_t t,
                           const Schedule& schedule, std::uint64_t seed,
                           const SolverConfig& solver = {});

/// Iterates step_stochastic until `patience` consecutive residuals are at or
/// below `residual_tol`, or `max_steps` steps have run.
Trace run(const EnvironmentMap& env, const RunSettings& settings, std::uint64_t seed);

/// Iterates an exact map. Stops when the a-posteriori contraction bound
/// K/(1-K) * ||x_{t+1} - x_t|| (K from the last two residuals) drops to
/// `tol`, on a zero residual, or after `max_steps`.
Trace run_deterministic(const PhiOracle& phi, const Eigen::VectorXd& x0, std::size_t max_steps, double tol);

/// max ||phi(x) - phi(x')|| / ||x - x'|| over the probe pairs.
double estimate_contraction(const PhiOracle& phi,
                            const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& probe_pairs);

/// Scenario best response phi_N with common random numbers: the N baseline
/// draws are fixed by `key`, only the response to x changes between calls.
PhiOracle make_scenario_oracle(const EnvironmentMap& env, const ProblemSpec& problem, std::size_t n_samples,
                               const StreamKey& key, const SolverConfig& solver = {});

/// 10 x minimal_sample_size(eps, 1e-3, d).
std::size_t oracle_sample_size(const ProblemSpec& problem);

/// Probe pairs x +- radius * e_k around a centre, one per coordinate.
std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> coordinate_probes(const Eigen::VectorXd& centre,
                                                                            double radius);

// Spread of phi_N(w) across independent sample draws.
struct ScatterStats {
    Eigen::VectorXd mean;
    double scatter{0.0};  // sqrt(sum_s ||w_s - mean||^2 / (S - 1))
    std::size_t feasible_runs{0};
};

ScatterStats measure_scatter(const EnvironmentMap& env, const ProblemSpec& problem, const Eigen::VectorXd& w,
                             std::size_t n_samples, std::size_t n_seeds, std::uint64_t seed,
                             const SolverConfig& solver = {});

// Fixed-point self-consistency at a final iterate w_T: a fresh large-N solve
// w' under P_{w_T}, compared with the empirical approximation error of the
// iteration's own solver, eta = RMS_s ||phi_{N_T}(w_T; s) - w'||.
struct SelfConsistency {
    Eigen::VectorXd reference;
    double distance{0.0};
    double eta{0.0};
    bool passed{false};
};

SelfConsistency check_self_consistency(const EnvironmentMap& env, const ProblemSpec& problem,
                                       const Eigen::VectorXd& w_final, std::size_t n_final,
                                       std::size_t n_seeds, std::uint64_t seed, double multiple = 3.0,
                                       const SolverConfig& solver = {});

}  // namespace perfscen
