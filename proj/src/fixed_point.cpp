#include "perfscen/fixed_point.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "perfscen/bounds.hpp"
#include "perfscen/error.hpp"

namespace perfscen {

void ProblemSpec::validate() const {
    require(dim >= 1, "dim", "must be >= 1");
    require(epsilon > 0.0 && epsilon < 1.0, "epsilon", "must lie in (0,1)");
    require(beta > 0.0 && beta < 1.0, "beta", "must lie in (0,1)");
    require(std::isfinite(gamma) && gamma < 1.0, "gamma", "must be < 1 so the margin target stays positive");
    require(std::isfinite(quad_weight) && quad_weight > 0.0, "quad_weight", "must be > 0");
}

void Schedule::validate(const ProblemSpec& problem) const {
    require(n0 >= problem.dim + 1, "n0", "must be >= dim + 1 (" + std::to_string(problem.dim + 1) + ")");
    require(std::isfinite(c_log) && c_log >= 0.0, "c_log", "must be finite and >= 0");
    if (n_max) require(*n_max >= n0, "n_max", "must be >= n0");
    if (enforce_bound_floor) {
        const auto floor = bounds::minimal_sample_size(problem.epsilon, problem.beta, problem.dim).n_samples;
        require(n0 >= floor, "n0", "must be >= minimal_sample_size(eps, beta, d) = " + std::to_string(floor));
    }
}

std::size_t sample_size(const Schedule& schedule, std::size_t t) {
    const double extra = std::ceil(schedule.c_log * std::log1p(static_cast<double>(t)));
    const std::size_t n = schedule.n0 + static_cast<std::size_t>(extra);
    return schedule.n_max ? std::min(n, *schedule.n_max) : n;
}

const char* to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::ok: return "ok";
        case SolverStatus::infeasible_fallback: return "infeasible_fallback";
        case SolverStatus::none: return "none";
    }
    return "none";
}

SolverStatus solver_status_from_string(const std::string& s) {
    if (s == "ok") return SolverStatus::ok;
    if (s == "infeasible_fallback") return SolverStatus::infeasible_fallback;
    if (s == "none") return SolverStatus::none;
    throw InvalidParameter("solver_status", "unknown status '" + s + "'");
}

void StoppingRule::validate() const {
    require(std::isfinite(residual_tol) && residual_tol >= 0.0, "residual_tol", "must be finite and >= 0");
    require(patience >= 1, "patience", "must be >= 1");
}

StepResult step_stochastic(const EnvironmentMap& env, const ProblemSpec& problem, const Eigen::VectorXd& current,
                           std::size_t t, const Schedule& schedule, std::uint64_t seed,
                           const SolverConfig& solver) {
    StepResult out;
    out.samples_used = sample_size(schedule, t);
    out.samples = sample_induced(env, current, out.samples_used, StreamKey(seed, t, StreamPurpose::train));
    try {
        out.next = solve_svm_scenarios(out.samples, problem.dim, problem.gamma, solver).optimum;
        out.status = SolverStatus::ok;
    } catch (const InfeasibleProgram&) {
        out.next = current;
        out.status = SolverStatus::infeasible_fallback;
    }
    out.residual = (out.next - current).norm();
    return out;
}

namespace {

IterationState make_state(std::size_t t, const Eigen::VectorXd& w, const ProblemSpec& problem) {
    IterationState s;
    s.t = t;
    s.iterate = w;
    s.objective = problem.objective(w);
    return s;
}

}  // namespace

Trace run(const EnvironmentMap& env, const RunSettings& settings, std::uint64_t seed) {
    const auto started = std::chrono::steady_clock::now();
    const ProblemSpec& problem = settings.problem;
    problem.validate();
    settings.schedule.validate(problem);
    settings.stopping.validate();
    require(env.dim() == problem.dim, "dim", "environment and problem dimensions differ");

    Eigen::VectorXd w = settings.initial_iterate.value_or(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.dim)));
    require(static_cast<std::size_t>(w.size()) == problem.dim, "initial_iterate", "dimension mismatch");

    const std::uint64_t eval_seed = seed + settings.evaluation.eval_seed_offset;
    auto evaluate = [&](const Eigen::VectorXd& x, std::size_t t) {
        if (settings.evaluation.n_eval == 0) return std::optional<double>{};
        return std::optional<double>{violation_probability(
            env, x, x, MonteCarlo{settings.evaluation.n_eval, StreamKey(eval_seed, t, StreamPurpose::evaluate)},
            problem.gamma)};
    };

    Trace trace;
    trace.seed = seed;
    std::size_t calm_steps = 0;
    bool converged = false;

    for (std::size_t t = 0;; ++t) {
        IterationState state = make_state(t, w, problem);
        state.violation_estimate = evaluate(w, t);
        if (converged || t >= settings.stopping.max_steps) {
            trace.states.push_back(std::move(state));
            break;
        }

        StepResult step = step_stochastic(env, problem, w, t, settings.schedule, seed, settings.solver);
        state.samples_used = step.samples_used;
        state.residual = step.residual;
        state.solver_status = step.status;
        trace.states.push_back(std::move(state));
        if (settings.record_snapshots) trace.snapshots.push_back({t, std::move(step.samples)});

        if (step.status == SolverStatus::ok && step.residual <= settings.stopping.residual_tol)
            ++calm_steps;
        else
            calm_steps = 0;
        converged = calm_steps >= settings.stopping.patience;
        w = std::move(step.next);
    }

    trace.summary.converged = converged;
    trace.summary.final_iterate = w;
    trace.summary.steps = trace.states.size() - 1;
    if (settings.contraction_probes > 0) {
        const std::size_t n_oracle = oracle_sample_size(problem);
        const PhiOracle phi =
            make_scenario_oracle(env, problem, n_oracle, StreamKey(seed, 0, StreamPurpose::oracle), settings.solver);
        const double radius = std::max(1e-3, 0.05 * w.norm());
        auto probes = coordinate_probes(w, radius);
        for (std::size_t k = probes.size(); k < settings.contraction_probes; ++k) {
            // Extra probes along mixed directions.
            CounterRng rng(StreamKey(seed, k, StreamPurpose::oracle), 0);
            Eigen::VectorXd dir(w.size());
            for (Eigen::Index j = 0; j < dir.size(); ++j) dir[j] = rng.normal();
            dir *= radius / std::max(dir.norm(), 1e-300);
            probes.emplace_back(w + dir, w - dir);
        }
        try {
            trace.summary.contraction_estimate = estimate_contraction(phi, probes);
        } catch (const InfeasibleProgram&) {
            trace.summary.contraction_estimate.reset();
        }
    }
    trace.summary.wallclock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return trace;
}

Trace run_deterministic(const PhiOracle& phi, const Eigen::VectorXd& x0, std::size_t max_steps, double tol) {
    const auto started = std::chrono::steady_clock::now();
    Trace trace;
    Eigen::VectorXd x = x0;
    std::optional<double> previous_residual;
    std::optional<double> last_ratio;
    bool converged = false;

    for (std::size_t t = 0;; ++t) {
        IterationState state;
        state.t = t;
        state.iterate = x;
        state.objective = 0.5 * x.squaredNorm();
        if (converged || t >= max_steps) {
            trace.states.push_back(std::move(state));
            break;
        }
        Eigen::VectorXd next = phi(x);
        const double r = (next - x).norm();
        state.residual = r;
        state.solver_status = SolverStatus::ok;
        trace.states.push_back(std::move(state));

        if (r == 0.0) {
            converged = true;
        } else if (previous_residual && *previous_residual > 0.0) {
            const double k = r / *previous_residual;
            last_ratio = k;
            if (k < 1.0 && k / (1.0 - k) * r <= tol) converged = true;
        }
        previous_residual = r;
        x = std::move(next);
    }

    trace.summary.converged = converged;
    trace.summary.final_iterate = x;
    trace.summary.steps = trace.states.size() - 1;
    trace.summary.contraction_estimate = last_ratio;
    trace.summary.wallclock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return trace;
}

double estimate_contraction(const PhiOracle& phi,
                            const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& probe_pairs) {
    double k = 0.0;
    for (std::size_t i = 0; i < probe_pairs.size(); ++i) {
        const auto& [x, xp] = probe_pairs[i];
        const double gap = (x - xp).norm();
        require(gap > 0.0, "probe_pairs", "pair " + std::to_string(i) + " is not distinct");
        k = std::max(k, (phi(x) - phi(xp)).norm() / gap);
    }
    return k;
}

PhiOracle make_scenario_oracle(const EnvironmentMap& env, const ProblemSpec& problem, std::size_t n_samples,
                               const StreamKey& key, const SolverConfig& solver) {
    require(n_samples >= 1, "n_samples", "must be >= 1");
    std::vector<Scenario> base;
    base.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        CounterRng rng(key, i);
        base.push_back(env.draw_baseline(rng));
    }
    return [&env, problem, solver, base = std::move(base)](const Eigen::VectorXd& x) {
        std::vector<Scenario> induced;
        induced.reserve(base.size());
        for (const auto& s : base) induced.push_back(respond(env, x, s));
        return solve_svm_scenarios(induced, problem.dim, problem.gamma, solver).optimum;
    };
}

std::size_t oracle_sample_size(const ProblemSpec& problem) {
    return 10 * bounds::minimal_sample_size(problem.epsilon, 1e-3, problem.dim).n_samples;
}

std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> coordinate_probes(const Eigen::VectorXd& centre,
                                                                            double radius) {
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> probes;
    for (Eigen::Index k = 0; k < centre.size(); ++k) {
        Eigen::VectorXd delta = Eigen::VectorXd::Zero(centre.size());
        delta[k] = radius;
        probes.emplace_back(centre + delta, centre - delta);
    }
    return probes;
}

ScatterStats measure_scatter(const EnvironmentMap& env, const ProblemSpec& problem, const Eigen::VectorXd& w,
                             std::size_t n_samples, std::size_t n_seeds, std::uint64_t seed,
                             const SolverConfig& solver) {
    require(n_seeds >= 2, "n_seeds", "need at least two seeds to measure scatter");
    std::vector<Eigen::VectorXd> solutions;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const auto samples = sample_induced(env, w, n_samples, StreamKey(seed, s, StreamPurpose::scatter));
        try {
            solutions.push_back(solve_svm_scenarios(samples, problem.dim, problem.gamma, solver).optimum);
        } catch (const InfeasibleProgram&) {
        }
    }
    ScatterStats stats;
    stats.feasible_runs = solutions.size();
    stats.mean = Eigen::VectorXd::Zero(w.size());
    if (solutions.empty()) return stats;
    for (const auto& x : solutions) stats.mean += x;
    stats.mean /= static_cast<double>(solutions.size());
    if (solutions.size() < 2) return stats;
    double ss = 0.0;
    for (const auto& x : solutions) ss += (x - stats.mean).squaredNorm();
    stats.scatter = std::sqrt(ss / static_cast<double>(solutions.size() - 1));
    return stats;
}

SelfConsistency check_self_consistency(const EnvironmentMap& env, const ProblemSpec& problem,
                                       const Eigen::VectorXd& w_final, std::size_t n_final, std::size_t n_seeds,
                                       std::uint64_t seed, double multiple, const SolverConfig& solver) {
    require(n_seeds >= 1, "n_seeds", "must be >= 1");
    SelfConsistency out;
    const std::size_t n_big = std::max(oracle_sample_size(problem), n_final);
    const auto big = sample_induced(env, w_final, n_big, StreamKey(seed, 0, StreamPurpose::check));
    out.reference = solve_svm_scenarios(big, problem.dim, problem.gamma, solver).optimum;
    out.distance = (out.reference - w_final).norm();

    double ss = 0.0;
    std::size_t used = 0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const auto samples = sample_induced(env, w_final, n_final, StreamKey(seed, s + 1, StreamPurpose::check));
        try {
            ss += (solve_svm_scenarios(samples, problem.dim, problem.gamma, solver).optimum - out.reference)
                      .squaredNorm();
            ++used;
        } catch (const InfeasibleProgram&) {
        }
    }
    out.eta = used > 0 ? std::sqrt(ss / static_cast<double>(used)) : 0.0;
    out.passed = out.distance <= multiple * out.eta;
    return out;
}

}  // namespace perfscen
