#include "commands.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <future>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "perfscen/bounds.hpp"
#include "perfscen/config.hpp"
#include "perfscen/error.hpp"
#include "perfscen/fixed_point.hpp"
#include "perfscen/game.hpp"
#include "perfscen/trace_io.hpp"

namespace perfscen::cli {

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    throw UsageError(std::string("no output directory: pass --out or set ") + kOutDirEnv);
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : "-"; }

std::string join_names(const game::GameSpec& g, const std::vector<std::size_t>& idx) {
    std::string s = "{";
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (k) s += ", ";
        s += g.decision_names.empty() ? std::to_string(idx[k]) : g.decision_names[idx[k]];
    }
    return s + "}";
}

struct SeedResult {
    std::string log;
    Trace trace;
};

SeedResult run_one(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir, bool check,
                   bool quiet) {
    const EnvironmentMap env = cfg.environment();
    SeedResult res;
    res.trace = run(env, cfg.run, seed);
    const Trace& tr = res.trace;

    ExperimentConfig snapshot = cfg;
    snapshot.seed = seed;
    std::filesystem::create_directories(dir);
    write_trace_file(dir / "trace.jsonl", tr, to_json(snapshot));
    export_csv(tr, dir);

    std::ostringstream log;
    if (!quiet)
        for (const auto& s : tr.states)
            if (s.residual)
                log << "t=" << s.t << " N=" << s.samples_used << " residual=" << format_double(*s.residual)
                    << " violation=" << fmt_opt(s.violation_estimate)
                    << (s.solver_status == SolverStatus::infeasible_fallback ? " [infeasible: kept iterate]" : "")
                    << '\n';
    const auto& last = tr.states.back();
    log << "seed=" << seed << " converged=" << (tr.summary.converged ? "true" : "false")
        << " steps=" << tr.summary.steps << " w=[";
    for (Eigen::Index i = 0; i < tr.summary.final_iterate.size(); ++i)
        log << (i ? "," : "") << format_double(tr.summary.final_iterate[i]);
    log << "] violation=" << fmt_opt(last.violation_estimate)
        << " K_hat=" << fmt_opt(tr.summary.contraction_estimate) << " wallclock=" << std::fixed
        << std::setprecision(3) << tr.summary.wallclock_seconds << "s\n";
    log.unsetf(std::ios::floatfield);
    if (check) {
        const std::size_t n_final = sample_size(cfg.run.schedule, tr.summary.steps);
        const auto sc = check_self_consistency(env, cfg.run.problem, tr.summary.final_iterate, n_final, 30, seed);
        log << "self-consistency: distance=" << format_double(sc.distance) << " eta=" << format_double(sc.eta)
            << " " << (sc.passed ? "PASS" : "FAIL") << '\n';
    }
    log << "artifacts: " << dir.string() << '\n';
    res.log = log.str();
    return res;
}

}  // namespace

int cmd_sample_size(double epsilon, double beta, std::size_t dim, bool show_tail, std::ostream& out) {
    const auto r = bounds::minimal_sample_size(epsilon, beta, dim);
    out << r.n_samples;
    if (show_tail) out << ' ' << format_double(r.tail);
    out << '\n';
    return kOk;
}

int cmd_run(const RunOptions& options, std::ostream& out) {
    const ExperimentConfig cfg = load_experiment_config(options.config);
    const std::filesystem::path root = resolve_out_dir(options.out_dir);
    const std::uint64_t first = options.seed.value_or(cfg.seed);
    if (options.sweep <= 1) {
        out << run_one(cfg, first, root, options.check, options.quiet).log;
        return kOk;
    }

    // Independent seeds in parallel, each in its own subdirectory; output
    // is printed in seed order.
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<SeedResult>> pending;
    std::size_t converged = 0;
    for (std::size_t k = 0; k < options.sweep; ++k) {
        const std::uint64_t seed = first + k;
        pending.push_back(std::async(std::launch::async, [&, seed] {
            return run_one(cfg, seed, root / ("seed_" + std::to_string(seed)), options.check, true);
        }));
        if (pending.size() >= workers || k + 1 == options.sweep) {
            for (auto& f : pending) {
                SeedResult r = f.get();
                converged += r.trace.summary.converged;
                out << r.log;
            }
            pending.clear();
        }
    }
    out << "sweep: " << converged << "/" << options.sweep << " converged\n";
    return kOk;
}

int cmd_nash(const std::filesystem::path& config, std::ostream& out) {
    const game::GameSpec g = load_game_config(config);
    std::vector<std::size_t> nash;
    for (const auto& e : game::nash_search(g)) nash.push_back(e.decision);
    const std::vector<std::size_t> fixed = game::phi_fixed_points(g);
    out << "grid: " << g.n_decisions() << " decisions, " << g.n_outcomes() << " outcomes\n";
    out << "nash equilibria:   " << join_names(g, nash) << '\n';
    out << "Phi fixed points:  " << join_names(g, fixed) << '\n';
    out << (nash == fixed ? "MATCH" : "MISMATCH") << '\n';
    return nash == fixed ? kOk : kRuntime;
}

int cmd_export_csv(const std::filesystem::path& trace, const std::filesystem::path& out_dir, std::ostream& out) {
    const TraceFile file = read_trace_file(trace);
    export_csv(file.trace, out_dir);
    out << "wrote " << file.trace.states.size() << " rows per CSV to " << out_dir.string() << '\n';
    return kOk;
}

int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Performative scenario optimization toolkit"};
    app.require_subcommand(1);

    double eps = 0, beta = 0;
    std::size_t dim = 0;
    bool show_tail = false;
    auto* ss = app.add_subcommand("sample-size", "Minimal scenario count N for (eps, beta, d)");
    ss->add_option("--eps", eps, "Violation level epsilon")->required();
    ss->add_option("--beta", beta, "Confidence parameter beta")->required();
    ss->add_option("--dim", dim, "Decision dimension d")->required();
    ss->add_flag("--tail", show_tail, "Also print the binomial tail at N");

    RunOptions ro;
    std::string run_config, run_out;
    std::uint64_t run_seed = 0;
    auto* rc = app.add_subcommand("run", "Stochastic best-response iteration from a config file");
    rc->add_option("--config", run_config, "Experiment config (JSON)")->required();
    auto* out_opt = rc->add_option("--out", run_out, std::string("Output directory (default: $") + kOutDirEnv + ")");
    auto* seed_opt = rc->add_option("--seed", run_seed, "Override the config seed");
    rc->add_option("--sweep", ro.sweep, "Run this many consecutive seeds in parallel")->check(CLI::PositiveNumber);
    rc->add_flag("--check", ro.check, "Fixed-point self-consistency check at the final iterate");
    rc->add_flag("--quiet", ro.quiet, "Only print the summary line");

    std::string nash_config;
    auto* nc = app.add_subcommand("nash", "Nash equilibria and Phi fixed points of a toy game");
    nc->add_option("--config", nash_config, "Game config (JSON)")->required();

    std::string trace_path, csv_out;
    auto* ec = app.add_subcommand("export-csv", "CSV series from a trace file");
    ec->add_option("--trace", trace_path, "Trace file (JSON Lines)")->required();
    ec->add_option("--out", csv_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*ss) return cmd_sample_size(eps, beta, dim, show_tail, out);
        if (*rc) {
            ro.config = run_config;
            if (*out_opt) ro.out_dir = run_out;
            if (*seed_opt) ro.seed = run_seed;
            return cmd_run(ro, out);
        }
        if (*nc) return cmd_nash(nash_config, out);
        if (*ec) return cmd_export_csv(trace_path, csv_out, out);
    } catch (const InvalidParameter& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kValidation;
    } catch (const TraceFormatError& e) {
        err << "trace error: " << e.what() << '\n';
        return kValidation;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kValidation;
}

}  // namespace perfscen::cli
