#include "perfscen/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "perfscen/error.hpp"

namespace perfscen {

using nlohmann::json;

namespace {

std::string join(const std::string& base, const std::string& key) { return base + "/" + key; }

const json& field(const json& obj, const std::string& base, const std::string& key) {
    if (!obj.is_object()) throw ConfigError(base.empty() ? "/" : base, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(join(base, key), "missing required field");
    return *it;
}

const json* optional_field(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double as_double(const json& v, const std::string& path) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    }
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
}

std::uint64_t as_count(const json& v, const std::string& path) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw ConfigError(path, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    return v.get<int>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
    return v.get<bool>();
}

Eigen::VectorXd as_vector(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = as_double(v[i], path + "/" + std::to_string(i));
    return out;
}

json vector_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json number_or_inf(double x) { return std::isinf(x) ? json("inf") : json(x); }

// Runs `body`, turning module-level parameter errors into path-qualified ones.
template <class F>
auto with_path(const std::string& path, F&& body) {
    try {
        return body();
    } catch (const InvalidParameter& e) {
        throw ConfigError(join(path, e.field()), e.what());
    }
}

BaselineDistribution parse_baseline(const json& j, const std::string& path) {
    const std::string kind = as_string(field(j, path, "kind"), join(path, "kind"));
    if (kind == "gaussian_mixture") {
        GaussianMixtureBaseline g;
        g.mean_pos = as_vector(field(j, path, "mean_pos"), join(path, "mean_pos"));
        g.mean_neg = as_vector(field(j, path, "mean_neg"), join(path, "mean_neg"));
        g.variances = as_vector(field(j, path, "variances"), join(path, "variances"));
        g.prob_pos = as_double(field(j, path, "prob_pos"), join(path, "prob_pos"));
        g.prob_neg = as_double(field(j, path, "prob_neg"), join(path, "prob_neg"));
        with_path(path, [&] { g.validate(); return 0; });
        return g;
    }
    if (kind == "uniform_ball_mixture") {
        UniformBallMixture u;
        u.centre_pos = as_vector(field(j, path, "centre_pos"), join(path, "centre_pos"));
        u.centre_neg = as_vector(field(j, path, "centre_neg"), join(path, "centre_neg"));
        u.radius = as_double(field(j, path, "radius"), join(path, "radius"));
        u.prob_pos = as_double(field(j, path, "prob_pos"), join(path, "prob_pos"));
        u.prob_neg = as_double(field(j, path, "prob_neg"), join(path, "prob_neg"));
        with_path(path, [&] { u.validate(); return 0; });
        return u;
    }
    if (kind == "discrete") {
        const json& support = field(j, path, "support");
        const std::string sp = join(path, "support");
        if (!support.is_array() || support.empty()) throw ConfigError(sp, "expected a nonempty array");
        std::vector<Scenario> points;
        std::vector<double> weights;
        for (std::size_t i = 0; i < support.size(); ++i) {
            const std::string ip = sp + "/" + std::to_string(i);
            Scenario s;
            s.features = as_vector(field(support[i], ip, "features"), join(ip, "features"));
            s.label = as_int(field(support[i], ip, "label"), join(ip, "label"));
            if (s.label != 1 && s.label != -1) throw ConfigError(join(ip, "label"), "must be +1 or -1");
            if (i > 0 && s.features.size() != points.front().features.size())
                throw ConfigError(join(ip, "features"), "dimension differs from the first support point");
            weights.push_back(as_double(field(support[i], ip, "weight"), join(ip, "weight")));
            points.push_back(std::move(s));
        }
        return with_path(path, [&] { return BaselineDistribution(DiscreteBaseline::from_scenarios(points, weights)); });
    }
    throw ConfigError(join(path, "kind"), "unknown baseline kind '" + kind + "' (expected gaussian_mixture, uniform_ball_mixture or discrete)");
}

json baseline_json(const BaselineDistribution& b) {
    if (const auto* g = std::get_if<GaussianMixtureBaseline>(&b)) {
        return json{{"kind", "gaussian_mixture"},
                    {"mean_pos", vector_json(g->mean_pos)},
                    {"mean_neg", vector_json(g->mean_neg)},
                    {"variances", vector_json(g->variances)},
                    {"prob_pos", g->prob_pos},
                    {"prob_neg", g->prob_neg}};
    }
    if (const auto* u = std::get_if<UniformBallMixture>(&b)) {
        return json{{"kind", "uniform_ball_mixture"},
                    {"centre_pos", vector_json(u->centre_pos)},
                    {"centre_neg", vector_json(u->centre_neg)},
                    {"radius", u->radius},
                    {"prob_pos", u->prob_pos},
                    {"prob_neg", u->prob_neg}};
    }
    const auto& d = std::get<DiscreteBaseline>(b);
    json support = json::array();
    for (std::size_t i = 0; i < d.size(); ++i) {
        support.push_back(json{{"features", vector_json(d.features().col(static_cast<Eigen::Index>(i)))},
                               {"label", d.labels()[i]},
                               {"weight", d.weights()[i]}});
    }
    return json{{"kind", "discrete"}, {"support", support}};
}

ResponseParams parse_response(const json& j, const std::string& path) {
    ResponseParams r;
    r.lambda = as_double(field(j, path, "lambda"), join(path, "lambda"));
    r.kappa = as_double(field(j, path, "kappa"), join(path, "kappa"));
    if (const json* s = optional_field(j, "sign")) r.sign = as_int(*s, join(path, "sign"));
    if (const json* s = optional_field(j, "respond_labels")) {
        const auto v = as_string(*s, join(path, "respond_labels"));
        if (v == "both")
            r.respond_labels = RespondLabels::both;
        else if (v == "malicious_only")
            r.respond_labels = RespondLabels::malicious_only;
        else
            throw ConfigError(join(path, "respond_labels"), "expected 'both' or 'malicious_only'");
    }
    with_path(path, [&] { r.validate(); return 0; });
    return r;
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string(), e.what());
    }
}

ExperimentConfig parse_experiment_config(const json& j) {
    ExperimentConfig c;
    if (!j.is_object()) throw ConfigError("/", "expected an object");
    c.seed = as_count(field(j, "", "seed"), "/seed");

    const json& pj = field(j, "", "problem");
    ProblemSpec& p = c.run.problem;
    p.dim = as_count(field(pj, "/problem", "dim"), "/problem/dim");
    p.epsilon = as_double(field(pj, "/problem", "epsilon"), "/problem/epsilon");
    p.beta = as_double(field(pj, "/problem", "beta"), "/problem/beta");
    if (const json* g = optional_field(pj, "gamma")) p.gamma = as_double(*g, "/problem/gamma");
    if (const json* q = optional_field(pj, "quad_weight")) p.quad_weight = as_double(*q, "/problem/quad_weight");
    with_path("/problem", [&] { p.validate(); return 0; });

    const json& ej = field(j, "", "environment");
    c.baseline = parse_baseline(field(ej, "/environment", "baseline"), "/environment/baseline");
    c.response = parse_response(field(ej, "/environment", "response"), "/environment/response");
    if (baseline_dim(c.baseline) != p.dim)
        throw ConfigError("/environment/baseline", "dimension " + std::to_string(baseline_dim(c.baseline)) +
                                                       " differs from /problem/dim = " + std::to_string(p.dim));

    const json& sj = field(j, "", "schedule");
    Schedule& s = c.run.schedule;
    s.n0 = as_count(field(sj, "/schedule", "n0"), "/schedule/n0");
    s.c_log = as_double(field(sj, "/schedule", "c_log"), "/schedule/c_log");
    if (const json* m = optional_field(sj, "n_max")) s.n_max = as_count(*m, "/schedule/n_max");
    if (const json* f = optional_field(sj, "enforce_bound_floor"))
        s.enforce_bound_floor = as_bool(*f, "/schedule/enforce_bound_floor");
    with_path("/schedule", [&] { s.validate(p); return 0; });

    const json& tj = field(j, "", "stopping");
    StoppingRule& st = c.run.stopping;
    st.max_steps = as_count(field(tj, "/stopping", "max_steps"), "/stopping/max_steps");
    st.residual_tol = as_double(field(tj, "/stopping", "residual_tol"), "/stopping/residual_tol");
    st.patience = as_count(field(tj, "/stopping", "patience"), "/stopping/patience");
    with_path("/stopping", [&] { st.validate(); return 0; });

    if (const json* ev = optional_field(j, "evaluation")) {
        if (const json* n = optional_field(*ev, "n_eval")) c.run.evaluation.n_eval = as_count(*n, "/evaluation/n_eval");
        if (const json* o = optional_field(*ev, "eval_seed_offset"))
            c.run.evaluation.eval_seed_offset = as_count(*o, "/evaluation/eval_seed_offset");
    }
    if (const json* w0 = optional_field(j, "initial_iterate")) {
        c.run.initial_iterate = as_vector(*w0, "/initial_iterate");
        if (static_cast<std::size_t>(c.run.initial_iterate->size()) != p.dim)
            throw ConfigError("/initial_iterate", "length must equal /problem/dim");
    }
    if (const json* r = optional_field(j, "record_snapshots")) c.run.record_snapshots = as_bool(*r, "/record_snapshots");
    if (const json* k = optional_field(j, "contraction_probes"))
        c.run.contraction_probes = as_count(*k, "/contraction_probes");
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_json_file(path));
}

json to_json(const ExperimentConfig& c) {
    const auto& p = c.run.problem;
    const auto& s = c.run.schedule;
    json j;
    j["seed"] = c.seed;
    j["problem"] = json{{"dim", p.dim}, {"epsilon", p.epsilon}, {"gamma", p.gamma}, {"beta", p.beta},
                        {"quad_weight", p.quad_weight}};
    j["environment"] = json{
        {"baseline", baseline_json(c.baseline)},
        {"response", json{{"lambda", number_or_inf(c.response.lambda)},
                          {"kappa", c.response.kappa},
                          {"sign", c.response.sign},
                          {"respond_labels",
                           c.response.respond_labels == RespondLabels::both ? "both" : "malicious_only"}}}};
    j["schedule"] = json{{"n0", s.n0},
                         {"c_log", s.c_log},
                         {"n_max", s.n_max ? json(*s.n_max) : json(nullptr)},
                         {"enforce_bound_floor", s.enforce_bound_floor}};
    j["stopping"] = json{{"max_steps", c.run.stopping.max_steps},
                         {"residual_tol", c.run.stopping.residual_tol},
                         {"patience", c.run.stopping.patience}};
    j["evaluation"] = json{{"n_eval", c.run.evaluation.n_eval},
                           {"eval_seed_offset", c.run.evaluation.eval_seed_offset}};
    j["initial_iterate"] = c.run.initial_iterate ? vector_json(*c.run.initial_iterate) : json(nullptr);
    j["record_snapshots"] = c.run.record_snapshots;
    j["contraction_probes"] = c.run.contraction_probes;
    return j;
}

game::GameSpec parse_game_config(const json& j) {
    if (!j.is_object()) throw ConfigError("/", "expected an object");
    const std::string type = as_string(field(j, "", "type"), "/type");
    const double epsilon = as_double(field(j, "", "epsilon"), "/epsilon");
    const double tau = as_double(field(j, "", "tau"), "/tau");
    double gamma = 0.0;
    if (const json* g = optional_field(j, "gamma")) gamma = as_double(*g, "/gamma");
    const json& bj = field(j, "", "baseline");
    if (!bj.is_array() || bj.empty()) throw ConfigError("/baseline", "expected a nonempty array of weights");
    std::vector<double> baseline;
    for (std::size_t i = 0; i < bj.size(); ++i) baseline.push_back(as_double(bj[i], "/baseline/" + std::to_string(i)));

    const json& dj = field(j, "", "decisions");
    if (!dj.is_array() || dj.empty()) throw ConfigError("/decisions", "grid must be nonempty");

    game::GameSpec game;
    if (type == "margin") {
        game::MarginGameParams mp;
        for (std::size_t k = 0; k < dj.size(); ++k) {
            const std::string kp = "/decisions/" + std::to_string(k);
            mp.decisions.push_back(dj[k].is_number() ? Eigen::VectorXd::Constant(1, as_double(dj[k], kp))
                                                     : as_vector(dj[k], kp));
        }
        const json& oj = field(j, "", "outcomes");
        if (!oj.is_array()) throw ConfigError("/outcomes", "expected an array");
        for (std::size_t i = 0; i < oj.size(); ++i) {
            const std::string ip = "/outcomes/" + std::to_string(i);
            const json& fj = field(oj[i], ip, "features");
            mp.outcomes.push_back(fj.is_number() ? Eigen::VectorXd::Constant(1, as_double(fj, ip + "/features"))
                                                 : as_vector(fj, ip + "/features"));
            mp.labels.push_back(as_int(field(oj[i], ip, "label"), ip + "/label"));
        }
        mp.baseline = baseline;
        mp.tau = tau;
        mp.gamma = gamma;
        mp.epsilon = epsilon;
        if (const json* rs = optional_field(j, "reward_sign")) mp.reward_sign = as_double(*rs, "/reward_sign");
        game = with_path("", [&] { return game::make_margin_game(mp); });
        for (std::size_t k = 0; k < dj.size(); ++k) game.decision_names.push_back(dj[k].dump());
    } else if (type == "table") {
        const auto nd = static_cast<Eigen::Index>(dj.size());
        const auto no = static_cast<Eigen::Index>(baseline.size());
        for (std::size_t k = 0; k < dj.size(); ++k)
            game.decision_names.push_back(dj[k].is_string() ? dj[k].get<std::string>() : dj[k].dump());
        auto table = [&](const char* key) {
            const json& tj = field(j, "", key);
            const std::string tp = std::string("/") + key;
            if (!tj.is_array() || static_cast<Eigen::Index>(tj.size()) != nd)
                throw ConfigError(tp, "expected one row per decision");
            Eigen::MatrixXd m(nd, no);
            for (Eigen::Index r = 0; r < nd; ++r) {
                const Eigen::VectorXd row = as_vector(tj[static_cast<std::size_t>(r)], tp + "/" + std::to_string(r));
                if (row.size() != no) throw ConfigError(tp + "/" + std::to_string(r), "expected one entry per outcome");
                m.row(r) = row.transpose();
            }
            return m;
        };
        game.agent.reward = table("reward");
        game.constraint = table("constraint");
        game.objective = as_vector(field(j, "", "objective"), "/objective");
        if (game.objective.size() != nd) throw ConfigError("/objective", "expected one value per decision");
        game.baseline.weights = baseline;
        game.agent.tau = tau;
        game.gamma = gamma;
        game.epsilon = epsilon;
    } else {
        throw ConfigError("/type", "unknown game type '" + type + "' (expected margin or table)");
    }
    with_path("", [&] { game.validate(); return 0; });
    return game;
}

game::GameSpec load_game_config(const std::filesystem::path& path) { return parse_game_config(read_json_file(path)); }

}  // namespace perfscen
