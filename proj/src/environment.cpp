#include "perfscen/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "perfscen/error.hpp"

namespace perfscen {

namespace {

constexpr double kMassTol = 1e-12;

bool responds(const ResponseParams& response, int label) {
    return response.respond_labels == RespondLabels::both || label == -1;
}

void require_label(int label, const char* field) {
    require(label == 1 || label == -1, field, "labels must be +1 or -1, got " + std::to_string(label));
}

}  // namespace

void ResponseParams::validate() const {
    require(lambda > 0.0, "lambda", "must be > 0");
    require(std::isfinite(kappa) && kappa >= 0.0, "kappa", "must be finite and >= 0");
    require(sign == 1 || sign == -1, "sign", "must be +1 or -1");
}

double alpha(const ResponseParams& response, double r) {
    if (std::isinf(response.lambda)) return 0.0;
    return 1.0 / (response.lambda + response.kappa * r);
}

DiscreteBaseline::DiscreteBaseline(Eigen::MatrixXd features, std::vector<int> labels,
                                   std::vector<double> weights)
    : features_(std::move(features)), labels_(std::move(labels)), weights_(std::move(weights)) {
    require(!labels_.empty(), "support", "discrete baseline needs at least one point");
    require(features_.rows() >= 1, "features", "dimension must be >= 1");
    require(static_cast<std::size_t>(features_.cols()) == labels_.size() &&
                labels_.size() == weights_.size(),
            "support", "features, labels and weights must have equal length");
    for (int y : labels_) require_label(y, "label");
    double total = 0.0;
    for (double p : weights_) {
        require(std::isfinite(p) && p >= 0.0, "weight", "weights must be finite and >= 0");
        total += p;
    }
    require(std::abs(total - 1.0) <= kMassTol, "weight",
            "weights must sum to 1 (got " + std::to_string(total) + ")");
    cumulative_.resize(weights_.size());
    std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
}

DiscreteBaseline DiscreteBaseline::from_scenarios(const std::vector<Scenario>& support,
                                                  const std::vector<double>& weights) {
    require(!support.empty(), "support", "discrete baseline needs at least one point");
    const Eigen::Index d = support.front().features.size();
    Eigen::MatrixXd features(d, static_cast<Eigen::Index>(support.size()));
    std::vector<int> labels;
    labels.reserve(support.size());
    for (std::size_t j = 0; j < support.size(); ++j) {
        require(support[j].features.size() == d, "features", "support points must share a dimension");
        features.col(static_cast<Eigen::Index>(j)) = support[j].features;
        labels.push_back(support[j].label);
    }
    return DiscreteBaseline(std::move(features), std::move(labels), weights);
}

std::size_t DiscreteBaseline::draw_index(CounterRng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    std::size_t j = static_cast<std::size_t>(it - cumulative_.begin());
    if (j >= cumulative_.size()) j = cumulative_.size() - 1;
    // Skip zero-mass points that share a cumulative value with their successor.
    while (weights_[j] == 0.0 && j + 1 < weights_.size()) ++j;
    return j;
}

void GaussianMixtureBaseline::validate() const {
    require(variances.size() >= 1, "variances", "dimension must be >= 1");
    require(mean_pos.size() == variances.size() && mean_neg.size() == variances.size(), "means",
            "class means must match the covariance dimension");
    for (Eigen::Index j = 0; j < variances.size(); ++j)
        require(std::isfinite(variances[j]) && variances[j] > 0.0, "variances",
                "covariance entries must be strictly positive");
    require(prob_pos >= 0.0 && prob_neg >= 0.0, "class_probs", "must be nonnegative");
    require(std::abs(prob_pos + prob_neg - 1.0) <= kMassTol, "class_probs", "must sum to 1");
}

void UniformBallMixture::validate() const {
    require(centre_pos.size() >= 1, "centre_pos", "dimension must be >= 1");
    require(centre_neg.size() == centre_pos.size(), "centre_neg", "class centres must have equal dimension");
    require(centre_pos.allFinite() && centre_neg.allFinite(), "centre_pos", "centres must be finite");
    require(std::isfinite(radius) && radius > 0.0, "radius", "must be > 0");
    require(prob_pos >= 0.0 && prob_neg >= 0.0, "class_probs", "must be nonnegative");
    require(std::abs(prob_pos + prob_neg - 1.0) <= kMassTol, "class_probs", "must sum to 1");
}

std::size_t baseline_dim(const BaselineDistribution& baseline) {
    return std::visit([](const auto& b) { return b.dim(); }, baseline);
}

EnvironmentMap::EnvironmentMap(BaselineDistribution baseline, ResponseParams response)
    : baseline_(std::move(baseline)), response_(response), dim_(baseline_dim(baseline_)) {
    response_.validate();
    if (auto* g = std::get_if<GaussianMixtureBaseline>(&baseline_)) g->validate();
    if (auto* u = std::get_if<UniformBallMixture>(&baseline_)) u->validate();
}

Scenario EnvironmentMap::draw_baseline(CounterRng& rng) const {
    if (const auto* disc = std::get_if<DiscreteBaseline>(&baseline_)) {
        return disc->point(disc->draw_index(rng));
    }
    if (const auto* u = std::get_if<UniformBallMixture>(&baseline_)) {
        Scenario s;
        s.label = rng.uniform() < u->prob_pos ? 1 : -1;
        const Eigen::VectorXd& centre = s.label == 1 ? u->centre_pos : u->centre_neg;
        // Uniform direction, radius distributed as U^(1/d).
        Eigen::VectorXd dir(centre.size());
        for (Eigen::Index j = 0; j < dir.size(); ++j) dir[j] = rng.normal();
        const double r = u->radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(centre.size()));
        s.features = centre + (r / dir.norm()) * dir;
        return s;
    }
    const auto& g = std::get<GaussianMixtureBaseline>(baseline_);
    Scenario s;
    s.label = rng.uniform() < g.prob_pos ? 1 : -1;
    const Eigen::VectorXd& mean = s.label == 1 ? g.mean_pos : g.mean_neg;
    s.features.resize(mean.size());
    for (Eigen::Index j = 0; j < mean.size(); ++j)
        s.features[j] = mean[j] + std::sqrt(g.variances[j]) * rng.normal();
    return s;
}

Scenario respond(const EnvironmentMap& env, const Eigen::VectorXd& w, const Scenario& s) {
    require(static_cast<std::size_t>(w.size()) == env.dim(), "w", "decision dimension mismatch");
    require(static_cast<std::size_t>(s.features.size()) == env.dim(), "features",
            "scenario dimension mismatch");
    const ResponseParams& rp = env.response();
    if (!responds(rp, s.label)) return s;
    const double a = alpha(rp, w.norm());
    Scenario out{s.features, s.label};
    if (a != 0.0) out.features += (static_cast<double>(rp.sign * s.label) * a) * w;
    return out;
}

std::vector<Scenario> sample_induced(const EnvironmentMap& env, const Eigen::VectorXd& w,
                                     std::size_t n, const StreamKey& key) {
    require(n >= 1, "n", "must be >= 1");
    std::vector<Scenario> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(key, i);
        out.push_back(respond(env, w, env.draw_baseline(rng)));
    }
    return out;
}

double violation_probability(const EnvironmentMap& env, const Eigen::VectorXd& w_eval,
                             const Eigen::VectorXd& w_env, const ViolationMode& mode, double gamma) {
    require(static_cast<std::size_t>(w_eval.size()) == env.dim(), "w_eval", "dimension mismatch");
    require(static_cast<std::size_t>(w_env.size()) == env.dim(), "w_env", "dimension mismatch");
    const double threshold = 1.0 - gamma;

    if (std::holds_alternative<ExactDiscrete>(mode)) {
        const auto* disc = std::get_if<DiscreteBaseline>(&env.baseline());
        require(disc != nullptr, "mode", "exact_discrete requires a discrete baseline");
        double mass = 0.0;
        for (std::size_t j = 0; j < disc->size(); ++j) {
            if (disc->weights()[j] == 0.0) continue;
            const Scenario r = respond(env, w_env, disc->point(j));
            if (r.label * w_eval.dot(r.features) < threshold) mass += disc->weights()[j];
        }
        return std::clamp(mass, 0.0, 1.0);
    }

    const auto& mc = std::get<MonteCarlo>(mode);
    require(mc.n >= 1, "n_eval", "must be >= 1");
    std::size_t violations = 0;
    for (std::size_t i = 0; i < mc.n; ++i) {
        CounterRng rng(mc.key, i);
        const Scenario r = respond(env, w_env, env.draw_baseline(rng));
        if (r.label * w_eval.dot(r.features) < threshold) ++violations;
    }
    return static_cast<double>(violations) / static_cast<double>(mc.n);
}

double margin_identity_check(const EnvironmentMap& env, const Eigen::VectorXd& w, const Scenario& s) {
    const Scenario r = respond(env, w, s);
    const double y = static_cast<double>(s.label);
    const double lhs = y * w.dot(r.features);
    const double rhs = y * w.dot(s.features) + alpha(env.response(), w.norm()) * w.squaredNorm();
    return std::abs(lhs - rhs);
}

}  // namespace perfscen
