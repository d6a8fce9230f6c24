// environment.hpp
//
// Decision-dependent data generation. A baseline distribution P0 over
// labelled embeddings (xi0, y) is pushed forward through the strategic
// response
//
//     xi = xi0 + sign * y * alpha(||w||) * w,   alpha(r) = 1 / (lambda + kappa r)
//
// to give the induced distribution P_w for a deployed decision w.
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "perfscen/rng.hpp"

namespace perfscen {

struct Scenario {
    Eigen::VectorXd features;
    int label{1};  // +1 benign, -1 malicious
};

enum class RespondLabels { both, malicious_only };

struct ResponseParams {
    double lambda{1.0};  // may be +inf: static environment, alpha == 0
    double kappa{0.0};
    int sign{1};
    RespondLabels respond_labels{RespondLabels::both};

    void validate() const;
};

double alpha(const ResponseParams& response, double r);

// Finite-support baseline; column j of `features` carries label `labels[j]`
// with mass `weights[j]`.
class DiscreteBaseline {
public:
    DiscreteBaseline(Eigen::MatrixXd features, std::vector<int> labels, std::vector<double> weights);
    static DiscreteBaseline from_scenarios(const std::vector<Scenario>& support,
                                           const std::vector<double>& weights);

    std::size_t dim() const { return static_cast<std::size_t>(features_.rows()); }
    std::size_t size() const { return labels_.size(); }
    const Eigen::MatrixXd& features() const { return features_; }
    const std::vector<int>& labels() const { return labels_; }
    const std::vector<double>& weights() const { return weights_; }
    Scenario point(std::size_t j) const { return {features_.col(static_cast<Eigen::Index>(j)), labels_[j]}; }

    std::size_t draw_index(CounterRng& rng) const;

private:
    Eigen::MatrixXd features_;
    std::vector<int> labels_;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
};

// One diagonal Gaussian per class with a shared covariance.
struct GaussianMixtureBaseline {
    Eigen::VectorXd mean_pos;
    Eigen::VectorXd mean_neg;
    Eigen::VectorXd variances;
    double prob_pos{0.5};
    double prob_neg{0.5};

    void validate() const;
    std::size_t dim() const { return static_cast<std::size_t>(variances.size()); }
};

// One uniform ball per class, shared radius. Bounded support keeps
// g(w, xi) = 1 - y <w, xi> bounded for every w.
struct UniformBallMixture {
    Eigen::VectorXd centre_pos;
    Eigen::VectorXd centre_neg;
    double radius{1.0};
    double prob_pos{0.5};
    double prob_neg{0.5};

    void validate() const;
    std::size_t dim() const { return static_cast<std::size_t>(centre_pos.size()); }
};

using BaselineDistribution = std::variant<DiscreteBaseline, GaussianMixtureBaseline, UniformBallMixture>;

std::size_t baseline_dim(const BaselineDistribution& baseline);

// Immutable after construction; sampling takes an explicit stream key.
class EnvironmentMap {
public:
    EnvironmentMap(BaselineDistribution baseline, ResponseParams response);

    const BaselineDistribution& baseline() const { return baseline_; }
    const ResponseParams& response() const { return response_; }
    std::size_t dim() const { return dim_; }
    bool is_discrete() const { return std::holds_alternative<DiscreteBaseline>(baseline_); }

    // Draw one baseline scenario (before the response).
    Scenario draw_baseline(CounterRng& rng) const;

private:
    BaselineDistribution baseline_;
    ResponseParams response_;
    std::size_t dim_;
};

/// The strategic response to decision w. Labels outside `respond_labels`
/// pass through unchanged; the label itself is never modified.
Scenario respond(const EnvironmentMap& env, const Eigen::VectorXd& w, const Scenario& s);

/// n i.i.d. draws from P_w. Sample i depends only on (key, i).
std::vector<Scenario> sample_induced(const EnvironmentMap& env, const Eigen::VectorXd& w,
                                     std::size_t n, const StreamKey& key);

struct ExactDiscrete {};
struct MonteCarlo {
    std::size_t n{100000};
    StreamKey key{};
};
using ViolationMode = std::variant<ExactDiscrete, MonteCarlo>;

/// P_{w_env}( y <w_eval, xi> < 1 - gamma ).
double violation_probability(const EnvironmentMap& env, const Eigen::VectorXd& w_eval,
                             const Eigen::VectorXd& w_env, const ViolationMode& mode,
                             double gamma = 0.0);

/// |y<w, respond(s)> - y<w, s> - alpha(||w||) ||w||^2|. Only meaningful for
/// sign = +1 with both labels responding.
double margin_identity_check(const EnvironmentMap& env, const Eigen::VectorXd& w, const Scenario& s);

}  // namespace perfscen
