// bounds.hpp
//
// Scenario-approach sample complexity. For a convex scenario program with a
// d-dimensional decision and N i.i.d. constraints, the probability that the
// scenario optimizer violates more than an epsilon-fraction of the
// constraint mass is at most
//
//     sum_{i=0}^{d-1} C(N,i) eps^i (1-eps)^(N-i).
//
// All functions here are pure and thread-safe.
#pragma once

#include <cstdint>

namespace perfscen::bounds {

struct BoundQuery {
    std::uint64_t n_samples{0};
    double epsilon{0.0};
    double beta{0.0};
    std::uint64_t dim{1};
};

/// Throws InvalidParameter when epsilon or beta is outside (0,1) or dim == 0.
void validate(double epsilon, double beta, std::uint64_t dim);

/// Binomial lower tail P[Bin(N, eps) <= d-1], accumulated in log space.
/// `q.beta` is validated but otherwise unused.
double evaluate_binomial_tail(const BoundQuery& q);

/// Same as above without the beta argument.
double binomial_tail(std::uint64_t n_samples, double epsilon, std::uint64_t dim);

struct SampleSizeResult {
    std::uint64_t n_samples;
    double tail;  // evaluate_binomial_tail at n_samples; always <= beta
};

/// Smallest N with binomial_tail(N, eps, d) <= beta. Equality counts.
SampleSizeResult minimal_sample_size(double epsilon, double beta, std::uint64_t dim);

}  // namespace perfscen::bounds
