#include "perfscen/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "perfscen/error.hpp"

namespace perfscen::bounds {

namespace {

// Neumaier summation of exp(log_terms - shift).
struct CompensatedSum {
    double sum{0.0};
    double carry{0.0};

    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            carry += (sum - t) + x;
        else
            carry += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

}  // namespace

void validate(double epsilon, double beta, std::uint64_t dim) {
    require(epsilon > 0.0 && epsilon < 1.0, "epsilon",
            "must lie in (0,1), got " + std::to_string(epsilon));
    require(beta > 0.0 && beta < 1.0, "beta",
            "must lie in (0,1), got " + std::to_string(beta));
    require(dim >= 1, "dim", "must be >= 1");
}

double binomial_tail(std::uint64_t n_samples, double epsilon, std::uint64_t dim) {
    require(epsilon > 0.0 && epsilon < 1.0, "epsilon",
            "must lie in (0,1), got " + std::to_string(epsilon));
    require(dim >= 1, "dim", "must be >= 1");

    // Every term of the binomial pmf is included: the sum is exactly one.
    if (dim - 1 >= n_samples) return 1.0;

    const double n = static_cast<double>(n_samples);
    const std::uint64_t terms = dim;  // i = 0 .. d-1

    // log term_i = log C(N,i) + i log eps + (N-i) log(1-eps), built by the
    // ratio recurrence term_{i+1}/term_i = (N-i)/(i+1) * eps/(1-eps).
    const double log_odds = std::log(epsilon) - std::log1p(-epsilon);
    double log_term = n * std::log1p(-epsilon);
    double log_max = log_term;
    {
        double lt = log_term;
        for (std::uint64_t i = 0; i + 1 < terms; ++i) {
            lt += std::log((n - static_cast<double>(i)) / static_cast<double>(i + 1)) + log_odds;
            log_max = std::max(log_max, lt);
        }
    }

    CompensatedSum acc;
    for (std::uint64_t i = 0; i < terms; ++i) {
        acc.add(std::exp(log_term - log_max));
        log_term += std::log((n - static_cast<double>(i)) / static_cast<double>(i + 1)) + log_odds;
    }
    const double log_tail = log_max + std::log(acc.value());
    return std::clamp(std::exp(log_tail), 0.0, 1.0);
}

double evaluate_binomial_tail(const BoundQuery& q) {
    validate(q.epsilon, q.beta, q.dim);
    return binomial_tail(q.n_samples, q.epsilon, q.dim);
}

SampleSizeResult minimal_sample_size(double epsilon, double beta, std::uint64_t dim) {
    validate(epsilon, beta, dim);

    auto ok = [&](std::uint64_t n) { return binomial_tail(n, epsilon, dim) <= beta; };

    // Below N = d the tail is identically one.
    std::uint64_t lo = dim;
    if (ok(lo)) return {lo, binomial_tail(lo, epsilon, dim)};

    // Bracket: lo fails, hi succeeds.
    std::uint64_t step = std::max<std::uint64_t>(dim, 1);
    std::uint64_t hi = lo + step;
    while (!ok(hi)) {
        lo = hi;
        if (step > std::numeric_limits<std::uint64_t>::max() / 4)
            throw InvalidParameter("epsilon", "sample size search overflowed");
        step *= 2;
        hi = lo + step;
    }
    while (hi - lo > 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (ok(mid))
            hi = mid;
        else
            lo = mid;
    }
    return {hi, binomial_tail(hi, epsilon, dim)};
}

}  // namespace perfscen::bounds
