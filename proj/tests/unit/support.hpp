#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "rankcal/domain.hpp"

namespace support {

// Distinct values: a random permutation of 0..n-1 scaled and jittered.
inline std::vector<double> distinct_values(std::size_t n, std::mt19937_64& rng) {
    std::vector<double> v(n);
    std::uniform_real_distribution<double> jitter(0.0, 0.5);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i) + jitter(rng);
    std::shuffle(v.begin(), v.end(), rng);
    return v;
}

// J arms, n units, p correlated covariates, tie-free outcomes depending on X.
inline rankcal::TrialData random_trial(std::size_t n, int J, int p, std::mt19937_64& rng, double slope = 0.5) {
    rankcal::TrialData d;
    d.num_treatments = J;
    d.covariates.resize(static_cast<Eigen::Index>(n), p);
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        d.treatments.push_back(static_cast<int>(i % static_cast<std::size_t>(J)) + 1);
        double common = z(rng);
        double y = 0.3 * z(rng);
        for (int c = 0; c < p; ++c) {
            const double x = 0.5 * common + z(rng);
            d.covariates(static_cast<Eigen::Index>(i), c) = x;
            y += slope * x;
        }
        d.outcomes.push_back(y);
    }
    std::shuffle(d.treatments.begin(), d.treatments.end(), rng);
    return d;
}

inline rankcal::DesignSpec uniform_design(int J, int j = 1, int k = 2) {
    return {std::vector<double>(static_cast<std::size_t>(J), 1.0 / J), {j, k}};
}

}  // namespace support
