#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "rankcal/domain.hpp"

namespace rankcal {

enum class SchemeKind { simple, stratified_block, minimization };

const char* to_string(SchemeKind kind);

struct MinimizationParams {
    /// One weight per factor; empty means uniform.
    std::vector<double> factor_weights;
    /// Probability of taking the imbalance-minimizing arm.
    double p_mz = 0.75;
};

struct RandomizationScheme {
    SchemeKind kind = SchemeKind::simple;
    std::vector<double> pi;
    int block_size = 0;  // stratified_block only
    MinimizationParams minimization;
    std::uint64_t seed = 0;

    int num_treatments() const { return static_cast<int>(pi.size()); }
};

/// Throws ValidationError on invalid proportions, a block size whose per-arm
/// share block_size * pi_j is not a positive integer, or p_mz outside (0.5, 1].
void validate_scheme(const RandomizationScheme& scheme);

/// i.i.d. labels with P(A_i = j) = pi_j.
std::vector<Arm> assign_simple(std::size_t n, const RandomizationScheme& scheme);

/// Within each stratum, labels are consumed from successive independently
/// shuffled blocks holding block_size * pi_j copies of arm j. A trailing
/// partial block is a truncated full block. Each stratum draws from its own
/// substream.
std::vector<Arm> assign_stratified_block(std::span<const int> strata, const RandomizationScheme& scheme);

/*
 * Pocock-Simon minimization. Units arrive in order; `levels[i]` holds one
 * level per factor. For each candidate arm a, the imbalance is
 *
 *     sum_f w_f * range_j( n_{f, level, j}^{(a)} / pi_j )
 *
 * where n^{(a)} are the marginal counts after hypothetically placing the unit
 * on arm a. The minimizing arm (ties broken uniformly) is taken with
 * probability p_mz, otherwise a uniform pick among the other arms. When
 * every arm ties the pick is uniform over all arms.
 */
std::vector<Arm> assign_minimization(std::span<const std::vector<int>> levels, const RandomizationScheme& scheme);

struct BalanceDiagnostic {
    /// stratum -> per-arm counts n_zj (index arm - 1)
    std::map<int, std::vector<std::size_t>> counts;
    std::map<int, std::size_t> stratum_sizes;
    /// max over (z, j) of |n_zj / n_z - pi_j|
    double max_deviation = 0.0;
};

BalanceDiagnostic balance_report(std::span<const Arm> assignments, std::span<const int> strata,
                                 std::span<const double> pi);

/// Encodes a tuple of factor levels as one stratum label (joint level).
std::vector<int> joint_levels(std::span<const std::vector<int>> levels);

}  // namespace rankcal
