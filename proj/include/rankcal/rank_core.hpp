#pragma once

#include <span>
#include <vector>

#include "rankcal/domain.hpp"

namespace rankcal {

/// Outcomes of the two groups being compared. Neither needs to be sorted.
struct PairSample {
    std::vector<double> y_j;
    std::vector<double> y_k;
};

PairSample pair_sample(const TrialData& data, TreatmentPair pair);

/*
 * Per-unit placements:
 *   g_j[i]  = (1/n_k) #{i' : y_j[i] <= y_k[i']}
 *   g_k[i'] = (1/n_j) #{i  : y_j[i] <= y_k[i']}
 * Both vectors average to U_jk.
 */
struct PlacementVectors {
    std::vector<double> g_j;
    std::vector<double> g_k;
};

enum class Kernel { brute, fast };

/// Number of pairs (i, i') with y_j[i] <= y_k[i']. Ties count.
long long count_le_pairs(std::span<const double> y_j, std::span<const double> y_k, Kernel kernel = Kernel::fast);

/// Wilcoxon two-sample statistic U_jk in [0, 1]. Both kernels compute the
/// same integer pair count, so their results are bit-identical.
double compute_u(std::span<const double> y_j, std::span<const double> y_k, Kernel kernel = Kernel::fast);
double compute_u(const PairSample& sample, Kernel kernel = Kernel::fast);

/// Mann-Whitney rank-sum form: n_j n_k U_jk + n_j (n_j + 1) / 2.
double rank_sum_statistic(const PairSample& sample);

PlacementVectors placements(const PairSample& sample);

}  // namespace rankcal
