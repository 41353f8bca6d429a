#include "rankcal/rank_core.hpp"

#include <algorithm>
#include <cmath>

namespace rankcal {

namespace {

void require_nonempty(std::span<const double> y_j, std::span<const double> y_k) {
    if (y_j.empty() || y_k.empty()) throw ValidationError("Wilcoxon statistic needs both groups nonempty");
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(y_j.begin(), y_j.end(), finite) || !std::all_of(y_k.begin(), y_k.end(), finite))
        throw ValidationError("Wilcoxon statistic needs finite outcomes");
}

std::vector<double> sorted_copy(std::span<const double> values) {
    std::vector<double> out(values.begin(), values.end());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

PairSample pair_sample(const TrialData& data, TreatmentPair pair) {
    return {outcomes_of(data, pair.j), outcomes_of(data, pair.k)};
}

long long count_le_pairs(std::span<const double> y_j, std::span<const double> y_k, Kernel kernel) {
    require_nonempty(y_j, y_k);
    long long count = 0;
    if (kernel == Kernel::brute) {
        for (double a : y_j)
            for (double b : y_k) count += a <= b ? 1 : 0;
        return count;
    }
    const auto sorted_k = sorted_copy(y_k);
    for (double a : y_j) {
        // y_k values >= a
        const auto first = std::lower_bound(sorted_k.begin(), sorted_k.end(), a);
        count += sorted_k.end() - first;
    }
    return count;
}

double compute_u(std::span<const double> y_j, std::span<const double> y_k, Kernel kernel) {
    const long long count = count_le_pairs(y_j, y_k, kernel);
    return static_cast<double>(count) / (static_cast<double>(y_j.size()) * static_cast<double>(y_k.size()));
}

double compute_u(const PairSample& sample, Kernel kernel) { return compute_u(sample.y_j, sample.y_k, kernel); }

double rank_sum_statistic(const PairSample& sample) {
    const double nj = static_cast<double>(sample.y_j.size());
    // n_j n_k U_jk is the integer pair count itself
    const long long count = count_le_pairs(sample.y_j, sample.y_k);
    return static_cast<double>(count) + nj * (nj + 1.0) / 2.0;
}

PlacementVectors placements(const PairSample& sample) {
    require_nonempty(sample.y_j, sample.y_k);
    const auto sorted_j = sorted_copy(sample.y_j);
    const auto sorted_k = sorted_copy(sample.y_k);
    const double nj = static_cast<double>(sorted_j.size());
    const double nk = static_cast<double>(sorted_k.size());

    PlacementVectors out;
    out.g_j.reserve(sample.y_j.size());
    out.g_k.reserve(sample.y_k.size());
    for (double a : sample.y_j) {
        const auto ge = sorted_k.end() - std::lower_bound(sorted_k.begin(), sorted_k.end(), a);
        out.g_j.push_back(static_cast<double>(ge) / nk);
    }
    for (double b : sample.y_k) {
        const auto le = std::upper_bound(sorted_j.begin(), sorted_j.end(), b) - sorted_j.begin();
        out.g_k.push_back(static_cast<double>(le) / nj);
    }
    return out;
}

}  // namespace rankcal
