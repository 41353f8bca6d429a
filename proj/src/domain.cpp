#include "rankcal/domain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace rankcal {

namespace {

constexpr std::size_t kRecommendedGroupSize = 20;

bool in_range(Arm arm, int num_treatments) { return arm >= 1 && arm <= num_treatments; }

// Unordered pairs with identical values: sum over tie groups of m choose 2.
std::size_t count_tied_pairs(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < values.size();) {
        std::size_t run = 1;
        while (i + run < values.size() && values[i + run] == values[i]) ++run;
        pairs += run * (run - 1) / 2;
        i += run;
    }
    return pairs;
}

// True when every stratum indicator lies in the column span of [1, X].
bool strata_spanned_by(const std::vector<int>& strata, const Eigen::MatrixXd& covariates) {
    const Eigen::Index n = covariates.rows();
    Eigen::MatrixXd design(n, covariates.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(covariates.cols()) = covariates;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);

    std::map<int, int> levels;
    for (int z : strata) levels.emplace(z, 0);
    if (levels.size() < 2) return true;
    for (const auto& [level, unused] : levels) {
        Eigen::VectorXd indicator(n);
        for (Eigen::Index i = 0; i < n; ++i) indicator(i) = strata[static_cast<std::size_t>(i)] == level ? 1.0 : 0.0;
        const Eigen::VectorXd fitted = design * qr.solve(indicator);
        if ((indicator - fitted).norm() > 1e-8 * std::sqrt(static_cast<double>(n))) return false;
    }
    return true;
}

}  // namespace

const char* to_string(FlagKind kind) {
    switch (kind) {
        case FlagKind::outcome_ties: return "outcome_ties";
        case FlagKind::small_group: return "small_group";
        case FlagKind::below_recommended_size: return "below_recommended_size";
        case FlagKind::strata_not_in_covariates: return "strata_not_in_covariates";
        case FlagKind::covariate_rank_deficient: return "covariate_rank_deficient";
        case FlagKind::empirical_proportions: return "empirical_proportions";
    }
    return "unknown";
}

const char* to_string(Method method) {
    switch (method) {
        case Method::unadjusted_u: return "unadjusted_u";
        case Method::adjusted_u: return "adjusted_u";
        case Method::restricted_adjusted_u: return "restricted_adjusted_u";
        case Method::mean_difference: return "mean_difference";
    }
    return "unknown";
}

bool ValidationSummary::has(FlagKind kind) const {
    return std::any_of(flags.begin(), flags.end(), [kind](const Flag& f) { return f.kind == kind; });
}

void validate_design(const DesignSpec& design) {
    const auto& pi = design.target_proportions;
    if (pi.size() < 2) throw ValidationError("design needs at least two treatment proportions");
    double total = 0.0;
    for (std::size_t j = 0; j < pi.size(); ++j) {
        if (!(pi[j] > 0.0) || !std::isfinite(pi[j]))
            throw ValidationError("treatment proportion " + std::to_string(j + 1) + " must be positive");
        total += pi[j];
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("treatment proportions must sum to 1");
    const int J = design.num_treatments();
    if (!in_range(design.pair.j, J) || !in_range(design.pair.k, J))
        throw ValidationError("treatment pair label out of range");
    if (design.pair.j == design.pair.k) throw ValidationError("treatment pair must name two different arms");
}

void check_structure(const TrialData& data, const DesignSpec& design) {
    validate_design(design);
    const std::size_t n = data.size();
    if (n == 0) throw ValidationError("trial has no units");
    if (data.num_treatments < 2) throw ValidationError("trial needs at least two treatments");
    if (design.num_treatments() != data.num_treatments)
        throw ValidationError("design lists " + std::to_string(design.num_treatments()) + " proportions but the trial has " +
                              std::to_string(data.num_treatments) + " treatments");
    if (data.treatments.size() != n) throw ValidationError("treatment column length does not match outcome column");
    if (static_cast<std::size_t>(data.covariates.rows()) != n)
        throw ValidationError("covariate row count does not match outcome column");
    if (data.covariates.cols() < 1) throw ValidationError("covariate dimension must be at least 1");
    if (data.strata && data.strata->size() != n) throw ValidationError("stratum column length does not match outcome column");
    for (std::size_t i = 0; i < n; ++i) {
        if (!in_range(data.treatments[i], data.num_treatments))
            throw ValidationError("label out of range: unit " + std::to_string(i) + " has treatment " +
                                  std::to_string(data.treatments[i]));
        if (!std::isfinite(data.outcomes[i])) throw ValidationError("non-finite outcome at unit " + std::to_string(i));
    }
    if (!data.covariates.allFinite()) throw ValidationError("non-finite covariate value");
    const auto sizes = group_sizes(data);
    for (Arm arm : {design.pair.j, design.pair.k})
        if (sizes[static_cast<std::size_t>(arm - 1)] == 0)
            throw ValidationError("treatment group " + std::to_string(arm) + " is empty");
}

std::vector<std::size_t> group_sizes(const TrialData& data) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(data.num_treatments, 0)), 0);
    for (Arm a : data.treatments)
        if (in_range(a, data.num_treatments)) ++sizes[static_cast<std::size_t>(a - 1)];
    return sizes;
}

std::vector<double> outcomes_of(const TrialData& data, Arm arm) {
    std::vector<double> out;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data.treatments[i] == arm) out.push_back(data.outcomes[i]);
    return out;
}

Eigen::MatrixXd covariates_of(const TrialData& data, Arm arm) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data.treatments[i] == arm) rows.push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), data.covariates.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = data.covariates.row(rows[r]);
    return out;
}

ValidationSummary validate_trial(const TrialData& data, const DesignSpec& design) {
    check_structure(data, design);
    ValidationSummary summary;
    summary.group_sizes = group_sizes(data);

    summary.tie_count = count_tied_pairs(data.outcomes);
    if (summary.tie_count > 0)
        summary.flags.push_back({FlagKind::outcome_ties, std::to_string(summary.tie_count) +
                                                             " tied outcome pair(s); ties count toward both U_jk and U_kj"});

    for (Arm arm : {design.pair.j, design.pair.k}) {
        const std::size_t nj = summary.n(arm);
        if (nj < 2)
            summary.flags.push_back({FlagKind::small_group, "group " + std::to_string(arm) + " has fewer than 2 units"});
        else if (nj < kRecommendedGroupSize)
            summary.flags.push_back({FlagKind::below_recommended_size,
                                     "group " + std::to_string(arm) + " has " + std::to_string(nj) +
                                         " units; normal approximations may be poor below 20"});
    }

    const Eigen::Index n = static_cast<Eigen::Index>(data.size());
    if (n >= 2) {
        const Eigen::MatrixXd centered = data.covariates.rowwise() - data.covariates.colwise().mean();
        const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
        const double largest = eig.eigenvalues().maxCoeff();
        const double smallest = eig.eigenvalues().minCoeff();
        summary.covariance_condition = largest > 0.0 ? smallest / largest : 0.0;
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
            if (largest > 0.0 && eig.eigenvalues()(i) >= 1e-10 * largest) ++rank;
        summary.covariate_rank = rank;
    }
    if (summary.covariate_rank < data.dim())
        summary.flags.push_back({FlagKind::covariate_rank_deficient,
                                 "covariate covariance has rank " + std::to_string(summary.covariate_rank) + " < " +
                                     std::to_string(data.dim())});

    if (data.strata && !strata_spanned_by(*data.strata, data.covariates))
        summary.flags.push_back({FlagKind::strata_not_in_covariates,
                                 "stratum indicators are not linear functions of the adjustment covariates"});
    return summary;
}

DesignSpec with_empirical_proportions(const TrialData& data, const DesignSpec& design, Flag* warning) {
    DesignSpec out = design;
    const auto sizes = group_sizes(data);
    const double n = static_cast<double>(data.size());
    out.target_proportions.assign(sizes.size(), 0.0);
    for (std::size_t j = 0; j < sizes.size(); ++j) out.target_proportions[j] = static_cast<double>(sizes[j]) / n;
    // Renormalise so the sum is within 1e-12 of one after division.
    const double total = std::accumulate(out.target_proportions.begin(), out.target_proportions.end(), 0.0);
    for (double& p : out.target_proportions) p /= total;
    if (warning)
        *warning = {FlagKind::empirical_proportions,
                    "allocation proportions estimated as n_j/n instead of taken from the design"};
    return out;
}

}  // namespace rankcal
