#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rankcal {

/// Thrown when input data violates a structural invariant (lengths, labels,
/// dimensions). Statistical degeneracies use their own exception types.
class ValidationError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Treatment labels are 1-based, matching how arms are numbered in a trial.
using Arm = int;

/*
 * Per-unit columns of a trial: treatment assignment, observed outcome,
 * baseline covariates (n x p, one row per unit) and an optional discrete
 * stratum label used by covariate-adaptive randomization.
 */
struct TrialData {
    std::vector<Arm> treatments;
    std::vector<double> outcomes;
    Eigen::MatrixXd covariates;
    std::optional<std::vector<int>> strata;
    int num_treatments = 2;

    std::size_t size() const { return outcomes.size(); }
    Eigen::Index dim() const { return covariates.cols(); }
};

struct TreatmentPair {
    Arm j = 1;
    Arm k = 2;
};

struct DesignSpec {
    std::vector<double> target_proportions;
    TreatmentPair pair;

    double pi(Arm arm) const { return target_proportions.at(static_cast<std::size_t>(arm - 1)); }
    double pi_j() const { return pi(pair.j); }
    double pi_k() const { return pi(pair.k); }
    int num_treatments() const { return static_cast<int>(target_proportions.size()); }
};

/// Throws ValidationError unless pi sums to one (1e-12), all entries are
/// positive and the pair names two distinct arms of the design.
void validate_design(const DesignSpec& design);

/// Structural checks only: column lengths, label range, covariate dimension,
/// nonempty pair groups. Throws ValidationError.
void check_structure(const TrialData& data, const DesignSpec& design);

enum class FlagKind {
    outcome_ties,
    small_group,           // some n_j < 2
    below_recommended_size,  // some pair group has n_j < 20
    strata_not_in_covariates,
    covariate_rank_deficient,
    empirical_proportions,
};

const char* to_string(FlagKind kind);

struct Flag {
    FlagKind kind;
    std::string message;
};

struct ValidationSummary {
    std::vector<std::size_t> group_sizes;  // index arm - 1
    std::size_t tie_count = 0;             // unordered pairs of units with equal outcomes
    Eigen::Index covariate_rank = 0;
    double covariance_condition = 0.0;     // smallest / largest eigenvalue of the sample covariance
    std::vector<Flag> flags;

    bool has(FlagKind kind) const;
    std::size_t n(Arm arm) const { return group_sizes.at(static_cast<std::size_t>(arm - 1)); }
};

/// Group counts, tie and covariate diagnostics. Hard structural violations
/// throw; statistical concerns become flags.
ValidationSummary validate_trial(const TrialData& data, const DesignSpec& design);

/// Replaces the design proportions with n_j / n. Opt-in only; the returned
/// flag should be surfaced to the user.
DesignSpec with_empirical_proportions(const TrialData& data, const DesignSpec& design, Flag* warning = nullptr);

std::vector<std::size_t> group_sizes(const TrialData& data);

/// Outcomes of one arm, in unit order.
std::vector<double> outcomes_of(const TrialData& data, Arm arm);

/// Covariate rows of one arm, in unit order.
Eigen::MatrixXd covariates_of(const TrialData& data, Arm arm);

enum class Method { unadjusted_u, adjusted_u, restricted_adjusted_u, mean_difference };

const char* to_string(Method method);

/// Point estimate with a symmetric normal-theory interval.
struct EstimateReport {
    double point = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    Method method = Method::unadjusted_u;
    bool floored = false;
    std::string caveat;
};

}  // namespace rankcal
