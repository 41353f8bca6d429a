#pragma once

#include <string>

#include <Eigen/Core>

#include "rankcal/domain.hpp"

namespace rankcal {

enum class Family { normal, uniform, double_exponential, custom };

const char* to_string(Family family);

/// Outcome law summarised by its variance and the integral of the squared
/// density. Closed-form families fill in the integral themselves.
struct DistributionSpec {
    Family family = Family::normal;
    double variance = 1.0;
    double density_sq_integral = 0.0;

    static DistributionSpec normal(double variance = 1.0);
    /// Uniform law of the given variance (width sqrt(12 variance)).
    static DistributionSpec uniform(double variance = 1.0 / 12.0);
    static DistributionSpec double_exponential(double variance = 2.0);
    static DistributionSpec custom(double variance, double density_sq_integral);
};

void validate(const DistributionSpec& dist);

/// Wilcoxon-Mann-Whitney vs. two-sample t: 12 sigma^2 (int f^2)^2.
double are_wmw_vs_t(const DistributionSpec& dist);

/// Adjusted vs. unadjusted WMW: 1 / (1 - 12 b'Sb). Requires 12 b'Sb < 1.
double are_adjusted_vs_unadjusted(const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma);

struct AREReport {
    double wmw_vs_t = 0.0;
    double adjusted_vs_unadjusted = 1.0;
    double adjusted_vs_t = 0.0;
    /// 1 - 12 b'Sb
    double retained_fraction = 1.0;
    /// retained_fraction < 0.864: the adjusted test beats the t-test for any F
    bool dominates_t_for_all_f = false;
};

AREReport are_report(const DistributionSpec& dist, const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma);

/// Lower bound of the WMW-vs-t efficiency over all continuous laws.
inline constexpr double kHodgesLehmannBound = 0.864;

/// Same as are_report; named for the dominance question it answers.
inline AREReport dominance_check(const DistributionSpec& dist, const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma) {
    return are_report(dist, beta, sigma);
}

}  // namespace rankcal
