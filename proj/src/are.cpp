#include "rankcal/are.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rankcal/domain.hpp"

namespace rankcal {

const char* to_string(Family family) {
    switch (family) {
        case Family::normal: return "normal";
        case Family::uniform: return "uniform";
        case Family::double_exponential: return "double_exponential";
        case Family::custom: return "custom";
    }
    return "unknown";
}

namespace {

DistributionSpec checked(DistributionSpec d) {
    validate(d);
    return d;
}

}  // namespace

DistributionSpec DistributionSpec::normal(double variance) {
    // int phi_sigma^2 = 1 / (2 sigma sqrt(pi))
    return checked({Family::normal, variance, 1.0 / (2.0 * std::sqrt(variance) * std::sqrt(std::numbers::pi))});
}

DistributionSpec DistributionSpec::uniform(double variance) {
    const double width = std::sqrt(12.0 * variance);
    return checked({Family::uniform, variance, 1.0 / width});
}

DistributionSpec DistributionSpec::double_exponential(double variance) {
    // variance 2 b^2, int f^2 = 1 / (4 b)
    const double b = std::sqrt(variance / 2.0);
    return checked({Family::double_exponential, variance, 1.0 / (4.0 * b)});
}

DistributionSpec DistributionSpec::custom(double variance, double density_sq_integral) {
    return checked({Family::custom, variance, density_sq_integral});
}

void validate(const DistributionSpec& dist) {
    if (!(dist.variance > 0.0) || !std::isfinite(dist.variance)) throw ValidationError("variance must be positive");
    if (!(dist.density_sq_integral > 0.0) || !std::isfinite(dist.density_sq_integral))
        throw ValidationError("squared-density integral must be positive");
}

double are_wmw_vs_t(const DistributionSpec& dist) {
    validate(dist);
    return 12.0 * dist.variance * dist.density_sq_integral * dist.density_sq_integral;
}

double are_adjusted_vs_unadjusted(const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() != beta.size())
        throw ValidationError("beta and sigma dimensions do not match");
    const double share = 12.0 * beta.dot(sigma * beta);
    if (share < 0.0) throw ValidationError("sigma is not positive semi-definite along beta");
    if (!(share < 1.0))
        throw ValidationError("12 b'Sb = " + std::to_string(share) +
                              " must be below 1; b'Sb cannot exceed the null variance 1/12 of F_k(Y_j)");
    return 1.0 / (1.0 - share);
}

AREReport are_report(const DistributionSpec& dist, const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma) {
    AREReport r;
    r.wmw_vs_t = are_wmw_vs_t(dist);
    r.adjusted_vs_unadjusted = are_adjusted_vs_unadjusted(beta, sigma);
    r.adjusted_vs_t = r.wmw_vs_t * r.adjusted_vs_unadjusted;
    r.retained_fraction = 1.0 - 12.0 * beta.dot(sigma * beta);
    r.dominates_t_for_all_f = r.retained_fraction < kHodgesLehmannBound;
    return r;
}

}  // namespace rankcal
