#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rankcal/calibration.hpp"
#include "rankcal/domain.hpp"

namespace rankcal {

/// A variance that must be positive came out non-positive.
class DegenerateVarianceError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct VarianceComponents {
    double tau_jk_hat = 0.0;
    double tau_kj_hat = 0.0;
    double phi_jk_hat = 0.0;
    /// max(tau_jk + tau_kj - phi_jk, 0)
    double asymptotic_variance = 0.0;
    /// set when the raw combination was not positive
    bool floored = false;
};

enum class PiSource { design, empirical };

struct TestConfig {
    double alpha = 0.05;
    bool continuity_correction = false;  // unadjusted test only
    PiSource pi_source = PiSource::design;
};

void validate_config(const TestConfig& config);

struct TestReport {
    /// sqrt(n)(U - 1/2) for the rank tests, (Ybar_j - Ybar_k)/SE for the t-test
    double statistic = 0.0;
    /// standard deviation of `statistic` under H0
    double null_sd = 1.0;
    /// z_{alpha/2} * null_sd; reject when |statistic| exceeds it
    double critical_value = 0.0;
    double p_value = 1.0;
    bool reject = false;
    EstimateReport estimate;
    std::string method;
    std::vector<std::string> warnings;
};

/// Standard normal upper quantile z_{alpha/2}.
double z_two_sided(double alpha);

/// Two-sided p-value P(|Z| >= |z|).
double two_sided_p(double z);

/*
 * General phi_jk:
 *   (pi_j b_k + pi_k b_j)' S (pi_j b_k + pi_k b_j) / (pi_j pi_k (pi_j + pi_k))
 *   + (1 - pi_j - pi_k) (b_j - b_k)' S (b_j - b_k) / (pi_j + pi_k)
 */
double phi_general(const Eigen::VectorXd& beta_j, const Eigen::VectorXd& beta_k, const Eigen::MatrixXd& sigma,
                   double pi_j, double pi_k);

/// phi for the restricted calibration centred on the j-and-k covariate mean:
///   pi_k/(pi_j(pi_j+pi_k)) b_j'Sb_j + pi_j/(pi_k(pi_j+pi_k)) b_k'Sb_k + 2 b_j'Sb_k
/// Coincides with phi_general when pi_j + pi_k = 1.
double phi_restricted(const Eigen::VectorXd& beta_j, const Eigen::VectorXd& beta_k, const Eigen::MatrixXd& sigma,
                      double pi_j, double pi_k);

/// (pi_j beta_j + pi_k beta_k) / (pi_j + pi_k)
Eigen::VectorXd pooled_beta(const CalibrationFit& fit, const DesignSpec& design);

/// Null-hypothesis form beta' S beta (1/pi_j + 1/pi_k).
double phi_under_null(const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma, const DesignSpec& design);

/// tau_hat from placements; phi_hat from the fit.
VarianceComponents variance_components(const TrialData& data, const DesignSpec& design, const CalibrationFit& fit,
                                       AdjustMode mode = AdjustMode::pooled_mean);

/// tau_hat only; phi_hat is left at zero.
VarianceComponents unadjusted_variance_components(const TrialData& data, const DesignSpec& design);

/// Rejects when sqrt(n)|U - 1/2| > z sqrt((1/12)(1/pi_j + 1/pi_k)). The
/// continuity variant uses n/n_j + n/n_k + n/(n_j n_k) instead.
TestReport wmw_test_unadjusted(const TrialData& data, const DesignSpec& design, const TestConfig& config = {});

/// Rejects when sqrt(n)|U^C - 1/2| > z sqrt((1/12 - b'Sb)(1/pi_j + 1/pi_k)) with
/// b the pooled beta_hat.
TestReport wmw_test_adjusted(const TrialData& data, const DesignSpec& design, const TestConfig& config = {},
                             const CalibrationOptions& options = {}, AdjustMode mode = AdjustMode::pooled_mean);

enum class IntervalMethod { unadjusted, adjusted, restricted };

/// Normal interval for theta_jk. The unadjusted interval carries a caveat:
/// it is only valid under simple randomization.
EstimateReport confidence_interval(const TrialData& data, const DesignSpec& design, IntervalMethod method, double alpha,
                                   const CalibrationOptions& options = {});

/// Same interval from pieces already computed.
EstimateReport interval_from(double point, double variance, bool floored, std::size_t n, double alpha, Method method);

/// Welch two-sample statistic for Ybar_j - Ybar_k with a normal reference.
TestReport t_test_baseline(const TrialData& data, const DesignSpec& design, const TestConfig& config = {});

/// Everything reported for one treatment pair, computed from shared
/// intermediate results (one sort, one fit).
struct PairAnalysis {
    DesignSpec design;  // with the proportions actually used
    TestReport unadjusted;
    std::optional<TestReport> adjusted;  // absent when adjustment is off
    TestReport t_test;
    VarianceComponents variance;  // phi_hat = 0 when adjustment is off
    std::optional<CalibrationFit> fit;
    std::vector<std::string> warnings;
};

struct PairAnalysisOptions {
    TestConfig test;
    CalibrationOptions calibration;
    std::optional<AdjustMode> adjust = AdjustMode::pooled_mean;
};

PairAnalysis analyze_pair(const TrialData& data, const DesignSpec& design, const PairAnalysisOptions& options = {});

inline constexpr const char* kUnadjustedIntervalCaveat = "valid only under simple randomization";

}  // namespace rankcal
