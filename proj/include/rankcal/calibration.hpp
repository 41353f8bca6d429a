#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rankcal/domain.hpp"

namespace rankcal {

/// Covariate covariance is singular or too ill-conditioned to solve against.
class SingularCovarianceError : public std::runtime_error {
   public:
    SingularCovarianceError(const std::string& what, std::vector<Eigen::Index> columns, double smallest, double largest)
        : std::runtime_error(what), columns_(std::move(columns)), smallest_(smallest), largest_(largest) {}

    /// Covariate columns loading on the near-null eigenvector (0-based).
    const std::vector<Eigen::Index>& columns() const { return columns_; }
    double smallest_eigenvalue() const { return smallest_; }
    double largest_eigenvalue() const { return largest_; }

   private:
    std::vector<Eigen::Index> columns_;
    double smallest_;
    double largest_;
};

struct CalibrationOptions {
    /// Ridge added to the covariance diagonal before solving. Off by default;
    /// it perturbs the estimator.
    std::optional<double> ridge;
    /// Solve fails when smallest eigenvalue < tolerance * largest.
    double eigen_tolerance = 1e-10;
};

struct CalibrationFit {
    Eigen::MatrixXd sigma_hat;
    Eigen::VectorXd c_jk_hat;
    Eigen::VectorXd c_kj_hat;
    Eigen::VectorXd beta_j_hat;
    Eigen::VectorXd beta_k_hat;
    Eigen::VectorXd xbar_j;
    Eigen::VectorXd xbar_k;
    Eigen::VectorXd xbar_all;
    Eigen::VectorXd xbar_jk;  // mean over groups j and k only
    Eigen::VectorXd eigenvalues;  // of sigma_hat, ascending
    double effective_ridge = 0.0;
    std::vector<std::string> warnings;
};

enum class AdjustMode { pooled_mean, restricted_mean };

struct AdjustedEstimate {
    double u_unadjusted = 0.0;
    double u_adjusted = 0.0;
    CalibrationFit fit;
    AdjustMode mode = AdjustMode::pooled_mean;
};

/// Unbiased (n - 1 divisor) sample covariance of the rows.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& covariates);

/*
 * Plug-in estimates of C_jk = Cov{F_k(Y_j), X_j} and C_kj = Cov{F_j(Y_k), X_k}:
 *
 *   C_jk = 1/(n_j n_k) sum_i sum_i' I(y_k[i'] <= y_j[i]) (x_j[i]  - xbar_j)
 *   C_kj = 1/(n_j n_k) sum_i sum_i' I(y_j[i] <= y_k[i'])  (x_k[i'] - xbar_k)
 *
 * Evaluated in O((n_j + n_k) log) via sorted counts.
 */
std::pair<Eigen::VectorXd, Eigen::VectorXd> estimate_c(const TrialData& data, const DesignSpec& design);

/// Sigma_hat from all n units, C_hat from the pair, beta_hat = Sigma_hat^{-1} C_hat
/// by Cholesky. Throws SingularCovarianceError on a (near-)singular Sigma_hat
/// unless a ridge is configured.
CalibrationFit fit_calibration(const TrialData& data, const DesignSpec& design, const CalibrationOptions& options = {});

/// U^C = U + (xbar_j - xbar)' beta_j - (xbar_k - xbar)' beta_k. Restricted mode
/// swaps xbar for the mean over groups j and k; it is dominated by the pooled
/// form whenever J > 2 and exists for efficiency comparisons.
AdjustedEstimate adjusted_u(const TrialData& data, const DesignSpec& design, AdjustMode mode = AdjustMode::pooled_mean,
                            const CalibrationOptions& options = {});

/// Calibration step alone, for callers that already hold U and a fit.
double apply_calibration(double u, const CalibrationFit& fit, AdjustMode mode);

}  // namespace rankcal
