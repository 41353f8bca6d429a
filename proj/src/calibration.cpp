#include "rankcal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "rankcal/rank_core.hpp"

namespace rankcal {

namespace {

Eigen::VectorXd column_mean(const Eigen::MatrixXd& rows) { return rows.colwise().mean().transpose(); }

// Columns with a non-negligible loading on the eigenvector of the smallest
// eigenvalue; these are the ones involved in the (near-)collinearity.
std::vector<Eigen::Index> collinear_columns(const Eigen::VectorXd& null_direction) {
    std::vector<Eigen::Index> cols;
    const double scale = null_direction.cwiseAbs().maxCoeff();
    for (Eigen::Index c = 0; c < null_direction.size(); ++c)
        if (std::abs(null_direction(c)) > 1e-3 * scale) cols.push_back(c);
    return cols;
}

}  // namespace

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& covariates) {
    if (covariates.rows() < 2) throw ValidationError("sample covariance needs at least 2 rows");
    if (!covariates.allFinite()) throw ValidationError("sample covariance: non-finite covariate value");
    const Eigen::MatrixXd centered = covariates.rowwise() - covariates.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(covariates.rows() - 1);
    // exact symmetry
    return (cov + cov.transpose()) / 2.0;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> estimate_c(const TrialData& data, const DesignSpec& design) {
    check_structure(data, design);
    const auto [y_j, y_k] = pair_sample(data, design.pair);
    const Eigen::MatrixXd x_j = covariates_of(data, design.pair.j);
    const Eigen::MatrixXd x_k = covariates_of(data, design.pair.k);
    const Eigen::RowVectorXd xbar_j = x_j.colwise().mean();
    const Eigen::RowVectorXd xbar_k = x_k.colwise().mean();

    std::vector<double> sorted_j = y_j;
    std::vector<double> sorted_k = y_k;
    std::sort(sorted_j.begin(), sorted_j.end());
    std::sort(sorted_k.begin(), sorted_k.end());
    const double nj = static_cast<double>(y_j.size());
    const double nk = static_cast<double>(y_k.size());

    Eigen::VectorXd c_jk = Eigen::VectorXd::Zero(data.dim());
    for (std::size_t i = 0; i < y_j.size(); ++i) {
        // #{i' : y_k[i'] <= y_j[i]}
        const auto below = std::upper_bound(sorted_k.begin(), sorted_k.end(), y_j[i]) - sorted_k.begin();
        if (below > 0)
            c_jk += static_cast<double>(below) * (x_j.row(static_cast<Eigen::Index>(i)) - xbar_j).transpose();
    }
    Eigen::VectorXd c_kj = Eigen::VectorXd::Zero(data.dim());
    for (std::size_t i = 0; i < y_k.size(); ++i) {
        const auto below = std::upper_bound(sorted_j.begin(), sorted_j.end(), y_k[i]) - sorted_j.begin();
        if (below > 0)
            c_kj += static_cast<double>(below) * (x_k.row(static_cast<Eigen::Index>(i)) - xbar_k).transpose();
    }
    c_jk /= nj * nk;
    c_kj /= nj * nk;
    return {c_jk, c_kj};
}

CalibrationFit fit_calibration(const TrialData& data, const DesignSpec& design, const CalibrationOptions& options) {
    check_structure(data, design);
    CalibrationFit fit;
    fit.sigma_hat = sample_covariance(data.covariates);
    std::tie(fit.c_jk_hat, fit.c_kj_hat) = estimate_c(data, design);
    fit.xbar_all = column_mean(data.covariates);
    const Eigen::MatrixXd x_j = covariates_of(data, design.pair.j);
    const Eigen::MatrixXd x_k = covariates_of(data, design.pair.k);
    fit.xbar_j = column_mean(x_j);
    fit.xbar_k = column_mean(x_k);
    const double nj = static_cast<double>(x_j.rows());
    const double nk = static_cast<double>(x_k.rows());
    fit.xbar_jk = (nj * fit.xbar_j + nk * fit.xbar_k) / (nj + nk);

    const Eigen::Index p = data.dim();
    Eigen::MatrixXd system = fit.sigma_hat;
    if (options.ridge) {
        if (!(*options.ridge >= 0.0)) throw ValidationError("ridge must be non-negative");
        system += *options.ridge * Eigen::MatrixXd::Identity(p, p);
        fit.effective_ridge = *options.ridge;
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(system);
    fit.eigenvalues = eig.eigenvalues();
    const double smallest = fit.eigenvalues(0);
    const double largest = fit.eigenvalues(p - 1);
    if (!(largest > 0.0) || smallest < options.eigen_tolerance * largest) {
        auto cols = collinear_columns(eig.eigenvectors().col(0));
        std::ostringstream msg;
        msg << "covariate covariance is singular (smallest eigenvalue " << smallest << ", largest " << largest
            << "); collinear columns:";
        for (auto c : cols) msg << ' ' << c;
        throw SingularCovarianceError(msg.str(), std::move(cols), smallest, largest);
    }

    const Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success)
        throw SingularCovarianceError("Cholesky factorization of the covariate covariance failed", {}, smallest, largest);
    fit.beta_j_hat = llt.solve(fit.c_jk_hat);
    fit.beta_k_hat = llt.solve(fit.c_kj_hat);

    const double min_group = std::min(nj, nk);
    if (static_cast<double>(p) > min_group / 10.0)
        fit.warnings.push_back("covariate dimension " + std::to_string(p) +
                               " exceeds a tenth of the smaller group size; calibration may be unstable");
    if (fit.effective_ridge > 0.0)
        fit.warnings.push_back("ridge " + std::to_string(fit.effective_ridge) + " added to the covariance diagonal");
    return fit;
}

double apply_calibration(double u, const CalibrationFit& fit, AdjustMode mode) {
    const Eigen::VectorXd& center = mode == AdjustMode::pooled_mean ? fit.xbar_all : fit.xbar_jk;
    return u + (fit.xbar_j - center).dot(fit.beta_j_hat) - (fit.xbar_k - center).dot(fit.beta_k_hat);
}

AdjustedEstimate adjusted_u(const TrialData& data, const DesignSpec& design, AdjustMode mode,
                            const CalibrationOptions& options) {
    AdjustedEstimate est;
    est.fit = fit_calibration(data, design, options);
    est.u_unadjusted = compute_u(pair_sample(data, design.pair));
    est.u_adjusted = apply_calibration(est.u_unadjusted, est.fit, mode);
    est.mode = mode;
    return est;
}

}  // namespace rankcal
