#include "rankcal/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "rankcal/rank_core.hpp"

namespace rankcal {

namespace {

constexpr double kNullVarianceEpsilon = 1e-10;

struct RankPieces {
    PairSample sample;
    double u = 0.0;
    VarianceComponents tau;  // tau parts only
};

double mean_of_squares(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s / static_cast<double>(v.size());
}

RankPieces rank_pieces(const TrialData& data, const DesignSpec& design) {
    RankPieces r;
    r.sample = pair_sample(data, design.pair);
    r.u = compute_u(r.sample);
    const PlacementVectors g = placements(r.sample);
    const double u2 = r.u * r.u;
    r.tau.tau_jk_hat = std::max(0.0, (mean_of_squares(g.g_j) - u2) / design.pi_j());
    r.tau.tau_kj_hat = std::max(0.0, (mean_of_squares(g.g_k) - u2) / design.pi_k());
    r.tau.asymptotic_variance = r.tau.tau_jk_hat + r.tau.tau_kj_hat;
    return r;
}

VarianceComponents with_phi(VarianceComponents v, double phi) {
    v.phi_jk_hat = phi;
    const double raw = v.tau_jk_hat + v.tau_kj_hat - phi;
    v.floored = raw <= 0.0;
    v.asymptotic_variance = std::max(raw, 0.0);
    return v;
}

double quad(const Eigen::VectorXd& a, const Eigen::MatrixXd& s, const Eigen::VectorXd& b) { return a.dot(s * b); }

DesignSpec resolve_design(const TrialData& data, const DesignSpec& design, const TestConfig& config,
                          std::vector<std::string>& warnings) {
    if (config.pi_source == PiSource::design) return design;
    Flag flag{};
    DesignSpec out = with_empirical_proportions(data, design, &flag);
    warnings.push_back(flag.message);
    return out;
}

double pair_inverse_pi(const DesignSpec& design) { return 1.0 / design.pi_j() + 1.0 / design.pi_k(); }

TestReport unadjusted_report(const RankPieces& r, const TrialData& data, const DesignSpec& design,
                             const TestConfig& config) {
    const double n = static_cast<double>(data.size());
    const double nj = static_cast<double>(r.sample.y_j.size());
    const double nk = static_cast<double>(r.sample.y_k.size());
    const double scale = config.continuity_correction ? n / nj + n / nk + n / (nj * nk) : pair_inverse_pi(design);

    TestReport t;
    t.method = config.continuity_correction ? "wmw_unadjusted_continuity" : "wmw_unadjusted";
    t.statistic = std::sqrt(n) * (r.u - 0.5);
    t.null_sd = std::sqrt(scale / 12.0);
    t.critical_value = z_two_sided(config.alpha) * t.null_sd;
    t.p_value = two_sided_p(t.statistic / t.null_sd);
    t.reject = t.p_value < config.alpha;
    t.estimate = interval_from(r.u, r.tau.asymptotic_variance, false, data.size(), config.alpha, Method::unadjusted_u);
    return t;
}

TestReport adjusted_report(const RankPieces& r, const CalibrationFit& fit, const VarianceComponents& v,
                           const TrialData& data, const DesignSpec& design, const TestConfig& config,
                           AdjustMode mode) {
    const Eigen::VectorXd beta = pooled_beta(fit, design);
    const double explained = quad(beta, fit.sigma_hat, beta);
    const double null_var = 1.0 / 12.0 - explained;
    if (!(null_var > 0.0))
        throw DegenerateVarianceError("adjusted null variance 1/12 - b'Sb = " + std::to_string(null_var) +
                                      " is not positive; the calibration coefficients are grossly misestimated");

    const double n = static_cast<double>(data.size());
    const double u_c = apply_calibration(r.u, fit, mode);
    TestReport t;
    t.method = mode == AdjustMode::pooled_mean ? "wmw_adjusted" : "wmw_adjusted_restricted";
    t.statistic = std::sqrt(n) * (u_c - 0.5);
    t.null_sd = std::sqrt(std::max(null_var, kNullVarianceEpsilon) * pair_inverse_pi(design));
    t.critical_value = z_two_sided(config.alpha) * t.null_sd;
    t.p_value = two_sided_p(t.statistic / t.null_sd);
    t.reject = t.p_value < config.alpha;
    t.estimate = interval_from(u_c, v.asymptotic_variance, v.floored, data.size(), config.alpha,
                               mode == AdjustMode::pooled_mean ? Method::adjusted_u : Method::restricted_adjusted_u);
    t.warnings = fit.warnings;
    return t;
}

}  // namespace

void validate_config(const TestConfig& config) {
    if (!(config.alpha > 0.0 && config.alpha < 0.5)) throw ValidationError("alpha must lie in (0, 0.5)");
}

double z_two_sided(double alpha) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(boost::math::complement(standard, alpha / 2.0));
}

double two_sided_p(double z) { return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0))); }

double phi_general(const Eigen::VectorXd& beta_j, const Eigen::VectorXd& beta_k, const Eigen::MatrixXd& sigma,
                   double pi_j, double pi_k) {
    const Eigen::VectorXd mix = pi_j * beta_k + pi_k * beta_j;
    const Eigen::VectorXd diff = beta_j - beta_k;
    return quad(mix, sigma, mix) / (pi_j * pi_k * (pi_j + pi_k)) +
           (1.0 - pi_j - pi_k) * quad(diff, sigma, diff) / (pi_j + pi_k);
}

double phi_restricted(const Eigen::VectorXd& beta_j, const Eigen::VectorXd& beta_k, const Eigen::MatrixXd& sigma,
                      double pi_j, double pi_k) {
    const double pjk = pi_j + pi_k;
    return pi_k / (pi_j * pjk) * quad(beta_j, sigma, beta_j) + pi_j / (pi_k * pjk) * quad(beta_k, sigma, beta_k) +
           2.0 * quad(beta_j, sigma, beta_k);
}

Eigen::VectorXd pooled_beta(const CalibrationFit& fit, const DesignSpec& design) {
    const double pj = design.pi_j();
    const double pk = design.pi_k();
    return (pj * fit.beta_j_hat + pk * fit.beta_k_hat) / (pj + pk);
}

double phi_under_null(const Eigen::VectorXd& beta, const Eigen::MatrixXd& sigma, const DesignSpec& design) {
    return quad(beta, sigma, beta) * pair_inverse_pi(design);
}

VarianceComponents unadjusted_variance_components(const TrialData& data, const DesignSpec& design) {
    check_structure(data, design);
    return with_phi(rank_pieces(data, design).tau, 0.0);
}

VarianceComponents variance_components(const TrialData& data, const DesignSpec& design, const CalibrationFit& fit,
                                       AdjustMode mode) {
    check_structure(data, design);
    const RankPieces r = rank_pieces(data, design);
    const double phi = mode == AdjustMode::pooled_mean
                           ? phi_general(fit.beta_j_hat, fit.beta_k_hat, fit.sigma_hat, design.pi_j(), design.pi_k())
                           : phi_restricted(fit.beta_j_hat, fit.beta_k_hat, fit.sigma_hat, design.pi_j(), design.pi_k());
    return with_phi(r.tau, phi);
}

EstimateReport interval_from(double point, double variance, bool floored, std::size_t n, double alpha, Method method) {
    EstimateReport e;
    e.point = point;
    e.method = method;
    e.floored = floored || variance <= 0.0;
    e.std_error = std::sqrt(std::max(variance, 0.0) / static_cast<double>(n));
    const double half = z_two_sided(alpha) * e.std_error;
    e.ci_low = point - half;
    e.ci_high = point + half;
    if (method == Method::unadjusted_u) e.caveat = kUnadjustedIntervalCaveat;
    return e;
}

TestReport wmw_test_unadjusted(const TrialData& data, const DesignSpec& design, const TestConfig& config) {
    validate_config(config);
    check_structure(data, design);
    std::vector<std::string> warnings;
    const DesignSpec used = resolve_design(data, design, config, warnings);
    TestReport t = unadjusted_report(rank_pieces(data, used), data, used, config);
    t.warnings.insert(t.warnings.end(), warnings.begin(), warnings.end());
    return t;
}

TestReport wmw_test_adjusted(const TrialData& data, const DesignSpec& design, const TestConfig& config,
                             const CalibrationOptions& options, AdjustMode mode) {
    validate_config(config);
    check_structure(data, design);
    std::vector<std::string> warnings;
    const DesignSpec used = resolve_design(data, design, config, warnings);
    const RankPieces r = rank_pieces(data, used);
    const CalibrationFit fit = fit_calibration(data, used, options);
    const VarianceComponents v = variance_components(data, used, fit, mode);
    TestReport t = adjusted_report(r, fit, v, data, used, config, mode);
    t.warnings.insert(t.warnings.end(), warnings.begin(), warnings.end());
    return t;
}

EstimateReport confidence_interval(const TrialData& data, const DesignSpec& design, IntervalMethod method,
                                   double alpha, const CalibrationOptions& options) {
    validate_config(TestConfig{alpha});
    check_structure(data, design);
    const RankPieces r = rank_pieces(data, design);
    if (method == IntervalMethod::unadjusted)
        return interval_from(r.u, r.tau.asymptotic_variance, false, data.size(), alpha, Method::unadjusted_u);

    const AdjustMode mode = method == IntervalMethod::adjusted ? AdjustMode::pooled_mean : AdjustMode::restricted_mean;
    const CalibrationFit fit = fit_calibration(data, design, options);
    const VarianceComponents v = variance_components(data, design, fit, mode);
    return interval_from(apply_calibration(r.u, fit, mode), v.asymptotic_variance, v.floored, data.size(), alpha,
                         mode == AdjustMode::pooled_mean ? Method::adjusted_u : Method::restricted_adjusted_u);
}

TestReport t_test_baseline(const TrialData& data, const DesignSpec& design, const TestConfig& config) {
    validate_config(config);
    check_structure(data, design);
    const auto y_j = outcomes_of(data, design.pair.j);
    const auto y_k = outcomes_of(data, design.pair.k);
    if (y_j.size() < 2 || y_k.size() < 2) throw ValidationError("t-test needs at least 2 units per group");

    const auto mean_var = [](const std::vector<double>& y) {
        const double m = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
        double ss = 0.0;
        for (double v : y) ss += (v - m) * (v - m);
        return std::pair{m, ss / static_cast<double>(y.size() - 1)};
    };
    const auto [m_j, v_j] = mean_var(y_j);
    const auto [m_k, v_k] = mean_var(y_k);
    if (v_j == 0.0 && v_k == 0.0) throw DegenerateVarianceError("t-test: both groups have zero variance");

    const double se = std::sqrt(v_j / static_cast<double>(y_j.size()) + v_k / static_cast<double>(y_k.size()));
    TestReport t;
    t.method = "welch_t";
    t.statistic = (m_j - m_k) / se;
    t.null_sd = 1.0;
    t.critical_value = z_two_sided(config.alpha);
    t.p_value = two_sided_p(t.statistic);
    t.reject = t.p_value < config.alpha;
    t.estimate.point = m_j - m_k;
    t.estimate.std_error = se;
    t.estimate.ci_low = t.estimate.point - t.critical_value * se;
    t.estimate.ci_high = t.estimate.point + t.critical_value * se;
    t.estimate.method = Method::mean_difference;
    return t;
}

PairAnalysis analyze_pair(const TrialData& data, const DesignSpec& design, const PairAnalysisOptions& options) {
    validate_config(options.test);
    check_structure(data, design);
    PairAnalysis out;
    out.design = resolve_design(data, design, options.test, out.warnings);

    const RankPieces r = rank_pieces(data, out.design);
    out.unadjusted = unadjusted_report(r, data, out.design, options.test);
    out.t_test = t_test_baseline(data, out.design, options.test);
    out.variance = with_phi(r.tau, 0.0);

    if (options.adjust) {
        const AdjustMode mode = *options.adjust;
        out.fit = fit_calibration(data, out.design, options.calibration);
        const double phi =
            mode == AdjustMode::pooled_mean
                ? phi_general(out.fit->beta_j_hat, out.fit->beta_k_hat, out.fit->sigma_hat, out.design.pi_j(),
                              out.design.pi_k())
                : phi_restricted(out.fit->beta_j_hat, out.fit->beta_k_hat, out.fit->sigma_hat, out.design.pi_j(),
                                 out.design.pi_k());
        out.variance = with_phi(r.tau, phi);
        out.adjusted = adjusted_report(r, *out.fit, out.variance, data, out.design, options.test, mode);
        if (out.variance.floored)
            out.adjusted->warnings.push_back("estimated variance tau_jk + tau_kj - phi_jk was not positive; floored at 0");
    }
    return out;
}

}  // namespace rankcal
