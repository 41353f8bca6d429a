#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rankcal/calibration.hpp"
#include "rankcal/domain.hpp"
#include "rankcal/randomization.hpp"

namespace rankcal {

enum class OutcomeFamily { normal, double_exponential };

const char* to_string(OutcomeFamily family);

/*
 * Simulation scenario. Covariates are multivariate normal with zero means,
 * unit variances and common pairwise correlation `rho` (bivariate by
 * default); the outcome given arm A and covariates X is
 *
 *     Y = effect_a * (A - 1) + coefficients' X + noise
 *
 * with normal or double-exponential noise of the stated variance.
 */
struct Scenario {
    OutcomeFamily family = OutcomeFamily::normal;
    double effect_a = 0.0;
    double rho = 0.3;
    std::vector<double> coefficients{0.3, 0.3};
    /// noise variance; defaults to 0.25 (normal) or 0.5 (double exponential)
    std::optional<double> outcome_variance;
    std::size_t n = 400;
    int num_treatments = 4;
    std::vector<double> pi{0.25, 0.25, 0.25, 0.25};
    TreatmentPair pair{1, 2};
    SchemeKind randomizer = SchemeKind::simple;
    int block_size = 8;
    MinimizationParams minimization;
    /// Stratum cut points on the first covariate (standard-normal quartiles).
    std::vector<double> strata_cuts{-0.6744897501960817, 0.0, 0.6744897501960817};
    /// Append stratum indicator columns to the adjustment covariates.
    bool adjust_for_strata = false;
    std::size_t replications = 2000;
    std::uint64_t seed = 20240101;
    double alpha = 0.05;
    bool continuity_correction = false;

    double noise_variance() const;
    std::size_t dim() const { return coefficients.size(); }
};

void validate(const Scenario& scenario);

/// Every violated constraint; empty when the scenario is valid.
std::vector<std::string> scenario_problems(const Scenario& scenario);

/// Stable 64-bit fingerprint of every field that affects results.
std::uint64_t scenario_hash(const Scenario& scenario);

/// One replication's data; a pure function of (scenario, replication_index).
TrialData generate_dataset(const Scenario& scenario, std::size_t replication_index);

/// Population theta_jk = P(Y_j <= Y_k) by Monte Carlo over the marginal
/// outcome laws (covariates integrated out). Cached per scenario and draw count.
double theta_truth(const Scenario& scenario, std::size_t draws = 10'000'000);

enum class Estimator { mean_diff, u, u_adjusted };

const char* to_string(Estimator estimator);

struct MetricsRow {
    Estimator estimator = Estimator::u;
    double truth = 0.0;
    double ab = 0.0;                  // average bias
    std::optional<double> sd;         // empirical SD; undefined when R = 1
    double se = 0.0;                  // mean estimated SD
    double cp = 0.0;                  // CI coverage of the truth
    double p = 0.0;                   // rejection rate
};

struct StudyResult {
    Scenario scenario;
    std::uint64_t scenario_hash = 0;
    double theta_truth = 0.0;
    double mean_diff_truth = 0.0;
    std::vector<MetricsRow> rows;
};

class ReplicationError : public std::runtime_error {
   public:
    ReplicationError(const std::string& what, std::size_t index, std::uint64_t seed)
        : std::runtime_error(what), index_(index), seed_(seed) {}
    std::size_t replication_index() const { return index_; }
    std::uint64_t replication_seed() const { return seed_; }

   private:
    std::size_t index_;
    std::uint64_t seed_;
};

struct StudyOptions {
    /// worker threads; 0 means hardware concurrency
    unsigned threads = 0;
    /// draws for the truth oracle
    std::size_t truth_draws = 10'000'000;
};

/// Runs every replication, then aggregates in replication order so results
/// are bit-identical for any thread count. `theta` overrides the oracle.
StudyResult run_study(const Scenario& scenario, std::optional<double> theta = std::nullopt,
                      const StudyOptions& options = {});

/// Seed used for replication `index`, reported on failure for reproduction.
std::uint64_t replication_seed(const Scenario& scenario, std::size_t index);

}  // namespace rankcal
