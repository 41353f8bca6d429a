#include "rankcal/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include <Eigen/Cholesky>

#include "rankcal/inference.hpp"
#include "rankcal/rng.hpp"

namespace rankcal {

namespace {

enum StreamTag : std::uint64_t {
    kCovariateStream = 1,
    kAssignmentStream = 2,
    kNoiseStream = 3,
    kTruthStream = 0x7472757468ULL,
};

constexpr std::size_t kTruthChunks = 64;

class Fingerprint {
   public:
    Fingerprint& add(std::uint64_t v) {
        state_ = splitmix64(state_ ^ v);
        return *this;
    }
    Fingerprint& add(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        return add(bits);
    }
    Fingerprint& add(const std::vector<double>& v) {
        add(static_cast<std::uint64_t>(v.size()));
        for (double x : v) add(x);
        return *this;
    }
    std::uint64_t value() const { return state_; }

   private:
    std::uint64_t state_ = 0x5241'4e4b'4341'4cULL;
};

std::uint64_t truth_key(const Scenario& s) {
    return Fingerprint{}
        .add(static_cast<std::uint64_t>(s.family))
        .add(s.effect_a)
        .add(s.rho)
        .add(s.coefficients)
        .add(s.noise_variance())
        .add(static_cast<std::uint64_t>(s.pair.j))
        .add(static_cast<std::uint64_t>(s.pair.k))
        .add(s.seed)
        .value();
}

Eigen::MatrixXd correlation_factor(const Scenario& s) {
    const auto p = static_cast<Eigen::Index>(s.dim());
    Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(p, p, s.rho);
    corr.diagonal().setOnes();
    const Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success) throw ValidationError("covariate correlation matrix is not positive definite");
    return llt.matrixL();
}

double noise_draw(OutcomeFamily family, double variance, Engine& engine) {
    if (family == OutcomeFamily::normal) return std::normal_distribution<double>(0.0, std::sqrt(variance))(engine);
    // Laplace(b) as b (E1 - E2); variance 2 b^2
    const double b = std::sqrt(variance / 2.0);
    std::exponential_distribution<double> exp1(1.0);
    const double e1 = exp1(engine);
    const double e2 = exp1(engine);
    return b * (e1 - e2);
}

int stratum_of(double x, const std::vector<double>& cuts) {
    return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

// Neumaier compensated sum, fed in a fixed order.
class Accumulator {
   public:
    void add(double x) {
        const double t = sum_ + x;
        comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    double total() const { return sum_ + comp_; }

   private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct EstimatorDraw {
    double estimate = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool reject = false;
};

struct ReplicationDraw {
    EstimatorDraw mean_diff;
    EstimatorDraw u;
    EstimatorDraw u_adjusted;
};

EstimatorDraw draw_from(const TestReport& t) {
    return {t.estimate.point, t.estimate.std_error, t.estimate.ci_low, t.estimate.ci_high, t.reject};
}

ReplicationDraw run_replication(const Scenario& s, std::size_t index) {
    const TrialData data = generate_dataset(s, index);
    const DesignSpec design{s.pi, s.pair};
    PairAnalysisOptions options;
    options.test.alpha = s.alpha;
    options.test.continuity_correction = s.continuity_correction;
    options.adjust = AdjustMode::pooled_mean;
    const PairAnalysis a = analyze_pair(data, design, options);
    return {draw_from(a.t_test), draw_from(a.unadjusted), draw_from(*a.adjusted)};
}

MetricsRow aggregate(Estimator which, double truth, const std::vector<ReplicationDraw>& draws) {
    const auto pick = [which](const ReplicationDraw& d) -> const EstimatorDraw& {
        switch (which) {
            case Estimator::mean_diff: return d.mean_diff;
            case Estimator::u: return d.u;
            case Estimator::u_adjusted: return d.u_adjusted;
        }
        return d.u;
    };
    const double R = static_cast<double>(draws.size());
    Accumulator bias, est, se, cover, reject;
    for (const auto& d : draws) {
        const EstimatorDraw& e = pick(d);
        bias.add(e.estimate - truth);
        est.add(e.estimate);
        se.add(e.se);
        cover.add(e.ci_low <= truth && truth <= e.ci_high ? 1.0 : 0.0);
        reject.add(e.reject ? 1.0 : 0.0);
    }
    MetricsRow row;
    row.estimator = which;
    row.truth = truth;
    row.ab = bias.total() / R;
    row.se = se.total() / R;
    row.cp = cover.total() / R;
    row.p = reject.total() / R;
    if (draws.size() > 1) {
        const double mean = est.total() / R;
        Accumulator ss;
        for (const auto& d : draws) {
            const double dev = pick(d).estimate - mean;
            ss.add(dev * dev);
        }
        row.sd = std::sqrt(ss.total() / (R - 1.0));
    }
    return row;
}

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, count) on `threads` workers.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t)
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        });
    for (auto& w : workers) w.join();
}

}  // namespace

const char* to_string(OutcomeFamily family) {
    return family == OutcomeFamily::normal ? "normal" : "double_exponential";
}

const char* to_string(Estimator estimator) {
    switch (estimator) {
        case Estimator::mean_diff: return "mean_diff";
        case Estimator::u: return "u";
        case Estimator::u_adjusted: return "u_adjusted";
    }
    return "unknown";
}

double Scenario::noise_variance() const {
    if (outcome_variance) return *outcome_variance;
    return family == OutcomeFamily::normal ? 0.25 : 0.5;
}

std::vector<std::string> scenario_problems(const Scenario& s) {
    std::vector<std::string> out;
    const auto check = [&](bool ok, const char* what) {
        if (!ok) out.emplace_back(what);
    };
    check(s.noise_variance() > 0.0, "outcome variance must be positive");
    check(s.replications >= 1, "replications must be at least 1");
    check(s.rho > -1.0 && s.rho < 1.0, "rho must lie in (-1, 1)");
    check(!s.coefficients.empty(), "at least one covariate coefficient is required");
    check(s.n >= 2, "sample size must be at least 2");
    check(static_cast<int>(s.pi.size()) == s.num_treatments, "pi must have one entry per treatment");
    check(std::is_sorted(s.strata_cuts.begin(), s.strata_cuts.end()), "stratum cut points must be increasing");
    check(s.alpha > 0.0 && s.alpha < 0.5, "alpha must lie in (0, 0.5)");
    const auto attempt = [&](auto&& f) {
        try {
            f();
        } catch (const ValidationError& e) {
            out.emplace_back(e.what());
        }
    };
    attempt([&] { validate_design(DesignSpec{s.pi, s.pair}); });
    attempt([&] { validate_scheme(RandomizationScheme{s.randomizer, s.pi, s.block_size, s.minimization, s.seed}); });
    if (s.rho > -1.0 && s.rho < 1.0 && !s.coefficients.empty()) attempt([&] { correlation_factor(s); });
    return out;
}

void validate(const Scenario& s) {
    const auto problems = scenario_problems(s);
    if (problems.empty()) return;
    std::string what = problems.front();
    for (std::size_t i = 1; i < problems.size(); ++i) what += "; " + problems[i];
    throw ValidationError(what);
}

std::uint64_t scenario_hash(const Scenario& s) {
    Fingerprint f;
    f.add(truth_key(s))
        .add(static_cast<std::uint64_t>(s.n))
        .add(static_cast<std::uint64_t>(s.num_treatments))
        .add(s.pi)
        .add(static_cast<std::uint64_t>(s.randomizer))
        .add(static_cast<std::uint64_t>(s.block_size))
        .add(s.minimization.factor_weights)
        .add(s.minimization.p_mz)
        .add(s.strata_cuts)
        .add(static_cast<std::uint64_t>(s.adjust_for_strata))
        .add(static_cast<std::uint64_t>(s.replications))
        .add(s.alpha)
        .add(static_cast<std::uint64_t>(s.continuity_correction));
    return f.value();
}

std::uint64_t replication_seed(const Scenario& s, std::size_t index) { return derive_seed(s.seed, {index}); }

TrialData generate_dataset(const Scenario& s, std::size_t replication_index) {
    const std::uint64_t seed = replication_seed(s, replication_index);
    const auto p = static_cast<Eigen::Index>(s.dim());
    const auto n = static_cast<Eigen::Index>(s.n);

    Engine cov_engine = make_engine(seed, {kCovariateStream});
    std::normal_distribution<double> standard(0.0, 1.0);
    const Eigen::MatrixXd factor = correlation_factor(s);
    Eigen::MatrixXd z(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < p; ++c) z(i, c) = standard(cov_engine);
    const Eigen::MatrixXd x = z * factor.transpose();

    std::vector<int> strata(s.n);
    for (Eigen::Index i = 0; i < n; ++i) strata[static_cast<std::size_t>(i)] = stratum_of(x(i, 0), s.strata_cuts);

    RandomizationScheme scheme{s.randomizer, s.pi, s.block_size, s.minimization, derive_seed(seed, {kAssignmentStream})};
    std::vector<Arm> arms;
    switch (s.randomizer) {
        case SchemeKind::simple: arms = assign_simple(s.n, scheme); break;
        case SchemeKind::stratified_block: arms = assign_stratified_block(strata, scheme); break;
        case SchemeKind::minimization: {
            std::vector<std::vector<int>> levels;
            levels.reserve(s.n);
            for (int z_i : strata) levels.push_back({z_i});
            arms = assign_minimization(levels, scheme);
            break;
        }
    }

    Engine noise_engine = make_engine(seed, {kNoiseStream});
    const Eigen::Map<const Eigen::VectorXd> coef(s.coefficients.data(), p);
    const Eigen::VectorXd signal = x * coef;
    const double variance = s.noise_variance();

    TrialData data;
    data.num_treatments = s.num_treatments;
    data.treatments = arms;
    data.outcomes.resize(s.n);
    for (std::size_t i = 0; i < s.n; ++i)
        data.outcomes[i] = s.effect_a * (arms[i] - 1) + signal(static_cast<Eigen::Index>(i)) +
                           noise_draw(s.family, variance, noise_engine);

    const int levels = static_cast<int>(s.strata_cuts.size()) + 1;
    if (s.adjust_for_strata && levels > 1) {
        data.covariates.resize(n, p + levels - 1);
        data.covariates.leftCols(p) = x;
        for (Eigen::Index i = 0; i < n; ++i)
            for (int l = 1; l < levels; ++l)
                data.covariates(i, p + l - 1) = strata[static_cast<std::size_t>(i)] == l ? 1.0 : 0.0;
    } else {
        data.covariates = x;
    }
    if (s.randomizer != SchemeKind::simple) data.strata = std::move(strata);
    return data;
}

double theta_truth(const Scenario& s, std::size_t draws) {
    static std::mutex mutex;
    static std::map<std::pair<std::uint64_t, std::size_t>, double> cache;
    const auto key = std::pair{truth_key(s), draws};
    {
        const std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }

    // coefficients' X is N(0, c'Rc) marginally
    const Eigen::Map<const Eigen::VectorXd> coef(s.coefficients.data(), static_cast<Eigen::Index>(s.dim()));
    const Eigen::MatrixXd factor = correlation_factor(s);
    const double signal_sd = (factor.transpose() * coef).norm();
    const double shift_j = s.effect_a * (s.pair.j - 1);
    const double shift_k = s.effect_a * (s.pair.k - 1);
    const double variance = s.noise_variance();

    std::vector<long long> hits(kTruthChunks, 0);
    parallel_for(kTruthChunks, resolve_threads(0), [&](std::size_t chunk) {
        Engine engine = make_engine(s.seed, {kTruthStream, chunk});
        std::normal_distribution<double> standard(0.0, 1.0);
        const std::size_t begin = draws * chunk / kTruthChunks;
        const std::size_t end = draws * (chunk + 1) / kTruthChunks;
        long long count = 0;
        for (std::size_t d = begin; d < end; ++d) {
            const double y_j = shift_j + signal_sd * standard(engine) + noise_draw(s.family, variance, engine);
            const double y_k = shift_k + signal_sd * standard(engine) + noise_draw(s.family, variance, engine);
            count += y_j <= y_k ? 1 : 0;
        }
        hits[chunk] = count;
    });
    long long total = 0;
    for (long long h : hits) total += h;
    const double theta = static_cast<double>(total) / static_cast<double>(draws);

    const std::lock_guard lock(mutex);
    cache.emplace(key, theta);
    return theta;
}

StudyResult run_study(const Scenario& scenario, std::optional<double> theta, const StudyOptions& options) {
    validate(scenario);
    StudyResult result;
    result.scenario = scenario;
    result.scenario_hash = scenario_hash(scenario);
    result.theta_truth = theta ? *theta : theta_truth(scenario, options.truth_draws);
    result.mean_diff_truth = scenario.effect_a * (scenario.pair.j - 1) - scenario.effect_a * (scenario.pair.k - 1);

    const std::size_t R = scenario.replications;
    std::vector<ReplicationDraw> draws(R);
    std::vector<std::string> errors(R);
    std::vector<char> failed(R, 0);
    parallel_for(R, resolve_threads(options.threads), [&](std::size_t i) {
        try {
            draws[i] = run_replication(scenario, i);
        } catch (const std::exception& e) {
            errors[i] = e.what();
            failed[i] = 1;
        }
    });
    for (std::size_t i = 0; i < R; ++i)
        if (failed[i]) {
            const std::uint64_t seed = replication_seed(scenario, i);
            throw ReplicationError("replication " + std::to_string(i) + " (seed " + std::to_string(seed) +
                                       ") failed: " + errors[i],
                                   i, seed);
        }

    result.rows.push_back(aggregate(Estimator::mean_diff, result.mean_diff_truth, draws));
    result.rows.push_back(aggregate(Estimator::u, result.theta_truth, draws));
    result.rows.push_back(aggregate(Estimator::u_adjusted, result.theta_truth, draws));
    return result;
}

}  // namespace rankcal
