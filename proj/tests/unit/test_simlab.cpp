#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "rankcal/simlab.hpp"

using namespace rankcal;

namespace {

double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Var(c'X) for unit-variance covariates with common correlation rho.
double signal_variance(const Scenario& s) {
    double v = 0.0;
    for (std::size_t a = 0; a < s.coefficients.size(); ++a)
        for (std::size_t b = 0; b < s.coefficients.size(); ++b)
            v += s.coefficients[a] * s.coefficients[b] * (a == b ? 1.0 : s.rho);
    return v;
}

// P(Y_1 <= Y_2) with Y_2 shifted by a. Y_1 - Y_2 + a = G + L, G normal with
// variance 2 Var(c'X) and L the difference of two Laplace(b) draws, density
// (1 + |d|/b) exp(-|d|/b) / (4b). Integrated by the midpoint rule.
double theta_laplace(const Scenario& s, double a) {
    const double b = std::sqrt(s.noise_variance() / 2.0);
    const double g = std::sqrt(2.0 * signal_variance(s));
    const double lo = -60.0 * b, hi = 60.0 * b;
    const int steps = 400000;
    const double h = (hi - lo) / steps;
    double total = 0.0;
    for (int i = 0; i < steps; ++i) {
        const double d = lo + (i + 0.5) * h;
        total += (1.0 + std::abs(d) / b) * std::exp(-std::abs(d) / b) / (4.0 * b) * Phi((a - d) / g);
    }
    return total * h;
}

Scenario small(SchemeKind kind = SchemeKind::simple) {
    Scenario s;
    s.randomizer = kind;
    s.replications = 40;
    s.n = 200;
    return s;
}

}  // namespace

TEST_CASE("scenario defaults and validation") {
    Scenario s;
    CHECK(s.noise_variance() == 0.25);
    s.family = OutcomeFamily::double_exponential;
    CHECK(s.noise_variance() == 0.5);
    CHECK_NOTHROW(validate(s));

    auto bad = s;
    bad.rho = 1.0;
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = s;
    bad.replications = 0;
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = s;
    bad.outcome_variance = 0.0;
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = s;
    bad.randomizer = SchemeKind::stratified_block;
    bad.block_size = 6;
    CHECK_THROWS_AS(validate(bad), ValidationError);
}

TEST_CASE("dataset is a pure function of scenario and index") {
    const auto s = small(SchemeKind::stratified_block);
    const auto a = generate_dataset(s, 3), b = generate_dataset(s, 3), c = generate_dataset(s, 4);
    CHECK(a.outcomes == b.outcomes);
    CHECK(a.treatments == b.treatments);
    CHECK(a.covariates == b.covariates);
    CHECK(a.outcomes != c.outcomes);
    CHECK(replication_seed(s, 3) != replication_seed(s, 4));
}

TEST_CASE("strata are quartiles of the first covariate") {
    auto s = small(SchemeKind::stratified_block);
    s.n = 4000;
    const auto d = generate_dataset(s, 0);
    REQUIRE(d.strata);
    std::vector<double> share(4, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double x = d.covariates(static_cast<Eigen::Index>(i), 0);
        const int z = (*d.strata)[i];
        share[static_cast<std::size_t>(z)] += 1.0 / 4000.0;
        const auto& cut = s.strata_cuts;
        CHECK((z == 0 || x >= cut[static_cast<std::size_t>(z - 1)]));
        CHECK((z == 3 || x < cut[static_cast<std::size_t>(z)]));
    }
    for (double p : share) CHECK(std::abs(p - 0.25) < 0.03);

    CHECK_FALSE(generate_dataset(small(), 0).strata);
}

TEST_CASE("stratum indicators can be appended to the covariates") {
    auto s = small(SchemeKind::stratified_block);
    s.adjust_for_strata = true;
    const auto d = generate_dataset(s, 0);
    CHECK(d.dim() == 5);
    for (Eigen::Index i = 0; i < d.covariates.rows(); ++i) {
        const int z = (*d.strata)[static_cast<std::size_t>(i)];
        for (int c = 1; c <= 3; ++c) CHECK(d.covariates(i, 1 + c) == (z == c ? 1.0 : 0.0));
    }
}

TEST_CASE("covariate and noise laws") {
    for (auto family : {OutcomeFamily::normal, OutcomeFamily::double_exponential}) {
        Scenario s;
        s.family = family;
        s.n = 200000;
        s.effect_a = 0.4;
        const auto d = generate_dataset(s, 0);
        const Eigen::MatrixXd x = d.covariates;
        const Eigen::RowVectorXd m = x.colwise().mean();
        const Eigen::MatrixXd c = (x.rowwise() - m).transpose() * (x.rowwise() - m) / (x.rows() - 1.0);
        CHECK(std::abs(c(0, 0) - 1.0) < 0.02);
        CHECK(std::abs(c(1, 1) - 1.0) < 0.02);
        CHECK(std::abs(c(0, 1) - 0.3) < 0.02);

        double sum = 0.0, sq = 0.0, fourth = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const double e = d.outcomes[i] - 0.4 * (d.treatments[i] - 1) - 0.3 * x(r, 0) - 0.3 * x(r, 1);
            sum += e;
            sq += e * e;
            fourth += e * e * e * e;
        }
        const double n = static_cast<double>(d.size());
        const double var = sq / n;
        CHECK(std::abs(sum / n) < 0.01);
        CHECK(std::abs(var - s.noise_variance()) < 0.01 * s.noise_variance() * 2);
        // kurtosis 3 for the normal, 6 for the Laplace
        const double kurt = fourth / n / (var * var);
        CHECK(std::abs(kurt - (family == OutcomeFamily::normal ? 3.0 : 6.0)) < 0.3);
    }
}

TEST_CASE("truth oracle") {
    Scenario s;
    const std::size_t draws = 2'000'000;
    CHECK(std::abs(theta_truth(s, draws) - 0.5) < 0.002);
    s.effect_a = 0.1;
    const double normal_theory = Phi(0.1 / std::sqrt(2.0 * (signal_variance(s) + 0.25)));
    CHECK(normal_theory == doctest::Approx(0.5405).epsilon(1e-3));
    CHECK(std::abs(theta_truth(s, draws) - normal_theory) < 0.002);

    s.family = OutcomeFamily::double_exponential;
    s.effect_a = 0.2;
    CHECK(std::abs(theta_truth(s, draws) - theta_laplace(s, 0.2)) < 0.002);
    s.effect_a = 0.0;
    CHECK(std::abs(theta_laplace(s, 0.0) - 0.5) < 1e-9);

    // cached and deterministic
    CHECK(theta_truth(s, draws) == theta_truth(s, draws));
}

TEST_CASE("study metrics are well-formed") {
    auto s = small();
    const auto r = run_study(s, 0.5, {1, 1000});
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].estimator == Estimator::mean_diff);
    CHECK(r.rows[1].estimator == Estimator::u);
    CHECK(r.rows[2].estimator == Estimator::u_adjusted);
    CHECK(r.theta_truth == 0.5);
    CHECK(r.mean_diff_truth == 0.0);
    for (const auto& m : r.rows) {
        CHECK((m.cp >= 0 && m.cp <= 1));
        CHECK((m.p >= 0 && m.p <= 1));
        REQUIRE(m.sd);
        CHECK(*m.sd >= 0);
        CHECK(m.se >= 0);
    }
    CHECK(r.scenario_hash == scenario_hash(s));
}

TEST_CASE("a single replication leaves SD undefined") {
    auto s = small();
    s.replications = 1;
    const auto r = run_study(s, 0.5, {1, 1000});
    for (const auto& m : r.rows) CHECK_FALSE(m.sd);
}

TEST_CASE("metrics are identical for any thread count") {
    auto s = small(SchemeKind::minimization);
    s.effect_a = 0.2;
    const auto one = run_study(s, 0.55, {1, 1000});
    const auto many = run_study(s, 0.55, {4, 1000});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(one.rows[i].ab == many.rows[i].ab);
        CHECK(*one.rows[i].sd == *many.rows[i].sd);
        CHECK(one.rows[i].se == many.rows[i].se);
        CHECK(one.rows[i].cp == many.rows[i].cp);
        CHECK(one.rows[i].p == many.rows[i].p);
    }
}

TEST_CASE("calibration shrinks the spread of U") {
    auto s = small();
    s.replications = 300;
    const auto r = run_study(s, 0.5, {0, 1000});
    CHECK(*r.rows[2].sd < *r.rows[1].sd);
}

TEST_CASE("failing replications report index and seed") {
    auto s = small();
    s.n = 3;
    try {
        run_study(s, 0.5, {1, 1000});
        FAIL("expected ReplicationError");
    } catch (const ReplicationError& e) {
        CHECK(e.replication_seed() == replication_seed(s, e.replication_index()));
    }
}

TEST_CASE("scenario hash tracks result-relevant fields") {
    Scenario a, b;
    CHECK(scenario_hash(a) == scenario_hash(b));
    b.effect_a = 0.1;
    CHECK(scenario_hash(a) != scenario_hash(b));
    b = a;
    b.seed += 1;
    CHECK(scenario_hash(a) != scenario_hash(b));
}
