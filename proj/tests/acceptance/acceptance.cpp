// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rankcal/are.hpp"
#include "rankcal/calibration.hpp"
#include "rankcal/inference.hpp"
#include "rankcal/randomization.hpp"
#include "rankcal/rank_core.hpp"
#include "rankcal/simlab.hpp"

using namespace rankcal;

namespace {

// Collects failed sub-checks and a one-line summary of observed values.
struct Outcome {
    std::vector<std::string> failures;
    std::ostringstream observed;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

bool within(double x, double centre, double tol) { return std::abs(x - centre) <= tol; }

std::string fmt(double x, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

const MetricsRow& row(const StudyResult& r, Estimator e) {
    return *std::find_if(r.rows.begin(), r.rows.end(), [&](const MetricsRow& m) { return m.estimator == e; });
}

Scenario table_scenario(OutcomeFamily family, double a, SchemeKind kind) {
    Scenario s;
    s.family = family;
    s.effect_a = a;
    s.randomizer = kind;
    s.n = 400;
    s.replications = 2000;
    return s;
}

StudyResult study(const Scenario& s) { return run_study(s, std::nullopt, {0, 10'000'000}); }

std::vector<double> distinct(std::size_t n, std::mt19937_64& rng) {
    std::vector<double> v(n);
    std::uniform_real_distribution<double> jitter(0.0, 0.5);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i) + jitter(rng);
    std::shuffle(v.begin(), v.end(), rng);
    return v;
}

TrialData random_trial(std::size_t n, int J, int p, std::mt19937_64& rng, double slope) {
    TrialData d;
    d.num_treatments = J;
    d.covariates.resize(static_cast<Eigen::Index>(n), p);
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        d.treatments.push_back(static_cast<int>(i % static_cast<std::size_t>(J)) + 1);
        const double common = z(rng);
        double y = 0.3 * z(rng);
        for (int c = 0; c < p; ++c) {
            const double x = 0.5 * common + z(rng);
            d.covariates(static_cast<Eigen::Index>(i), c) = x;
            y += slope * x;
        }
        d.outcomes.push_back(y);
    }
    std::shuffle(d.treatments.begin(), d.treatments.end(), rng);
    return d;
}

DesignSpec uniform_design(int J, int j, int k) { return {std::vector<double>(static_cast<std::size_t>(J), 1.0 / J), {j, k}}; }

RandomizationScheme scheme(SchemeKind kind, std::vector<double> pi, std::uint64_t seed, int block = 0) {
    RandomizationScheme s;
    s.kind = kind;
    s.pi = std::move(pi);
    s.seed = seed;
    s.block_size = block;
    return s;
}

void c1(Outcome& o) {
    const double n = are_wmw_vs_t(DistributionSpec::normal());
    const double u = are_wmw_vs_t(DistributionSpec::uniform());
    const double l = are_wmw_vs_t(DistributionSpec::double_exponential());
    o.expect(std::abs(n - 3.0 / std::numbers::pi) < 1e-9, "normal != 3/pi");
    o.expect(std::abs(u - 1.0) < 1e-9, "uniform != 1");
    o.expect(std::abs(l - 1.5) < 1e-9, "double exponential != 1.5");
    o.observed << "normal " << fmt(n, 12) << ", uniform " << fmt(u, 12) << ", double exponential " << fmt(l, 12);
}

void c2(Outcome& o) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> size(1, 200);
    int mismatches = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t nj = size(rng), nk = size(rng);
        const auto all = distinct(nj + nk, rng);
        const std::vector<double> yj(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(nj));
        const std::vector<double> yk(all.begin() + static_cast<std::ptrdiff_t>(nj), all.end());
        if (count_le_pairs(yj, yk, Kernel::fast) != count_le_pairs(yj, yk, Kernel::brute) ||
            compute_u(yj, yk, Kernel::fast) != compute_u(yj, yk, Kernel::brute))
            ++mismatches;
    }
    o.expect(mismatches == 0, std::to_string(mismatches) + " instances differ");
    o.observed << "1000 instances, " << mismatches << " mismatches";
}

void c3(Outcome& o) {
    const auto r = study(table_scenario(OutcomeFamily::normal, 0.0, SchemeKind::simple));
    for (const auto& m : r.rows) {
        const std::string name = to_string(m.estimator);
        o.expect(within(m.p, 0.05, 0.015), "P(" + name + ") = " + fmt(m.p, 3));
        o.expect(m.cp >= 0.93 && m.cp <= 0.96, "CP(" + name + ") = " + fmt(m.cp, 3));
        o.observed << name << " P " << fmt(m.p, 3) << " CP " << fmt(m.cp, 3) << "; ";
    }
    const double sd_u = *row(r, Estimator::u).sd, sd_c = *row(r, Estimator::u_adjusted).sd;
    o.expect(within(sd_u, 0.042, 0.004), "SD(U) = " + fmt(sd_u));
    o.expect(within(sd_c, 0.031, 0.004), "SD(U^C) = " + fmt(sd_c));
    o.observed << "SD(U) " << fmt(sd_u) << " SD(U^C) " << fmt(sd_c);
}

void c4(Outcome& o) {
    const auto r = study(table_scenario(OutcomeFamily::normal, 0.0, SchemeKind::stratified_block));
    const double pu = row(r, Estimator::u).p, pc = row(r, Estimator::u_adjusted).p;
    o.expect(pu <= 0.035, "P(U) = " + fmt(pu, 3));
    o.expect(within(pc, 0.05, 0.015), "P(U^C) = " + fmt(pc, 3));
    o.observed << "P(U) " << fmt(pu, 3) << ", P(U^C) " << fmt(pc, 3);
}

void c5(Outcome& o) {
    for (auto [family, gap] : {std::pair{OutcomeFamily::normal, 0.15}, std::pair{OutcomeFamily::double_exponential, 0.10}}) {
        const auto r = study(table_scenario(family, 0.2, SchemeKind::simple));
        const double pu = row(r, Estimator::u).p, pc = row(r, Estimator::u_adjusted).p;
        o.expect(pc - pu >= gap, std::string(to_string(family)) + " gap " + fmt(pc - pu, 3));
        o.observed << to_string(family) << " power(U) " << fmt(pu, 3) << " power(U^C) " << fmt(pc, 3) << "; ";
    }
}

void c6(Outcome& o) {
    const auto r = study(table_scenario(OutcomeFamily::double_exponential, 0.3, SchemeKind::simple));
    const double pu = row(r, Estimator::u).p, pt = row(r, Estimator::mean_diff).p;
    o.expect(pu > pt, "power(U) " + fmt(pu, 3) + " <= power(t) " + fmt(pt, 3));
    o.observed << "power(U) " << fmt(pu, 3) << ", power(t) " << fmt(pt, 3);
}

void c7(Outcome& o) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z(0.0, 1.0);
    int checks = 0;

    for (int rep = 0; rep < 200; ++rep, ++checks) {
        const auto all = distinct(40 + static_cast<std::size_t>(rep % 30), rng);
        const std::vector<double> a(all.begin(), all.begin() + 17), b(all.begin() + 17, all.end());
        o.expect(compute_u(a, b) + compute_u(b, a) == 1.0, "U_jk + U_kj != 1");
    }

    for (int rep = 0; rep < 20; ++rep, checks += 2) {
        auto d = random_trial(120, 4, 2, rng, 0.5);
        const auto design = uniform_design(4, 2, 3);
        const double u = compute_u(pair_sample(d, {2, 3}));
        const double uc = adjusted_u(d, design).u_adjusted;
        for (double& y : d.outcomes) y = std::atan(y) * 3.0 + 1.0;
        o.expect(compute_u(pair_sample(d, {2, 3})) == u, "U not monotone invariant");
        o.expect(adjusted_u(d, design).u_adjusted == uc, "U^C not monotone invariant");
    }

    for (int rep = 0; rep < 20; ++rep, ++checks) {
        auto d = random_trial(150, 4, 3, rng, 0.5);
        Eigen::Matrix3d A;
        do {
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) A(r, c) = z(rng);
        } while (std::abs(A.determinant()) < 0.2);
        const Eigen::Vector3d shift(z(rng), 5.0 * z(rng), -2.0);
        const auto design = uniform_design(4, 1, 3);
        const double before = adjusted_u(d, design).u_adjusted;
        d.covariates = (d.covariates * A.transpose()).rowwise() + shift.transpose();
        o.expect(std::abs(adjusted_u(d, design).u_adjusted - before) < 1e-10, "affine equivariance");
    }

    for (int rep = 0; rep < 20; ++rep, checks += 2) {
        const auto d = random_trial(100, 3, 2, rng, 0.5);
        auto est = adjusted_u(d, uniform_design(3, 1, 2));
        est.fit.beta_j_hat.setZero();
        est.fit.beta_k_hat.setZero();
        o.expect(apply_calibration(est.u_unadjusted, est.fit, AdjustMode::pooled_mean) == est.u_unadjusted,
                 "beta = 0 changes U (pooled)");
        o.expect(apply_calibration(est.u_unadjusted, est.fit, AdjustMode::restricted_mean) == est.u_unadjusted,
                 "beta = 0 changes U (restricted)");
    }

    for (int rep = 0; rep < 50; ++rep, checks += 2) {
        const auto d = random_trial(60 + 10 * static_cast<std::size_t>(rep % 7), 3, 1 + rep % 3, rng, 0.15);
        const auto a = analyze_pair(d, uniform_design(3, 1 + rep % 3, 1 + (rep + 1) % 3));
        o.expect(a.variance.phi_jk_hat >= 0.0, "phi_hat < 0");
        const auto w = [](const EstimateReport& e) { return e.ci_high - e.ci_low; };
        o.expect(w(a.adjusted->estimate) <= w(a.unadjusted.estimate), "adjusted CI wider");
    }

    std::uniform_real_distribution<double> share(0.05, 0.45);
    for (int rep = 0; rep < 200; ++rep, ++checks) {
        const int p = 1 + rep % 4;
        Eigen::MatrixXd m(p, p);
        for (int r = 0; r < p; ++r)
            for (int c = 0; c < p; ++c) m(r, c) = z(rng);
        const Eigen::MatrixXd s = m * m.transpose() + 0.1 * Eigen::MatrixXd::Identity(p, p);
        Eigen::VectorXd b(p);
        for (int r = 0; r < p; ++r) b(r) = 0.1 * z(rng);
        const double pj = share(rng), pk = share(rng);
        const DesignSpec design{{pj, pk, 1 - pj - pk}, {1, 2}};
        o.expect(std::abs(phi_general(b, b, s, pj, pk) - phi_under_null(b, s, design)) < 1e-12, "phi null form");
    }

    for (int rep = 0; rep < 20; ++rep, ++checks) {
        const auto d = random_trial(80, 2, 2, rng, 0.5);
        const auto design = uniform_design(2, 1, 2);
        o.expect(std::abs(adjusted_u(d, design).u_adjusted - adjusted_u(d, design, AdjustMode::restricted_mean).u_adjusted) <
                     1e-12,
                 "pooled != restricted at J = 2");
    }

    Eigen::MatrixXd s(2, 2);
    s << 1.0, 0.3, 0.3, 1.0;
    for (auto dist : {DistributionSpec::normal(0.3), DistributionSpec::uniform(), DistributionSpec::double_exponential(0.5)})
        for (double b : {0.0, 0.05, 0.1, 0.15}) {
            ++checks;
            const auto r = are_report(dist, Eigen::Vector2d(b, b / 2), s);
            o.expect(r.adjusted_vs_t == r.wmw_vs_t * r.adjusted_vs_unadjusted, "ARE product identity");
        }

    o.observed << checks << " property checks, " << o.failures.size() << " failed";
}

void c8(Outcome& o) {
    const std::vector<double> quarter{0.25, 0.25, 0.25, 0.25}, uneven{0.5, 0.25, 0.25};

    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> level(0, 4);
    std::vector<int> z(3001);
    for (int& x : z) x = level(rng);
    const auto block = assign_stratified_block(z, scheme(SchemeKind::stratified_block, uneven, 8, 8));
    std::map<int, std::vector<std::size_t>> running;
    std::map<int, std::size_t> seen;
    bool exact = true;
    for (std::size_t i = 0; i < z.size(); ++i) {
        auto& c = running[z[i]];
        c.resize(3);
        ++c[static_cast<std::size_t>(block[i] - 1)];
        if (++seen[z[i]] % 8 == 0) {
            const std::size_t m = seen[z[i]] / 8;
            exact = exact && c == std::vector<std::size_t>{4 * m, 2 * m, 2 * m};
        }
    }
    o.expect(exact, "block counts after complete blocks");

    std::vector<std::vector<int>> levels(10000);
    std::uniform_int_distribution<int> two(0, 1), four(0, 3);
    for (auto& l : levels) l = {two(rng), two(rng), four(rng)};
    const auto strata = joint_levels(levels);
    const auto bands = [&](const std::vector<Arm>& a, const std::vector<double>& pi, const char* name) {
        const double n = static_cast<double>(a.size());
        for (std::size_t j = 0; j < pi.size(); ++j) {
            const double f = static_cast<double>(std::count(a.begin(), a.end(), static_cast<Arm>(j + 1))) / n;
            o.expect(std::abs(f - pi[j]) <= 3.0 * std::sqrt(pi[j] * (1 - pi[j]) / n), std::string(name) + " marginal band");
        }
    };
    for (const auto& pi : {quarter, uneven}) {
        bands(assign_simple(10000, scheme(SchemeKind::simple, pi, 9)), pi, "simple");
        bands(assign_stratified_block(strata, scheme(SchemeKind::stratified_block, pi, 9, 4)), pi, "block");
        bands(assign_minimization(levels, scheme(SchemeKind::minimization, pi, 9)), pi, "minimization");
    }

    std::vector<std::vector<int>> single;
    for (const auto& l : levels) single.push_back({l[2]});
    const auto single_z = joint_levels(single);
    double worst_ratio = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const double m = balance_report(assign_minimization(single, scheme(SchemeKind::minimization, quarter, seed)), single_z,
                                        quarter)
                             .max_deviation;
        const double r =
            balance_report(assign_simple(single.size(), scheme(SchemeKind::simple, quarter, seed)), single_z, quarter)
                .max_deviation;
        o.expect(m < r, "minimization not below simple, seed " + std::to_string(seed));
        worst_ratio = std::max(worst_ratio, m / r);
    }

    for (auto kind : {SchemeKind::simple, SchemeKind::stratified_block, SchemeKind::minimization}) {
        Scenario s;
        s.randomizer = kind;
        s.effect_a = 0.2;
        s.n = 200;
        s.replications = 200;
        const auto one = run_study(s, std::nullopt, {1, 200000});
        for (unsigned threads : {2u, 3u, 8u}) {
            const auto many = run_study(s, std::nullopt, {threads, 200000});
            for (std::size_t i = 0; i < one.rows.size(); ++i) {
                const auto &a = one.rows[i], &b = many.rows[i];
                o.expect(a.ab == b.ab && a.sd == b.sd && a.se == b.se && a.cp == b.cp && a.p == b.p,
                         std::string("thread-count dependence under ") + to_string(kind));
            }
        }
        o.expect(assign_simple(500, scheme(kind, quarter, 4)) == assign_simple(500, scheme(kind, quarter, 4)),
                 "seeded assignment not reproducible");
    }
    o.observed << "worst minimization/simple deviation ratio " << fmt(worst_ratio, 3);
}

void c9(Outcome& o) {
    for (auto family : {OutcomeFamily::normal, OutcomeFamily::double_exponential}) {
        Scenario s;
        s.family = family;
        const double t = theta_truth(s, 10'000'000);
        o.expect(within(t, 0.5, 0.0005), std::string(to_string(family)) + " theta " + fmt(t, 5));
        o.observed << to_string(family) << " " << fmt(t, 5) << "; ";
    }
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
        {"C1 exact ARE constants", c1},
        {"C2 fast kernel equals brute force", c2},
        {"C3 simple randomization, a=0: size, SD and coverage", c3},
        {"C4 stratified block, a=0: conservative U, calibrated U^C", c4},
        {"C5 power gain of U^C over U at a=0.2", c5},
        {"C6 double exponential, a=0.3: U beats the t-test", c6},
        {"C7 property suite", c7},
        {"C8 randomization invariants and thread determinism", c8},
        {"C9 truth oracle at a=0", c9},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            run(o);
        } catch (const std::exception& e) {
            o.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool ok = o.failures.empty();
        failed += !ok;
        std::printf("%s  %s  [%s] (%.1fs)\n", ok ? "PASS" : "FAIL", name, o.observed.str().c_str(), secs);
        for (std::size_t i = 0; i < std::min<std::size_t>(o.failures.size(), 5); ++i)
            std::printf("      - %s\n", o.failures[i].c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
