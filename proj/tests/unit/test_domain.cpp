#include <doctest.h>

#include "rankcal/domain.hpp"
#include "support.hpp"

using namespace rankcal;

namespace {

TrialData four_units() {
    TrialData d;
    d.num_treatments = 2;
    d.treatments = {1, 1, 2, 2};
    d.outcomes = {0.1, 0.7, 0.4, 1.3};
    d.covariates.resize(4, 1);
    d.covariates << 0.5, -1.0, 2.0, 0.3;
    return d;
}

DesignSpec half() { return {{0.5, 0.5}, {1, 2}}; }

}  // namespace

TEST_CASE("well-formed input gives counts and no flags") {
    const auto s = validate_trial(four_units(), half());
    CHECK(s.n(1) == 2);
    CHECK(s.n(2) == 2);
    CHECK(s.tie_count == 0);
    CHECK(s.covariate_rank == 1);
    // n_j < 20 is only a size advisory
    CHECK_FALSE(s.has(FlagKind::outcome_ties));
    CHECK_FALSE(s.has(FlagKind::small_group));
    CHECK_FALSE(s.has(FlagKind::strata_not_in_covariates));
}

TEST_CASE("structural violations are hard errors") {
    auto d = four_units();
    d.num_treatments = 4;
    d.treatments[2] = 5;
    CHECK_THROWS_WITH_AS(validate_trial(d, {{0.25, 0.25, 0.25, 0.25}, {1, 2}}), doctest::Contains("label out of range"),
                         ValidationError);

    d = four_units();
    d.outcomes.pop_back();
    CHECK_THROWS_AS(validate_trial(d, half()), ValidationError);

    d = four_units();
    d.treatments = {1, 1, 1, 1};
    CHECK_THROWS_AS(validate_trial(d, half()), ValidationError);

    d = four_units();
    d.covariates.resize(4, 0);
    CHECK_THROWS_AS(validate_trial(d, half()), ValidationError);
}

TEST_CASE("design validation") {
    CHECK_NOTHROW(validate_design(half()));
    CHECK_THROWS_AS(validate_design({{0.5, 0.6}, {1, 2}}), ValidationError);
    CHECK_THROWS_AS(validate_design({{1.0, 0.0}, {1, 2}}), ValidationError);
    CHECK_THROWS_AS(validate_design({{0.5, 0.5}, {1, 1}}), ValidationError);
    CHECK_THROWS_AS(validate_design({{0.5, 0.5}, {1, 3}}), ValidationError);
}

TEST_CASE("tied outcomes are flagged and counted") {
    auto d = four_units();
    d.outcomes = {1.0, 1.0, 2.0, 3.0};
    const auto s = validate_trial(d, half());
    CHECK(s.has(FlagKind::outcome_ties));
    CHECK(s.tie_count == 1);

    // three equal values form three tied pairs
    d.outcomes = {2.0, 2.0, 2.0, 3.0};
    CHECK(validate_trial(d, half()).tie_count == 3);
}

TEST_CASE("singleton groups are flagged, not rejected") {
    auto d = four_units();
    d.treatments = {1, 2, 2, 2};
    CHECK(validate_trial(d, half()).has(FlagKind::small_group));
}

TEST_CASE("strata absent from covariates are flagged") {
    auto d = four_units();
    d.strata = std::vector<int>{0, 1, 0, 1};
    CHECK(validate_trial(d, half()).has(FlagKind::strata_not_in_covariates));

    d.covariates.resize(4, 2);
    d.covariates << 0.5, 0, -1.0, 1, 2.0, 0, 0.3, 1;
    CHECK_FALSE(validate_trial(d, half()).has(FlagKind::strata_not_in_covariates));
}

TEST_CASE("rank-deficient covariates are flagged") {
    auto d = four_units();
    d.covariates.resize(4, 2);
    d.covariates << 1, 2, 2, 4, 3, 6, 4, 8;
    const auto s = validate_trial(d, half());
    CHECK(s.covariate_rank == 1);
    CHECK(s.has(FlagKind::covariate_rank_deficient));
}

TEST_CASE("validate_trial is pure") {
    std::mt19937_64 rng(1);
    const auto d = support::random_trial(60, 3, 2, rng);
    const auto a = validate_trial(d, support::uniform_design(3));
    const auto b = validate_trial(d, support::uniform_design(3));
    CHECK(a.group_sizes == b.group_sizes);
    CHECK(a.tie_count == b.tie_count);
    CHECK(a.covariance_condition == b.covariance_condition);
    CHECK(a.flags.size() == b.flags.size());
}

TEST_CASE("empirical proportions are opt-in and flagged") {
    auto d = four_units();
    d.treatments = {1, 2, 2, 2};
    Flag note{FlagKind::outcome_ties, ""};
    const auto e = with_empirical_proportions(d, half(), &note);
    CHECK(e.pi(1) == 0.25);
    CHECK(e.pi(2) == 0.75);
    CHECK(note.kind == FlagKind::empirical_proportions);
}

TEST_CASE("group helpers") {
    const auto d = four_units();
    CHECK(group_sizes(d) == std::vector<std::size_t>{2, 2});
    CHECK(outcomes_of(d, 2) == std::vector<double>{0.4, 1.3});
    CHECK(covariates_of(d, 1)(1, 0) == -1.0);
}
