#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rankcal/inference.hpp"
#include "rankcal/simlab.hpp"

namespace rankcal {

inline constexpr const char* kVersion = "0.1.0";

struct FitSummary {
    std::vector<double> beta_j;
    std::vector<double> beta_k;
    std::vector<double> c_jk;
    std::vector<double> c_kj;
    std::vector<double> eigenvalues;  // of the covariate covariance, ascending
    double effective_ridge = 0.0;
    std::vector<std::string> warnings;
};

FitSummary summarize(const CalibrationFit& fit);

struct PairResult {
    std::string label_j;
    std::string label_k;
    TreatmentPair pair;
    TestReport unadjusted;
    std::optional<TestReport> adjusted;
    TestReport t_test;
    VarianceComponents variance;
    std::optional<FitSummary> fit;
    std::vector<std::string> warnings;
};

struct Provenance {
    std::string tool = "rankcal";
    std::string version = kVersion;
    std::string command;
    std::optional<std::uint64_t> seed;
    std::string config_hash;
};

/// Everything `analyze` reports for one dataset.
struct ResultDocument {
    std::vector<PairResult> pairs;
    std::vector<std::size_t> group_sizes;
    std::vector<std::string> arm_labels;
    std::vector<std::string> flags;
    Provenance provenance;
};

void to_json(nlohmann::json& j, const EstimateReport& e);
void from_json(const nlohmann::json& j, EstimateReport& e);
void to_json(nlohmann::json& j, const TestReport& t);
void from_json(const nlohmann::json& j, TestReport& t);
void to_json(nlohmann::json& j, const VarianceComponents& v);
void from_json(const nlohmann::json& j, VarianceComponents& v);
void to_json(nlohmann::json& j, const FitSummary& f);
void from_json(const nlohmann::json& j, FitSummary& f);
void to_json(nlohmann::json& j, const PairResult& p);
void from_json(const nlohmann::json& j, PairResult& p);
void to_json(nlohmann::json& j, const Provenance& p);
void from_json(const nlohmann::json& j, Provenance& p);
void to_json(nlohmann::json& j, const ResultDocument& d);
void from_json(const nlohmann::json& j, ResultDocument& d);

PairResult make_pair_result(const PairAnalysis& analysis, std::string label_j, std::string label_k);

/// Table of p-value, SE and CI per method per comparison.
void write_analysis_table(std::ostream& out, const ResultDocument& doc);

nlohmann::json study_to_json(const StudyResult& study);

/// AB / SD / SE / CP / P per estimator, one column group per randomizer.
void write_study_table(std::ostream& out, const std::vector<StudyResult>& studies);

}  // namespace rankcal
