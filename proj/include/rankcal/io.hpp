#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rankcal/domain.hpp"
#include "rankcal/simlab.hpp"

namespace rankcal {

/// Malformed input file or configuration. Carries every problem found.
class InputError : public std::runtime_error {
   public:
    explicit InputError(const std::string& what) : std::runtime_error(what), problems_{what} {}
    explicit InputError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

   private:
    std::vector<std::string> problems_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a named column; throws InputError when absent.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
};

/// Comma-separated with a header row; double quotes escape commas and quotes.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

/// Locale-independent decimal parse. Errors name the 1-based data row and the column.
double parse_number(std::string_view cell, std::size_t row, std::string_view column);

enum class AdjustSelection { pooled, restricted, none };

const char* to_string(AdjustSelection selection);

struct AnalysisConfig {
    std::string arm_column = "arm";
    std::string outcome_column = "y";
    /// Declared label order; label i maps to arm i + 1. Empty: sorted labels.
    std::vector<std::string> arm_order;
    std::vector<std::string> covariate_columns;
    std::optional<std::string> stratum_column;
    /// Explicit comparisons by label.
    std::vector<std::pair<std::string, std::string>> pairs;
    /// Compare every other arm against this label.
    std::optional<std::string> control;
    std::vector<double> pi;
    bool empirical_pi = false;
    double alpha = 0.05;
    bool continuity = false;
    AdjustSelection adjust = AdjustSelection::pooled;
    std::optional<double> ridge;
    std::optional<std::string> output_path;
};

nlohmann::json to_json(const AnalysisConfig& config);

/// Reads an analysis config object; collects every schema problem before throwing.
AnalysisConfig parse_analysis_config(const nlohmann::json& j);

struct IngestedTrial {
    TrialData data;
    std::vector<std::string> arm_labels;  // index arm - 1
};

IngestedTrial ingest_csv(const CsvTable& table, const AnalysisConfig& config);
IngestedTrial ingest_csv(const std::filesystem::path& path, const AnalysisConfig& config);

/// Parses JSON, or TOML when the extension is .toml, into a JSON value.
nlohmann::json load_config_file(const std::filesystem::path& path);
nlohmann::json parse_toml(std::string_view text);

/*
 * Simulation config. Scalar keys mirror Scenario fields; `effect_a`, `n`
 * and `randomizer` may also be arrays, producing a grid of studies in the
 * order randomizer-major, then effect_a, then n.
 */
struct SimulationPlan {
    std::vector<Scenario> scenarios;
    std::vector<SchemeKind> randomizers;
    std::vector<double> effects;
    std::vector<std::size_t> sizes;
    std::optional<std::size_t> truth_draws;
};

/// Every schema violation is reported, not only the first.
SimulationPlan parse_simulation_config(const nlohmann::json& j);

nlohmann::json to_json(const Scenario& scenario);

/// FNV-1a of the compact dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

std::optional<SchemeKind> scheme_from_string(std::string_view name);

}  // namespace rankcal
