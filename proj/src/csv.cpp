#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rankcal/io.hpp"

namespace rankcal {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
    std::string out;
    for (const auto& p : problems) {
        if (!out.empty()) out += "\n";
        out += p;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw InputError("unterminated quoted field");
    fields.emplace_back(trim(cur));
    return fields;
}

}  // namespace

InputError::InputError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

std::size_t CsvTable::column(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError("missing column \"" + std::string(name) + "\"");
    return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(std::string_view name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_record(line);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size())
            throw InputError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                             " fields, header has " + std::to_string(table.header.size()));
        table.rows.push_back(std::move(fields));
    }
    if (table.header.empty()) throw InputError("empty file: no header row");
    return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return read_csv(in);
}

double parse_number(std::string_view cell, std::size_t row, std::string_view column) {
    const std::string where = "row " + std::to_string(row) + ", column \"" + std::string(column) + "\"";
    cell = trim(cell);
    if (cell.empty()) throw InputError("missing value at " + where);
    if (cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value))
        throw InputError("unparseable number \"" + std::string(cell) + "\" at " + where);
    return value;
}

IngestedTrial ingest_csv(const CsvTable& table, const AnalysisConfig& config) {
    if (table.rows.empty()) throw InputError("empty file: no data rows");
    std::vector<std::string> problems;
    const auto locate = [&](const std::string& name) -> std::optional<std::size_t> {
        if (table.has_column(name)) return table.column(name);
        problems.push_back("missing column \"" + name + "\"");
        return std::nullopt;
    };
    const auto arm_col = locate(config.arm_column);
    const auto y_col = locate(config.outcome_column);
    std::vector<std::size_t> x_cols;
    for (const auto& name : config.covariate_columns)
        if (auto c = locate(name)) x_cols.push_back(*c);
    std::optional<std::size_t> z_col;
    if (config.stratum_column) z_col = locate(*config.stratum_column);
    if (config.covariate_columns.empty()) problems.push_back("at least one covariate column is required");
    if (!problems.empty()) throw InputError(problems);

    IngestedTrial out;
    if (!config.arm_order.empty()) {
        out.arm_labels = config.arm_order;
    } else {
        for (const auto& row : table.rows) out.arm_labels.push_back(row[*arm_col]);
        std::sort(out.arm_labels.begin(), out.arm_labels.end());
        out.arm_labels.erase(std::unique(out.arm_labels.begin(), out.arm_labels.end()), out.arm_labels.end());
    }
    std::map<std::string, Arm> arm_of;
    for (std::size_t i = 0; i < out.arm_labels.size(); ++i) arm_of[out.arm_labels[i]] = static_cast<Arm>(i + 1);

    const std::size_t n = table.rows.size();
    TrialData& data = out.data;
    data.num_treatments = static_cast<int>(out.arm_labels.size());
    data.treatments.resize(n);
    data.outcomes.resize(n);
    data.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(x_cols.size()));
    std::map<std::string, int> stratum_of;
    if (z_col) data.strata.emplace(n);

    for (std::size_t r = 0; r < n; ++r) {
        const auto& row = table.rows[r];
        const std::size_t row_no = r + 1;
        try {
            const auto it = arm_of.find(row[*arm_col]);
            if (it == arm_of.end())
                throw InputError("row " + std::to_string(row_no) + ": arm label \"" + row[*arm_col] +
                                 "\" is not in the declared arm order");
            data.treatments[r] = it->second;
            data.outcomes[r] = parse_number(row[*y_col], row_no, config.outcome_column);
            for (std::size_t c = 0; c < x_cols.size(); ++c)
                data.covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    parse_number(row[x_cols[c]], row_no, config.covariate_columns[c]);
            if (z_col) {
                const auto [sit, inserted] = stratum_of.emplace(row[*z_col], static_cast<int>(stratum_of.size()));
                (*data.strata)[r] = sit->second;
            }
        } catch (const InputError& e) {
            problems.push_back(e.what());
        }
    }
    if (!problems.empty()) throw InputError(problems);
    return out;
}

IngestedTrial ingest_csv(const std::filesystem::path& path, const AnalysisConfig& config) {
    return ingest_csv(read_csv_file(path), config);
}

}  // namespace rankcal
