#include "rankcal/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "rankcal/io.hpp"

namespace rankcal {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

Method method_from(const std::string& s) {
    for (Method m : {Method::unadjusted_u, Method::adjusted_u, Method::restricted_adjusted_u, Method::mean_difference})
        if (s == to_string(m)) return m;
    throw std::invalid_argument("unknown estimate method " + s);
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::string fixed(double v, int digits = 3) {
    if (!std::isfinite(v)) return "NA";
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::string interval(const EstimateReport& e) { return "(" + fixed(e.ci_low) + ", " + fixed(e.ci_high) + ")"; }

}  // namespace

FitSummary summarize(const CalibrationFit& fit) {
    return {to_vector(fit.beta_j_hat), to_vector(fit.beta_k_hat), to_vector(fit.c_jk_hat), to_vector(fit.c_kj_hat),
            to_vector(fit.eigenvalues), fit.effective_ridge, fit.warnings};
}

void to_json(json& j, const EstimateReport& e) {
    j = json{{"point", number(e.point)},       {"std_error", number(e.std_error)},
             {"ci_low", number(e.ci_low)},     {"ci_high", number(e.ci_high)},
             {"method", to_string(e.method)},  {"floored", e.floored},
             {"caveat", e.caveat}};
}

void from_json(const json& j, EstimateReport& e) {
    e.point = number_from(j.at("point"));
    e.std_error = number_from(j.at("std_error"));
    e.ci_low = number_from(j.at("ci_low"));
    e.ci_high = number_from(j.at("ci_high"));
    e.method = method_from(j.at("method").get<std::string>());
    e.floored = j.at("floored").get<bool>();
    e.caveat = j.at("caveat").get<std::string>();
}

void to_json(json& j, const TestReport& t) {
    j = json{{"method", t.method},
             {"statistic", number(t.statistic)},
             {"null_sd", number(t.null_sd)},
             {"critical_value", number(t.critical_value)},
             {"p_value", number(t.p_value)},
             {"reject", t.reject},
             {"estimate", t.estimate},
             {"warnings", t.warnings}};
}

void from_json(const json& j, TestReport& t) {
    t.method = j.at("method").get<std::string>();
    t.statistic = number_from(j.at("statistic"));
    t.null_sd = number_from(j.at("null_sd"));
    t.critical_value = number_from(j.at("critical_value"));
    t.p_value = number_from(j.at("p_value"));
    t.reject = j.at("reject").get<bool>();
    t.estimate = j.at("estimate").get<EstimateReport>();
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
}

void to_json(json& j, const VarianceComponents& v) {
    j = json{{"tau_jk", number(v.tau_jk_hat)},
             {"tau_kj", number(v.tau_kj_hat)},
             {"phi_jk", number(v.phi_jk_hat)},
             {"asymptotic_variance", number(v.asymptotic_variance)},
             {"floored", v.floored}};
}

void from_json(const json& j, VarianceComponents& v) {
    v.tau_jk_hat = number_from(j.at("tau_jk"));
    v.tau_kj_hat = number_from(j.at("tau_kj"));
    v.phi_jk_hat = number_from(j.at("phi_jk"));
    v.asymptotic_variance = number_from(j.at("asymptotic_variance"));
    v.floored = j.at("floored").get<bool>();
}

void to_json(json& j, const FitSummary& f) {
    j = json{{"beta_j", f.beta_j}, {"beta_k", f.beta_k},   {"c_jk", f.c_jk},
             {"c_kj", f.c_kj},     {"covariance_eigenvalues", f.eigenvalues},
             {"effective_ridge", f.effective_ridge}, {"warnings", f.warnings}};
}

void from_json(const json& j, FitSummary& f) {
    f.beta_j = j.at("beta_j").get<std::vector<double>>();
    f.beta_k = j.at("beta_k").get<std::vector<double>>();
    f.c_jk = j.at("c_jk").get<std::vector<double>>();
    f.c_kj = j.at("c_kj").get<std::vector<double>>();
    f.eigenvalues = j.at("covariance_eigenvalues").get<std::vector<double>>();
    f.effective_ridge = j.at("effective_ridge").get<double>();
    f.warnings = j.at("warnings").get<std::vector<std::string>>();
}

void to_json(json& j, const PairResult& p) {
    j = json{{"label_j", p.label_j},
             {"label_k", p.label_k},
             {"j", p.pair.j},
             {"k", p.pair.k},
             {"unadjusted", p.unadjusted},
             {"adjusted", p.adjusted ? json(*p.adjusted) : json(nullptr)},
             {"t_test", p.t_test},
             {"variance", p.variance},
             {"fit", p.fit ? json(*p.fit) : json(nullptr)},
             {"warnings", p.warnings}};
}

void from_json(const json& j, PairResult& p) {
    p.label_j = j.at("label_j").get<std::string>();
    p.label_k = j.at("label_k").get<std::string>();
    p.pair = {j.at("j").get<int>(), j.at("k").get<int>()};
    p.unadjusted = j.at("unadjusted").get<TestReport>();
    p.adjusted = j.at("adjusted").is_null() ? std::nullopt : std::optional(j.at("adjusted").get<TestReport>());
    p.t_test = j.at("t_test").get<TestReport>();
    p.variance = j.at("variance").get<VarianceComponents>();
    p.fit = j.at("fit").is_null() ? std::nullopt : std::optional(j.at("fit").get<FitSummary>());
    p.warnings = j.at("warnings").get<std::vector<std::string>>();
}

void to_json(json& j, const Provenance& p) {
    j = json{{"tool", p.tool},
             {"version", p.version},
             {"command", p.command},
             {"seed", p.seed ? json(*p.seed) : json(nullptr)},
             {"config_hash", p.config_hash}};
}

void from_json(const json& j, Provenance& p) {
    p.tool = j.at("tool").get<std::string>();
    p.version = j.at("version").get<std::string>();
    p.command = j.at("command").get<std::string>();
    p.seed = j.at("seed").is_null() ? std::nullopt : std::optional(j.at("seed").get<std::uint64_t>());
    p.config_hash = j.at("config_hash").get<std::string>();
}

void to_json(json& j, const ResultDocument& d) {
    j = json{{"pairs", d.pairs},
             {"group_sizes", d.group_sizes},
             {"arm_labels", d.arm_labels},
             {"flags", d.flags},
             {"provenance", d.provenance}};
}

void from_json(const json& j, ResultDocument& d) {
    d.pairs = j.at("pairs").get<std::vector<PairResult>>();
    d.group_sizes = j.at("group_sizes").get<std::vector<std::size_t>>();
    d.arm_labels = j.at("arm_labels").get<std::vector<std::string>>();
    d.flags = j.at("flags").get<std::vector<std::string>>();
    d.provenance = j.at("provenance").get<Provenance>();
}

PairResult make_pair_result(const PairAnalysis& a, std::string label_j, std::string label_k) {
    PairResult p;
    p.label_j = std::move(label_j);
    p.label_k = std::move(label_k);
    p.pair = a.design.pair;
    p.unadjusted = a.unadjusted;
    p.adjusted = a.adjusted;
    p.t_test = a.t_test;
    p.variance = a.variance;
    if (a.fit) p.fit = summarize(*a.fit);
    p.warnings = a.warnings;
    return p;
}

void write_analysis_table(std::ostream& out, const ResultDocument& doc) {
    const bool any_adjusted = std::any_of(doc.pairs.begin(), doc.pairs.end(), [](const PairResult& p) { return p.adjusted.has_value(); });
    const int w0 = 24, w1 = 10, w = 20;
    out << std::left << std::setw(w0) << "Comparison" << std::setw(w1) << "" << std::setw(w) << "t-test (raw)"
        << std::setw(w) << "WMW unadjusted";
    if (any_adjusted) out << std::setw(w) << "WMW adjusted";
    out << "\n";
    for (const auto& p : doc.pairs) {
        const std::string name = p.label_j + " vs " + p.label_k;
        const auto line = [&](const std::string& first, const std::string& what, auto&& cell) {
            out << std::setw(w0) << first << std::setw(w1) << what << std::setw(w) << cell(p.t_test)
                << std::setw(w) << cell(p.unadjusted);
            if (any_adjusted) out << std::setw(w) << (p.adjusted ? cell(*p.adjusted) : std::string("-"));
            out << "\n";
        };
        line(name, "p-value", [](const TestReport& t) { return fixed(t.p_value); });
        line("", "estimate", [](const TestReport& t) { return fixed(t.estimate.point); });
        line("", "SE", [](const TestReport& t) { return fixed(t.estimate.std_error); });
        line("", "CI", [](const TestReport& t) { return interval(t.estimate); });
    }
    out << "SE: standard error of the mean difference (t-test) or of the Wilcoxon statistic (WMW)\n";
    bool caveat = false;
    for (const auto& p : doc.pairs) caveat = caveat || !p.unadjusted.estimate.caveat.empty();
    if (caveat) out << "WMW unadjusted CI: " << kUnadjustedIntervalCaveat << "\n";
    for (const auto& f : doc.flags) out << "warning: " << f << "\n";
    for (const auto& p : doc.pairs) {
        for (const auto& wmsg : p.warnings) out << "warning (" << p.label_j << " vs " << p.label_k << "): " << wmsg << "\n";
        if (p.adjusted)
            for (const auto& wmsg : p.adjusted->warnings)
                out << "warning (" << p.label_j << " vs " << p.label_k << "): " << wmsg << "\n";
    }
}

json study_to_json(const StudyResult& study) {
    json rows = json::array();
    for (const auto& r : study.rows)
        rows.push_back({{"estimator", to_string(r.estimator)},
                        {"truth", number(r.truth)},
                        {"AB", number(r.ab)},
                        {"SD", r.sd ? number(*r.sd) : json(nullptr)},
                        {"SE", number(r.se)},
                        {"CP", number(r.cp)},
                        {"P", number(r.p)}});
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << study.scenario_hash;
    return {{"scenario", to_json(study.scenario)},
            {"scenario_hash", hash.str()},
            {"theta_truth", number(study.theta_truth)},
            {"mean_diff_truth", number(study.mean_diff_truth)},
            {"rows", rows}};
}

void write_study_table(std::ostream& out, const std::vector<StudyResult>& studies) {
    // group by (a, n); one column block per randomizer in first-seen order
    std::vector<SchemeKind> kinds;
    std::vector<std::pair<double, std::size_t>> cells;
    std::map<std::tuple<double, std::size_t, SchemeKind>, const StudyResult*> index;
    for (const auto& s : studies) {
        const auto& sc = s.scenario;
        if (std::find(kinds.begin(), kinds.end(), sc.randomizer) == kinds.end()) kinds.push_back(sc.randomizer);
        const std::pair cell{sc.effect_a, sc.n};
        if (std::find(cells.begin(), cells.end(), cell) == cells.end()) cells.push_back(cell);
        index[{sc.effect_a, sc.n, sc.randomizer}] = &s;
    }
    const int wa = 6, wn = 6, we = 12, wc = 8;
    const int block = 5 * wc + 2;
    out << std::left << std::setw(wa + wn + we) << "";
    for (SchemeKind k : kinds) out << std::setw(block) << to_string(k);
    out << "\n" << std::setw(wa) << "a" << std::setw(wn) << "n" << std::setw(we) << "Estimator";
    for (std::size_t b = 0; b < kinds.size(); ++b) {
        for (const char* h : {"AB", "SD", "SE", "CP", "P"}) out << std::setw(wc) << h;
        out << "  ";
    }
    out << "\n";
    for (const auto& [a, n] : cells) {
        for (Estimator e : {Estimator::mean_diff, Estimator::u, Estimator::u_adjusted}) {
            const bool first = e == Estimator::mean_diff;
            out << std::setw(wa) << (first ? fixed(a, 2) : "") << std::setw(wn) << (first ? std::to_string(n) : "")
                << std::setw(we) << to_string(e);
            for (SchemeKind k : kinds) {
                const auto it = index.find({a, n, k});
                if (it == index.end()) {
                    out << std::setw(block) << "-";
                    continue;
                }
                const MetricsRow& r = it->second->rows[static_cast<std::size_t>(e)];
                out << std::setw(wc) << fixed(r.ab) << std::setw(wc) << (r.sd ? fixed(*r.sd) : "NA") << std::setw(wc)
                    << fixed(r.se) << std::setw(wc) << fixed(r.cp) << std::setw(wc) << fixed(r.p) << "  ";
            }
            out << "\n";
        }
    }
}

}  // namespace rankcal
