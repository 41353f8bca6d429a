#include "rankcal/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "rankcal/are.hpp"
#include "rankcal/io.hpp"
#include "rankcal/report.hpp"

namespace rankcal {

using nlohmann::json;

namespace {

std::uint64_t fresh_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

unsigned resolve_threads(std::optional<unsigned> flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("RANKCAL_THREADS")) {
        try {
            return static_cast<unsigned>(std::stoul(env));
        } catch (const std::exception&) {
        }
    }
    return 0;
}

void report_problems(std::ostream& err, const InputError& e) {
    for (const auto& p : e.problems()) err << "error: " << p << "\n";
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw InputError("cannot write " + path);
    f << text;
}

// ---- analyze ----

struct AnalyzeArgs {
    std::string data;
    std::optional<std::string> config;
    std::optional<std::string> arm_column, outcome_column, strata_column, control, adjust, output;
    std::vector<std::string> covariates, arms, pairs;
    std::vector<double> pi;
    std::optional<double> alpha, ridge;
    bool empirical_pi = false, continuity = false, json_out = false;
};

std::vector<TreatmentPair> resolve_pairs(const AnalysisConfig& c, const std::vector<std::string>& labels) {
    std::map<std::string, Arm> arm_of;
    for (std::size_t i = 0; i < labels.size(); ++i) arm_of[labels[i]] = static_cast<Arm>(i + 1);
    std::vector<std::string> problems;
    const auto find = [&](const std::string& label) -> Arm {
        const auto it = arm_of.find(label);
        if (it != arm_of.end()) return it->second;
        problems.push_back("unknown arm label \"" + label + "\"");
        return 0;
    };
    std::vector<TreatmentPair> out;
    for (const auto& [a, b] : c.pairs) out.push_back({find(a), find(b)});
    if (c.pairs.empty() && c.control) {
        const Arm ctrl = find(*c.control);
        for (Arm a = 1; a <= static_cast<Arm>(labels.size()); ++a)
            if (a != ctrl) out.push_back({a, ctrl});
    }
    if (c.pairs.empty() && !c.control)
        for (Arm a = 1; a <= static_cast<Arm>(labels.size()); ++a)
            for (Arm b = a + 1; b <= static_cast<Arm>(labels.size()); ++b) out.push_back({a, b});
    if (!problems.empty()) throw InputError(problems);
    return out;
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
    AnalysisConfig c;
    if (a.config) c = parse_analysis_config(load_config_file(*a.config));
    if (a.arm_column) c.arm_column = *a.arm_column;
    if (a.outcome_column) c.outcome_column = *a.outcome_column;
    if (a.strata_column) c.stratum_column = *a.strata_column;
    if (!a.covariates.empty()) c.covariate_columns = a.covariates;
    if (!a.arms.empty()) c.arm_order = a.arms;
    if (!a.pairs.empty()) {
        c.pairs.clear();
        for (const auto& p : a.pairs) {
            const auto colon = p.find(':');
            if (colon == std::string::npos) throw InputError("--pair expects J:K, got \"" + p + "\"");
            c.pairs.emplace_back(p.substr(0, colon), p.substr(colon + 1));
        }
    }
    if (a.control) c.control = *a.control;
    if (!a.pi.empty()) c.pi = a.pi;
    if (a.empirical_pi) c.empirical_pi = true;
    if (a.alpha) c.alpha = *a.alpha;
    if (a.continuity) c.continuity = true;
    if (a.ridge) c.ridge = *a.ridge;
    if (a.output) c.output_path = *a.output;
    if (a.adjust) {
        if (*a.adjust == "pooled") c.adjust = AdjustSelection::pooled;
        else if (*a.adjust == "restricted") c.adjust = AdjustSelection::restricted;
        else if (*a.adjust == "none") c.adjust = AdjustSelection::none;
        else throw InputError("--adjust must be one of pooled, restricted, none");
    }

    const IngestedTrial trial = ingest_csv(std::filesystem::path(a.data), c);
    const int J = trial.data.num_treatments;
    if (c.pi.empty() && !c.empirical_pi)
        throw InputError("target proportions required: pass --pi or --empirical-pi");
    std::vector<double> pi = c.pi;
    if (pi.empty()) pi.assign(static_cast<std::size_t>(J), 1.0 / J);
    if (static_cast<int>(pi.size()) != J)
        throw InputError("pi has " + std::to_string(pi.size()) + " entries for " + std::to_string(J) + " arms");

    PairAnalysisOptions options;
    options.test.alpha = c.alpha;
    options.test.continuity_correction = c.continuity;
    options.test.pi_source = c.empirical_pi ? PiSource::empirical : PiSource::design;
    options.calibration.ridge = c.ridge;
    if (c.adjust == AdjustSelection::none) options.adjust.reset();
    else options.adjust = c.adjust == AdjustSelection::pooled ? AdjustMode::pooled_mean : AdjustMode::restricted_mean;

    ResultDocument doc;
    doc.arm_labels = trial.arm_labels;
    doc.group_sizes = group_sizes(trial.data);
    doc.provenance.command = "analyze";
    doc.provenance.config_hash = config_hash(to_json(c));

    const auto pairs = resolve_pairs(c, trial.arm_labels);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        DesignSpec design{pi, pairs[i]};
        const ValidationSummary summary = validate_trial(trial.data, design);
        if (i == 0)
            for (const auto& f : summary.flags)
                if (f.kind != FlagKind::small_group && f.kind != FlagKind::below_recommended_size) doc.flags.push_back(f.message);
        if (c.empirical_pi) {
            Flag note;
            design = with_empirical_proportions(trial.data, design, &note);
            if (i == 0) doc.flags.push_back(note.message);
        }
        const std::string lj = trial.arm_labels[static_cast<std::size_t>(pairs[i].j - 1)];
        const std::string lk = trial.arm_labels[static_cast<std::size_t>(pairs[i].k - 1)];
        PairResult result = make_pair_result(analyze_pair(trial.data, design, options), lj, lk);
        for (const auto& f : summary.flags)
            if (f.kind == FlagKind::small_group || f.kind == FlagKind::below_recommended_size)
                result.warnings.push_back(f.message);
        doc.pairs.push_back(std::move(result));
    }

    const std::string text = json(doc).dump(2) + "\n";
    if (c.output_path) write_file(*c.output_path, text);
    if (a.json_out) out << text;
    else write_analysis_table(out, doc);
    (void)err;
    return 0;
}

// ---- simulate ----

struct SimulateArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> output;
    std::optional<std::size_t> truth_draws;
    bool json_out = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    json raw = load_config_file(a.config);
    SimulationPlan plan = parse_simulation_config(raw);
    std::uint64_t seed = 0;
    if (a.seed) seed = *a.seed;
    else if (raw.contains("seed")) seed = plan.scenarios.front().seed;
    else {
        seed = fresh_seed();
        err << "seed: " << seed << "\n";
    }
    for (auto& s : plan.scenarios) s.seed = seed;

    StudyOptions options;
    options.threads = resolve_threads(a.threads);
    if (a.truth_draws) options.truth_draws = *a.truth_draws;
    else if (plan.truth_draws) options.truth_draws = *plan.truth_draws;

    std::vector<StudyResult> studies;
    json list = json::array();
    for (const auto& s : plan.scenarios) {
        studies.push_back(run_study(s, std::nullopt, options));
        list.push_back(study_to_json(studies.back()));
    }
    raw["seed"] = seed;
    Provenance prov;
    prov.command = "simulate";
    prov.seed = seed;
    prov.config_hash = config_hash(raw);
    json doc{{"provenance", prov}, {"truth_draws", options.truth_draws}, {"studies", list}};
    const std::string text = doc.dump(2) + "\n";
    if (a.output) write_file(*a.output, text);
    if (a.json_out) out << text;
    else write_study_table(out, studies);
    return 0;
}

// ---- randomize ----

struct RandomizeArgs {
    std::string input;
    std::string scheme = "simple";
    std::vector<double> pi;
    int block_size = 0;
    std::optional<std::string> strata_column, id_column, output;
    std::vector<std::string> factors;
    std::vector<double> weights;
    double p_mz = 0.75;
    std::optional<std::uint64_t> seed;
};

std::vector<int> encode_levels(const CsvTable& t, const std::string& column) {
    const std::size_t c = t.column(column);
    std::map<std::string, int> index;
    std::vector<int> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back(index.emplace(row[c], static_cast<int>(index.size())).first->second);
    return out;
}

int cmd_randomize(const RandomizeArgs& a, std::ostream& out, std::ostream& err) {
    const CsvTable table = read_csv_file(a.input);
    RandomizationScheme scheme;
    const auto kind = scheme_from_string(a.scheme);
    if (!kind) throw InputError("unknown scheme \"" + a.scheme + "\"");
    scheme.kind = *kind;
    scheme.pi = a.pi;
    scheme.block_size = a.block_size;
    scheme.minimization = {a.weights, a.p_mz};
    if (a.seed) scheme.seed = *a.seed;
    else {
        scheme.seed = fresh_seed();
        err << "seed: " << scheme.seed << "\n";
    }
    validate_scheme(scheme);

    std::vector<Arm> arms;
    std::optional<std::vector<int>> strata;
    switch (scheme.kind) {
        case SchemeKind::simple:
            arms = assign_simple(table.rows.size(), scheme);
            if (a.strata_column) strata = encode_levels(table, *a.strata_column);
            break;
        case SchemeKind::stratified_block:
            if (!a.strata_column) throw InputError("stratified_block requires --strata-column");
            strata = encode_levels(table, *a.strata_column);
            arms = assign_stratified_block(*strata, scheme);
            break;
        case SchemeKind::minimization: {
            if (a.factors.empty()) throw InputError("minimization requires --factors");
            std::vector<std::vector<int>> by_factor;
            for (const auto& f : a.factors) by_factor.push_back(encode_levels(table, f));
            std::vector<std::vector<int>> levels(table.rows.size());
            for (std::size_t i = 0; i < levels.size(); ++i)
                for (const auto& f : by_factor) levels[i].push_back(f[i]);
            arms = assign_minimization(levels, scheme);
            strata = joint_levels(levels);
            break;
        }
    }

    std::ostringstream csv;
    const std::optional<std::size_t> id_col = a.id_column ? std::optional(table.column(*a.id_column)) : std::nullopt;
    csv << "unit_id,arm\n";
    for (std::size_t i = 0; i < arms.size(); ++i)
        csv << (id_col ? table.rows[i][*id_col] : std::to_string(i + 1)) << "," << arms[i] << "\n";
    if (a.output) write_file(*a.output, csv.str());
    else out << csv.str();
    if (strata) err << "max within-stratum deviation from pi: " << balance_report(arms, *strata, scheme.pi).max_deviation << "\n";
    return 0;
}

// ---- are ----

struct AreArgs {
    std::string family = "normal";
    std::optional<double> variance, density_sq;
    std::vector<double> beta, sigma;
    std::optional<std::string> payload;
    bool json_out = false;
};

int cmd_are(AreArgs a, std::ostream& out, std::ostream&) {
    if (a.payload) {
        const json p = load_config_file(*a.payload);
        std::vector<std::string> problems;
        for (const auto& [key, v] : p.items()) {
            if (key == "family") a.family = v.get<std::string>();
            else if (key == "variance") a.variance = v.get<double>();
            else if (key == "density_sq_integral") a.density_sq = v.get<double>();
            else if (key == "beta") a.beta = v.get<std::vector<double>>();
            else if (key == "sigma") {
                a.sigma.clear();
                for (const auto& row : v)
                    for (const auto& x : row) a.sigma.push_back(x.get<double>());
            } else problems.push_back("unknown key " + key);
        }
        if (!problems.empty()) throw InputError(problems);
    }
    DistributionSpec dist;
    if (a.family == "normal") dist = DistributionSpec::normal(a.variance.value_or(1.0));
    else if (a.family == "uniform") dist = DistributionSpec::uniform(a.variance.value_or(1.0 / 12.0));
    else if (a.family == "double_exponential" || a.family == "laplace")
        dist = DistributionSpec::double_exponential(a.variance.value_or(2.0));
    else if (a.family == "custom") {
        if (!a.variance || !a.density_sq) throw InputError("custom family needs --variance and --density-sq");
        dist = DistributionSpec::custom(*a.variance, *a.density_sq);
    } else throw InputError("unknown family \"" + a.family + "\"");

    const auto p = static_cast<Eigen::Index>(a.beta.size());
    Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(a.beta.data(), p);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(p, p);
    if (!a.sigma.empty()) {
        if (static_cast<Eigen::Index>(a.sigma.size()) != p * p)
            throw InputError("sigma needs " + std::to_string(p * p) + " entries (row-major) for beta of length " +
                             std::to_string(p));
        sigma = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.sigma.data(), p, p);
    }
    const AREReport r = are_report(dist, beta, sigma);
    if (a.json_out) {
        out << json{{"family", to_string(dist.family)},
                    {"variance", dist.variance},
                    {"density_sq_integral", dist.density_sq_integral},
                    {"wmw_vs_t", r.wmw_vs_t},
                    {"adjusted_vs_unadjusted", r.adjusted_vs_unadjusted},
                    {"adjusted_vs_t", r.adjusted_vs_t},
                    {"retained_fraction", r.retained_fraction},
                    {"dominates_t_for_all_f", r.dominates_t_for_all_f}}
                   .dump(2)
            << "\n";
    } else {
        out << "family                  " << to_string(dist.family) << "\n"
            << "ARE(WMW, t)             " << r.wmw_vs_t << "\n"
            << "ARE(adjusted, WMW)      " << r.adjusted_vs_unadjusted << "\n"
            << "ARE(adjusted, t)        " << r.adjusted_vs_t << "\n"
            << "1 - 12 b'Sb             " << r.retained_fraction << "\n"
            << "dominates t for all F   " << (r.dominates_t_for_all_f ? "yes" : "no") << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Covariate-calibrated Wilcoxon inference", "rankcal"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Test and estimate treatment contrasts on a trial CSV");
    analyze->add_option("--data", an.data, "Input CSV with a header row")->required();
    analyze->add_option("--config", an.config, "Analysis config (JSON or TOML)");
    analyze->add_option("--arm-column", an.arm_column);
    analyze->add_option("--outcome-column", an.outcome_column);
    analyze->add_option("--covariates", an.covariates)->delimiter(',');
    analyze->add_option("--strata-column", an.strata_column);
    analyze->add_option("--arms", an.arms, "Arm labels in order; label i is arm i")->delimiter(',');
    analyze->add_option("--pair", an.pairs, "Comparison J:K by label; repeatable");
    analyze->add_option("--control", an.control, "Compare every other arm with this one");
    analyze->add_option("--pi", an.pi, "Target allocation proportions")->delimiter(',');
    analyze->add_flag("--empirical-pi", an.empirical_pi, "Use observed group fractions as pi");
    analyze->add_option("--alpha", an.alpha);
    analyze->add_flag("--continuity", an.continuity);
    analyze->add_option("--adjust", an.adjust, "pooled, restricted or none");
    analyze->add_option("--ridge", an.ridge);
    analyze->add_option("--output", an.output, "Write the JSON document here");
    analyze->add_flag("--json", an.json_out, "Print JSON instead of the table");

    SimulateArgs sm;
    auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study");
    simulate->add_option("--config", sm.config, "Scenario config (JSON or TOML)")->required();
    simulate->add_option("--seed", sm.seed);
    simulate->add_option("--threads", sm.threads, "Worker threads (default: RANKCAL_THREADS, else all cores)");
    simulate->add_option("--truth-draws", sm.truth_draws);
    simulate->add_option("--output", sm.output, "Write the JSON document here");
    simulate->add_flag("--json", sm.json_out, "Print JSON instead of the table");

    RandomizeArgs rz;
    auto* randomize = app.add_subcommand("randomize", "Assign treatments to the units of a covariate CSV");
    randomize->add_option("--input", rz.input)->required();
    randomize->add_option("--scheme", rz.scheme, "simple, stratified_block or minimization");
    randomize->add_option("--pi", rz.pi)->delimiter(',')->required();
    randomize->add_option("--block-size", rz.block_size);
    randomize->add_option("--strata-column", rz.strata_column);
    randomize->add_option("--factors", rz.factors)->delimiter(',');
    randomize->add_option("--weights", rz.weights)->delimiter(',');
    randomize->add_option("--p-mz", rz.p_mz);
    randomize->add_option("--seed", rz.seed);
    randomize->add_option("--id-column", rz.id_column);
    randomize->add_option("--output", rz.output);

    AreArgs ar;
    auto* are = app.add_subcommand("are", "Asymptotic relative efficiencies");
    are->add_option("--family", ar.family, "normal, uniform, double_exponential or custom");
    are->add_option("--variance", ar.variance);
    are->add_option("--density-sq", ar.density_sq, "Integral of the squared density (custom family)");
    are->add_option("--beta", ar.beta)->delimiter(',');
    are->add_option("--sigma", ar.sigma, "Covariance, row-major")->delimiter(',');
    are->add_option("--payload", ar.payload, "JSON file with the same fields");
    are->add_flag("--json", ar.json_out);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (analyze->parsed()) return cmd_analyze(an, out, err);
        if (simulate->parsed()) return cmd_simulate(sm, out, err);
        if (randomize->parsed()) return cmd_randomize(rz, out, err);
        return cmd_are(ar, out, err);
    } catch (const InputError& e) {
        report_problems(err, e);
    } catch (const SingularCovarianceError& e) {
        err << "error: " << e.what() << "\n";
    } catch (const ReplicationError& e) {
        err << "error: replication " << e.replication_index() << " (seed " << e.replication_seed() << "): " << e.what()
            << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return 1;
}

}  // namespace rankcal
