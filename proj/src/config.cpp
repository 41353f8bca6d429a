#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "rankcal/io.hpp"

namespace rankcal {

using nlohmann::json;

namespace {

// Typed access to a JSON object that records problems instead of throwing,
// so a whole config can be checked in one pass.
class ObjectReader {
   public:
    ObjectReader(const json& obj, std::string scope, std::vector<std::string>& problems)
        : obj_(obj), scope_(std::move(scope)), problems_(problems) {
        if (!obj_.is_object()) problems_.push_back(scope_ + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.is_object() && obj_.contains(key) && !obj_.at(key).is_null();
    }

    const json* raw(const std::string& key) { return has(key) ? &obj_.at(key) : nullptr; }

    template <class T>
    std::optional<T> get(const std::string& key) {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        if (!matches<T>(*v)) {
            problem(key, std::string("must be ") + type_name<T>());
            return std::nullopt;
        }
        return v->get<T>();
    }

    void problem(const std::string& key, const std::string& what) { problems_.push_back(path(key) + " " + what); }

    std::string path(const std::string& key) const { return scope_.empty() ? key : scope_ + "." + key; }

    void reject_unknown() {
        if (!obj_.is_object()) return;
        for (const auto& [key, unused] : obj_.items())
            if (!seen_.count(key)) problems_.push_back("unknown key " + path(key));
    }

    std::vector<std::string>& problems() { return problems_; }

   private:
    template <class T>
    static bool matches(const json& v) {
        if constexpr (std::is_same_v<T, bool>) return v.is_boolean();
        else if constexpr (std::is_same_v<T, std::string>) return v.is_string();
        else if constexpr (std::is_same_v<T, double>) return v.is_number();
        else if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, std::uint64_t>) return v.is_number_integer();
        else if constexpr (std::is_same_v<T, std::vector<double>>)
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); });
        else if constexpr (std::is_same_v<T, std::vector<std::string>>)
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); });
        else return false;
    }
    template <class T>
    static const char* type_name() {
        if constexpr (std::is_same_v<T, bool>) return "a boolean";
        else if constexpr (std::is_same_v<T, std::string>) return "a string";
        else if constexpr (std::is_same_v<T, double>) return "a number";
        else if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, std::uint64_t>) return "an integer";
        else if constexpr (std::is_same_v<T, std::vector<double>>) return "an array of numbers";
        else return "an array of strings";
    }

    const json& obj_;
    std::string scope_;
    std::vector<std::string>& problems_;
    std::set<std::string> seen_;
};

json toml_to_json(const toml::node& node) {
    if (const auto* t = node.as_table()) {
        json out = json::object();
        for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
        return out;
    }
    if (const auto* a = node.as_array()) {
        json out = json::array();
        for (const auto& v : *a) out.push_back(toml_to_json(v));
        return out;
    }
    if (const auto* s = node.as_string()) return s->get();
    if (const auto* i = node.as_integer()) return i->get();
    if (const auto* f = node.as_floating_point()) return f->get();
    if (const auto* b = node.as_boolean()) return b->get();
    throw InputError("unsupported TOML value (dates and times are not accepted)");
}

// Accepts a scalar or an array of scalars.
template <class T>
std::vector<T> scalar_or_list(ObjectReader& r, const std::string& key, std::vector<T> fallback) {
    const json* v = r.raw(key);
    if (!v) return fallback;
    const auto ok = [](const json& e) {
        if constexpr (std::is_same_v<T, double>) return e.is_number();
        else if constexpr (std::is_same_v<T, std::size_t>) return e.is_number_unsigned() || (e.is_number_integer() && e.get<long long>() >= 0);
        else return e.is_string();
    };
    std::vector<T> out;
    if (v->is_array()) {
        for (const auto& e : *v) {
            if (!ok(e)) {
                r.problem(key, "has an element of the wrong type");
                return fallback;
            }
            out.push_back(e.get<T>());
        }
        if (out.empty()) r.problem(key, "must not be empty");
    } else if (ok(*v)) {
        out.push_back(v->get<T>());
    } else {
        r.problem(key, "has the wrong type");
        return fallback;
    }
    return out.empty() ? fallback : out;
}

}  // namespace

const char* to_string(AdjustSelection selection) {
    switch (selection) {
        case AdjustSelection::pooled: return "pooled";
        case AdjustSelection::restricted: return "restricted";
        case AdjustSelection::none: return "none";
    }
    return "unknown";
}

std::optional<SchemeKind> scheme_from_string(std::string_view name) {
    if (name == "simple") return SchemeKind::simple;
    if (name == "stratified_block" || name == "block") return SchemeKind::stratified_block;
    if (name == "minimization") return SchemeKind::minimization;
    return std::nullopt;
}

std::string config_hash(const json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json parse_toml(std::string_view text) {
    try {
        return toml_to_json(toml::parse(text));
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
        throw InputError(msg.str());
    }
}

json load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    if (path.extension() == ".toml") return parse_toml(buf.str());
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw InputError(std::string("JSON parse error in ") + path.string() + ": " + e.what());
    }
}

json to_json(const AnalysisConfig& c) {
    json j;
    j["arm_column"] = c.arm_column;
    j["outcome_column"] = c.outcome_column;
    j["arm_order"] = c.arm_order;
    j["covariates"] = c.covariate_columns;
    j["stratum_column"] = c.stratum_column ? json(*c.stratum_column) : json(nullptr);
    json pairs = json::array();
    for (const auto& [a, b] : c.pairs) pairs.push_back({a, b});
    j["pairs"] = pairs;
    j["control"] = c.control ? json(*c.control) : json(nullptr);
    j["pi"] = c.pi;
    j["empirical_pi"] = c.empirical_pi;
    j["alpha"] = c.alpha;
    j["continuity"] = c.continuity;
    j["adjust"] = to_string(c.adjust);
    j["ridge"] = c.ridge ? json(*c.ridge) : json(nullptr);
    return j;
}

AnalysisConfig parse_analysis_config(const json& j) {
    std::vector<std::string> problems;
    ObjectReader r(j, "", problems);
    AnalysisConfig c;
    if (auto v = r.get<std::string>("arm_column")) c.arm_column = *v;
    if (auto v = r.get<std::string>("outcome_column")) c.outcome_column = *v;
    if (auto v = r.get<std::vector<std::string>>("arm_order")) c.arm_order = *v;
    if (auto v = r.get<std::vector<std::string>>("covariates")) c.covariate_columns = *v;
    if (auto v = r.get<std::string>("stratum_column")) c.stratum_column = *v;
    if (const json* p = r.raw("pairs")) {
        if (!p->is_array()) r.problem("pairs", "must be an array of [label, label] pairs");
        else
            for (const auto& e : *p) {
                if (e.is_array() && e.size() == 2 && e[0].is_string() && e[1].is_string())
                    c.pairs.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
                else
                    r.problem("pairs", "entries must be [label, label]");
            }
    }
    if (auto v = r.get<std::string>("control")) c.control = *v;
    if (auto v = r.get<std::vector<double>>("pi")) c.pi = *v;
    if (auto v = r.get<bool>("empirical_pi")) c.empirical_pi = *v;
    if (auto v = r.get<double>("alpha")) {
        c.alpha = *v;
        if (!(c.alpha > 0.0 && c.alpha < 0.5)) r.problem("alpha", "must lie in (0, 0.5)");
    }
    if (auto v = r.get<bool>("continuity")) c.continuity = *v;
    if (auto v = r.get<std::string>("adjust")) {
        if (*v == "pooled") c.adjust = AdjustSelection::pooled;
        else if (*v == "restricted") c.adjust = AdjustSelection::restricted;
        else if (*v == "none") c.adjust = AdjustSelection::none;
        else r.problem("adjust", "must be one of pooled, restricted, none");
    }
    if (auto v = r.get<double>("ridge")) c.ridge = *v;
    if (auto v = r.get<std::string>("output")) c.output_path = *v;
    r.reject_unknown();
    if (!problems.empty()) throw InputError(problems);
    return c;
}

json to_json(const Scenario& s) {
    json j;
    j["family"] = to_string(s.family);
    j["effect_a"] = s.effect_a;
    j["rho"] = s.rho;
    j["coefficients"] = s.coefficients;
    j["outcome_variance"] = s.noise_variance();
    j["n"] = s.n;
    j["num_treatments"] = s.num_treatments;
    j["pi"] = s.pi;
    j["pair"] = {s.pair.j, s.pair.k};
    j["randomizer"] = to_string(s.randomizer);
    j["block_size"] = s.block_size;
    j["minimization"] = {{"factor_weights", s.minimization.factor_weights}, {"p_mz", s.minimization.p_mz}};
    j["strata_cuts"] = s.strata_cuts;
    j["adjust_for_strata"] = s.adjust_for_strata;
    j["replications"] = s.replications;
    j["seed"] = s.seed;
    j["alpha"] = s.alpha;
    j["continuity_correction"] = s.continuity_correction;
    return j;
}

SimulationPlan parse_simulation_config(const json& j) {
    std::vector<std::string> problems;
    ObjectReader r(j, "", problems);
    Scenario base;

    if (auto v = r.get<std::string>("family")) {
        if (*v == "normal") base.family = OutcomeFamily::normal;
        else if (*v == "double_exponential" || *v == "laplace") base.family = OutcomeFamily::double_exponential;
        else r.problem("family", "must be normal or double_exponential");
    }
    SimulationPlan plan;
    plan.effects = scalar_or_list<double>(r, "effect_a", {0.0});
    plan.sizes = scalar_or_list<std::size_t>(r, "n", {400});
    std::vector<SchemeKind> kinds;
    for (const auto& name : scalar_or_list<std::string>(r, "randomizer", {"simple"})) {
        if (auto k = scheme_from_string(name)) kinds.push_back(*k);
        else r.problem("randomizer", "unknown scheme \"" + name + "\"");
    }
    plan.randomizers = kinds.empty() ? std::vector{SchemeKind::simple} : kinds;

    if (auto v = r.get<double>("rho")) base.rho = *v;
    if (auto v = r.get<std::vector<double>>("coefficients")) base.coefficients = *v;
    if (auto v = r.get<double>("outcome_variance")) base.outcome_variance = *v;
    if (auto v = r.get<std::int64_t>("num_treatments")) {
        if (*v < 2) r.problem("num_treatments", "must be at least 2");
        else base.num_treatments = static_cast<int>(*v);
    }
    if (auto v = r.get<std::vector<double>>("pi")) base.pi = *v;
    else base.pi.assign(static_cast<std::size_t>(base.num_treatments), 1.0 / base.num_treatments);
    if (const json* p = r.raw("pair")) {
        if (p->is_array() && p->size() == 2 && (*p)[0].is_number_integer() && (*p)[1].is_number_integer())
            base.pair = {(*p)[0].get<int>(), (*p)[1].get<int>()};
        else
            r.problem("pair", "must be [j, k] with integer arm labels");
    }
    if (auto v = r.get<std::int64_t>("block_size")) base.block_size = static_cast<int>(*v);
    if (const json* m = r.raw("minimization")) {
        ObjectReader mr(*m, "minimization", problems);
        if (auto v = mr.get<std::vector<double>>("factor_weights")) base.minimization.factor_weights = *v;
        if (auto v = mr.get<double>("p_mz")) base.minimization.p_mz = *v;
        mr.reject_unknown();
    }
    if (auto v = r.get<std::vector<double>>("strata_cuts")) base.strata_cuts = *v;
    if (auto v = r.get<bool>("adjust_for_strata")) base.adjust_for_strata = *v;
    if (auto v = r.get<std::int64_t>("replications")) {
        if (*v < 1) r.problem("replications", "must be at least 1");
        else base.replications = static_cast<std::size_t>(*v);
    }
    if (auto v = r.get<std::uint64_t>("seed")) base.seed = *v;
    if (auto v = r.get<double>("alpha")) base.alpha = *v;
    if (auto v = r.get<bool>("continuity_correction")) base.continuity_correction = *v;
    if (auto v = r.get<std::int64_t>("truth_draws")) {
        if (*v < 1) r.problem("truth_draws", "must be at least 1");
        else plan.truth_draws = static_cast<std::size_t>(*v);
    }
    r.reject_unknown();

    for (SchemeKind kind : plan.randomizers)
        for (double a : plan.effects)
            for (std::size_t n : plan.sizes) {
                Scenario s = base;
                s.randomizer = kind;
                s.effect_a = a;
                s.n = n;
                plan.scenarios.push_back(s);
            }
    // value checks on every grid point; a message repeated across points is reported once
    std::set<std::string> seen;
    for (const auto& s : plan.scenarios)
        for (auto& p : scenario_problems(s))
            if (seen.insert(p).second) problems.push_back(std::move(p));
    if (!problems.empty()) throw InputError(problems);
    return plan;
}

}  // namespace rankcal
