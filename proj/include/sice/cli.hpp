#pragma once

// Command-line surface: argument/config-file parsing into a validated
// RunConfig, the reproduce presets, and execution of each subcommand into an
// output directory.
//
// Flags, SICE_* environment variables and the optional JSON config file are
// merged into one JSON object (flag > environment > file) before validation,
// so both routes accept exactly the same keys: the flag name with dashes
// replaced by underscores (--rho-t -> "rho_t").

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sice/cohen_ml.hpp"
#include "sice/dataset.hpp"
#include "sice/errors.hpp"
#include "sice/report.hpp"
#include "sice/sice_core.hpp"
#include "sice/tables.hpp"
#include "sice/trial_sim.hpp"

#ifndef SICE_VERSION
#define SICE_VERSION "dev"
#endif

namespace sice::cli {

using json = nlohmann::json;

enum class Subcommand { Analytic, Simulate, Grid, CohenMl, Sweep, Reproduce };

inline const char* subcommand_name(Subcommand s) {
    switch (s) {
        case Subcommand::Analytic: return "analytic";
        case Subcommand::Simulate: return "simulate";
        case Subcommand::Grid: return "grid";
        case Subcommand::CohenMl: return "cohen-ml";
        case Subcommand::Sweep: return "sweep";
        case Subcommand::Reproduce: return "reproduce";
    }
    return "?";
}

inline const std::vector<std::string>& reproduce_presets() {
    static const std::vector<std::string> names{"intro98", "figure1", "figure2", "figure3",
                                                "figure4", "figure5", "figure6-synthetic", "figure7-synthetic"};
    return names;
}

struct RunConfig {
    Subcommand subcommand = Subcommand::Analytic;

    PopulationParams pop;
    Direction direction = Direction::GreaterThan;
    std::optional<double> threshold;
    std::optional<double> exclusion;
    std::size_t n_c = 1000;
    std::size_t n_t = 1000;
    double alpha = 0.05;
    double h0_effect = 0.0;

    Method analysis = Method::Ancova;
    SelectionMode selection_mode = SelectionMode::ExactN;
    std::vector<Estimator> estimators{Estimator::SelectedEffect};
    std::optional<std::uint64_t> seed;
    std::size_t n_reps = 2000;
    CohenOptions cohen;
    bool write_replicates = false;

    GridSpec grid;
    std::string grid_preset;

    std::string data_path;
    bool synthetic = false;
    std::vector<double> thresholds;
    Transform transform = Transform::None;
    std::vector<Method> methods{Method::TTest, Method::Ancova};

    std::string preset;
    bool full_scale = false;

    std::filesystem::path output_dir = "sice-out";
    std::set<report::Format> formats{report::Format::Csv, report::Format::Json};
    unsigned threads = 0;

    json echo;  ///< merged key/value view the config was built from

    bool stochastic() const {
        switch (subcommand) {
            case Subcommand::Analytic: return false;
            case Subcommand::Sweep:
                return synthetic || std::find(methods.begin(), methods.end(), Method::CohenML) != methods.end();
            default: return true;
        }
    }

    /// Selection rule from the threshold or the exclusion fraction.
    SelectionRule rule() const {
        if (threshold) return {direction, *threshold, false};
        if (!exclusion) throw ConfigError("either threshold or exclusion is required");
        const double q = pop.family.quantile(*exclusion);
        const double a = direction == Direction::GreaterThan ? pop.mu_x + pop.sigma_x * q : pop.mu_x - pop.sigma_x * q;
        return {direction, a, false};
    }

    Scenario scenario() const {
        Scenario s;
        s.pop = pop;
        s.rule = rule();
        s.n_c = n_c;
        s.n_t = n_t;
        s.analysis = analysis;
        s.selection_mode = selection_mode;
        s.estimator = estimators.front();
        s.alpha = alpha;
        s.cohen = cohen;
        return s;
    }

    SweepConfig sweep_config() const {
        SweepConfig c;
        c.thresholds = thresholds;
        c.direction = direction;
        c.transform = transform;
        c.methods = methods;
        c.alpha = alpha;
        c.cohen = cohen;
        return c;
    }
};

//---------------------------------------------------------------------------//
// Parsing
//---------------------------------------------------------------------------//

namespace detail {

enum class Kind { Number, NumberList, Integer, IntegerList, String, StringList, Flag };

struct OptionSpec {
    std::string flag;  // without leading dashes
    Kind kind;
    std::set<Subcommand> scope;
    std::string help;
};

inline std::string key_of(const std::string& flag) {
    std::string k = flag;
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
}

inline const std::vector<OptionSpec>& option_specs() {
    using S = Subcommand;
    const std::set<S> all{S::Analytic, S::Simulate, S::Grid, S::CohenMl, S::Sweep, S::Reproduce};
    const std::set<S> pop{S::Analytic, S::Simulate, S::Grid, S::CohenMl, S::Sweep};
    const std::set<S> sim{S::Simulate, S::Grid, S::Reproduce};
    static const std::vector<OptionSpec> specs{
        {"seed", Kind::Integer, all, "RNG seed (required for stochastic runs)"},
        {"output-dir", Kind::String, all, "output directory (env SICE_OUTPUT_DIR)"},
        {"format", Kind::StringList, all, "output formats: csv,json,svg"},
        {"threads", Kind::Integer, all, "worker threads (env SICE_THREADS)"},
        {"alpha", Kind::Number, all, "significance level"},
        {"mu-x", Kind::Number, pop, "baseline mean"},
        {"sigma-x", Kind::Number, pop, "baseline SD (scale for t)"},
        {"mu-c", Kind::Number, pop, "control endpoint mean"},
        {"sigma-c", Kind::Number, pop, "control endpoint SD"},
        {"rho-c", Kind::Number, pop, "control baseline-endpoint correlation"},
        {"mu-t", Kind::NumberList, pop, "treatment endpoint mean(s)"},
        {"sigma-t", Kind::NumberList, pop, "treatment endpoint SD(s)"},
        {"rho-t", Kind::NumberList, pop, "treatment correlation(s)"},
        {"family", Kind::StringList, pop, "normal, t<df> (e.g. t3) or t with --df"},
        {"df", Kind::Number, pop, "degrees of freedom for family t"},
        {"direction", Kind::String, pop, "gt (keep x > a) or lt (keep x < a)"},
        {"threshold", Kind::Number, {S::Analytic, S::Simulate, S::CohenMl}, "selection threshold a"},
        {"exclusion", Kind::NumberList, {S::Analytic, S::Simulate, S::Grid}, "excluded fraction(s) defining a"},
        {"n-c", Kind::Integer, {S::Analytic, S::Simulate, S::CohenMl, S::Sweep}, "control patients"},
        {"n-t", Kind::Integer, {S::Analytic, S::Simulate, S::CohenMl, S::Sweep}, "treatment patients"},
        {"n", Kind::IntegerList, {S::Analytic, S::Simulate, S::Grid, S::CohenMl, S::Sweep}, "patients per arm (list for grid)"},
        {"h0-effect", Kind::Number, {S::Analytic}, "null effect for the significance probability"},
        {"n-reps", Kind::Integer, sim, "Monte Carlo replicates"},
        {"analysis", Kind::String, {S::Simulate, S::Grid}, "ttest or ancova"},
        {"selection-mode", Kind::String, {S::Simulate, S::Grid}, "exact_n or oversample"},
        {"estimator", Kind::StringList, {S::Simulate, S::Grid}, "selected_effect, cohen_ml, unselected"},
        {"write-replicates", Kind::Flag, {S::Simulate}, "also write per-replicate estimates"},
        {"mc-draws", Kind::Integer, {S::Simulate, S::Grid, S::CohenMl, S::Sweep}, "Monte Carlo draws for V[m(y)]"},
        {"endpoint-variance", Kind::String, {S::Simulate, S::Grid, S::CohenMl, S::Sweep}, "marginal or residual"},
        {"preset", Kind::String, {S::Grid}, "table1, table2, table3 or table4"},
        {"data", Kind::String, {S::CohenMl, S::Sweep}, "subject CSV (subject_id, arm, baseline, endpoint)"},
        {"synthetic", Kind::Flag, {S::CohenMl, S::Sweep}, "use a synthetic dataset drawn from the population flags"},
        {"thresholds", Kind::NumberList, {S::Sweep}, "thresholds on the original scale"},
        {"transform", Kind::String, {S::CohenMl, S::Sweep}, "none or log"},
        {"methods", Kind::StringList, {S::Sweep}, "ttest, ancova, cohen_ml"},
        {"full-scale", Kind::Flag, {S::Reproduce}, "use the full replicate counts"},
    };
    return specs;
}

inline json parse_scalar(const std::string& raw, Kind kind, const std::string& flag) {
    try {
        std::size_t used = 0;
        if (kind == Kind::Number || kind == Kind::NumberList) {
            const double v = std::stod(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
            return v;
        }
        if (kind == Kind::Integer || kind == Kind::IntegerList) {
            if (!raw.empty() && raw[0] == '-') throw std::invalid_argument(raw);
            const unsigned long long v = std::stoull(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
            return v;
        }
    } catch (const std::exception&) {
        throw ConfigError("--" + flag + ": cannot parse '" + raw + "'");
    }
    return raw;
}

inline bool is_list(Kind k) { return k == Kind::NumberList || k == Kind::IntegerList || k == Kind::StringList; }

// Typed accessors over the merged object.
struct View {
    const json& j;

    bool has(const char* key) const { return j.contains(key) && !j.at(key).is_null(); }

    double number(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j.at(key);
        if (v.is_array()) {
            if (v.size() != 1) throw ConfigError(std::string(key) + ": expected a single number, got a list");
            return number_of(v.at(0), key);
        }
        return number_of(v, key);
    }

    static double number_of(const json& v, const char* key) {
        if (!v.is_number()) throw ConfigError(std::string(key) + ": expected a number");
        return v.get<double>();
    }

    std::vector<double> numbers(const char* key, std::vector<double> fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j.at(key);
        std::vector<double> out;
        if (v.is_array()) {
            for (const auto& e : v) out.push_back(number_of(e, key));
        } else {
            out.push_back(number_of(v, key));
        }
        if (out.empty()) throw ConfigError(std::string(key) + ": empty list");
        return out;
    }

    std::uint64_t integer(const char* key, std::uint64_t fallback) const {
        const auto v = integers(key, {fallback});
        if (v.size() != 1) throw ConfigError(std::string(key) + ": expected a single integer, got a list");
        return v.front();
    }

    std::vector<std::uint64_t> integers(const char* key, std::vector<std::uint64_t> fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j.at(key);
        std::vector<std::uint64_t> out;
        auto one = [&](const json& e) {
            if (!e.is_number_unsigned() && !(e.is_number_integer() && e.get<std::int64_t>() >= 0))
                throw ConfigError(std::string(key) + ": expected a non-negative integer");
            out.push_back(e.get<std::uint64_t>());
        };
        if (v.is_array()) {
            for (const auto& e : v) one(e);
        } else {
            one(v);
        }
        if (out.empty()) throw ConfigError(std::string(key) + ": empty list");
        return out;
    }

    std::string string(const char* key, std::string fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j.at(key);
        if (v.is_array() && v.size() == 1 && v.at(0).is_string()) return v.at(0).get<std::string>();
        if (!v.is_string()) throw ConfigError(std::string(key) + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<std::string> strings(const char* key, std::vector<std::string> fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j.at(key);
        std::vector<std::string> out;
        if (v.is_array()) {
            for (const auto& e : v) {
                if (!e.is_string()) throw ConfigError(std::string(key) + ": expected strings");
                out.push_back(e.get<std::string>());
            }
        } else if (v.is_string()) {
            out.push_back(v.get<std::string>());
        } else {
            throw ConfigError(std::string(key) + ": expected a string or list of strings");
        }
        return out;
    }

    bool flag(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        if (!j.at(key).is_boolean()) throw ConfigError(std::string(key) + ": expected true/false");
        return j.at(key).get<bool>();
    }
};

inline DistributionFamily parse_family(const std::string& name, std::optional<double> df) {
    if (name == "normal") return DistributionFamily::normal();
    if (name == "t") {
        if (!df) throw ConfigError("family t needs df");
        return DistributionFamily::student_t(*df);
    }
    if (name.size() > 1 && name[0] == 't') {
        try {
            std::size_t used = 0;
            const double v = std::stod(name.substr(1), &used);
            if (used == name.size() - 1) return DistributionFamily::student_t(v);
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("unknown family '" + name + "'");
}

inline Direction parse_direction(const std::string& s) {
    if (s == "gt" || s == ">" || s == "greater") return Direction::GreaterThan;
    if (s == "lt" || s == "<" || s == "less") return Direction::LessThan;
    throw ConfigError("unknown direction '" + s + "'");
}

inline Method parse_method(const std::string& s) {
    if (s == "ttest" || s == "t-test") return Method::TTest;
    if (s == "ancova") return Method::Ancova;
    if (s == "cohen_ml" || s == "cohen-ml" || s == "cohen") return Method::CohenML;
    throw ConfigError("unknown method '" + s + "'");
}

inline Estimator parse_estimator(const std::string& s) {
    if (s == "selected_effect" || s == "selected") return Estimator::SelectedEffect;
    if (s == "cohen_ml" || s == "cohen-ml" || s == "cohen") return Estimator::CohenML;
    if (s == "unselected" || s == "reference") return Estimator::Unselected;
    throw ConfigError("unknown estimator '" + s + "'");
}

inline report::Format parse_format(const std::string& s) {
    if (s == "csv") return report::Format::Csv;
    if (s == "json") return report::Format::Json;
    if (s == "svg") return report::Format::Svg;
    throw ConfigError("unknown format '" + s + "'");
}

inline GridSpec grid_preset(const std::string& name) {
    if (name == "table1") return presets::table1();
    if (name == "table2") return presets::table2();
    if (name == "table3") return presets::table3();
    if (name == "table4") return presets::table4();
    throw ConfigError("unknown grid preset '" + name + "'");
}

}  // namespace detail

/// Frozen configuration of a reproduce preset. Desk scale shrinks the
/// replicate counts; full scale uses 2000 replicates per scenario.
inline RunConfig preset_config(const std::string& name, bool full_scale) {
    RunConfig c;
    c.subcommand = Subcommand::Reproduce;
    c.preset = name;
    c.full_scale = full_scale;
    auto reps = [&](std::size_t desk) { return full_scale ? std::size_t{2000} : desk; };
    if (name == "intro98") {
        // two-arm trial of the introduction: N(0,1) baselines, rho_c 0.2 / sigma_c 1,
        // rho_t 0.3 / sigma_t 1.2, keep x > 0.6, 1000 per arm, Welch t-test
        c.pop.control = {0.0, 1.0, 0.2};
        c.pop.treatment = {0.0, 1.2, 0.3};
        c.threshold = 0.6;
        c.n_c = c.n_t = 1000;
        c.analysis = Method::TTest;
        c.selection_mode = SelectionMode::Oversample;
        c.n_reps = 2000;
        c.seed = 500;
    } else if (name == "figure1") {
        c.grid = presets::table1();
        c.grid_preset = "table1";
        c.n_reps = reps(200);
        c.seed = 101;
    } else if (name == "figure2") {
        c.grid = presets::table2();
        c.grid_preset = "table2";
        c.n_reps = reps(200);
        c.seed = 102;
    } else if (name == "figure3") {
        c.grid = presets::table3();
        c.grid.mu_t = {0.0};
        c.grid_preset = "table3";
        c.estimators = {Estimator::CohenML, Estimator::Unselected};
        c.n_reps = reps(100);
        c.seed = 103;
    } else if (name == "figure4") {
        c.grid = presets::table3();
        c.grid.mu_t = {0.15};
        c.grid_preset = "table3";
        c.estimators = {Estimator::CohenML};
        c.n_reps = reps(100);
        c.seed = 104;
    } else if (name == "figure5") {
        c.grid = presets::table4();
        c.grid.mu_t = {0.0};
        c.grid_preset = "table4";
        c.estimators = {Estimator::CohenML, Estimator::Unselected};
        c.n_reps = reps(100);
        c.seed = 105;
    } else if (name == "figure6-synthetic" || name == "figure7-synthetic") {
        c.pop = lps_analog_population();
        c.synthetic = true;
        c.n_c = c.n_t = 1000;
        c.thresholds = {15, 16, 17, 18, 19, 20};
        c.transform = Transform::Log;
        c.methods = name == "figure6-synthetic" ? std::vector<Method>{Method::TTest, Method::Ancova}
                                                : std::vector<Method>{Method::Ancova, Method::CohenML};
        c.seed = 106;
    } else {
        throw ConfigError("unknown reproduce preset '" + name + "'");
    }
    c.formats = {report::Format::Csv, report::Format::Json, report::Format::Svg};
    return c;
}

/// Builds a validated RunConfig from the merged key/value object.
inline RunConfig build_config(Subcommand sub, const json& merged, const std::string& preset_name = {}) {
    const detail::View v{merged};
    RunConfig c;
    if (sub == Subcommand::Reproduce) {
        c = preset_config(preset_name, v.flag("full_scale", false));
        if (v.has("n_reps")) c.n_reps = v.integer("n_reps", c.n_reps);
    }
    c.subcommand = sub;

    if (sub != Subcommand::Reproduce) {
        std::optional<double> df;
        if (v.has("df")) df = v.number("df", 0.0);
        std::vector<DistributionFamily> families;
        try {
            for (const auto& f : v.strings("family", {"normal"})) families.push_back(detail::parse_family(f, df));
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
        c.pop.mu_x = v.number("mu_x", 0.0);
        c.pop.sigma_x = v.number("sigma_x", 1.0);
        c.pop.control = {v.number("mu_c", 0.0), v.number("sigma_c", 1.0), v.number("rho_c", 0.0)};
        c.direction = detail::parse_direction(v.string("direction", "gt"));
        c.alpha = v.number("alpha", 0.05);
        c.h0_effect = v.number("h0_effect", 0.0);
        c.n_reps = v.integer("n_reps", 2000);
        c.analysis = detail::parse_method(v.string("analysis", "ancova"));
        const std::string mode = v.string("selection_mode", "exact_n");
        if (mode == "exact_n" || mode == "exactn") c.selection_mode = SelectionMode::ExactN;
        else if (mode == "oversample") c.selection_mode = SelectionMode::Oversample;
        else throw ConfigError("unknown selection_mode '" + mode + "'");
        c.estimators.clear();
        for (const auto& e : v.strings("estimator", {"selected_effect"})) c.estimators.push_back(detail::parse_estimator(e));
        c.write_replicates = v.flag("write_replicates", false);
        c.cohen.mc_draws = v.integer("mc_draws", 2000);
        const std::string ev = v.string("endpoint_variance", "marginal");
        if (ev == "marginal") c.cohen.endpoint_variance = EndpointVariance::Marginal;
        else if (ev == "residual") c.cohen.endpoint_variance = EndpointVariance::Residual;
        else throw ConfigError("unknown endpoint_variance '" + ev + "'");
        c.data_path = v.string("data", "");
        c.synthetic = v.flag("synthetic", false);
        c.thresholds = v.numbers("thresholds", {});
        const std::string tr = v.string("transform", "none");
        if (tr == "none") c.transform = Transform::None;
        else if (tr == "log") c.transform = Transform::Log;
        else throw ConfigError("unknown transform '" + tr + "'");
        c.methods.clear();
        for (const auto& m : v.strings("methods", {"ttest", "ancova"})) c.methods.push_back(detail::parse_method(m));

        const auto mu_t = v.numbers("mu_t", {0.0});
        const auto sigma_t = v.numbers("sigma_t", {1.0});
        const auto rho_t = v.numbers("rho_t", {0.0});
        const auto n_list = v.integers("n", {});
        if (v.has("threshold") && v.has("exclusion"))
            throw ConfigError("threshold and exclusion are mutually exclusive");
        if (v.has("threshold")) c.threshold = v.number("threshold", 0.0);

        if (sub == Subcommand::Grid) {
            if (v.has("preset")) {
                c.grid_preset = v.string("preset", "");
                c.grid = detail::grid_preset(c.grid_preset);
            }
            GridSpec& g = c.grid;
            if (v.has("family")) g.families = families;
            g.mu_x = c.pop.mu_x;
            g.sigma_x = c.pop.sigma_x;
            if (v.has("mu_c") || v.has("sigma_c") || v.has("rho_c") || !v.has("preset"))
                g.control = {v.number("mu_c", g.control.mu), v.number("sigma_c", g.control.sigma),
                             v.number("rho_c", g.control.rho)};
            if (v.has("mu_t")) g.mu_t = mu_t;
            if (v.has("sigma_t")) g.sigma_t = sigma_t;
            if (v.has("rho_t")) g.rho_t = rho_t;
            if (v.has("exclusion")) g.exclusion = v.numbers("exclusion", {});
            if (!n_list.empty()) g.n_g.assign(n_list.begin(), n_list.end());
            g.direction = c.direction;
            g.analysis = c.analysis;
            g.selection_mode = c.selection_mode;
            g.alpha = c.alpha;
            g.cohen = c.cohen;
            for (double p : g.exclusion)
                if (!(p > 0.0 && p < 1.0)) throw ConfigError("exclusion fractions must lie in (0, 1)");
        } else {
            if (families.size() != 1) throw ConfigError("family: expected a single family outside grid runs");
            c.pop.family = families.front();
            if (mu_t.size() != 1 || sigma_t.size() != 1 || rho_t.size() != 1)
                throw ConfigError("treatment parameters must be scalars outside grid runs");
            c.pop.treatment = {mu_t.front(), sigma_t.front(), rho_t.front()};
            if (v.has("exclusion")) {
                const auto ex = v.numbers("exclusion", {});
                if (ex.size() != 1) throw ConfigError("exclusion: expected a single fraction outside grid runs");
                if (!(ex.front() > 0.0 && ex.front() < 1.0)) throw ConfigError("exclusion must lie in (0, 1)");
                c.exclusion = ex.front();
            }
            if (n_list.size() > 1) throw ConfigError("n: expected a single count outside grid runs");
            if (n_list.size() == 1) c.n_c = c.n_t = n_list.front();
            c.n_c = v.integer("n_c", c.n_c);
            c.n_t = v.integer("n_t", c.n_t);
            if (c.estimators.size() != 1) throw ConfigError("estimator: expected a single estimator outside grid runs");
        }
    }

    if (v.has("seed")) c.seed = v.integer("seed", 0);
    c.threads = static_cast<unsigned>(v.integer("threads", c.threads));
    if (v.has("output_dir")) c.output_dir = v.string("output_dir", "");
    if (v.has("format")) {
        c.formats.clear();
        for (const auto& f : v.strings("format", {})) c.formats.insert(detail::parse_format(f));
        if (c.formats.empty()) throw ConfigError("format: at least one output format is required");
    }

    // cross-field validation
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (c.n_reps < 1) throw ConfigError("n_reps must be at least 1");
    if (c.cohen.mc_draws < 1000) throw ConfigError("mc_draws must be at least 1000");
    try {
        switch (sub) {
            case Subcommand::Analytic:
                if (!c.pop.family.is_normal())
                    throw ConfigError("analytic: closed-form SICE exists only for the normal family; use simulate");
                c.pop.validate();
                (void)c.rule();
                if (c.n_c < 2 || c.n_t < 2) throw ConfigError("n_c and n_t must be at least 2");
                break;
            case Subcommand::Simulate:
                c.scenario().validate();
                if (c.analysis == Method::CohenML) throw ConfigError("analysis must be ttest or ancova");
                break;
            case Subcommand::Grid:
                if (c.grid.size() == 0) throw ConfigError("grid: every parameter list must be nonempty");
                break;
            case Subcommand::CohenMl:
                if (c.data_path.empty() == !c.synthetic) throw ConfigError("cohen-ml: give exactly one of --data or --synthetic");
                if (!c.threshold) throw ConfigError("cohen-ml: --threshold is required");
                if (c.synthetic) c.pop.validate();
                break;
            case Subcommand::Sweep:
                if (c.data_path.empty() == !c.synthetic) throw ConfigError("sweep: give exactly one of --data or --synthetic");
                c.sweep_config().validate();
                if (c.synthetic) c.pop.validate();
                break;
            case Subcommand::Reproduce: break;
        }
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    if (c.stochastic() && !c.seed)
        throw ConfigError(std::string(subcommand_name(sub)) + ": --seed is required for stochastic runs");
    c.echo = merged;
    c.echo["subcommand"] = subcommand_name(sub);
    if (sub == Subcommand::Reproduce) c.echo["preset"] = c.preset;
    return c;
}

/// Thrown for --help and --version; what() is the text to print.
class HelpRequested : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses argv (argv[0] is the program name). Flags override environment
/// variables, which override the JSON file given with --config.
inline RunConfig parse_config(const std::vector<std::string>& args) {
    CLI::App app{"Selection-induced contrast estimate (SICE) analytics, simulation and audits", "sice"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", SICE_VERSION);

    struct Slot {
        const detail::OptionSpec* spec;
        std::vector<std::string> values;
        bool flag = false;
        CLI::Option* opt = nullptr;
    };
    std::map<Subcommand, CLI::App*> subs;
    std::map<Subcommand, std::vector<Slot>> slots;
    std::map<Subcommand, std::string> config_path;
    std::string preset_name;
    const std::map<Subcommand, std::string> help{
        {Subcommand::Analytic, "closed-form SICE effect, estimator moments and significance probability"},
        {Subcommand::Simulate, "Monte Carlo replicates of one trial scenario"},
        {Subcommand::Grid, "scenario grid (cross product of parameter lists)"},
        {Subcommand::CohenMl, "Cohen ML estimate of the pre-selection effect from selected data"},
        {Subcommand::Sweep, "threshold-sensitivity sweep over a subject dataset"},
        {Subcommand::Reproduce, "run a named preset"}};
    for (auto [sub, text] : help) {
        auto* s = app.add_subcommand(subcommand_name(sub), text);
        subs[sub] = s;
        s->add_option("--config", config_path[sub], "JSON config file; flags override its values");
        auto& list = slots[sub];
        for (const auto& spec : detail::option_specs())
            if (spec.scope.count(sub)) list.push_back({&spec, {}, false, nullptr});
        for (auto& slot : list) {
            const std::string name = "--" + slot.spec->flag;
            if (slot.spec->kind == detail::Kind::Flag) {
                slot.opt = s->add_flag(name, slot.flag, slot.spec->help);
            } else {
                slot.opt = s->add_option(name, slot.values, slot.spec->help);
                if (detail::is_list(slot.spec->kind)) slot.opt->delimiter(',');
                else slot.opt->expected(1);
            }
        }
        if (sub == Subcommand::Reproduce) {
            s->add_option("preset", preset_name, "intro98, figure1..figure5, figure6-synthetic, figure7-synthetic")
                ->required()
                ->check(CLI::IsMember(reproduce_presets()));
        }
    }

    std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rev.begin(), rev.end());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested(app.help());
    } catch (const CLI::CallForAllHelp&) {
        throw HelpRequested(app.help("", CLI::AppFormatMode::All));
    } catch (const CLI::CallForVersion&) {
        throw HelpRequested(std::string(SICE_VERSION) + "\n");
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    Subcommand sub{};
    for (auto& [k, s] : subs)
        if (s->parsed()) sub = k;

    json merged = json::object();
    if (!config_path[sub].empty()) {
        std::ifstream in(config_path[sub]);
        if (!in) throw ConfigError("cannot open config file " + config_path[sub]);
        try {
            merged = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("config file " + config_path[sub] + ": " + e.what());
        }
        if (!merged.is_object()) throw ConfigError("config file must hold a JSON object");
        std::set<std::string> allowed{"subcommand"};
        for (const auto& spec : detail::option_specs())
            if (spec.scope.count(sub)) allowed.insert(detail::key_of(spec.flag));
        for (const auto& [k, _] : merged.items())
            if (!allowed.count(k)) throw ConfigError("config file: unknown key '" + k + "' for " + subcommand_name(sub));
        merged.erase("subcommand");
    }
    if (const char* env = std::getenv("SICE_OUTPUT_DIR"); env && *env) merged["output_dir"] = env;
    if (const char* env = std::getenv("SICE_THREADS"); env && *env)
        merged["threads"] = detail::parse_scalar(env, detail::Kind::Integer, "SICE_THREADS");
    for (const auto& slot : slots[sub]) {
        if (slot.opt->count() == 0) continue;
        const std::string key = detail::key_of(slot.spec->flag);
        if (slot.spec->kind == detail::Kind::Flag) {
            merged[key] = slot.flag;
        } else if (detail::is_list(slot.spec->kind)) {
            json arr = json::array();
            for (const auto& raw : slot.values) arr.push_back(detail::parse_scalar(raw, slot.spec->kind, slot.spec->flag));
            merged[key] = arr;
        } else {
            merged[key] = detail::parse_scalar(slot.values.back(), slot.spec->kind, slot.spec->flag);
        }
    }
    return build_config(sub, merged, preset_name);
}

//---------------------------------------------------------------------------//
// Execution
//---------------------------------------------------------------------------//

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitIo = 3;

/// All replicates or fits failed numerically.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::vector<SubjectRecord> dataset_for(const RunConfig& c) {
    if (c.synthetic) {
        const bool positive = c.transform == Transform::Log;
        return synthesize_dataset(c.pop, c.n_c, c.n_t, RngStream{*c.seed, 0}.child(0),
                                  positive ? EndpointScale::Exponentiated : EndpointScale::Linear);
    }
    std::ifstream in(c.data_path);
    if (!in) throw IoError("cannot open dataset " + c.data_path);
    return load_dataset(in);
}

inline void grid_charts(report::OutputWriter& out, const report::Table& t, const std::string& prefix,
                        const std::vector<Estimator>& estimators) {
    for (Estimator e : estimators) {
        const std::string en = estimator_name(e);
        auto spec = [&](std::string title, std::string y, std::vector<std::string> groups, bool scatter) {
            report::ChartSpec s;
            s.title = std::move(title);
            s.x_column = "loading_diff";
            s.y_column = std::move(y);
            s.group_columns = std::move(groups);
            s.scatter = scatter;
            s.filter_column = "estimator";
            s.filter_value = en;
            return s;
        };
        if (e == Estimator::SelectedEffect) {
            out.write_chart(prefix + "_e_sice_hat", t,
                            spec("Mean selected effect minus e_o", "e_sice_hat", {"family", "exclusion", "n_g"}, false));
            out.write_chart(prefix + "_pr_significant", t,
                            spec("Pr(significant SICE)", "pr_significant", {"family", "exclusion", "n_g"}, false));
        } else {
            auto bias = spec("Bias of " + en, "bias", {"family", "exclusion", "n_g"}, true);
            bias.reference_y = 0.0;
            out.write_chart(prefix + "_" + en + "_bias", t, bias);
            auto power = spec("Power of " + en, "power", {"exclusion", "n_g", "sigma_t"}, false);
            power.x_column = "rho_t";
            out.write_chart(prefix + "_" + en + "_power", t, power);
        }
    }
}

inline void sweep_charts(report::OutputWriter& out, const report::Table& t, const std::vector<Method>& methods) {
    for (Method m : methods) {
        if (m == Method::CohenML) continue;
        report::ChartSpec s;
        s.title = std::string("Effect vs threshold (") + method_name(m) + ")";
        s.x_column = "threshold";
        s.y_column = "estimate";
        s.low_column = "ci_low";
        s.high_column = "ci_high";
        s.filter_column = "method";
        s.filter_value = method_name(m);
        out.write_chart(std::string("sweep_") + method_name(m), t, s);
    }
}

inline void cohen_sweep_chart(report::OutputWriter& out, const report::Table& t, double reference) {
    report::ChartSpec s;
    s.title = "Cohen ML pre-selection effect vs threshold";
    s.x_column = "threshold";
    s.y_column = "e_o_hat";
    s.low_column = "ci_low";
    s.high_column = "ci_high";
    s.reference_y = reference;
    out.write_chart("cohen_sweep", t, s);
}

}  // namespace detail

/// Executes a validated configuration, writing tables, charts and the run
/// manifest into c.output_dir.
inline void run(const RunConfig& c, std::ostream& log = std::cerr) {
    const auto start = std::chrono::steady_clock::now();
    report::OutputWriter out(c.output_dir, c.formats);
    const unsigned threads = resolve_threads(c.threads);

    Subcommand action = c.subcommand;
    std::string chart_prefix = "grid";
    if (c.subcommand == Subcommand::Reproduce) {
        chart_prefix = c.preset;
        if (c.preset == "intro98") action = Subcommand::Simulate;
        else if (c.preset == "figure6-synthetic" || c.preset == "figure7-synthetic") action = Subcommand::Sweep;
        else action = Subcommand::Grid;
    }

    switch (action) {
        case Subcommand::Analytic: {
            out.write_table(report::analytic_table(c.pop, c.rule(), c.n_c, c.n_t, c.alpha, c.h0_effect));
            break;
        }
        case Subcommand::Simulate: {
            const Scenario sc = c.scenario();
            const auto outcomes = replicate_outcomes(sc, c.n_reps, RngStream{*c.seed, 0}, FailurePolicy::Count, threads);
            const auto summary = summarize(outcomes, sc.pop.e_o(), sc.alpha);
            out.write_table(report::simulate_table(sc, summary, *c.seed));
            if (c.write_replicates) out.write_table(report::replicates_table(outcomes));
            if (sc.pop.family.is_normal())
                out.write_table(report::analytic_table(sc.pop, sc.rule, sc.n_c, sc.n_t, sc.alpha, sc.pop.e_o()));
            if (summary.n_ok == 0) throw NumericalFailure("every replicate failed");
            break;
        }
        case Subcommand::Grid: {
            std::vector<GridRow> all;
            for (Estimator e : c.estimators) {
                auto rows = run_grid(c.grid, c.n_reps, e, RngStream{*c.seed, 0}, threads);
                all.insert(all.end(), rows.begin(), rows.end());
            }
            const auto table = report::grid_table(all);
            out.write_table(table);
            detail::grid_charts(out, table, chart_prefix, c.estimators);
            bool any_ok = false;
            for (const auto& r : all) any_ok = any_ok || r.summary.n_ok > 0;
            if (!any_ok) throw NumericalFailure("every grid replicate failed");
            break;
        }
        case Subcommand::CohenMl: {
            const auto records = apply_transform(detail::dataset_for(c), c.transform);
            const SelectionRule rule{c.direction, transform_threshold(*c.threshold, c.transform), true};
            std::vector<Observation> kept;
            for (const auto& r : records)
                if (rule.keeps(r.baseline)) kept.push_back({r.baseline, r.endpoint, r.arm});
            try {
                const auto effect = cohen_ml_effect(kept, rule, c.cohen, RngStream{*c.seed, 1}, c.alpha);
                out.write_table(report::cohen_fit_table(effect));
                out.write_table(report::cohen_effect_table(effect));
            } catch (const NoValidRoot& e) {
                throw NumericalFailure(e.what());
            }
            break;
        }
        case Subcommand::Sweep: {
            const auto records = detail::dataset_for(c);
            const auto cfg = c.sweep_config();
            const bool wants_direct = std::any_of(c.methods.begin(), c.methods.end(),
                                                  [](Method m) { return m != Method::CohenML; });
            if (wants_direct) {
                const auto rows = threshold_sweep(records, cfg);
                const auto table = report::sweep_table(rows);
                out.write_table(table);
                detail::sweep_charts(out, table, c.methods);
            }
            if (std::find(c.methods.begin(), c.methods.end(), Method::CohenML) != c.methods.end()) {
                const auto sweep = cohen_sweep(records, cfg, RngStream{*c.seed, 2});
                const auto table = report::cohen_sweep_table(sweep);
                out.write_table(table);
                detail::cohen_sweep_chart(out, table, sweep.reference.estimate);
                bool any_ok = false;
                for (const auto& r : sweep.rows) any_ok = any_ok || r.status == CohenStatus::Ok;
                if (!any_ok) throw NumericalFailure("every Cohen ML fit failed");
            }
            break;
        }
        case Subcommand::Reproduce: break;
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    nlohmann::ordered_json manifest;
    manifest["tool"] = "sice";
    manifest["version"] = SICE_VERSION;
    manifest["subcommand"] = subcommand_name(c.subcommand);
    if (!c.preset.empty()) manifest["preset"] = c.preset;
    manifest["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    manifest["n_reps"] = c.n_reps;
    manifest["threads"] = threads;
    manifest["config"] = c.echo;
    manifest["outputs"] = out.written();
    manifest["wall_time_seconds"] = wall;
    out.write_file("manifest.json", manifest.dump(2) + "\n");
    log << "sice " << subcommand_name(c.subcommand) << ": wrote " << out.written().size() << " files to "
        << c.output_dir.string() << " in " << wall << " s\n";
}

/// Parses and runs; returns the process exit code.
inline int main(const std::vector<std::string>& args, std::ostream& log = std::cerr) {
    RunConfig config;
    try {
        config = parse_config(args);
    } catch (const HelpRequested& h) {
        std::cout << h.what();
        return kExitOk;
    } catch (const ConfigError& e) {
        log << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        log << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        run(config, log);
    } catch (const IoError& e) {
        log << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const LoadError& e) {
        log << "input error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        log << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        log << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        log << "i/o error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

}  // namespace sice::cli
