#pragma once

// Threshold-sensitivity workflow on tabular trial data: load subject
// records, optionally log-transform them, and re-estimate the treatment
// effect at a series of baseline inclusion thresholds.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "sice/analysis.hpp"
#include "sice/cohen_ml.hpp"
#include "sice/errors.hpp"
#include "sice/rng.hpp"
#include "sice/sampling.hpp"
#include "sice/sice_core.hpp"

namespace sice {

struct SubjectRecord {
    std::string subject_id;
    Arm arm = Arm::Control;
    double baseline = 0.0;
    double endpoint = 0.0;
    std::size_t row = 0;  ///< 1-based line number in the source, header is line 1
};

namespace detail {

inline std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) out.push_back(trim(field));
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

inline std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace detail

/// Reads delimited text with a header naming subject_id, arm, baseline and
/// endpoint (any order, any case; extra columns ignored). The delimiter is
/// tab when the header contains one, comma otherwise.
inline std::vector<SubjectRecord> load_dataset(std::istream& in) {
    std::string header;
    std::size_t line_no = 0;
    while (std::getline(in, header)) {
        ++line_no;
        if (!detail::trim(header).empty()) break;
    }
    if (detail::trim(header).empty()) throw LoadError("dataset: missing header row");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
    const auto names = detail::split(header, delim);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < names.size(); ++i) col[detail::lower(names[i])] = i;
    for (const char* required : {"subject_id", "arm", "baseline", "endpoint"})
        if (!col.count(required)) throw LoadError(std::string("dataset: missing column '") + required + "'");

    std::vector<SubjectRecord> records;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split(line, delim);
        auto field = [&](const char* name) -> const std::string& {
            const std::size_t i = col.at(name);
            if (i >= fields.size())
                throw LoadError("dataset row " + std::to_string(line_no) + ": missing field '" + name + "'");
            return fields[i];
        };
        SubjectRecord r;
        r.row = line_no;
        r.subject_id = field("subject_id");
        if (r.subject_id.empty()) throw LoadError("dataset row " + std::to_string(line_no) + ": empty subject_id");
        if (auto it = seen.find(r.subject_id); it != seen.end())
            throw LoadError("dataset rows " + std::to_string(it->second) + " and " + std::to_string(line_no)
                            + ": duplicate subject_id '" + r.subject_id + "'");
        seen.emplace(r.subject_id, line_no);
        const std::string arm = detail::lower(field("arm"));
        if (arm == "control") r.arm = Arm::Control;
        else if (arm == "treatment") r.arm = Arm::Treatment;
        else throw LoadError("dataset row " + std::to_string(line_no) + ": unknown arm '" + field("arm") + "'");
        for (auto [name, target] : {std::pair{"baseline", &r.baseline}, std::pair{"endpoint", &r.endpoint}}) {
            auto v = detail::parse_double(field(name));
            if (!v)
                throw LoadError("dataset row " + std::to_string(line_no) + ": cannot parse " + name + " '"
                                + field(name) + "'");
            *target = *v;
        }
        records.push_back(std::move(r));
    }
    return records;
}

enum class Transform { None, Log };

inline const char* transform_name(Transform t) { return t == Transform::Log ? "log" : "none"; }

/// Natural log of baseline and endpoint, or the identity.
inline std::vector<SubjectRecord> apply_transform(std::vector<SubjectRecord> records, Transform transform) {
    if (transform == Transform::None) return records;
    std::string bad;
    for (const auto& r : records)
        if (!(r.baseline > 0.0) || !(r.endpoint > 0.0)) bad += (bad.empty() ? "" : ", ") + r.subject_id;
    if (!bad.empty()) throw DomainError("log transform needs positive values; offending subjects: " + bad);
    for (auto& r : records) {
        r.baseline = std::log(r.baseline);
        r.endpoint = std::log(r.endpoint);
    }
    return records;
}

/// Maps a threshold stated on the original scale onto the analysis scale.
inline double transform_threshold(double threshold, Transform transform) {
    if (transform == Transform::None) return threshold;
    if (!(threshold > 0.0)) throw DomainError("log transform needs positive thresholds");
    return std::log(threshold);
}

inline std::vector<Observation> to_observations(const std::vector<SubjectRecord>& records) {
    std::vector<Observation> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.baseline, r.endpoint, r.arm});
    return out;
}

struct SweepConfig {
    std::vector<double> thresholds;  ///< on the original scale, strictly increasing
    Direction direction = Direction::GreaterThan;
    Transform transform = Transform::None;
    std::vector<Method> methods{Method::TTest, Method::Ancova};
    double alpha = 0.05;
    CohenOptions cohen;
    std::size_t low_n_limit = 10;  ///< rows with fewer subjects in an arm get a warning

    void validate() const {
        if (thresholds.empty()) throw DomainError("sweep: no thresholds");
        for (std::size_t i = 1; i < thresholds.size(); ++i)
            if (!(thresholds[i] > thresholds[i - 1])) throw DomainError("sweep: thresholds must be strictly increasing");
        if (methods.empty()) throw DomainError("sweep: no methods");
        if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("sweep: alpha must lie in (0, 1)");
    }

    /// Inclusion rule at threshold T: baseline >= T (or <= T), on the analysis scale.
    SelectionRule rule(double threshold) const {
        return {direction, transform_threshold(threshold, transform), true};
    }
};

struct MethodResult {
    Method method = Method::TTest;
    bool ok = false;
    EffectEstimate estimate;
    double percent_change = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

struct ThresholdSweepRow {
    std::optional<double> threshold;  ///< empty for the no-selection row
    std::size_t n_control = 0;
    std::size_t n_treatment = 0;
    bool feasible = true;
    bool low_n = false;
    std::vector<MethodResult> results;  ///< one per t-test / ANCOVA method of the config

    const MethodResult* result(Method m) const {
        for (const auto& r : results)
            if (r.method == m) return &r;
        return nullptr;
    }
};

namespace detail {

inline std::vector<Observation> select(const std::vector<Observation>& obs, const SelectionRule& rule) {
    std::vector<Observation> out;
    for (const auto& o : obs)
        if (rule.keeps(o.x)) out.push_back(o);
    return out;
}

inline std::pair<std::size_t, std::size_t> arm_counts(const std::vector<Observation>& obs) {
    std::size_t c = 0, t = 0;
    for (const auto& o : obs) (o.arm == Arm::Control ? c : t)++;
    return {c, t};
}

inline MethodResult run_method(Method m, const std::vector<Observation>& obs, double alpha) {
    MethodResult r;
    r.method = m;
    try {
        r.estimate = m == Method::TTest ? welch_t_test(obs, alpha) : ancova_fit(obs, alpha);
        r.ok = true;
    } catch (const Error& e) {
        r.error = e.what();
    }
    return r;
}

}  // namespace detail

/// Row 0 analyses every subject; row k keeps subjects on the inclusive side
/// of thresholds[k-1]. CohenML entries of config.methods are handled by
/// cohen_sweep. percent_change = (estimate_T - estimate_none) / |estimate_none| * 100.
inline std::vector<ThresholdSweepRow> threshold_sweep(const std::vector<SubjectRecord>& records,
                                                      const SweepConfig& config) {
    config.validate();
    const auto obs = to_observations(apply_transform(records, config.transform));
    std::vector<Method> methods;
    for (Method m : config.methods)
        if (m != Method::CohenML && std::find(methods.begin(), methods.end(), m) == methods.end())
            methods.push_back(m);

    auto make_row = [&](std::optional<double> threshold, const std::vector<Observation>& kept) {
        ThresholdSweepRow row;
        row.threshold = threshold;
        std::tie(row.n_control, row.n_treatment) = detail::arm_counts(kept);
        row.feasible = row.n_control >= 2 && row.n_treatment >= 2;
        row.low_n = std::min(row.n_control, row.n_treatment) < config.low_n_limit;
        for (Method m : methods) {
            if (row.feasible) {
                row.results.push_back(detail::run_method(m, kept, config.alpha));
            } else {
                MethodResult r;
                r.method = m;
                r.error = "infeasible: fewer than 2 subjects in an arm";
                row.results.push_back(r);
            }
        }
        return row;
    };

    std::vector<ThresholdSweepRow> rows;
    rows.push_back(make_row(std::nullopt, obs));
    for (double t : config.thresholds) rows.push_back(make_row(t, detail::select(obs, config.rule(t))));

    for (auto& row : rows)
        for (auto& r : row.results) {
            const MethodResult* base = rows.front().result(r.method);
            if (!r.ok || !base || !base->ok) continue;
            r.percent_change = row.threshold
                                   ? (r.estimate.estimate - base->estimate.estimate) / std::abs(base->estimate.estimate) * 100.0
                                   : 0.0;
        }
    return rows;
}

enum class CohenStatus { Ok, NoValidRoot, Infeasible, Failed };

inline const char* cohen_status_name(CohenStatus s) {
    switch (s) {
        case CohenStatus::Ok: return "ok";
        case CohenStatus::NoValidRoot: return "no_valid_root";
        case CohenStatus::Infeasible: return "infeasible";
        case CohenStatus::Failed: return "failed";
    }
    return "?";
}

struct CohenSweepRow {
    double threshold = 0.0;
    std::size_t n_control = 0;
    std::size_t n_treatment = 0;
    CohenStatus status = CohenStatus::Failed;
    bool low_n = false;
    std::optional<PreSelectionEffect> effect;
    std::string error;
};

struct CohenSweep {
    /// Direct estimate on all subjects (ANCOVA when requested, else t-test).
    EffectEstimate reference;
    std::vector<CohenSweepRow> rows;
};

/// Cohen ML estimate of the pre-selection effect at every threshold. Row k
/// draws its Monte Carlo variance from rng.child(k).
inline CohenSweep cohen_sweep(const std::vector<SubjectRecord>& records, const SweepConfig& config,
                              const RngStream& rng) {
    config.validate();
    const auto obs = to_observations(apply_transform(records, config.transform));
    const bool use_ancova = std::find(config.methods.begin(), config.methods.end(), Method::Ancova) != config.methods.end()
                            || std::find(config.methods.begin(), config.methods.end(), Method::TTest) == config.methods.end();
    CohenSweep out;
    out.reference = use_ancova ? ancova_fit(obs, config.alpha) : welch_t_test(obs, config.alpha);
    for (std::size_t k = 0; k < config.thresholds.size(); ++k) {
        CohenSweepRow row;
        row.threshold = config.thresholds[k];
        const SelectionRule rule = config.rule(row.threshold);
        const auto kept = detail::select(obs, rule);
        std::tie(row.n_control, row.n_treatment) = detail::arm_counts(kept);
        row.low_n = std::min(row.n_control, row.n_treatment) < config.low_n_limit;
        if (std::min(row.n_control, row.n_treatment) < 3) {
            row.status = CohenStatus::Infeasible;
            row.error = "fewer than 3 subjects in an arm";
        } else {
            try {
                row.effect = cohen_ml_effect(kept, rule, config.cohen, rng.child(k), config.alpha);
                row.status = CohenStatus::Ok;
            } catch (const NoValidRoot& e) {
                row.status = CohenStatus::NoValidRoot;
                row.error = e.what();
            } catch (const Error& e) {
                row.status = CohenStatus::Failed;
                row.error = e.what();
            }
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

/// How synthetic values are written: as drawn, or exponentiated so the
/// dataset lives on a positive (minutes-like) scale and a log transform
/// recovers the bivariate normal law.
enum class EndpointScale { Linear, Exponentiated };

/// Unselected subjects drawn from the population's joint law; arms
/// alternate in id order. Control draws come from rng.child(0), treatment
/// from rng.child(1).
inline std::vector<SubjectRecord> synthesize_dataset(const PopulationParams& pop, std::size_t n_c, std::size_t n_t,
                                                     const RngStream& rng,
                                                     EndpointScale scale = EndpointScale::Linear) {
    pop.validate();
    if (n_c < 1 || n_t < 1) throw DomainError("synthesize_dataset: each arm needs at least one subject");
    const auto control = sample_bivariate(pop.bivariate(Arm::Control), pop.family, rng.child(0), n_c);
    const auto treatment = sample_bivariate(pop.bivariate(Arm::Treatment), pop.family, rng.child(1), n_t);
    auto emit = [scale](double v) { return scale == EndpointScale::Exponentiated ? std::exp(v) : v; };
    std::vector<SubjectRecord> out;
    out.reserve(n_c + n_t);
    std::size_t ic = 0, it = 0;
    while (ic < n_c || it < n_t) {
        const bool take_control = ic < n_c && (it >= n_t || ic <= it);
        const Pair p = take_control ? control[ic++] : treatment[it++];
        char id[32];
        std::snprintf(id, sizeof id, "S%06zu", out.size() + 1);
        out.push_back({id, take_control ? Arm::Control : Arm::Treatment, emit(p.x), emit(p.y), out.size() + 2});
    }
    return out;
}

/// Log-scale population for a sleep-latency analog: baseline median 20
/// minutes, a drug that lowers the endpoint by 0.2 log units, and a
/// baseline-endpoint covariance that is larger under control than under
/// treatment, so raising the inclusion threshold inflates the observed
/// benefit.
inline PopulationParams lps_analog_population() {
    PopulationParams pop;
    pop.mu_x = std::log(20.0);
    pop.sigma_x = 0.6;
    pop.control = {3.0, 0.6, 0.6};
    pop.treatment = {2.8, 0.6, 0.2};
    return pop;
}

}  // namespace sice
