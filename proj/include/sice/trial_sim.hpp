#pragma once

// Monte Carlo engine for selection-then-randomization trials.
//
// Every replicate i of a run draws from base_rng.child(i), and every grid row
// r from base_rng.child(r), so results are identical for any thread count.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sice/analysis.hpp"
#include "sice/cohen_ml.hpp"
#include "sice/errors.hpp"
#include "sice/parallel.hpp"
#include "sice/rng.hpp"
#include "sice/sampling.hpp"
#include "sice/sice_core.hpp"

namespace sice {

enum class SelectionMode {
    ExactN,      ///< draw candidates until exactly n_g pass the rule
    Oversample,  ///< draw round(n_g / P(pass)) candidates once, keep the passers
};

/// What each replicate estimates.
enum class Estimator {
    SelectedEffect,  ///< e_s from the selected patients (t-test or ANCOVA)
    CohenML,         ///< e_o from the selected patients via Cohen ML
    Unselected,      ///< e_o from n_g unselected patients per arm (reference analysis)
};

inline const char* selection_mode_name(SelectionMode m) { return m == SelectionMode::ExactN ? "exact_n" : "oversample"; }

inline const char* estimator_name(Estimator e) {
    switch (e) {
        case Estimator::SelectedEffect: return "selected_effect";
        case Estimator::CohenML: return "cohen_ml";
        case Estimator::Unselected: return "unselected";
    }
    return "?";
}

struct Scenario {
    PopulationParams pop;
    SelectionRule rule;
    std::size_t n_c = 1000;
    std::size_t n_t = 1000;
    Method analysis = Method::Ancova;  ///< TTest or Ancova; used by SelectedEffect and Unselected
    SelectionMode selection_mode = SelectionMode::ExactN;
    Estimator estimator = Estimator::SelectedEffect;
    double alpha = 0.05;
    CohenOptions cohen;

    void validate() const {
        pop.validate();
        rule.validate();
        if (n_c < 2 || n_t < 2) throw DomainError("scenario: per-arm counts must be at least 2");
        if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("scenario: alpha must lie in (0, 1)");
        if (analysis == Method::CohenML) throw DomainError("scenario: analysis must be ttest or ancova");
    }

    std::size_t target(Arm g) const { return g == Arm::Control ? n_c : n_t; }
};

struct SimulatedTrial {
    std::vector<Observation> records;
    std::size_t n_control = 0;
    std::size_t n_treatment = 0;
    std::size_t candidates_control = 0;
    std::size_t candidates_treatment = 0;
};

inline constexpr double kMinAcceptance = 1e-6;

/// Probability that one candidate passes the rule.
inline double acceptance_probability(const PopulationParams& pop, const SelectionRule& rule) {
    const double z = (rule.threshold - pop.mu_x) / pop.sigma_x;
    return rule.direction == Direction::GreaterThan ? pop.family.sf(z) : pop.family.cdf(z);
}

/// Candidate count per arm in Oversample mode: round(n_g / P(pass)).
inline std::size_t oversample_candidates(std::size_t n_g, double acceptance) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n_g) / acceptance));
}

inline SimulatedTrial simulate_trial(const Scenario& scenario, const RngStream& rng) {
    scenario.validate();
    const double accept = acceptance_probability(scenario.pop, scenario.rule);
    if (!(accept >= kMinAcceptance))
        throw InfeasibleSelection("selection keeps a fraction " + std::to_string(accept)
                                  + " of candidates, below the 1e-6 floor");
    Engine engine = rng.engine();
    SimulatedTrial trial;
    trial.records.reserve(scenario.n_c + scenario.n_t);
    for (Arm g : {Arm::Control, Arm::Treatment}) {
        BivariateSampler sampler(scenario.pop.bivariate(g), scenario.pop.family);
        const std::size_t target = scenario.target(g);
        std::size_t kept = 0;
        std::size_t drawn = 0;
        if (scenario.selection_mode == SelectionMode::ExactN) {
            while (kept < target) {
                const Pair p = sampler.draw(engine);
                ++drawn;
                if (scenario.rule.keeps(p.x)) {
                    trial.records.push_back({p.x, p.y, g});
                    ++kept;
                }
            }
        } else {
            drawn = oversample_candidates(target, accept);
            for (std::size_t i = 0; i < drawn; ++i) {
                const Pair p = sampler.draw(engine);
                if (scenario.rule.keeps(p.x)) {
                    trial.records.push_back({p.x, p.y, g});
                    ++kept;
                }
            }
        }
        (g == Arm::Control ? trial.n_control : trial.n_treatment) = kept;
        (g == Arm::Control ? trial.candidates_control : trial.candidates_treatment) = drawn;
    }
    return trial;
}

/// n_c and n_t patients per arm with no selection applied.
inline SimulatedTrial simulate_unselected(const Scenario& scenario, const RngStream& rng) {
    scenario.validate();
    Engine engine = rng.engine();
    SimulatedTrial trial;
    for (Arm g : {Arm::Control, Arm::Treatment}) {
        BivariateSampler sampler(scenario.pop.bivariate(g), scenario.pop.family);
        const std::size_t target = scenario.target(g);
        for (std::size_t i = 0; i < target; ++i) {
            const Pair p = sampler.draw(engine);
            trial.records.push_back({p.x, p.y, g});
        }
        (g == Arm::Control ? trial.n_control : trial.n_treatment) = target;
        (g == Arm::Control ? trial.candidates_control : trial.candidates_treatment) = target;
    }
    return trial;
}

inline EffectEstimate analyze_trial(const SimulatedTrial& trial, Method analysis, double alpha) {
    return analysis == Method::TTest ? welch_t_test(trial.records, alpha) : ancova_fit(trial.records, alpha);
}

/// Result of one replicate. Failed replicates carry the error text.
struct ReplicateOutcome {
    bool ok = false;
    double estimate = std::numeric_limits<double>::quiet_NaN();
    double std_error = std::numeric_limits<double>::quiet_NaN();
    double p_vs_e_o = std::numeric_limits<double>::quiet_NaN();   ///< H0: effect = e_o
    double p_vs_zero = std::numeric_limits<double>::quiet_NaN();  ///< H0: effect = 0
    bool no_valid_root = false;
    std::string error;
};

inline ReplicateOutcome run_one_replicate(const Scenario& scenario, const RngStream& rng) {
    ReplicateOutcome out;
    const double e_o = scenario.pop.e_o();
    EffectEstimate est;
    if (scenario.estimator == Estimator::Unselected) {
        est = analyze_trial(simulate_unselected(scenario, rng), scenario.analysis, scenario.alpha);
    } else {
        const SimulatedTrial trial = simulate_trial(scenario, rng.child(0));
        if (scenario.estimator == Estimator::SelectedEffect) {
            est = analyze_trial(trial, scenario.analysis, scenario.alpha);
        } else {
            est = cohen_ml_effect(trial.records, scenario.rule, scenario.cohen, rng.child(1), scenario.alpha)
                      .as_estimate();
        }
    }
    out.ok = true;
    out.estimate = est.estimate;
    out.std_error = est.std_error;
    out.p_vs_e_o = est.p_value_against(e_o);
    out.p_vs_zero = est.p_value_against(0.0);
    return out;
}

enum class FailurePolicy { Throw, Count };

/// Runs n_reps replicates on substreams base_rng.child(i).
inline std::vector<ReplicateOutcome> replicate_outcomes(const Scenario& scenario, std::size_t n_reps,
                                                        const RngStream& base_rng,
                                                        FailurePolicy policy = FailurePolicy::Throw,
                                                        unsigned threads = 0) {
    if (n_reps < 1) throw DomainError("run_replicates: n_reps must be at least 1");
    scenario.validate();
    std::vector<ReplicateOutcome> outcomes(n_reps);
    parallel_for(n_reps, resolve_threads(threads), [&](std::size_t i) {
        try {
            outcomes[i] = run_one_replicate(scenario, base_rng.child(i));
        } catch (const NoValidRoot& e) {
            if (policy == FailurePolicy::Throw) throw ReplicateError(i, e.what());
            outcomes[i].no_valid_root = true;
            outcomes[i].error = e.what();
        } catch (const Error& e) {
            if (policy == FailurePolicy::Throw) throw ReplicateError(i, e.what());
            outcomes[i].error = e.what();
        }
    });
    return outcomes;
}

/// Reduction of a replicate run. All rates are over successful replicates.
struct ReplicateSummary {
    std::size_t n_reps = 0;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    std::size_t n_no_root = 0;
    double mean_estimate = 0.0;       ///< mean of e_s-hat (or e_o-hat for Cohen ML / Unselected)
    /// mean estimate minus (mu_t - mu_c). For SelectedEffect this is the
    /// simulation estimate of -E_SICE, i.e. e_s - e_o in expectation.
    double e_sice_hat = 0.0;
    double pr_significant = 0.0;      ///< fraction rejecting H0: effect = e_o
    double empirical_variance = 0.0;  ///< n - 1 denominator
    double bias = 0.0;                ///< mean estimate minus e_o
    double bias_se = 0.0;             ///< empirical SD / sqrt(n_ok)
    double bias_p = 1.0;              ///< one-sample t-test of estimate - e_o
    double power = 0.0;               ///< fraction rejecting H0: effect = 0
};

inline ReplicateSummary summarize(const std::vector<ReplicateOutcome>& outcomes, double e_o, double alpha) {
    ReplicateSummary s;
    s.n_reps = outcomes.size();
    double mean = 0.0, m2 = 0.0;
    std::size_t sig = 0, pow = 0;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++s.n_failed;
            if (o.no_valid_root) ++s.n_no_root;
            continue;
        }
        ++s.n_ok;
        const double delta = o.estimate - mean;
        mean += delta / static_cast<double>(s.n_ok);
        m2 += delta * (o.estimate - mean);
        if (o.p_vs_e_o < alpha) ++sig;
        if (o.p_vs_zero < alpha) ++pow;
    }
    if (s.n_ok == 0) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        s.mean_estimate = s.e_sice_hat = s.pr_significant = s.empirical_variance = nan;
        s.bias = s.bias_se = s.bias_p = s.power = nan;
        return s;
    }
    const double n = static_cast<double>(s.n_ok);
    s.mean_estimate = mean;
    s.e_sice_hat = mean - e_o;
    s.bias = mean - e_o;
    s.pr_significant = static_cast<double>(sig) / n;
    s.power = static_cast<double>(pow) / n;
    if (s.n_ok >= 2) {
        s.empirical_variance = m2 / (n - 1.0);
        s.bias_se = std::sqrt(s.empirical_variance / n);
        s.bias_p = s.bias_se > 0.0 ? t_two_sided_p(s.bias / s.bias_se, n - 1.0) : (s.bias == 0.0 ? 1.0 : 0.0);
    } else {
        s.empirical_variance = s.bias_se = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
}

inline ReplicateSummary run_replicates(const Scenario& scenario, std::size_t n_reps, const RngStream& base_rng,
                                       FailurePolicy policy = FailurePolicy::Throw, unsigned threads = 0) {
    return summarize(replicate_outcomes(scenario, n_reps, base_rng, policy, threads), scenario.pop.e_o(),
                     scenario.alpha);
}

//---------------------------------------------------------------------------//
// Parameter grids
//---------------------------------------------------------------------------//

/// Cross product of scenario parameters. Baseline marginal (mu_x, sigma_x) and
/// the control arm are fixed; thresholds are set from exclusion fractions
/// through the family quantile: a = mu_x + sigma_x q(p).
struct GridSpec {
    std::vector<DistributionFamily> families{DistributionFamily::normal()};
    double mu_x = 0.0;
    double sigma_x = 1.0;
    ArmParams control{0.0, 1.0, 0.2};
    std::vector<double> mu_t{0.0};
    std::vector<double> sigma_t{0.5, 0.85, 1.0, 1.15, 1.5};
    std::vector<double> rho_t{0.1, 0.2, 0.3, 0.6};
    std::vector<double> exclusion{0.5};
    std::vector<std::size_t> n_g{1500};
    Direction direction = Direction::GreaterThan;
    Method analysis = Method::Ancova;
    SelectionMode selection_mode = SelectionMode::ExactN;
    double alpha = 0.05;
    CohenOptions cohen;

    std::size_t size() const {
        return families.size() * mu_t.size() * sigma_t.size() * rho_t.size() * exclusion.size() * n_g.size();
    }
};

struct GridRow {
    std::size_t index = 0;
    DistributionFamily family = DistributionFamily::normal();
    double mu_t = 0.0;
    double sigma_t = 0.0;
    double rho_t = 0.0;
    double exclusion = 0.0;
    double threshold = 0.0;
    std::size_t n_g = 0;
    double loading_diff = 0.0;  ///< rho_t sigma_t - rho_c sigma_c
    double analytic_e_sice = std::numeric_limits<double>::quiet_NaN();  ///< normal family only
    Scenario scenario;
    ReplicateSummary summary;
};

/// Rows of the cross product in a fixed nesting order:
/// family, mu_t, sigma_t, rho_t, exclusion, n_g (innermost).
inline std::vector<GridRow> expand_grid(const GridSpec& spec, Estimator estimator) {
    if (spec.size() == 0) throw DomainError("grid: every parameter list must be nonempty");
    std::vector<GridRow> rows;
    rows.reserve(spec.size());
    for (const auto& fam : spec.families)
        for (double mu_t : spec.mu_t)
            for (double sigma_t : spec.sigma_t)
                for (double rho_t : spec.rho_t)
                    for (double excl : spec.exclusion)
                        for (std::size_t n : spec.n_g) {
                            GridRow row;
                            row.index = rows.size();
                            row.family = fam;
                            row.mu_t = mu_t;
                            row.sigma_t = sigma_t;
                            row.rho_t = rho_t;
                            row.exclusion = excl;
                            row.n_g = n;
                            const double q = fam.quantile(excl);
                            row.threshold = spec.direction == Direction::GreaterThan
                                                ? spec.mu_x + spec.sigma_x * q
                                                : spec.mu_x - spec.sigma_x * q;
                            Scenario& s = row.scenario;
                            s.pop.mu_x = spec.mu_x;
                            s.pop.sigma_x = spec.sigma_x;
                            s.pop.control = spec.control;
                            s.pop.treatment = {mu_t, sigma_t, rho_t};
                            s.pop.family = fam;
                            s.rule = {spec.direction, row.threshold, false};
                            s.n_c = s.n_t = n;
                            s.analysis = spec.analysis;
                            s.selection_mode = spec.selection_mode;
                            s.estimator = estimator;
                            s.alpha = spec.alpha;
                            s.cohen = spec.cohen;
                            s.validate();
                            row.loading_diff = s.pop.treatment.loading() - s.pop.control.loading();
                            if (fam.is_normal()) row.analytic_e_sice = sice_effect(s.pop, s.rule);
                            rows.push_back(std::move(row));
                        }
    return rows;
}

/// Runs every row with n_reps replicates. Row r uses base_rng.child(r);
/// failures inside a row are counted in its summary instead of aborting.
inline std::vector<GridRow> run_grid(const GridSpec& spec, std::size_t n_reps, Estimator estimator,
                                     const RngStream& base_rng, unsigned threads = 0) {
    std::vector<GridRow> rows = expand_grid(spec, estimator);
    for (auto& row : rows)
        row.summary = run_replicates(row.scenario, n_reps, base_rng.child(row.index), FailurePolicy::Count, threads);
    return rows;
}

namespace presets {

/// Three families, five sigma_t, four rho_t, three exclusion fractions at N_g = 1500.
inline GridSpec table1() {
    GridSpec g;
    g.families = {DistributionFamily::student_t(3), DistributionFamily::student_t(8), DistributionFamily::normal()};
    g.exclusion = {0.25, 0.5, 0.75};
    g.n_g = {1500};
    return g;
}

/// Normal family at the median threshold over seven trial sizes.
inline GridSpec table2() {
    GridSpec g;
    g.exclusion = {0.5};
    g.n_g = {20, 50, 150, 500, 1000, 2000, 5000};
    return g;
}

/// Cohen ML bias/power grid: three mu_t, two thresholds, four trial sizes.
inline GridSpec table3() {
    GridSpec g;
    g.mu_t = {0.0, 0.15, 0.5};
    g.exclusion = {0.5, 0.25};
    g.n_g = {250, 500, 1000, 2000};
    return g;
}

/// Heavy-tail robustness grid: t(8) at N_g = 1000.
inline GridSpec table4() {
    GridSpec g;
    g.families = {DistributionFamily::student_t(8)};
    g.mu_t = {0.0, 0.15, 0.5};
    g.exclusion = {0.5, 0.25};
    g.n_g = {1000};
    return g;
}

}  // namespace presets

}  // namespace sice
