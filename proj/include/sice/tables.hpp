#pragma once

// Column contracts of every emitted table. Golden-file tests pin these
// headers; append new columns at the end.

#include <string>
#include <vector>

#include "sice/cohen_ml.hpp"
#include "sice/dataset.hpp"
#include "sice/report.hpp"
#include "sice/sice_core.hpp"
#include "sice/trial_sim.hpp"

namespace sice::report {

inline Table analytic_table(const PopulationParams& pop, const SelectionRule& rule, std::size_t n_c,
                            std::size_t n_t, double alpha, double h0) {
    Table t{"analytic",
            {"mu_x", "sigma_x", "mu_c", "sigma_c", "rho_c", "mu_t", "sigma_t", "rho_t", "direction", "threshold", "z",
             "n_c", "n_t", "e_o", "mean_control_selected", "mean_treatment_selected", "e_s", "e_sice", "var_e_s_hat",
             "sd_e_s_hat", "var_e_o_hat", "rtm_control", "rtm_treatment", "rtm_raw_difference", "alpha", "h0_effect",
             "significance_probability"},
            {}};
    const auto a = analyze(pop, rule, n_c, n_t);
    const auto rtm = rtm_effects(pop, rule);
    t.add_row({num(pop.mu_x), num(pop.sigma_x), num(pop.control.mu), num(pop.control.sigma), num(pop.control.rho),
               num(pop.treatment.mu), num(pop.treatment.sigma), num(pop.treatment.rho),
               text(direction_name(rule.direction)), num(rule.threshold), num(a.z), count(n_c), count(n_t), num(a.e_o),
               num(a.mean_control), num(a.mean_treatment), num(a.e_s), num(a.e_sice), num(a.var_e_s_hat),
               num(std::sqrt(a.var_e_s_hat)), num(a.var_e_o_hat), num(a.rtm_control), num(a.rtm_treatment),
               num(rtm.raw_difference), num(alpha), num(h0),
               num(significance_probability(pop, rule, n_c, n_t, alpha, h0))});
    return t;
}

inline const std::vector<std::string>& summary_columns() {
    static const std::vector<std::string> cols{
        "n_reps",     "n_ok",           "n_failed",    "n_no_root", "mean_estimate", "e_sice_hat",
        "pr_significant", "empirical_variance", "bias", "bias_se",   "bias_p",        "power"};
    return cols;
}

inline void append_summary(std::vector<Cell>& row, const ReplicateSummary& s) {
    row.insert(row.end(), {count(s.n_reps), count(s.n_ok), count(s.n_failed), count(s.n_no_root),
                           num(s.mean_estimate), num(s.e_sice_hat), num(s.pr_significant),
                           num(s.empirical_variance), num(s.bias), num(s.bias_se), num(s.bias_p), num(s.power)});
}

inline Table simulate_table(const Scenario& sc, const ReplicateSummary& s, std::uint64_t seed) {
    Table t{"simulate",
            {"seed", "family", "mu_x", "sigma_x", "mu_c", "sigma_c", "rho_c", "mu_t", "sigma_t", "rho_t", "direction",
             "threshold", "n_c", "n_t", "analysis", "selection_mode", "estimator", "alpha", "analytic_e_sice",
             "analytic_var_e_s_hat"},
            {}};
    t.columns.insert(t.columns.end(), summary_columns().begin(), summary_columns().end());
    double e_sice = std::nan(""), var = std::nan("");
    if (sc.pop.family.is_normal()) {
        e_sice = sice_effect(sc.pop, sc.rule);
        var = estimator_moments(sc.pop, sc.rule, sc.n_c, sc.n_t).var_e_s_hat;
    }
    std::vector<Cell> row{count(seed),
                          text(sc.pop.family.name()),
                          num(sc.pop.mu_x),
                          num(sc.pop.sigma_x),
                          num(sc.pop.control.mu),
                          num(sc.pop.control.sigma),
                          num(sc.pop.control.rho),
                          num(sc.pop.treatment.mu),
                          num(sc.pop.treatment.sigma),
                          num(sc.pop.treatment.rho),
                          text(direction_name(sc.rule.direction)),
                          num(sc.rule.threshold),
                          count(sc.n_c),
                          count(sc.n_t),
                          text(method_name(sc.analysis)),
                          text(selection_mode_name(sc.selection_mode)),
                          text(estimator_name(sc.estimator)),
                          num(sc.alpha),
                          num(e_sice),
                          num(var)};
    append_summary(row, s);
    t.add_row(std::move(row));
    return t;
}

inline Table replicates_table(const std::vector<ReplicateOutcome>& outcomes) {
    Table t{"replicates", {"replicate", "ok", "estimate", "std_error", "p_vs_e_o", "p_vs_zero", "error"}, {}};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        t.add_row({count(i), Cell{o.ok}, num(o.estimate), num(o.std_error), num(o.p_vs_e_o), num(o.p_vs_zero),
                   text(o.error)});
    }
    return t;
}

inline Table grid_table(const std::vector<GridRow>& rows, const std::string& name = "grid") {
    Table t{name,
            {"row", "family", "estimator", "analysis", "mu_c", "sigma_c", "rho_c", "mu_t", "sigma_t", "rho_t",
             "exclusion", "threshold", "n_g", "loading_diff", "analytic_e_sice"},
            {}};
    t.columns.insert(t.columns.end(), summary_columns().begin(), summary_columns().end());
    for (const auto& r : rows) {
        std::vector<Cell> row{count(r.index),
                              text(r.family.name()),
                              text(estimator_name(r.scenario.estimator)),
                              text(method_name(r.scenario.analysis)),
                              num(r.scenario.pop.control.mu),
                              num(r.scenario.pop.control.sigma),
                              num(r.scenario.pop.control.rho),
                              num(r.mu_t),
                              num(r.sigma_t),
                              num(r.rho_t),
                              num(r.exclusion),
                              num(r.threshold),
                              count(r.n_g),
                              num(r.loading_diff),
                              num(r.analytic_e_sice)};
        append_summary(row, r.summary);
        t.add_row(std::move(row));
    }
    return t;
}

inline Table sweep_table(const std::vector<ThresholdSweepRow>& rows) {
    Table t{"sweep",
            {"threshold", "n_control", "n_treatment", "feasible", "low_n", "method", "ok", "estimate", "std_error",
             "dof", "p_value", "ci_low", "ci_high", "percent_change", "error"},
            {}};
    for (const auto& r : rows)
        for (const auto& m : r.results) {
            t.add_row({r.threshold ? num(*r.threshold) : Cell{}, count(r.n_control), count(r.n_treatment),
                       Cell{r.feasible}, Cell{r.low_n}, text(method_name(m.method)), Cell{m.ok},
                       m.ok ? num(m.estimate.estimate) : Cell{}, m.ok ? num(m.estimate.std_error) : Cell{},
                       m.ok ? num(m.estimate.dof) : Cell{}, m.ok ? num(m.estimate.p_value) : Cell{},
                       m.ok ? num(m.estimate.ci_low) : Cell{}, m.ok ? num(m.estimate.ci_high) : Cell{},
                       num(m.percent_change), text(m.error)});
        }
    return t;
}

inline Table cohen_sweep_table(const CohenSweep& sweep) {
    Table t{"cohen_sweep",
            {"threshold", "n_control", "n_treatment", "status", "low_n", "e_o_hat", "std_error", "ci_low", "ci_high",
             "m_y_control", "m_y_treatment", "z_hat_control", "z_hat_treatment", "reference_estimate",
             "reference_ci_low", "reference_ci_high", "error"},
            {}};
    const auto& ref = sweep.reference;
    for (const auto& r : sweep.rows) {
        const bool ok = r.effect.has_value();
        t.add_row({num(r.threshold), count(r.n_control), count(r.n_treatment), text(cohen_status_name(r.status)),
                   Cell{r.low_n}, ok ? num(r.effect->e_o_hat) : Cell{}, ok ? num(r.effect->std_error()) : Cell{},
                   ok ? num(r.effect->ci_low) : Cell{}, ok ? num(r.effect->ci_high) : Cell{},
                   ok ? num(r.effect->control.m_y_hat) : Cell{}, ok ? num(r.effect->treatment.m_y_hat) : Cell{},
                   ok ? num(r.effect->control.z_hat) : Cell{}, ok ? num(r.effect->treatment.z_hat) : Cell{},
                   num(ref.estimate), num(ref.ci_low), num(ref.ci_high), text(r.error)});
    }
    return t;
}

inline Table cohen_fit_table(const PreSelectionEffect& e) {
    Table t{"cohen_fit",
            {"arm", "n", "z_hat", "sigma_x_hat", "mu_x_hat", "x_bar", "alpha_hat", "beta_hat", "m_y_hat",
             "sigma_y2_plugin", "var_alpha", "var_beta", "var_mu_x", "var_m_y"},
            {}};
    for (const CohenFit* f : {&e.control, &e.treatment})
        t.add_row({text(arm_name(f->arm)), count(f->n), num(f->z_hat), num(f->sigma_x_hat), num(f->mu_x_hat),
                   num(f->x_bar), num(f->alpha_hat), num(f->beta_hat), num(f->m_y_hat), num(f->sigma_y2_plugin),
                   num(f->var_alpha), num(f->var_beta), num(f->var_mu_x), num(f->var_m_y)});
    return t;
}

inline Table cohen_effect_table(const PreSelectionEffect& e) {
    Table t{"cohen_effect", {"e_o_hat", "variance", "std_error", "ci_low", "ci_high", "p_value"}, {}};
    t.add_row({num(e.e_o_hat), num(e.variance), num(e.std_error()), num(e.ci_low), num(e.ci_high),
               num(e.as_estimate().p_value)});
    return t;
}

}  // namespace sice::report
