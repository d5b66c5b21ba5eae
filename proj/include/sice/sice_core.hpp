#pragma once

// Closed-form analytics for a two-arm trial whose baseline x and endpoint y
// are bivariate normal in each arm and whose patients are admitted by a
// one-sided threshold on x.

#include <cmath>
#include <cstddef>
#include <string>

#include "sice/errors.hpp"
#include "sice/sampling.hpp"
#include "sice/stat_kernels.hpp"

namespace sice {

enum class Arm { Control, Treatment };

inline const char* arm_name(Arm arm) { return arm == Arm::Control ? "control" : "treatment"; }

/// Endpoint law of one arm: mean, SD (or t scale) and correlation with x.
struct ArmParams {
    double mu = 0.0;
    double sigma = 1.0;
    double rho = 0.0;

    /// Covariance of x and y divided by sigma_x.
    double loading() const { return rho * sigma; }
};

/// Pre-selection population of both arms. The baseline x has the same
/// marginal (mu_x, sigma_x) in each arm.
struct PopulationParams {
    double mu_x = 0.0;
    double sigma_x = 1.0;
    ArmParams control;
    ArmParams treatment;
    DistributionFamily family = DistributionFamily::normal();

    const ArmParams& arm(Arm g) const { return g == Arm::Control ? control : treatment; }

    BivariateParams bivariate(Arm g) const {
        const ArmParams& p = arm(g);
        return {mu_x, p.mu, sigma_x, p.sigma, p.rho};
    }

    /// Treatment effect over the pre-selection population.
    double e_o() const { return treatment.mu - control.mu; }

    void validate() const {
        bivariate(Arm::Control).validate();
        bivariate(Arm::Treatment).validate();
    }
};

enum class Direction { GreaterThan, LessThan };

inline const char* direction_name(Direction d) { return d == Direction::GreaterThan ? "gt" : "lt"; }

/// One-sided inclusion criterion on the baseline. With `inclusive` the
/// boundary value itself is kept (x >= a or x <= a).
struct SelectionRule {
    Direction direction = Direction::GreaterThan;
    double threshold = 0.0;
    bool inclusive = false;

    bool keeps(double x) const {
        if (direction == Direction::GreaterThan) return inclusive ? x >= threshold : x > threshold;
        return inclusive ? x <= threshold : x < threshold;
    }

    void validate() const {
        if (!std::isfinite(threshold)) throw DomainError("selection threshold must be finite");
    }
};

/// Closed-form summary of a population under a selection rule.
struct SiceAnalytics {
    double z = 0.0;               ///< (a - mu_x) / sigma_x
    double e_o = 0.0;             ///< effect before selection
    double mean_control = 0.0;    ///< E[y_c | selected]
    double mean_treatment = 0.0;  ///< E[y_t | selected]
    double e_s = 0.0;             ///< effect in the selected population
    double e_sice = 0.0;          ///< e_o - e_s
    double var_e_s_hat = 0.0;     ///< sampling variance of the difference of selected means
    double var_e_o_hat = 0.0;     ///< the same without selection
    double rtm_control = 0.0;     ///< standardized RTM shift, control
    double rtm_treatment = 0.0;   ///< standardized RTM shift, treatment
};

namespace detail {

// Moments of the standardized baseline z1 inside the selected region:
// E[z1 | sel] = mean, V[z1 | sel] = variance. The LessThan rule is the
// reflection x -> -x of the GreaterThan rule.
struct SelectedBaseline {
    double z;
    double mean;
    double variance;
};

inline SelectedBaseline selected_baseline(const PopulationParams& pop, const SelectionRule& rule) {
    if (!pop.family.is_normal())
        throw UnsupportedClosedForm("closed-form SICE analytics exist only for the normal family; "
                                    "use Monte Carlo simulation for " + pop.family.name());
    pop.validate();
    rule.validate();
    const double z = (rule.threshold - pop.mu_x) / pop.sigma_x;
    const double upper_z = rule.direction == Direction::GreaterThan ? z : -z;
    const double sign = rule.direction == Direction::GreaterThan ? 1.0 : -1.0;
    const auto factors = truncated_moment_factors(upper_z);
    return {z, sign * mills_ratio(upper_z), factors.var_factor};
}

inline void check_counts(std::size_t n_c, std::size_t n_t) {
    if (n_c < 2 || n_t < 2) throw DomainError("per-arm counts must be at least 2");
}

}  // namespace detail

/// E_SICE = e_o - e_s. For x > a this is S(z) (rho_c sigma_c - rho_t sigma_t).
inline double sice_effect(const PopulationParams& pop, const SelectionRule& rule) {
    const auto base = detail::selected_baseline(pop, rule);
    return base.mean * (pop.control.loading() - pop.treatment.loading());
}

struct SelectedEffect {
    double mean_control;
    double mean_treatment;
    double e_s;
};

/// Arm means and effect among selected patients: E[y_g | sel] = mu_g + rho_g sigma_g E[z1 | sel].
inline SelectedEffect selected_effect(const PopulationParams& pop, const SelectionRule& rule) {
    const auto base = detail::selected_baseline(pop, rule);
    const double mc = pop.control.mu + pop.control.loading() * base.mean;
    const double mt = pop.treatment.mu + pop.treatment.loading() * base.mean;
    return {mc, mt, mt - mc};
}

struct EstimatorMoments {
    double mean_e_s_hat;
    double var_e_s_hat;
    double var_e_o_hat;
};

/// Mean and variance of the difference of selected sample means with n_c, n_t
/// patients after selection, plus the variance the same design has without selection.
inline EstimatorMoments estimator_moments(const PopulationParams& pop, const SelectionRule& rule,
                                          std::size_t n_c, std::size_t n_t) {
    detail::check_counts(n_c, n_t);
    const auto base = detail::selected_baseline(pop, rule);
    const auto& c = pop.control;
    const auto& t = pop.treatment;
    const double nc = static_cast<double>(n_c);
    const double nt = static_cast<double>(n_t);
    const double var_o = t.sigma * t.sigma / nt + c.sigma * c.sigma / nc;
    // 1 - var_factor is S(z)(S(z) - z) for the reflected truncation point.
    const double shrink = 1.0 - base.variance;
    const double var_s = var_o - shrink * (t.loading() * t.loading() / nt + c.loading() * c.loading() / nc);
    const double mean = pop.e_o() - base.mean * (c.loading() - t.loading());
    return {mean, var_s, var_o};
}

struct RtmEffects {
    double control;          ///< (E[y_c | sel] - mu_c) / sigma_c
    double treatment;        ///< (E[y_t | sel] - mu_t) / sigma_t
    double raw_difference;   ///< sigma_c * control - sigma_t * treatment
};

/// Regression-to-the-mean shifts of each arm. Their unstandardized
/// difference is the SICE effect.
inline RtmEffects rtm_effects(const PopulationParams& pop, const SelectionRule& rule) {
    const auto base = detail::selected_baseline(pop, rule);
    const double rc = pop.control.rho * base.mean;
    const double rt = pop.treatment.rho * base.mean;
    return {rc, rt, pop.control.sigma * rc - pop.treatment.sigma * rt};
}

/// Large-sample probability that a two-sided level-alpha z-test of
/// H0: effect = h0_effect rejects on the selected population.
/// Uses the normal approximation; for fewer than ~50 patients per arm the
/// t-based test is noticeably more conservative.
inline double significance_probability(const PopulationParams& pop, const SelectionRule& rule,
                                       std::size_t n_c, std::size_t n_t, double alpha, double h0_effect) {
    const double crit = normal_critical(alpha);
    const auto mom = estimator_moments(pop, rule, n_c, n_t);
    const double shift = std::abs(mom.mean_e_s_hat - h0_effect) / std::sqrt(mom.var_e_s_hat);
    return normal_cdf(-crit + shift) + normal_cdf(-crit - shift);
}

/// Everything above in one record.
inline SiceAnalytics analyze(const PopulationParams& pop, const SelectionRule& rule, std::size_t n_c,
                             std::size_t n_t) {
    const auto base = detail::selected_baseline(pop, rule);
    const auto sel = selected_effect(pop, rule);
    const auto mom = estimator_moments(pop, rule, n_c, n_t);
    const auto rtm = rtm_effects(pop, rule);
    SiceAnalytics out;
    out.z = base.z;
    out.e_o = pop.e_o();
    out.mean_control = sel.mean_control;
    out.mean_treatment = sel.mean_treatment;
    out.e_s = sel.e_s;
    out.e_sice = out.e_o - out.e_s;
    out.var_e_s_hat = mom.var_e_s_hat;
    out.var_e_o_hat = mom.var_e_o_hat;
    out.rtm_control = rtm.control;
    out.rtm_treatment = rtm.treatment;
    return out;
}

}  // namespace sice
