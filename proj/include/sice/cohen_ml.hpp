#pragma once

// Cohen's maximum-likelihood estimator for singly truncated bivariate normal
// samples. Each arm is fitted from its selected (x', y') values alone; the
// fitted untruncated endpoint means give the pre-selection treatment effect.

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <type_traits>
#include <vector>

#include "sice/analysis.hpp"
#include "sice/errors.hpp"
#include "sice/rng.hpp"
#include "sice/sice_core.hpp"
#include "sice/stat_kernels.hpp"

namespace sice {

/// Selected baselines and endpoints of one arm, with the rule that selected them.
struct TruncatedSample {
    std::vector<double> x;
    std::vector<double> y;
    SelectionRule rule;
    Arm arm = Arm::Control;

    void validate() const {
        if (x.size() != y.size()) throw DomainError("truncated sample: x and y lengths differ");
        if (x.size() < 3) throw DomainError("truncated sample: need at least 3 subjects");
        rule.validate();
        for (double v : x) {
            const bool kept = rule.direction == Direction::GreaterThan ? v >= rule.threshold : v <= rule.threshold;
            if (!kept) throw DomainError("truncated sample: baseline on the excluded side of the threshold");
        }
    }
};

struct TruncatedMoments {
    double nu1;  ///< mean of (x - a)
    double nu2;  ///< mean of (x - a)^2
};

/// First two moments of the excess over the threshold, for a sample
/// truncated below at a.
inline TruncatedMoments truncated_sample_moments(std::span<const double> x, double a) {
    if (x.size() < 3) throw DomainError("truncated_sample_moments: need at least 3 values");
    double s1 = 0.0, s2 = 0.0;
    for (double v : x) {
        if (v < a) throw DomainError("truncated_sample_moments: value below the truncation point");
        const double d = v - a;
        s1 += d;
        s2 += d * d;
    }
    const double n = static_cast<double>(x.size());
    if (!(s1 > 0.0)) throw DegenerateInput("truncated_sample_moments: every value sits on the threshold");
    return {s1 / n, s2 / n};
}

/// Left side of the estimating equation before the moment ratio is subtracted:
/// [1 - z (S(z) - z)] / (S(z) - z)^2. Increasing in z, bounded in (1, 2).
/// Both subtractions cancel for large z, so narrower types work in long double.
template <std::floating_point T>
T estimating_equation_lhs(T z) {
    using W = std::conditional_t<(sizeof(T) < sizeof(long double)), long double, T>;
    const W w = z;
    const W excess = mills_excess(w);
    return static_cast<T>((W(1) - w * excess) / (excess * excess));
}

inline constexpr double kRootLo = -12.0;
inline constexpr double kRootHi = 12.0;

/// Solves [1 - z(S(z) - z)] / (S(z) - z)^2 = nu2 / nu1^2 for z on [-12, 12]:
/// sign-change scan over a 0.25 grid, then bisection to 1e-12.
inline double solve_estimating_equation(double nu1, double nu2) {
    if (!(nu1 > 0.0) || !(nu2 > 0.0)) throw DomainError("solve_estimating_equation: moments must be positive");
    const double ratio = nu2 / (nu1 * nu1);
    auto h = [ratio](double z) { return estimating_equation_lhs(z) - ratio; };
    const double lo_val = estimating_equation_lhs(kRootLo);
    const double hi_val = estimating_equation_lhs(kRootHi);
    if (!(ratio >= lo_val && ratio <= hi_val)) throw NoValidRoot(ratio, lo_val, hi_val);
    double left = kRootLo;
    double h_left = h(left);
    if (h_left == 0.0) return left;
    for (int k = 1; k <= 96; ++k) {
        const double right = kRootLo + 0.25 * k;
        const double h_right = h(right);
        if (h_right == 0.0) return right;
        if ((h_left < 0.0) != (h_right < 0.0)) return detail::bisect(h, left, right, 1e-12);
        left = right;
        h_left = h_right;
    }
    throw NoValidRoot(ratio, lo_val, hi_val);
}

/// What to plug in for the endpoint variance sigma_g^2 in the asymptotic
/// variances of alpha-hat and beta-hat.
enum class EndpointVariance {
    Marginal,  ///< residual variance + beta^2 sigma_x^2: the fitted untruncated variance of y
    Residual,  ///< residual variance of y' on x' only
};

struct CohenOptions {
    std::size_t mc_draws = 2000;
    EndpointVariance endpoint_variance = EndpointVariance::Marginal;
};

/// Per-arm fit. Location quantities (mu_x_hat, x_bar, beta_hat) are on the
/// original scale; z_hat is the standardized truncation point of the
/// lower-truncated form (reflected for LessThan rules).
struct CohenFit {
    std::size_t n = 0;
    double z_hat = 0.0;
    double sigma_x_hat = 0.0;
    double mu_x_hat = 0.0;
    double x_bar = 0.0;
    double alpha_hat = 0.0;  ///< selected endpoint mean
    double beta_hat = 0.0;   ///< regression slope of y' on x'
    double m_y_hat = 0.0;    ///< fitted pre-selection endpoint mean
    double sigma_y2_plugin = 0.0;
    double var_alpha = 0.0;
    double var_beta = 0.0;
    double var_mu_x = 0.0;
    double var_m_y = 0.0;
    Arm arm = Arm::Control;
};

/// Monte Carlo variance of m_y = alpha + (mu_x - x_bar) beta with alpha, beta
/// and mu_x drawn as independent normals around the fit.
inline double mc_variance_m_y(const CohenFit& fit, std::size_t n_draws, const RngStream& rng) {
    if (n_draws < 1000) throw DomainError("mc_variance_m_y: need at least 1000 draws");
    if (!std::isfinite(fit.var_alpha) || !std::isfinite(fit.var_beta) || !std::isfinite(fit.var_mu_x))
        throw DomainError("mc_variance_m_y: fit variances must be finite");
    Engine engine = rng.engine();
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sa = std::sqrt(fit.var_alpha);
    const double sb = std::sqrt(fit.var_beta);
    const double sm = std::sqrt(fit.var_mu_x);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n_draws; ++i) {
        const double a = fit.alpha_hat + sa * normal(engine);
        const double b = fit.beta_hat + sb * normal(engine);
        const double m = fit.mu_x_hat + sm * normal(engine);
        const double value = a + (m - fit.x_bar) * b;
        const double delta = value - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (value - mean);
    }
    return m2 / static_cast<double>(n_draws - 1);
}

/// Fits one arm: solve for z_hat, then sigma_x_hat = nu1 / (S(z) - z),
/// mu_x_hat = a - sigma_x_hat z_hat, and the regression-adjusted endpoint mean.
inline CohenFit fit_group(const TruncatedSample& sample, const CohenOptions& options, const RngStream& rng) {
    sample.validate();
    const bool reflect = sample.rule.direction == Direction::LessThan;
    const double sign = reflect ? -1.0 : 1.0;
    const double a = sign * sample.rule.threshold;
    std::vector<double> x(sample.x.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = sign * sample.x[i];

    const auto moments = truncated_sample_moments(x, a);
    const double z = solve_estimating_equation(moments.nu1, moments.nu2);
    const double sigma_x = moments.nu1 / mills_excess(z);
    const double mu_x = a - sigma_x * z;

    const double n = static_cast<double>(x.size());
    double x_bar = 0.0, y_bar = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x_bar += x[i];
        y_bar += sample.y[i];
    }
    x_bar /= n;
    y_bar /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - x_bar;
        const double dy = sample.y[i] - y_bar;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0)) throw DegenerateInput("fit_group: baseline sample has zero variance");
    // n-denominator moments: beta = r s(y) / s(x) = cov / var
    const double beta = sxy / sxx;
    const double resid_var = std::max(0.0, (syy - beta * sxy) / n);

    CohenFit fit;
    fit.arm = sample.arm;
    fit.n = x.size();
    fit.z_hat = z;
    fit.sigma_x_hat = sigma_x;
    fit.alpha_hat = y_bar;
    fit.sigma_y2_plugin =
        options.endpoint_variance == EndpointVariance::Marginal ? resid_var + beta * beta * sigma_x * sigma_x
                                                                : resid_var;
    const auto f = truncated_moment_factors(z);
    fit.var_alpha = fit.sigma_y2_plugin / n;
    fit.var_beta = fit.sigma_y2_plugin / (sigma_x * sigma_x * n * f.phi11);
    fit.var_mu_x = sigma_x * sigma_x * f.phi22 / (n * f.determinant());
    // back to the original orientation; m_y is invariant under the reflection
    fit.mu_x_hat = sign * mu_x;
    fit.x_bar = sign * x_bar;
    fit.beta_hat = sign * beta;
    fit.m_y_hat = fit.alpha_hat + (fit.mu_x_hat - fit.x_bar) * fit.beta_hat;
    fit.var_m_y = mc_variance_m_y(fit, options.mc_draws, rng);
    return fit;
}

/// Pre-selection effect m_y(treatment) - m_y(control) with a normal-approximation CI.
struct PreSelectionEffect {
    double e_o_hat = 0.0;
    double variance = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    CohenFit control;
    CohenFit treatment;

    double std_error() const { return std::sqrt(variance); }

    EffectEstimate as_estimate() const {
        EffectEstimate out;
        out.estimate = e_o_hat;
        out.std_error = std_error();
        out.method = Method::CohenML;
        out.p_value = out.p_value_against(0.0);
        out.ci_low = ci_low;
        out.ci_high = ci_high;
        return out;
    }
};

inline PreSelectionEffect estimate_pre_selection_effect(const CohenFit& fit_c, const CohenFit& fit_t,
                                                        double alpha = 0.05) {
    PreSelectionEffect out;
    out.e_o_hat = fit_t.m_y_hat - fit_c.m_y_hat;
    out.variance = fit_t.var_m_y + fit_c.var_m_y;
    const double half = normal_critical(alpha) * std::sqrt(out.variance);
    out.ci_low = out.e_o_hat - half;
    out.ci_high = out.e_o_hat + half;
    out.control = fit_c;
    out.treatment = fit_t;
    return out;
}

/// Splits selected two-arm records and fits both arms. The Monte Carlo
/// variance of each arm runs on its own child stream of `rng`.
inline PreSelectionEffect cohen_ml_effect(std::span<const Observation> records, const SelectionRule& rule,
                                          const CohenOptions& options, const RngStream& rng,
                                          double alpha = 0.05) {
    TruncatedSample control{{}, {}, rule, Arm::Control};
    TruncatedSample treatment{{}, {}, rule, Arm::Treatment};
    for (const auto& r : records) {
        auto& s = r.arm == Arm::Control ? control : treatment;
        s.x.push_back(r.x);
        s.y.push_back(r.y);
    }
    const CohenFit fc = fit_group(control, options, rng.child(0));
    const CohenFit ft = fit_group(treatment, options, rng.child(1));
    return estimate_pre_selection_effect(fc, ft, alpha);
}

}  // namespace sice
