#pragma once

// Effect estimators on observed two-arm data: the Welch two-sample t-test
// and ANCOVA (OLS of y on intercept, treatment indicator and baseline).

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sice/errors.hpp"
#include "sice/sice_core.hpp"
#include "sice/stat_kernels.hpp"

namespace sice {

enum class Method { TTest, Ancova, CohenML };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::TTest: return "ttest";
        case Method::Ancova: return "ancova";
        case Method::CohenML: return "cohen_ml";
    }
    return "?";
}

/// A point estimate of treatment minus control with its sampling summary.
/// dof is infinite for normal-approximation estimators.
struct EffectEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double dof = std::numeric_limits<double>::infinity();
    double p_value = 1.0;  ///< two-sided, against zero effect
    double ci_low = 0.0;
    double ci_high = 0.0;
    Method method = Method::TTest;

    /// Two-sided p-value against H0: effect = h0.
    double p_value_against(double h0) const {
        const double diff = estimate - h0;
        if (std_error == 0.0) return diff == 0.0 ? 1.0 : 0.0;
        const double stat = diff / std_error;
        return std::isinf(dof) ? z_two_sided_p(stat) : t_two_sided_p(stat, dof);
    }
};

namespace detail {

inline EffectEstimate finish_estimate(double estimate, double se, double dof, double alpha, Method method) {
    EffectEstimate out;
    out.estimate = estimate;
    out.std_error = se;
    out.dof = dof;
    out.method = method;
    out.p_value = out.p_value_against(0.0);
    const double crit = std::isinf(dof) ? normal_critical(alpha) : t_critical(alpha, dof);
    out.ci_low = estimate - crit * se;
    out.ci_high = estimate + crit * se;
    return out;
}

struct MeanVar {
    double mean;
    double var;  // n - 1 denominator
};

inline MeanVar mean_var(std::span<const double> v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, ss / static_cast<double>(v.size() - 1)};
}

}  // namespace detail

/// Welch unequal-variance two-sample t-test; estimate = mean(treatment) - mean(control).
inline EffectEstimate welch_t_test(std::span<const double> y_control, std::span<const double> y_treatment,
                                   double alpha = 0.05) {
    if (y_control.size() < 2 || y_treatment.size() < 2)
        throw DegenerateInput("welch_t_test: each arm needs at least 2 values");
    const auto c = detail::mean_var(y_control);
    const auto t = detail::mean_var(y_treatment);
    const double vc = c.var / static_cast<double>(y_control.size());
    const double vt = t.var / static_cast<double>(y_treatment.size());
    const double var = vc + vt;
    const double estimate = t.mean - c.mean;
    if (!(var > 0.0)) {
        if (estimate == 0.0) {
            EffectEstimate out;
            out.estimate = 0.0;
            out.dof = static_cast<double>(y_control.size() + y_treatment.size() - 2);
            out.ci_low = out.ci_high = 0.0;
            return out;
        }
        throw DegenerateInput("welch_t_test: both samples have zero variance");
    }
    const double dof = var * var
                       / (vc * vc / static_cast<double>(y_control.size() - 1)
                          + vt * vt / static_cast<double>(y_treatment.size() - 1));
    return detail::finish_estimate(estimate, std::sqrt(var), dof, alpha, Method::TTest);
}

/// One subject: baseline, endpoint and arm.
struct Observation {
    double x;
    double y;
    Arm arm;
};

/// Coefficients of the ANCOVA fit alongside the treatment-effect estimate.
struct AncovaFit {
    EffectEstimate effect;
    double intercept;
    double slope;
    double residual_variance;
};

/// OLS of y on {1, treatment indicator, x}; the effect is the indicator's coefficient.
inline AncovaFit ancova_fit_full(std::span<const Observation> records, double alpha = 0.05) {
    const std::size_t n = records.size();
    if (n < 4) throw DegenerateInput("ancova_fit: need at least 4 records for a residual degree of freedom");
    double md = 0.0, mx = 0.0, my = 0.0;
    for (const auto& r : records) {
        md += r.arm == Arm::Treatment ? 1.0 : 0.0;
        mx += r.x;
        my += r.y;
    }
    const double nn = static_cast<double>(n);
    md /= nn;
    mx /= nn;
    my /= nn;
    double sdd = 0.0, sdx = 0.0, sxx = 0.0, sdy = 0.0, sxy = 0.0;
    for (const auto& r : records) {
        const double d = (r.arm == Arm::Treatment ? 1.0 : 0.0) - md;
        const double x = r.x - mx;
        const double y = r.y - my;
        sdd += d * d;
        sdx += d * x;
        sxx += x * x;
        sdy += d * y;
        sxy += x * y;
    }
    const double det = sdd * sxx - sdx * sdx;
    if (!(sdd > 0.0) || !(sxx > 0.0) || !(det > 1e-12 * sdd * sxx))
        throw SingularDesign("ancova_fit: design matrix is rank deficient");
    const double b_arm = (sxx * sdy - sdx * sxy) / det;
    const double b_x = (sdd * sxy - sdx * sdy) / det;
    const double b0 = my - b_arm * md - b_x * mx;
    double rss = 0.0;
    for (const auto& r : records) {
        const double fitted = b0 + b_arm * (r.arm == Arm::Treatment ? 1.0 : 0.0) + b_x * r.x;
        rss += (r.y - fitted) * (r.y - fitted);
    }
    const double dof = nn - 3.0;
    const double s2 = rss / dof;
    const double se = std::sqrt(s2 * sxx / det);
    return {detail::finish_estimate(b_arm, se, dof, alpha, Method::Ancova), b0, b_x, s2};
}

inline EffectEstimate ancova_fit(std::span<const Observation> records, double alpha = 0.05) {
    return ancova_fit_full(records, alpha).effect;
}

/// Endpoints of one arm.
inline std::vector<double> arm_endpoints(std::span<const Observation> records, Arm arm) {
    std::vector<double> out;
    for (const auto& r : records)
        if (r.arm == arm) out.push_back(r.y);
    return out;
}

inline EffectEstimate welch_t_test(std::span<const Observation> records, double alpha = 0.05) {
    const auto yc = arm_endpoints(records, Arm::Control);
    const auto yt = arm_endpoints(records, Arm::Treatment);
    return welch_t_test(yc, yt, alpha);
}

}  // namespace sice
