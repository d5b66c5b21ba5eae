#pragma once

// Scalar special functions shared by every other module: standard normal
// basics, the Mills-ratio function S(z) = phi(z) / Phi(-z), the truncated
// normal moment factors used by Cohen's information matrix, and the
// standardized marginal of each supported distribution family.

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "sice/detail/roots.hpp"
#include "sice/errors.hpp"

namespace sice {

//---------------------------------------------------------------------------//
// Standard normal
//---------------------------------------------------------------------------//

template <std::floating_point T>
T normal_pdf(T z) {
    constexpr T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
    return inv_sqrt_2pi * std::exp(-z * z / 2);
}

template <std::floating_point T>
T normal_cdf(T z) {
    return std::erfc(-z / std::numbers::sqrt2_v<T>) / 2;
}

/// Upper tail Phi(-z), computed without cancellation.
template <std::floating_point T>
T normal_sf(T z) {
    return std::erfc(z / std::numbers::sqrt2_v<T>) / 2;
}

/// Inverse standard normal CDF by bracketed bisection against normal_cdf.
template <std::floating_point T>
T normal_quantile(T p) {
    if (!(p > T(0) && p < T(1))) throw DomainError("normal_quantile: p must lie in (0, 1)");
    // The upper half is solved on the survival function so that p close to 1
    // keeps its resolution.
    if (p > T(0.5)) {
        const T q = T(1) - p;
        return -detail::bisect([q](T x) { return q - normal_cdf(x); }, T(-40), T(40));
    }
    return detail::bisect([p](T x) { return normal_cdf(x) - p; }, T(-40), T(40));
}

//---------------------------------------------------------------------------//
// Mills-ratio function
//---------------------------------------------------------------------------//

namespace detail {

// Phi(-z) / phi(z) as the classical continued fraction
//   1 / (z + 1 / (z + 2 / (z + 3 / (z + ...)))),
// evaluated bottom-up. Converges fast for z >= 5.
template <std::floating_point T>
T upper_mills_cf(T z) {
    const int depth = z < 8 ? 400 : 160;
    T tail = z;
    for (int k = depth; k >= 1; --k) tail = z + T(k) / tail;
    return T(1) / tail;
}

inline constexpr double kMillsSwitch = 5.0;

}  // namespace detail

/// S(z) = phi(z) / Phi(-z), the mean of a standard normal truncated below at z.
///
/// For z > 5 the ratio comes from a continued fraction, where phi and Phi(-z)
/// would both underflow. With T = double the result underflows to zero below
/// z of roughly -37.5 (S(-40) is about 1.5e-348); use long double to cover
/// that range.
template <std::floating_point T>
T mills_ratio(T z) {
    if (z > T(detail::kMillsSwitch)) return T(1) / detail::upper_mills_cf(z);
    return normal_pdf(z) / normal_sf(z);
}

/// S(z) - z, the mean excess of a standard normal truncated below at z.
template <std::floating_point T>
T mills_excess(T z) {
    if (z > T(detail::kMillsSwitch)) {
        const T r = detail::upper_mills_cf(z);
        return (T(1) - z * r) / r;
    }
    return mills_ratio(z) - z;
}

/// Factors of the truncated-normal information matrix at standardized
/// truncation point z. var_factor is the variance of a standard normal
/// truncated below at z and equals phi11.
template <std::floating_point T>
struct TruncatedMomentFactors {
    T var_factor;
    T phi11;
    T phi12;
    T phi22;

    T determinant() const { return phi11 * phi22 - phi12 * phi12; }
};

template <std::floating_point T>
TruncatedMomentFactors<T> truncated_moment_factors(T z) {
    const T s = mills_ratio(z);
    const T excess = mills_excess(z);
    const T var_factor = T(1) - s * excess;
    const T phi12 = s * (T(1) - z * excess);
    return {var_factor, var_factor, phi12, T(2) + z * phi12};
}

//---------------------------------------------------------------------------//
// Distribution families
//---------------------------------------------------------------------------//

/// Marginal law of the standardized variables: Normal, or location-scale
/// Student t with `df` degrees of freedom (sigma is a scale, not an SD).
class DistributionFamily {
public:
    enum class Kind { Normal, StudentT };

    static DistributionFamily normal() { return DistributionFamily(Kind::Normal, 0.0); }

    static DistributionFamily student_t(double df) {
        if (!(df > 0.0) || !std::isfinite(df))
            throw DomainError("student_t: degrees of freedom must be positive and finite");
        return DistributionFamily(Kind::StudentT, df);
    }

    Kind kind() const noexcept { return kind_; }
    bool is_normal() const noexcept { return kind_ == Kind::Normal; }
    double df() const noexcept { return df_; }

    /// CDF of the standardized (location 0, scale 1) marginal.
    double cdf(double z) const {
        if (is_normal()) return normal_cdf(z);
        return boost::math::cdf(boost::math::students_t_distribution<double>(df_), z);
    }

    /// Upper tail of the standardized marginal.
    double sf(double z) const {
        if (is_normal()) return normal_sf(z);
        return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df_), z));
    }

    /// Quantile of the standardized marginal, by bisection against cdf().
    double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: p must lie in (0, 1)");
        if (is_normal()) return normal_quantile(p);
        if (p > 0.5) {
            const double q = 1.0 - p;
            auto upper = [this](double x) { return -sf(x); };
            auto root = detail::invert_monotone(upper, -q, -1.0, 1.0);
            if (!root) throw DomainError("quantile: bracket search failed");
            return *root;
        }
        auto root = detail::invert_monotone([this](double x) { return cdf(x); }, p, -1.0, 1.0);
        if (!root) throw DomainError("quantile: bracket search failed");
        return *root;
    }

    std::string name() const {
        if (is_normal()) return "normal";
        std::string d = std::to_string(df_);
        d.erase(d.find_last_not_of('0') + 1);
        if (!d.empty() && d.back() == '.') d.pop_back();
        return "t" + d;
    }

    friend bool operator==(const DistributionFamily&, const DistributionFamily&) = default;

private:
    DistributionFamily(Kind kind, double df) : kind_(kind), df_(df) {}

    Kind kind_;
    double df_;
};

/// Two-sided critical value of the standard normal at level alpha.
inline double normal_critical(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    return -normal_quantile(alpha / 2.0);
}

/// Two-sided p-value of a t statistic with `dof` degrees of freedom.
inline double t_two_sided_p(double t, double dof) {
    if (!std::isfinite(t)) return 0.0;
    boost::math::students_t_distribution<double> dist(dof);
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

/// Upper alpha/2 critical value of Student t with `dof` degrees of freedom.
inline double t_critical(double alpha, double dof) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    return DistributionFamily::student_t(dof).quantile(1.0 - alpha / 2.0);
}

/// Two-sided p-value of a z statistic.
inline double z_two_sided_p(double z) {
    return std::min(1.0, 2.0 * normal_sf(std::abs(z)));
}

}  // namespace sice
