#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "sice/errors.hpp"
#include "sice/rng.hpp"
#include "sice/stat_kernels.hpp"

namespace sice {

/// Joint law of (baseline x, endpoint y) for one arm. For the t family the
/// sigmas are scale parameters.
struct BivariateParams {
    double mu_x = 0.0;
    double mu_y = 0.0;
    double sigma_x = 1.0;
    double sigma_y = 1.0;
    double rho = 0.0;

    void validate() const {
        if (!std::isfinite(mu_x) || !std::isfinite(mu_y)) throw DomainError("bivariate: means must be finite");
        if (!(sigma_x > 0.0) || !std::isfinite(sigma_x)) throw DomainError("bivariate: sigma_x must be positive");
        if (!(sigma_y > 0.0) || !std::isfinite(sigma_y)) throw DomainError("bivariate: sigma_y must be positive");
        if (!(std::abs(rho) <= 1.0)) throw DomainError("bivariate: |rho| must not exceed 1");
    }
};

struct Pair {
    double x;
    double y;
};

/// Draws (x, y) pairs through the Cholesky construction
///   x = mu_x + sigma_x z1,  y = mu_y + rho sigma_y z1 + sigma_y sqrt(1 - rho^2) z2,
/// with both coordinates divided by sqrt(chi2_df / df) for the t family.
/// Holds distribution state, so one sampler serves one engine at a time.
class BivariateSampler {
public:
    BivariateSampler(const BivariateParams& params, const DistributionFamily& family)
        : params_(params), family_(family), residual_scale_(0.0), chi2_(family.is_normal() ? 1.0 : family.df()) {
        params_.validate();
        residual_scale_ = params_.sigma_y * std::sqrt(1.0 - params_.rho * params_.rho);
    }

    Pair draw(Engine& engine) {
        const double z1 = normal_(engine);
        const double z2 = normal_(engine);
        double x = params_.sigma_x * z1;
        double y = params_.rho * params_.sigma_y * z1 + residual_scale_ * z2;
        if (!family_.is_normal()) {
            const double w = std::sqrt(chi2_(engine) / family_.df());
            x /= w;
            y /= w;
        }
        return {params_.mu_x + x, params_.mu_y + y};
    }

    const BivariateParams& params() const noexcept { return params_; }
    const DistributionFamily& family() const noexcept { return family_; }

private:
    BivariateParams params_;
    DistributionFamily family_;
    double residual_scale_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::chi_squared_distribution<double> chi2_;
};

inline std::vector<Pair> sample_bivariate(const BivariateParams& params, const DistributionFamily& family,
                                          const RngStream& rng, std::size_t n) {
    if (n < 1) throw DomainError("sample_bivariate: n must be at least 1");
    BivariateSampler sampler(params, family);
    Engine engine = rng.engine();
    std::vector<Pair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sampler.draw(engine));
    return out;
}

/// Threshold a such that the rule "keep x > a" excludes fraction p of the
/// pre-selection population.
inline double threshold_from_exclusion_fraction(double p, double mu_x, double sigma_x,
                                                const DistributionFamily& family) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("exclusion fraction must lie in (0, 1)");
    return mu_x + sigma_x * family.quantile(p);
}

}  // namespace sice
