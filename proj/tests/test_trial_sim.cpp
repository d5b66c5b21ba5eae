#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "sice/trial_sim.hpp"

using namespace sice;

namespace {

Scenario intro_scenario(std::size_t n = 200) {
    Scenario s;
    s.pop.control = {0.0, 1.0, 0.2};
    s.pop.treatment = {0.0, 1.2, 0.3};
    s.rule = {Direction::GreaterThan, 0.6, false};
    s.n_c = s.n_t = n;
    return s;
}

struct Moments {
    double mx, my, vx, vy, cxy;
};

Moments moments(const std::vector<Pair>& v) {
    Moments m{0, 0, 0, 0, 0};
    for (const auto& p : v) {
        m.mx += p.x;
        m.my += p.y;
    }
    m.mx /= v.size();
    m.my /= v.size();
    for (const auto& p : v) {
        m.vx += (p.x - m.mx) * (p.x - m.mx);
        m.vy += (p.y - m.my) * (p.y - m.my);
        m.cxy += (p.x - m.mx) * (p.y - m.my);
    }
    m.vx /= v.size() - 1.0;
    m.vy /= v.size() - 1.0;
    m.cxy /= v.size() - 1.0;
    return m;
}

}  // namespace

TEST(Rng, StreamsAreReproducibleAndDistinct) {
    const RngStream a{42, 0};
    auto e1 = a.engine(), e2 = a.engine();
    EXPECT_EQ(e1(), e2());
    std::set<std::uint64_t> firsts;
    for (std::uint64_t k = 0; k < 100; ++k) firsts.insert(a.child(k).engine()());
    firsts.insert(RngStream{43, 0}.engine()());
    firsts.insert(RngStream{42, 1}.engine()());
    EXPECT_EQ(firsts.size(), 102u);
    EXPECT_EQ(a.child(3), a.child(3));
    EXPECT_FALSE((a.child(3) == RngStream{42, 1}.child(3)));
}

TEST(Sampling, BivariateNormalMoments) {
    const BivariateParams p{1.0, -2.0, 1.5, 0.7, 0.4};
    const auto v = sample_bivariate(p, DistributionFamily::normal(), RngStream{1, 0}, 200000);
    const auto m = moments(v);
    EXPECT_NEAR(m.mx, 1.0, 5 * 1.5 / std::sqrt(2e5));
    EXPECT_NEAR(m.my, -2.0, 5 * 0.7 / std::sqrt(2e5));
    EXPECT_NEAR(m.vx, 2.25, 0.03);
    EXPECT_NEAR(m.vy, 0.49, 0.007);
    EXPECT_NEAR(m.cxy / std::sqrt(m.vx * m.vy), 0.4, 0.01);
}

TEST(Sampling, StudentTUsesScaleNotSd) {
    // t(8) marginal variance is scale^2 * 8 / 6
    const BivariateParams p{0.0, 0.0, 1.0, 2.0, 0.5};
    const auto v = sample_bivariate(p, DistributionFamily::student_t(8), RngStream{2, 0}, 400000);
    const auto m = moments(v);
    EXPECT_NEAR(m.vx, 8.0 / 6.0, 0.03);
    EXPECT_NEAR(m.vy, 4.0 * 8.0 / 6.0, 0.12);
    EXPECT_NEAR(m.cxy / std::sqrt(m.vx * m.vy), 0.5, 0.01);
}

TEST(Sampling, ThresholdFromExclusionFraction) {
    EXPECT_NEAR(threshold_from_exclusion_fraction(0.25, 0.0, 1.0, DistributionFamily::normal()), -0.6744897501960817, 1e-13);
    EXPECT_NEAR(threshold_from_exclusion_fraction(0.25, 1.0, 2.0, DistributionFamily::student_t(3)),
                1.0 + 2.0 * -0.7648923284043453, 1e-10);
    EXPECT_THROW(threshold_from_exclusion_fraction(1.0, 0.0, 1.0, DistributionFamily::normal()), DomainError);
}

TEST(Sampling, RejectsInvalidParameters) {
    EXPECT_THROW(BivariateSampler({0, 0, 1, 1, -1.01}, DistributionFamily::normal()), DomainError);
    EXPECT_NO_THROW(BivariateSampler({0, 0, 1, 1, 1.0}, DistributionFamily::normal()));
    EXPECT_THROW(BivariateSampler({0, 0, -1, 1, 0.0}, DistributionFamily::normal()), DomainError);
}

TEST(Oversample, CandidateCountForIntroTrial) {
    const auto s = intro_scenario();
    const double accept = acceptance_probability(s.pop, s.rule);
    EXPECT_NEAR(1.0 / accept, 3.6462666612647167, 1e-12);
    EXPECT_EQ(oversample_candidates(1000, accept), 3646u);
}

TEST(SimulateTrial, ExactNKeepsTargetCountsOnKeptSide) {
    auto s = intro_scenario(150);
    s.n_t = 170;
    const auto trial = simulate_trial(s, RngStream{3, 0});
    EXPECT_EQ(trial.n_control, 150u);
    EXPECT_EQ(trial.n_treatment, 170u);
    EXPECT_EQ(trial.records.size(), 320u);
    for (const auto& r : trial.records) EXPECT_GT(r.x, 0.6);
    EXPECT_GE(trial.candidates_control, 150u);
}

TEST(SimulateTrial, OversampleDrawsFixedCandidates) {
    auto s = intro_scenario(1000);
    s.selection_mode = SelectionMode::Oversample;
    const auto trial = simulate_trial(s, RngStream{4, 0});
    EXPECT_EQ(trial.candidates_control, 3646u);
    EXPECT_EQ(trial.candidates_treatment, 3646u);
    EXPECT_EQ(trial.records.size(), trial.n_control + trial.n_treatment);
    EXPECT_NEAR(double(trial.n_control), 1000.0, 5 * std::sqrt(1000.0));
}

TEST(SimulateTrial, LessThanRuleKeepsLowerSide) {
    auto s = intro_scenario(100);
    s.rule = {Direction::LessThan, -0.3, false};
    for (const auto& r : simulate_trial(s, RngStream{5, 0}).records) EXPECT_LT(r.x, -0.3);
}

TEST(SimulateTrial, InfeasibleSelectionRaises) {
    auto s = intro_scenario(10);
    s.rule.threshold = 6.0;  // P(pass) ~ 1e-9
    EXPECT_THROW(simulate_trial(s, RngStream{6, 0}), InfeasibleSelection);
}

TEST(SimulateTrial, UnselectedIgnoresRule) {
    auto s = intro_scenario(300);
    const auto trial = simulate_unselected(s, RngStream{7, 0});
    EXPECT_EQ(trial.records.size(), 600u);
    EXPECT_TRUE(std::any_of(trial.records.begin(), trial.records.end(), [](const auto& r) { return r.x < 0.6; }));
}

TEST(Replicates, IndependentOfThreadCount) {
    const auto s = intro_scenario(50);
    const auto a = replicate_outcomes(s, 64, RngStream{8, 0}, FailurePolicy::Throw, 1);
    const auto b = replicate_outcomes(s, 64, RngStream{8, 0}, FailurePolicy::Throw, 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].estimate, b[i].estimate);
        EXPECT_EQ(a[i].std_error, b[i].std_error);
    }
}

TEST(Replicates, FailurePolicy) {
    auto s = intro_scenario(50);
    s.estimator = Estimator::CohenML;
    s.pop.family = DistributionFamily::student_t(3);
    s.rule.threshold = 0.0;
    EXPECT_THROW(replicate_outcomes(s, 20, RngStream{9, 0}, FailurePolicy::Throw, 1), ReplicateError);
    const auto out = replicate_outcomes(s, 20, RngStream{9, 0}, FailurePolicy::Count, 1);
    const auto sum = summarize(out, 0.0, 0.05);
    EXPECT_EQ(sum.n_reps, 20u);
    EXPECT_EQ(sum.n_ok + sum.n_failed, 20u);
    EXPECT_GT(sum.n_no_root, 0u);
}

TEST(Summarize, HandComputedStatistics) {
    std::vector<ReplicateOutcome> out(5);
    const double est[] = {1.0, 2.0, 3.0, 4.0, 0.0};
    const double p0[] = {0.01, 0.2, 0.04, 0.5, 0.0};
    for (int i = 0; i < 4; ++i) {
        out[i].ok = true;
        out[i].estimate = est[i];
        out[i].p_vs_e_o = p0[i];
        out[i].p_vs_zero = 0.001;
    }
    out[4].no_valid_root = true;
    const auto s = summarize(out, 2.0, 0.05);
    EXPECT_EQ(s.n_ok, 4u);
    EXPECT_EQ(s.n_failed, 1u);
    EXPECT_EQ(s.n_no_root, 1u);
    EXPECT_DOUBLE_EQ(s.mean_estimate, 2.5);
    EXPECT_DOUBLE_EQ(s.e_sice_hat, 0.5);
    EXPECT_DOUBLE_EQ(s.bias, 0.5);
    EXPECT_NEAR(s.empirical_variance, 5.0 / 3.0, 1e-15);
    EXPECT_NEAR(s.bias_se, std::sqrt(5.0 / 12.0), 1e-15);
    EXPECT_NEAR(s.bias_p, t_two_sided_p(0.5 / std::sqrt(5.0 / 12.0), 3.0), 1e-15);
    EXPECT_DOUBLE_EQ(s.pr_significant, 0.5);
    EXPECT_DOUBLE_EQ(s.power, 1.0);
}

TEST(Summarize, AllFailedGivesNaN) {
    std::vector<ReplicateOutcome> out(3);
    const auto s = summarize(out, 0.0, 0.05);
    EXPECT_EQ(s.n_ok, 0u);
    EXPECT_TRUE(std::isnan(s.mean_estimate));
}

TEST(Grid, PresetSizes) {
    EXPECT_EQ(presets::table1().size(), 180u);
    EXPECT_EQ(presets::table2().size(), 140u);
    EXPECT_EQ(presets::table3().size(), 480u);
    EXPECT_EQ(presets::table4().size(), 120u);
    EXPECT_EQ(expand_grid(presets::table3(), Estimator::CohenML).size(), 480u);
}

TEST(Grid, NestingOrderAndDerivedColumns) {
    const auto rows = expand_grid(presets::table1(), Estimator::SelectedEffect);
    // n_g innermost, then exclusion, rho_t, sigma_t, mu_t, family
    EXPECT_EQ(rows[0].family.name(), "t3");
    EXPECT_DOUBLE_EQ(rows[0].exclusion, 0.25);
    EXPECT_DOUBLE_EQ(rows[1].exclusion, 0.5);
    EXPECT_DOUBLE_EQ(rows[3].rho_t, 0.2);
    EXPECT_DOUBLE_EQ(rows[12].sigma_t, 0.85);
    EXPECT_EQ(rows[60].family.name(), "t8");
    EXPECT_EQ(rows[179].family.name(), "normal");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].index, i);
        EXPECT_NEAR(rows[i].loading_diff, rows[i].rho_t * rows[i].sigma_t - 0.2, 1e-15);
        EXPECT_EQ(std::isnan(rows[i].analytic_e_sice), !rows[i].family.is_normal());
    }
    EXPECT_NEAR(rows[1].threshold, 0.0, 1e-12);
}

TEST(Grid, RowsUseTheirOwnSubstream) {
    GridSpec g;
    g.sigma_t = {1.0};
    g.rho_t = {0.1, 0.6};
    g.n_g = {40};
    const auto rows = run_grid(g, 10, Estimator::SelectedEffect, RngStream{10, 0}, 1);
    ASSERT_EQ(rows.size(), 2u);
    const auto direct = run_replicates(rows[1].scenario, 10, RngStream{10, 0}.child(1), FailurePolicy::Count, 1);
    EXPECT_EQ(rows[1].summary.mean_estimate, direct.mean_estimate);
}

TEST(Scenario, ValidateRejectsBadSettings) {
    auto s = intro_scenario();
    s.n_c = 1;
    EXPECT_THROW(s.validate(), DomainError);
    s = intro_scenario();
    s.analysis = Method::CohenML;
    EXPECT_THROW(s.validate(), DomainError);
    s = intro_scenario();
    s.alpha = 1.0;
    EXPECT_THROW(s.validate(), DomainError);
}
