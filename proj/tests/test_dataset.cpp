#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "sice/dataset.hpp"

using namespace sice;

namespace {

std::vector<SubjectRecord> load(const std::string& text) {
    std::istringstream in(text);
    return load_dataset(in);
}

std::string load_error(const std::string& text) {
    try {
        load(text);
    } catch (const LoadError& e) {
        return e.what();
    }
    return "";
}

// Eight subjects per arm; control endpoints track baseline, treatment less so.
std::vector<SubjectRecord> small_dataset() {
    std::vector<SubjectRecord> out;
    const double xs[] = {10, 12, 14, 16, 18, 20, 25, 30};
    for (int i = 0; i < 8; ++i) {
        out.push_back({"C" + std::to_string(i), Arm::Control, xs[i], 0.8 * xs[i] + (i % 3), 0});
        out.push_back({"T" + std::to_string(i), Arm::Treatment, xs[i] + 0.5, 0.3 * xs[i] + 5.0 - (i % 2), 0});
    }
    return out;
}

}  // namespace

TEST(LoadDataset, CommaSeparatedWithFlexibleHeader) {
    const auto r = load("Subject_ID, ARM ,baseline,Endpoint,site\n"
                        "s1,control,20.5,18,A\n"
                        "\n"
                        "s2,Treatment,31,12.25,B\r\n");
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].subject_id, "s1");
    EXPECT_EQ(r[0].arm, Arm::Control);
    EXPECT_DOUBLE_EQ(r[0].baseline, 20.5);
    EXPECT_EQ(r[1].arm, Arm::Treatment);
    EXPECT_DOUBLE_EQ(r[1].endpoint, 12.25);
    EXPECT_EQ(r[1].row, 4u);
}

TEST(LoadDataset, TabSeparated) {
    const auto r = load("arm\tsubject_id\tendpoint\tbaseline\ncontrol\tx\t1\t2\n");
    ASSERT_EQ(r.size(), 1u);
    EXPECT_DOUBLE_EQ(r[0].baseline, 2.0);
    EXPECT_DOUBLE_EQ(r[0].endpoint, 1.0);
}

TEST(LoadDataset, ErrorsCiteRows) {
    EXPECT_NE(load_error("subject_id,arm,baseline\n").find("missing column 'endpoint'"), std::string::npos);
    const auto dup = load_error("subject_id,arm,baseline,endpoint\na,control,1,2\nb,control,1,2\na,treatment,3,4\n");
    EXPECT_NE(dup.find("rows 2 and 4"), std::string::npos) << dup;
    EXPECT_NE(load_error("subject_id,arm,baseline,endpoint\na,placebo,1,2\n").find("row 2: unknown arm 'placebo'"),
              std::string::npos);
    EXPECT_NE(load_error("subject_id,arm,baseline,endpoint\na,control,1,2\nb,control,abc,2\n").find("row 3: cannot parse baseline"),
              std::string::npos);
    EXPECT_NE(load_error("subject_id,arm,baseline,endpoint\na,control,1\n").find("missing field"), std::string::npos);
    EXPECT_NE(load_error("").find("missing header"), std::string::npos);
}

TEST(Transform, LogAppliesToBothColumnsAndThresholds) {
    auto r = apply_transform(small_dataset(), Transform::Log);
    EXPECT_DOUBLE_EQ(r[0].baseline, std::log(10.0));
    EXPECT_DOUBLE_EQ(transform_threshold(20.0, Transform::Log), std::log(20.0));
    EXPECT_DOUBLE_EQ(transform_threshold(-1.0, Transform::None), -1.0);
    auto bad = small_dataset();
    bad[3].endpoint = 0.0;
    EXPECT_THROW(apply_transform(bad, Transform::Log), DomainError);
    EXPECT_THROW(transform_threshold(0.0, Transform::Log), DomainError);
}

TEST(ThresholdSweep, NoSelectionRowThenInclusiveThresholds) {
    SweepConfig cfg;
    cfg.thresholds = {14, 20};
    const auto rows = threshold_sweep(small_dataset(), cfg);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_FALSE(rows[0].threshold.has_value());
    EXPECT_EQ(rows[0].n_control, 8u);
    // baseline >= 14 keeps 14 itself
    EXPECT_EQ(rows[1].n_control, 6u);
    EXPECT_EQ(rows[1].n_treatment, 6u);
    EXPECT_EQ(rows[2].n_control, 3u);
    EXPECT_TRUE(rows[2].low_n);
    for (const auto& row : rows) {
        ASSERT_EQ(row.results.size(), 2u);
        EXPECT_NE(row.result(Method::TTest), nullptr);
        EXPECT_NE(row.result(Method::Ancova), nullptr);
    }
    EXPECT_DOUBLE_EQ(rows[0].result(Method::Ancova)->percent_change, 0.0);
    const auto* base = rows[0].result(Method::TTest);
    const auto* r2 = rows[2].result(Method::TTest);
    EXPECT_NEAR(r2->percent_change,
                (r2->estimate.estimate - base->estimate.estimate) / std::abs(base->estimate.estimate) * 100.0, 1e-12);
}

TEST(ThresholdSweep, LessThanAndInfeasibleRows) {
    SweepConfig cfg;
    cfg.direction = Direction::LessThan;
    cfg.thresholds = {10.2, 16};
    const auto rows = threshold_sweep(small_dataset(), cfg);
    EXPECT_EQ(rows[1].n_control, 1u);
    EXPECT_FALSE(rows[1].feasible);
    EXPECT_FALSE(rows[1].results[0].ok);
    EXPECT_TRUE(std::isnan(rows[1].results[0].percent_change));
    EXPECT_EQ(rows[2].n_control, 4u);
    EXPECT_TRUE(rows[2].feasible);
}

TEST(ThresholdSweep, ConfigValidation) {
    SweepConfig cfg;
    EXPECT_THROW(threshold_sweep(small_dataset(), cfg), DomainError);
    cfg.thresholds = {3, 2};
    EXPECT_THROW(cfg.validate(), DomainError);
    cfg.thresholds = {1, 2};
    cfg.methods.clear();
    EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(CohenSweep, StatusPerThreshold) {
    const auto data = synthesize_dataset(lps_analog_population(), 400, 400, RngStream{1, 0}, EndpointScale::Exponentiated);
    SweepConfig cfg;
    cfg.thresholds = {15, 20, 500};
    cfg.transform = Transform::Log;
    cfg.methods = {Method::Ancova, Method::CohenML};
    const auto sweep = cohen_sweep(data, cfg, RngStream{2, 0});
    ASSERT_EQ(sweep.rows.size(), 3u);
    EXPECT_EQ(sweep.reference.method, Method::Ancova);
    EXPECT_EQ(sweep.rows[0].status, CohenStatus::Ok);
    EXPECT_EQ(sweep.rows[1].status, CohenStatus::Ok);
    EXPECT_EQ(sweep.rows[2].status, CohenStatus::Infeasible);
    EXPECT_FALSE(sweep.rows[2].effect.has_value());
    // the Cohen fit extrapolates, so it is less precise than the direct estimate
    EXPECT_GT(sweep.rows[0].effect->std_error(), sweep.reference.std_error);
}

TEST(Synthesize, DeterministicInterleavedIds) {
    const auto pop = lps_analog_population();
    const auto a = synthesize_dataset(pop, 5, 3, RngStream{3, 0});
    const auto b = synthesize_dataset(pop, 5, 3, RngStream{3, 0});
    ASSERT_EQ(a.size(), 8u);
    EXPECT_EQ(a[0].subject_id, "S000001");
    EXPECT_EQ(a[7].subject_id, "S000008");
    EXPECT_EQ(a[0].arm, Arm::Control);
    EXPECT_EQ(a[1].arm, Arm::Treatment);
    EXPECT_EQ(a[7].arm, Arm::Control);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].baseline, b[i].baseline);
        EXPECT_EQ(a[i].endpoint, b[i].endpoint);
    }
    const auto c = synthesize_dataset(pop, 5, 3, RngStream{4, 0});
    EXPECT_NE(a[0].baseline, c[0].baseline);
}

TEST(Synthesize, ExponentiatedScaleIsPositiveAndLogRecoversMoments) {
    const auto pop = lps_analog_population();
    const auto d = synthesize_dataset(pop, 20000, 20000, RngStream{5, 0}, EndpointScale::Exponentiated);
    double mx = 0.0, my_c = 0.0;
    std::size_t nc = 0;
    for (const auto& r : d) {
        ASSERT_GT(r.baseline, 0.0);
        mx += std::log(r.baseline);
        if (r.arm == Arm::Control) {
            my_c += std::log(r.endpoint);
            ++nc;
        }
    }
    EXPECT_NEAR(mx / d.size(), pop.mu_x, 0.01);
    EXPECT_NEAR(my_c / nc, pop.control.mu, 0.015);
}
