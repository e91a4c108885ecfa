#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace bubbles;
using testing_util::rw_series;

TEST(Multiplier, SkewedMoments) {
    Rng rng = stream_rng(1, 0);
    Multiplier w(MultiplierKind::skewed);
    const int N = 1000000;
    double s1 = 0, s2 = 0, s3 = 0;
    std::vector<double> x(N);
    for (auto& v : x) {
        v = w(rng);
        s1 += v;
    }
    const double m = s1 / N;
    for (double v : x) {
        s2 += (v - m) * (v - m);
        s3 += (v - m) * (v - m) * (v - m);
    }
    EXPECT_NEAR(m, 0.0, 0.02);
    EXPECT_NEAR(s2 / N, 1.0, 0.02);
    EXPECT_NEAR(s3 / N, 1.0, 0.02);
}

TEST(Multiplier, RademacherAndGaussianUnitVariance) {
    for (auto k : {MultiplierKind::gaussian, MultiplierKind::rademacher}) {
        Rng rng = stream_rng(2, 0);
        Multiplier w(k);
        double s1 = 0, s2 = 0;
        for (int i = 0; i < 200000; ++i) {
            const double v = w(rng);
            s1 += v;
            s2 += v * v;
        }
        EXPECT_NEAR(s1 / 200000, 0.0, 0.01);
        EXPECT_NEAR(s2 / 200000, 1.0, 0.02);
    }
}

TEST(Bootstrap, PValueFormula) {
    EXPECT_DOUBLE_EQ(bootstrap_pvalue(1.0, {0.0, 2.0, 3.0, std::nan("")}), 3.0 / 4.0);
    EXPECT_DOUBLE_EQ(bootstrap_pvalue(10.0, {0.0, 2.0, 3.0}), 1.0 / 4.0);
}

TEST(Bootstrap, ReproducibleWithSeed) {
    const Series y = rw_series(100, 4);
    TestOptions o;
    o.tau0 = default_min_window(100);
    const auto a = wild_bootstrap_pvalue(y, StatKind::gsadf, o, 199, MultiplierKind::gaussian, 17);
    const auto b = wild_bootstrap_pvalue(y, StatKind::gsadf, o, 199, MultiplierKind::gaussian, 17);
    EXPECT_EQ(a.p_value, b.p_value);
    EXPECT_EQ(a.replicates, b.replicates);
    const auto c = wild_bootstrap_pvalue(y, StatKind::gsadf, o, 199, MultiplierKind::gaussian, 18);
    EXPECT_NE(a.replicates, c.replicates);
}

TEST(Bootstrap, IndependentOfThreadCount) {
    const Series y = rw_series(80, 5);
    TestOptions o;
    o.tau0 = 0.2;
    set_max_threads(1);
    const auto a = wild_bootstrap_pvalue(y, StatKind::sadf, o, 99, MultiplierKind::rademacher, 3);
    set_max_threads(4);
    const auto b = wild_bootstrap_pvalue(y, StatKind::sadf, o, 99, MultiplierKind::rademacher, 3);
    set_max_threads(0);
    EXPECT_EQ(a.replicates, b.replicates);
}

TEST(Bootstrap, SampleStartsAtZeroAndScalesIncrements) {
    const Series y({1.0, 3.0, 2.0, 5.0});
    Rng rng = stream_rng(0, 0);
    Multiplier w(MultiplierKind::rademacher);
    const Series s = wild_bootstrap_sample(y, rng, w);
    EXPECT_EQ(s[0], 0.0);
    const auto d = y.differences();
    for (std::size_t t = 1; t < 4; ++t) EXPECT_EQ(std::abs(s[t] - s[t - 1]), std::abs(d[t - 1]));
}

TEST(Bootstrap, RejectsSmallB) {
    TestOptions o;
    o.tau0 = 0.2;
    EXPECT_THROW((void)wild_bootstrap_pvalue(rw_series(50, 1), StatKind::sadf, o, 50, MultiplierKind::gaussian, 1),
                 std::invalid_argument);
}

TEST(Composite, DefaultWindowAndReproducibility) {
    EXPECT_EQ(kDefaultControlWindow, 24u);
    const Series y = rw_series(120, 6);
    const double tau0 = default_min_window(120);
    const auto a = composite_monitor_cv(y, tau0, 24, 199, 9);
    const auto b = composite_monitor_cv(y, tau0, 24, 199, 9);
    EXPECT_EQ(a.critical_value, b.critical_value);
    EXPECT_EQ(a.first_end, frac_to_index(tau0, 120));
    EXPECT_EQ(a.last_end, a.first_end + 23);
    EXPECT_EQ(a.maxima.size(), 199u);
}

TEST(Composite, WindowBeyondSampleRejected) {
    EXPECT_THROW((void)composite_monitor_cv(rw_series(60, 1), 0.2, 60, 99, 1), std::invalid_argument);
}

TEST(Subsampling, QuantileOneIsMaximum) {
    const Series y = rw_series(100, 7);
    const auto r = subsampling_cv(y, 10, 1.0);
    double mx = -1e300;
    for (std::size_t j = 1; j + 10 <= 100; ++j) mx = std::max(mx, end_of_sample_stats(y, 10, j).S);
    EXPECT_EQ(r.cv_S, mx);
    EXPECT_EQ(r.subsamples, 90u);
    EXPECT_FALSE(r.warning);
}

TEST(Subsampling, ConstantTrainingGivesZero) {
    const auto r = subsampling_cv(Series(std::vector<double>(40, 1.0)), 10, 0.95);
    EXPECT_EQ(r.cv_S, 0.0);
    EXPECT_EQ(r.cv_R, 0.0);
    EXPECT_FALSE(r.cv_Sw);
}

TEST(Subsampling, FewSubsamplesWarn) {
    const auto r = subsampling_cv(rw_series(25, 1), 10, 0.95);
    EXPECT_TRUE(r.warning);
}

TEST(Union, SingleMemberMatchesMemberBootstrap) {
    const Series y = rw_series(100, 8);
    TestOptions o;
    o.tau0 = default_min_window(100);
    const auto u = bootstrap_union(y, {StatKind::gsadf}, o, 199, 5);
    const auto b = wild_bootstrap_pvalue(y, StatKind::gsadf, o, 199, MultiplierKind::gaussian, 5);
    EXPECT_EQ(u.U, b.observed);
    EXPECT_EQ(u.cv_U, b.critical_value(0.05));
    EXPECT_EQ(u.reject, b.observed > b.critical_value(0.05));
}

TEST(Union, OrderInvariantDecision) {
    for (std::uint64_t s = 0; s < 6; ++s) {
        const Series y = testing_util::bubble_series(100, 50, 70, 1.04, s);
        TestOptions o;
        o.tau0 = default_min_window(100);
        const auto a = bootstrap_union(y, {StatKind::gsadf, StatKind::sgsadf}, o, 199, 2);
        const auto b = bootstrap_union(y, {StatKind::sgsadf, StatKind::gsadf}, o, 199, 2);
        EXPECT_EQ(a.reject, b.reject);
    }
}
