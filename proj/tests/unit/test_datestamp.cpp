#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracle.hpp"

using namespace bubbles;

namespace {

/// Sequence over ends 1..T with values given by f(tau2).
template <class F>
StatSequence synthetic(std::size_t T, F f) {
    StatSequence s{"bsadf", 0.1, T, {}};
    for (std::size_t e = 1; e <= T; ++e) {
        const double tau = static_cast<double>(e) / static_cast<double>(T);
        s.entries.push_back({tau, e, f(tau), false});
    }
    return s;
}

/// Noiseless piecewise path: random-walk-free level, growth on (T1,T2], decline on (T2,T3].
std::vector<double> piecewise(std::size_t T, std::size_t T1, std::size_t T2, std::size_t T3, double up, double down) {
    std::vector<double> y(T);
    double v = 1.0;
    for (std::size_t t = 1; t <= T; ++t) {
        if (t > T1 && t <= T2) v = v * (1.0 + up);
        else if (t > T2 && t <= T3) v = v * (1.0 - down);
        y[t - 1] = v;
    }
    return y;
}

}  // namespace

TEST(Crossing, AlwaysBelowGivesNothing) {
    const auto s = synthetic(100, [](double) { return 0.0; });
    EXPECT_TRUE(crossing_stamp(s, constant_cv(s, 1.0, CvSource::simulated), 0.02).empty());
}

TEST(Crossing, SingleCrossing) {
    const auto s = synthetic(100, [](double t) { return t >= 0.40 - 1e-12 && t < 0.60 - 1e-12 ? 2.0 : 0.0; });
    const auto eps = crossing_stamp(s, constant_cv(s, 1.0, CvSource::simulated), 0.02);
    ASSERT_EQ(eps.size(), 1u);
    EXPECT_DOUBLE_EQ(eps[0].origin, 0.40);
    EXPECT_DOUBLE_EQ(eps[0].collapse, 0.60);
    EXPECT_FALSE(eps[0].ongoing);
}

TEST(Crossing, HumpAndTwoHumps) {
    const auto one = synthetic(100, [](double t) { return t >= 0.3 - 1e-12 && t < 0.5 - 1e-12 ? 3.0 : -1.0; });
    const auto e1 = psy_stamp(one, constant_cv(one, 1.0, CvSource::simulated), 0.02);
    ASSERT_EQ(e1.size(), 1u);
    EXPECT_DOUBLE_EQ(e1[0].origin, 0.3);
    EXPECT_DOUBLE_EQ(e1[0].collapse, 0.5);
    const auto two = synthetic(100, [](double t) {
        return (t >= 0.2 - 1e-12 && t < 0.35 - 1e-12) || (t >= 0.6 - 1e-12 && t < 0.7 - 1e-12) ? 3.0 : -1.0;
    });
    const auto e2 = psy_stamp(two, constant_cv(two, 1.0, CvSource::simulated), 0.02);
    ASSERT_EQ(e2.size(), 2u);
    EXPECT_GE(e2[1].origin, e2[0].collapse);
}

TEST(Crossing, DurationFloorSuppressesBlips) {
    const auto s = synthetic(100, [](double t) { return std::abs(t - 0.5) < 1e-9 ? 3.0 : (t > 0.5 && t < 0.53 ? 0.5 : -1.0); });
    const auto eps = crossing_stamp(s, constant_cv(s, 1.0, CvSource::simulated), 0.05);
    ASSERT_EQ(eps.size(), 1u);
    EXPECT_GE(eps[0].collapse - eps[0].origin, 0.05 - 1e-12);
}

TEST(Crossing, OngoingEpisode) {
    const auto s = synthetic(50, [](double t) { return t > 0.8 ? 2.0 : 0.0; });
    const auto eps = crossing_stamp(s, constant_cv(s, 1.0, CvSource::simulated), 0.02);
    ASSERT_EQ(eps.size(), 1u);
    EXPECT_TRUE(eps[0].ongoing);
    EXPECT_EQ(eps[0].collapse, 1.0);
}

TEST(CvRule, ValueAt400) {
    const double l = std::log(400.0);
    EXPECT_DOUBLE_EQ(cv_rule(400), 2.0 / 3.0 * std::log(l * l));
    EXPECT_DOUBLE_EQ(default_min_duration(400), std::log(400.0) / 400.0);
}

TEST(TrainingMax, Rules) {
    StatSequence train{"x", 0.1, 10, {{0.1, 1, 1.0, false}, {0.2, 2, 2.0, false}}};
    StatSequence below{"x", 0.1, 10, {{0.3, 3, 1.5, false}, {0.4, 4, 1.9, false}}};
    StatSequence above{"x", 0.1, 10, {{0.3, 3, 2.5, false}, {0.4, 4, 1.0, false}}};
    StatSequence tie{"x", 0.1, 10, {{0.3, 3, 2.0, false}}};
    EXPECT_FALSE(training_max_monitor(train, below));
    EXPECT_EQ(training_max_monitor(train, above).value(), 0u);
    EXPECT_FALSE(training_max_monitor(train, tie));
}

TEST(BicInit, WalksBackFromTeMinusNmin) {
    const Series y = testing_util::rw_series(120, 3);
    const auto r = bic_init(y, 100, default_n_min(100));
    EXPECT_LE(r.start, 100u - 10u);
    EXPECT_EQ(r.path.front().start, 90u);
    const auto again = bic_init(y, 100, 10);
    EXPECT_EQ(r.start, again.start);
}

TEST(BicInit, PathFollowsStoppingRule) {
    for (std::uint64_t s = 0; s < 50; ++s) {
        const Series y = testing_util::bubble_series(200, 120, 150, 1.03, 500 + s);
        const auto r = bic_init(y, 150, default_n_min(150));
        ASSERT_FALSE(r.path.empty());
        for (std::size_t i = 0; i + 1 < r.path.size(); ++i) {
            EXPECT_GT(r.path[i].bic_ur, r.path[i].bic_ar);
            EXPECT_GT(r.path[i].delta_hat, 1.0);
            EXPECT_EQ(r.path[i + 1].start + 1, r.path[i].start);
        }
        const auto& last = r.path.back();
        EXPECT_TRUE(last.start == 1 || !(last.bic_ur > last.bic_ar && last.delta_hat > 1.0));
        EXPECT_EQ(r.start, last.start);
    }
}

TEST(BubbleModel, ExactFitAtTrueDates) {
    const std::size_t T = 60;
    const auto y = piecewise(T, 20, 35, 45, 0.05, 0.08);
    const Series s(y);
    const auto f = fit_bubble_model(s, 4, 20.0 / T, 35.0 / T, 45.0 / T);
    ASSERT_TRUE(f.valid);
    EXPECT_NEAR(f.ssr, 0.0, 1e-20);
}

TEST(BubbleModel, PeakBelowOriginInvalid) {
    const auto y = piecewise(60, 20, 35, 45, -0.05, 0.08);
    BubbleModelSearch s{Series(y)};
    EXPECT_FALSE(s.evaluate(2, 20, 35, 35).valid);
}

TEST(BubbleModel, PenaltyConstants) {
    EXPECT_EQ(kModelPenalty, (std::array<int, 4>{3, 4, 6, 7}));
}

TEST(BubbleModel, ExplosiveThenUnitRootSelectsModelTwo) {
    // unit root, explosive on (30, 50], unit root again with no collapse
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd(0.0, 0.3);
        std::vector<double> y(80);
        double v = 10.0;
        for (std::size_t t = 1; t <= 80; ++t) {
            v = (t > 30 && t <= 50) ? 1.06 * v + nd(rng) : v + nd(rng);
            y[t - 1] = v;
        }
        const auto sel = select_model_bic(Series(y));
        EXPECT_EQ(sel.model, 2) << "seed " << seed;
        EXPECT_NEAR(static_cast<double>(sel.episode.origin_index), 30.0, 3.0) << "seed " << seed;
        EXPECT_NEAR(static_cast<double>(sel.episode.collapse_index), 50.0, 2.0) << "seed " << seed;
    }
}

TEST(BubbleModel, LargeSampleGridMatchesExhaustiveOnStrongBubble) {
    const Series y = testing_util::bubble_series(300, 150, 190, 1.05, 4);
    BubbleModelSearch s(y);
    const auto f = best_bubble_fit(s, 2);
    ASSERT_TRUE(f.valid);
    EXPECT_NEAR(static_cast<double>(f.T1), 150.0, 15.0);
    EXPECT_NEAR(static_cast<double>(f.T2), 190.0, 5.0);
}

TEST(TwoStep, NoEpisodesSkipsSecondStep) {
    const Series y(std::vector<double>(100, 1.0));
    std::vector<double> v(100);
    for (std::size_t i = 0; i < 100; ++i) v[i] = std::sin(static_cast<double>(i)) - 0.001 * static_cast<double>(i * i);
    const auto r = two_step_stamp(Series(v), 0.19);
    EXPECT_TRUE(r.preliminary.empty());
    EXPECT_TRUE(r.refined.empty());
}

TEST(TwoStep, RefinedDatesInsideSubsample) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Series y = testing_util::bubble_series(200, 100, 130, 1.04, s);
        const auto r = two_step_stamp(y, default_min_window(200));
        ASSERT_EQ(r.refined.size(), r.subsamples.size());
        for (std::size_t i = 0; i < r.refined.size(); ++i) {
            EXPECT_GE(r.refined[i].origin_index, r.subsamples[i].first);
            EXPECT_LE(r.refined[i].collapse_index, r.subsamples[i].second);
        }
    }
}

TEST(SignStamp, EpsilonAndWindowWidth) {
    EXPECT_EQ(kSignStampEpsilon, 0.01);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Series y = testing_util::bubble_series(100, 50, 75, 1.04, s);
        const auto r = sign_stamp(y, 0.2);
        EXPECT_GE(r.episode.collapse - r.episode.origin, 0.2 - 1e-12);
    }
}

TEST(SignStamp, TinyCaseEqualsOracle) {
    const auto v = testing_util::random_walk(25, 77);
    const auto r = sign_stamp(Series(v), 0.3);
    const auto o = oracle::sign_stamp(oracle::cumulated_signs(v, false), frac_to_index(0.3, 25), 0.01);
    EXPECT_NEAR(r.value, o.value, 1e-9);
    EXPECT_EQ(r.episode.origin_index, o.start);
    EXPECT_EQ(r.episode.collapse_index, o.end);
}
