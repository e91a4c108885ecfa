#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bubbles/ols.hpp"
#include "bubbles/parallel.hpp"
#include "bubbles/random.hpp"
#include "bubbles/recursive.hpp"
#include "bubbles/series.hpp"
#include "bubbles/stats.hpp"

namespace bubbles {

struct BootstrapReport {
    std::string statistic;
    double observed = 0.0;
    std::vector<double> replicates;  ///< NaN marks a degenerate replicate
    double p_value = 1.0;
    std::size_t B = 0;
    std::size_t failed = 0;
    std::uint64_t seed = 0;
    MultiplierKind multiplier = MultiplierKind::gaussian;

    /// Upper (1 - alpha) quantile of the valid replicates.
    [[nodiscard]] double critical_value(double alpha) const;
};

namespace detail {
inline std::vector<double> finite_only(const std::vector<double>& v) {
    std::vector<double> out;
    out.reserve(v.size());
    for (double x : v)
        if (std::isfinite(x)) out.push_back(x);
    return out;
}
}  // namespace detail

inline double BootstrapReport::critical_value(double alpha) const {
    return quantile(detail::finite_only(replicates), 1.0 - alpha);
}

/// (1 + #{replicates >= observed}) / (B + 1) over the valid replicates.
inline double bootstrap_pvalue(double observed, const std::vector<double>& replicates) {
    std::size_t valid = 0, count = 0;
    for (double r : replicates) {
        if (!std::isfinite(r)) continue;
        ++valid;
        if (r >= observed) ++count;
    }
    return static_cast<double>(1 + count) / static_cast<double>(valid + 1);
}

/// y*_1 = 0, y*_t = y*_{t-1} + w_t * dy_t.
inline Series wild_bootstrap_sample(const Series& y, Rng& rng, Multiplier& w) {
    std::vector<double> v(y.size());
    v[0] = 0.0;
    for (std::size_t t = 1; t < y.size(); ++t) v[t] = v[t - 1] + w(rng) * (y[t] - y[t - 1]);
    return Series(std::move(v));
}

/**
 * Runs B wild-bootstrap replicates; stat(sample) returns one value per member
 * statistic. Replicate r draws from stream_rng(seed, r), so results do not
 * depend on the thread schedule. Result is indexed [member][replicate].
 */
template <class F>
std::vector<std::vector<double>> wild_replicates(const Series& y, std::size_t B, MultiplierKind kind,
                                                 std::uint64_t seed, std::size_t members, F&& stat) {
    std::vector<std::vector<double>> out(members, std::vector<double>(B, std::numeric_limits<double>::quiet_NaN()));
    parallel_for(B, [&](std::size_t r) {
        Rng rng = stream_rng(seed, r);
        Multiplier w(kind);
        const Series ys = wild_bootstrap_sample(y, rng, w);
        std::vector<double> vals;
        try {
            vals = stat(ys);
        } catch (const DegenerateFit&) {
            return;
        }
        for (std::size_t m = 0; m < members && m < vals.size(); ++m) out[m][r] = vals[m];
    });
    return out;
}

namespace detail {
inline std::size_t check_failures(const std::vector<double>& reps, const std::string& what) {
    std::size_t failed = 0;
    for (double v : reps)
        if (!std::isfinite(v)) ++failed;
    if (10 * failed > reps.size())
        throw DegenerateFit(what + ": statistic degenerate on " + std::to_string(failed) + " of " +
                            std::to_string(reps.size()) + " bootstrap replicates");
    return failed;
}
}  // namespace detail

/**
 * Wild-bootstrap p-value for a sup statistic. The observed statistic uses the
 * supplied options; replicates always use lag order k = 0.
 */
inline BootstrapReport wild_bootstrap_pvalue(const Series& y, StatKind kind, const TestOptions& opts,
                                             std::size_t B, MultiplierKind mult, std::uint64_t seed) {
    if (B < 99) throw std::invalid_argument("bootstrap needs B >= 99");
    BootstrapReport rep;
    rep.statistic = to_string(kind);
    rep.B = B;
    rep.seed = seed;
    rep.multiplier = mult;
    rep.observed = compute_statistic(kind, y, opts);
    TestOptions ro = opts;
    ro.adf.k = 0;
    ro.sign.filter_lags = 0;
    auto reps = wild_replicates(y, B, mult, seed, 1, [&](const Series& ys) {
        return std::vector<double>{compute_statistic(kind, ys, ro)};
    });
    rep.replicates = std::move(reps[0]);
    rep.failed = detail::check_failures(rep.replicates, rep.statistic);
    rep.p_value = bootstrap_pvalue(rep.observed, rep.replicates);
    return rep;
}

inline constexpr std::size_t kDefaultControlWindow = 24;

struct CompositeMonitorResult {
    double critical_value = 0.0;
    std::vector<double> maxima;  ///< M* per replicate
    std::size_t first_end = 0;   ///< floor(tau0 T)
    std::size_t last_end = 0;    ///< floor(tau0 T) + T_b - 1
    std::vector<double> phi;     ///< fitted lag coefficients from the null regression
};

/**
 * Composite bootstrap critical value for the maximum BSADF over the control
 * window [floor(tau0 T), floor(tau0 T) + T_b - 1]. The null regression
 * dy_t = mu + sum_j phi_j dy_{t-j} + e_t is fitted on the full series; the
 * bootstrap recursion dy*_t = sum_j phi_j dy*_{t-j} + w_t e_t starts from
 * y*_i = y_i, i <= k+1, and uses residuals at matching time indices.
 */
inline CompositeMonitorResult composite_monitor_cv(const Series& y, double tau0, std::size_t T_b,
                                                   std::size_t B, std::uint64_t seed,
                                                   const AdfConfig& cfg = {}, double alpha = 0.05,
                                                   MultiplierKind mult = MultiplierKind::gaussian) {
    if (T_b < 1) throw std::invalid_argument("control window T_b must be at least 1");
    if (B < 1) throw std::invalid_argument("bootstrap needs B >= 1");
    const std::size_t T = y.size();
    const auto k = static_cast<std::size_t>(cfg.k);
    const std::size_t w0 = frac_to_index(tau0, T);
    const std::size_t N = w0 + T_b - 1;
    if (N > T) throw std::invalid_argument("series shorter than floor(tau0 T) + T_b - 1");
    if (T < 2 * k + 4) throw std::invalid_argument("series too short for the null regression");

    const auto& v = y.values();
    const std::size_t first = k + 2;
    const std::size_t n = T - first + 1;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(1 + k));
    Eigen::VectorXd d(static_cast<Eigen::Index>(n));
    for (std::size_t t = first; t <= T; ++t) {
        const auto i = static_cast<Eigen::Index>(t - first);
        X(i, 0) = 1.0;
        for (std::size_t j = 1; j <= k; ++j) X(i, static_cast<Eigen::Index>(j)) = v[t - 1 - j] - v[t - 2 - j];
        d(i) = v[t - 1] - v[t - 2];
    }
    OlsResult fit;
    try {
        fit = ols(X, d);
    } catch (const std::invalid_argument& e) {
        throw DegenerateFit(std::string("null regression: ") + e.what());
    }

    CompositeMonitorResult res;
    res.first_end = w0;
    res.last_end = N;
    for (std::size_t j = 1; j <= k; ++j) res.phi.push_back(fit.coeffs(static_cast<Eigen::Index>(j)));
    std::vector<double> resid(T + 1, 0.0);  // resid[t], t = k+2..T
    for (std::size_t t = first; t <= T; ++t) resid[t] = fit.residuals(static_cast<Eigen::Index>(t - first));

    AdfConfig bcfg = cfg;
    res.maxima.assign(B, std::numeric_limits<double>::quiet_NaN());
    parallel_for(B, [&](std::size_t r) {
        Rng rng = stream_rng(seed, r);
        Multiplier w(mult);
        std::vector<double> ys(N);
        std::vector<double> dys(N + 1, 0.0);  // dys[t], t = 2..N
        for (std::size_t i = 1; i <= std::min(k + 1, N); ++i) {
            ys[i - 1] = v[i - 1];
            if (i >= 2) dys[i] = v[i - 1] - v[i - 2];
        }
        for (std::size_t t = k + 2; t <= N; ++t) {
            double dt = w(rng) * resid[t];
            for (std::size_t j = 1; j <= k; ++j) dt += res.phi[j - 1] * dys[t - j];
            dys[t] = dt;
            ys[t - 1] = ys[t - 2] + dt;
        }
        try {
            const Series s(std::move(ys));
            res.maxima[r] = bsadf_range(s, w0, w0, N, bcfg, tau0).value;
        } catch (const DegenerateFit&) {
        }
    });
    detail::check_failures(res.maxima, "composite bootstrap");
    res.critical_value = quantile(detail::finite_only(res.maxima), 1.0 - alpha);
    return res;
}

struct SubsamplingCv {
    double cv_S = 0.0;
    double cv_R = 0.0;
    std::optional<double> cv_Sw;  ///< absent when every subsample window is flat
    std::size_t subsamples = 0;
    std::optional<std::string> warning;
};

/// Empirical quantiles of S, R and S_w over windows anchored at j = 1..T_train - m.
inline SubsamplingCv subsampling_cv(const Series& training, std::size_t m, double q) {
    if (m < 2) throw std::invalid_argument("window length m must be at least 2");
    if (training.size() < 2 * m) throw std::invalid_argument("training span shorter than 2m");
    std::vector<double> S, R, Sw;
    for (std::size_t j = 1; j + m <= training.size(); ++j) {
        const auto e = end_of_sample_stats(training, m, j);
        S.push_back(e.S);
        R.push_back(e.R);
        if (e.S_w) Sw.push_back(*e.S_w);
    }
    SubsamplingCv r;
    r.subsamples = S.size();
    r.cv_S = quantile(S, q);
    r.cv_R = quantile(R, q);
    if (!Sw.empty()) r.cv_Sw = quantile(Sw, q);
    if (r.subsamples < 20)
        r.warning = "only " + std::to_string(r.subsamples) + " subsamples available";
    return r;
}

struct UnionReport {
    std::vector<std::string> members;
    std::vector<double> statistics;
    std::vector<double> member_cv;  ///< bootstrap q* of each member
    double U = 0.0;
    double cv_U = 0.0;
    bool reject = false;
    std::size_t B = 0;
    std::uint64_t seed = 0;
};

/**
 * Bootstrap union of rejections: U = max_i (q*_1 / q*_i) stat_i compared with
 * the (1 - alpha) quantile of the same combination over the replicates. All
 * quantities come from one replicate set.
 */
inline UnionReport bootstrap_union(const Series& y, const std::vector<StatKind>& tests,
                                   const TestOptions& opts, std::size_t B, std::uint64_t seed,
                                   double alpha = 0.05, MultiplierKind mult = MultiplierKind::gaussian) {
    if (tests.empty()) throw std::invalid_argument("union needs at least one test");
    if (B < 99) throw std::invalid_argument("bootstrap needs B >= 99");
    const std::size_t M = tests.size();
    UnionReport u;
    u.B = B;
    u.seed = seed;
    for (auto k : tests) {
        u.members.push_back(to_string(k));
        u.statistics.push_back(compute_statistic(k, y, opts));
    }
    TestOptions ro = opts;
    ro.adf.k = 0;
    ro.sign.filter_lags = 0;
    auto reps = wild_replicates(y, B, mult, seed, M, [&](const Series& ys) {
        std::vector<double> v(M);
        for (std::size_t i = 0; i < M; ++i) v[i] = compute_statistic(tests[i], ys, ro);
        return v;
    });
    std::vector<bool> ok(B, true);
    for (const auto& m : reps)
        for (std::size_t r = 0; r < B; ++r) ok[r] = ok[r] && std::isfinite(m[r]);
    std::vector<double> flag(B);
    for (std::size_t r = 0; r < B; ++r) flag[r] = ok[r] ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    detail::check_failures(flag, "bootstrap union");

    for (std::size_t i = 0; i < M; ++i) {
        u.member_cv.push_back(quantile(detail::finite_only(reps[i]), 1.0 - alpha));
        if (!(u.member_cv.back() > 0.0))
            throw std::invalid_argument("union scaling needs positive member critical values (" + u.members[i] + ")");
    }
    auto combine = [&](auto value_of) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < M; ++i) best = std::max(best, u.member_cv[0] / u.member_cv[i] * value_of(i));
        return best;
    };
    u.U = combine([&](std::size_t i) { return u.statistics[i]; });
    std::vector<double> ustar;
    for (std::size_t r = 0; r < B; ++r)
        if (ok[r]) ustar.push_back(combine([&](std::size_t i) { return reps[i][r]; }));
    u.cv_U = quantile(ustar, 1.0 - alpha);
    u.reject = u.U > u.cv_U;
    return u;
}

}  // namespace bubbles
