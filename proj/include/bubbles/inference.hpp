#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bubbles/bootstrap.hpp"
#include "bubbles/ols.hpp"
#include "bubbles/random.hpp"
#include "bubbles/recursive.hpp"
#include "bubbles/series.hpp"
#include "bubbles/stats.hpp"

namespace bubbles {

enum class CiMethod { cauchy, t_normal };

inline std::string to_string(CiMethod m) { return m == CiMethod::cauchy ? "cauchy" : "t-normal"; }

struct MildlyExplosiveCI {
    double rho_hat = 1.0;
    double lower = 1.0;
    double upper = 1.0;
    double level = 0.95;
    CiMethod method = CiMethod::cauchy;
    std::size_t nobs = 0;
};

/// Two-sided Cauchy percentile: 6.315, 12.7 and 63.65674 at 90/95/99%, tan(pi*level/2) otherwise.
inline double cauchy_percentile(double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0,1)");
    if (std::abs(level - 0.90) < 1e-12) return 6.315;
    if (std::abs(level - 0.95) < 1e-12) return 12.7;
    if (std::abs(level - 0.99) < 1e-12) return 63.65674;
    return std::tan(std::numbers::pi * level / 2.0);
}

/// Half-width (rho^2 - 1) / rho^n * C of the Cauchy interval.
inline double cauchy_half_width(double rho_hat, std::size_t n, double level) {
    return (rho_hat * rho_hat - 1.0) / std::pow(rho_hat, static_cast<double>(n)) * cauchy_percentile(level);
}

/**
 * Interval for the root of y_t = rho y_{t-1} + e_t (no intercept) fitted over
 * the whole segment; n is the number of autoregressive observations, i.e. the
 * segment length minus the initial value.
 */
inline MildlyExplosiveCI cauchy_ci(const Series& segment, double level = 0.95) {
    const std::size_t n = segment.size() - 1;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t t = 1; t < segment.size(); ++t) {
        sxx += segment[t - 1] * segment[t - 1];
        sxy += segment[t - 1] * segment[t];
    }
    if (!(sxx > 0.0)) throw DegenerateFit("segment is identically zero");
    MildlyExplosiveCI ci;
    ci.method = CiMethod::cauchy;
    ci.level = level;
    ci.nobs = n;
    ci.rho_hat = sxy / sxx;
    if (!(ci.rho_hat > 1.0))
        throw std::domain_error("estimated root " + std::to_string(ci.rho_hat) +
                                " is not above one; the Cauchy interval applies to explosive segments");
    const double h = cauchy_half_width(ci.rho_hat, n, level);
    ci.lower = ci.rho_hat - h;
    ci.upper = ci.rho_hat + h;
    return ci;
}

/**
 * t-inversion interval: the set of rho0 with |rho_hat - rho0| / se <= z_{(1+level)/2}
 * in y_t = [mu] [+ beta t] + rho y_{t-1} + e_t.
 */
inline MildlyExplosiveCI t_ci(const Series& segment, DetSpec det = DetSpec::constant, double level = 0.95) {
    if (segment.size() < 10) throw std::invalid_argument("segment needs at least 10 observations");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0,1)");
    const std::size_t n = segment.size() - 1;
    const int q = det_terms(det);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), q + 1);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(n));
    for (std::size_t t = 1; t <= n; ++t) {
        const auto i = static_cast<Eigen::Index>(t - 1);
        int c = 0;
        if (det != DetSpec::none) X(i, c++) = 1.0;
        if (det == DetSpec::trend) X(i, c++) = static_cast<double>(t + 1);
        X(i, c) = segment[t - 1];
        yv(i) = segment[t];
    }
    const auto r = ols(X, yv);
    MildlyExplosiveCI ci;
    ci.method = CiMethod::t_normal;
    ci.level = level;
    ci.nobs = n;
    ci.rho_hat = r.coeffs(q);
    const double h = normal_quantile(0.5 + level / 2.0) * r.se(static_cast<std::size_t>(q));
    ci.lower = ci.rho_hat - h;
    ci.upper = ci.rho_hat + h;
    return ci;
}

struct DriftExponent {
    double eta_hat = 0.0;
    double eta_tilde = 0.0;
    double mu_hat = 0.0;
    double mu_tilde = 0.0;
};

/// eta = -log|mu| / log T with mu = sum t y_t / sum t^2 and its demeaned-trend variant.
inline DriftExponent drift_exponent(const Series& y) {
    const std::size_t T = y.size();
    if (T < 10) throw std::invalid_argument("drift exponent needs T >= 10");
    const double tbar = (static_cast<double>(T) + 1.0) / 2.0;
    double num = 0, den = 0, numc = 0, denc = 0;
    for (std::size_t i = 0; i < T; ++i) {
        const double t = static_cast<double>(i + 1);
        num += t * y[i];
        den += t * t;
        numc += (t - tbar) * y[i];
        denc += (t - tbar) * (t - tbar);
    }
    DriftExponent d;
    d.mu_hat = num / den;
    d.mu_tilde = numc / denc;
    if (d.mu_hat == 0.0 || d.mu_tilde == 0.0) throw std::domain_error("estimated drift is exactly zero");
    const double lt = std::log(static_cast<double>(T));
    d.eta_hat = -std::log(std::abs(d.mu_hat)) / lt;
    d.eta_tilde = -std::log(std::abs(d.mu_tilde)) / lt;
    return d;
}

struct MigrationResult {
    double beta0_hat = 0.0;
    double beta1_hat = 0.0;
    double se_beta1 = 0.0;
    double Z_beta = 0.0;  ///< -beta1_hat / L(m); large values indicate migration
    double p_value = 1.0;
    std::size_t m = 0;
    std::size_t points = 0;
};

/**
 * Regression of theta_Y(t) - 1 on a constant and (theta_X(t) - 1)(t - T_pX)/m
 * over t = T_pX+1..T_pY with m = T_pY - T_pX; L(m) = a log m. The p-value is
 * the upper normal tail of Z_beta.
 */
inline MigrationResult migration_test(const StatSequence& theta_x, const StatSequence& theta_y,
                                      std::size_t T_px, std::size_t T_py, double a = 1.0) {
    if (T_py <= T_px) throw std::invalid_argument("T_pY must exceed T_pX");
    if (!(a > 0.0)) throw std::invalid_argument("scale a must be positive");
    const std::size_t m = T_py - T_px;
    if (m < 5) throw std::invalid_argument("migration window shorter than 5 points");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(m), 2);
    Eigen::VectorXd v(static_cast<Eigen::Index>(m));
    for (std::size_t t = T_px + 1; t <= T_py; ++t) {
        const auto tx = theta_x.value_at(t);
        const auto ty = theta_y.value_at(t);
        if (!tx || !ty) throw std::invalid_argument("coefficient sequences do not cover index " + std::to_string(t));
        const auto i = static_cast<Eigen::Index>(t - T_px - 1);
        X(i, 0) = 1.0;
        X(i, 1) = (*tx - 1.0) * static_cast<double>(t - T_px) / static_cast<double>(m);
        v(i) = *ty - 1.0;
    }
    const auto r = ols(X, v, /*allow_exact_fit=*/true);
    MigrationResult res;
    res.m = m;
    res.points = m;
    res.beta0_hat = r.coeffs(0);
    res.beta1_hat = r.coeffs(1);
    res.se_beta1 = r.ssr > 0.0 ? r.se(1) : 0.0;
    res.Z_beta = -res.beta1_hat / (a * std::log(static_cast<double>(m)));
    res.p_value = 1.0 - normal_cdf(res.Z_beta);
    return res;
}

inline constexpr int kDefaultMaxDelay = 12;

struct ContagionResult {
    int d_hat = 0;
    double theta1_hat = 0.0;
    double theta2_hat = 0.0;
    double R2 = 0.0;
    std::vector<double> R2_by_delay;  ///< NaN where the overlap is too short
};

/**
 * Delay search for delta_i(s) = theta1 + theta2 (s / (T - S + 1)) delta_core(s - d) + e_s
 * over the rolling-window coefficient sequences; d maximises R^2 with ties to the
 * smallest d. S is the first sequence index and T the sample size.
 */
inline ContagionResult contagion_delay(const StatSequence& core, const StatSequence& target, int d_min = 0,
                                       int d_max = kDefaultMaxDelay) {
    if (d_min < 0 || d_max < d_min) throw std::invalid_argument("invalid delay range");
    if (core.entries.empty() || target.entries.empty()) throw std::invalid_argument("empty coefficient sequence");
    const std::size_t S = core.entries.front().end;
    const std::size_t T = core.sample_size;
    if (T + 1 <= S) throw std::invalid_argument("invalid rolling window");
    const double scale = static_cast<double>(T - S + 1);
    ContagionResult best;
    best.R2 = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (int d = d_min; d <= d_max; ++d) {
        std::vector<double> xs, ys;
        for (const auto& e : target.entries) {
            if (e.skipped || e.end < S + static_cast<std::size_t>(d)) continue;
            const auto c = core.value_at(e.end - static_cast<std::size_t>(d));
            if (!c) continue;
            xs.push_back(static_cast<double>(e.end) / scale * *c);
            ys.push_back(e.value);
        }
        if (xs.size() < 3) {
            best.R2_by_delay.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double n = static_cast<double>(xs.size());
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= n;
        my /= n;
        double sxx = 0, sxy = 0, syy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            sxy += (xs[i] - mx) * (ys[i] - my);
            syy += (ys[i] - my) * (ys[i] - my);
        }
        if (!(sxx > 0.0) || !(syy > 0.0)) {
            best.R2_by_delay.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double b = sxy / sxx;
        const double r2 = b * sxy / syy;
        best.R2_by_delay.push_back(r2);
        if (!found || r2 > best.R2) {
            found = true;
            best.R2 = r2;
            best.d_hat = d;
            best.theta2_hat = b;
            best.theta1_hat = my - b * mx;
        }
    }
    if (!found) throw std::invalid_argument("no delay leaves a usable overlap");
    return best;
}

struct CobubbleResult {
    double S = 0.0;
    double p_value = 1.0;
    std::size_t overlap = 0;
    std::size_t B = 0;
    std::uint64_t seed = 0;
    double intercept = 0.0;
    double slope = 0.0;
};

namespace detail {

/// KPSS-type S = sum_t (partial sum of e)^2 / (n^2 sigma2), sigma2 = mean e^2.
inline double kpss_stat(const Eigen::VectorXd& e, double scale_ref) {
    const double n = static_cast<double>(e.size());
    const double ss = e.squaredNorm();
    if (!(ss > 1e-24 * scale_ref)) return 0.0;
    double partial = 0.0, acc = 0.0;
    for (Eigen::Index t = 0; t < e.size(); ++t) {
        partial += e(t);
        acc += partial * partial;
    }
    return acc / (n * n * (ss / n));
}

}  // namespace detail

/**
 * Co-bubble test: y_t on a constant and x_{t-i} over the overlap, KPSS-type S
 * from the residuals and a wild-bootstrap p-value from y*_t = fitted_t + w_t e_t.
 */
inline CobubbleResult cobubble_test(const Series& y, const Series& x, int i, std::size_t B,
                                    std::uint64_t seed, MultiplierKind mult = MultiplierKind::gaussian) {
    if (y.size() != x.size()) throw std::invalid_argument("series lengths differ");
    const auto T = static_cast<long>(y.size());
    const long lo = i > 0 ? i + 1 : 1;
    const long hi = i < 0 ? T + i : T;
    if (hi - lo + 1 < 10) throw std::invalid_argument("overlap after shifting shorter than 10");
    const auto n = static_cast<Eigen::Index>(hi - lo + 1);
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd v(n);
    for (long t = lo; t <= hi; ++t) {
        const auto r = static_cast<Eigen::Index>(t - lo);
        X(r, 0) = 1.0;
        X(r, 1) = x.at_obs(static_cast<std::size_t>(t - i));
        v(r) = y.at_obs(static_cast<std::size_t>(t));
    }
    {
        const double x0 = X(0, 1);
        bool flat = true;
        for (Eigen::Index r = 1; r < n; ++r) flat = flat && X(r, 1) == x0;
        if (flat) throw std::invalid_argument("x is constant over the overlap");
    }
    const auto fit = ols(X, v, /*allow_exact_fit=*/true);
    const double ref = (v.array() - v.mean()).square().sum() + 1e-300;
    CobubbleResult res;
    res.overlap = static_cast<std::size_t>(n);
    res.B = B;
    res.seed = seed;
    res.intercept = fit.coeffs(0);
    res.slope = fit.coeffs(1);
    res.S = detail::kpss_stat(fit.residuals, ref);
    if (B == 0) return res;

    const Eigen::VectorXd fitted = v - fit.residuals;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    std::vector<double> reps(B);
    parallel_for(B, [&](std::size_t r) {
        Rng rng = stream_rng(seed, r);
        Multiplier w(mult);
        Eigen::VectorXd ys(n);
        for (Eigen::Index t = 0; t < n; ++t) ys(t) = fitted(t) + w(rng) * fit.residuals(t);
        const Eigen::VectorXd e = ys - X * qr.solve(ys);
        reps[r] = detail::kpss_stat(e, ref);
    });
    res.p_value = bootstrap_pvalue(res.S, reps);
    return res;
}

}  // namespace bubbles
