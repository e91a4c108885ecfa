#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bubbles/ols.hpp"
#include "bubbles/series.hpp"
#include "bubbles/stats.hpp"

namespace bubbles {

enum class StatKind { adf, sadf, gsadf, hb, sadf_gls, sbz, ssadf, sgsadf, stadf, gstadf };

inline std::string to_string(StatKind k) {
    switch (k) {
        case StatKind::adf: return "adf";
        case StatKind::sadf: return "sadf";
        case StatKind::gsadf: return "gsadf";
        case StatKind::hb: return "hb";
        case StatKind::sadf_gls: return "sadf-gls";
        case StatKind::sbz: return "sbz";
        case StatKind::ssadf: return "ssadf";
        case StatKind::sgsadf: return "sgsadf";
        case StatKind::stadf: return "stadf";
        case StatKind::gstadf: return "gstadf";
    }
    return "sadf";
}

inline StatKind stat_from_string(std::string_view s) {
    for (auto k : {StatKind::adf, StatKind::sadf, StatKind::gsadf, StatKind::hb, StatKind::sadf_gls,
                   StatKind::sbz, StatKind::ssadf, StatKind::sgsadf, StatKind::stadf, StatKind::gstadf})
        if (to_string(k) == s) return k;
    if (s == "sadf_gls") return StatKind::sadf_gls;
    throw std::invalid_argument("unknown statistic '" + std::string(s) + "'");
}

struct SeqEntry {
    double tau2 = 0.0;
    std::size_t end = 0;  ///< integer counterpart of tau2
    double value = std::numeric_limits<double>::quiet_NaN();
    bool skipped = false;  ///< every window ending here was degenerate
};

/// Recursive statistic values ordered by sample-end fraction.
struct StatSequence {
    std::string kind;
    double tau0 = 0.0;
    std::size_t sample_size = 0;
    std::vector<SeqEntry> entries;

    [[nodiscard]] std::optional<double> value_at(std::size_t end) const {
        for (const auto& e : entries)
            if (e.end == end) return e.skipped ? std::nullopt : std::optional<double>(e.value);
        return std::nullopt;
    }
};

struct SupResult {
    double value = -std::numeric_limits<double>::infinity();
    std::size_t start = 0;  ///< argmax window (start, end]
    std::size_t end = 0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    std::size_t skipped_windows = 0;
    StatSequence sequence;
};

namespace detail {

/// Running maximum with the tie rule: smallest start, then smallest end.
struct ArgMax {
    double value = -std::numeric_limits<double>::infinity();
    std::size_t start = 0, end = 0;
    bool found = false;

    void offer(double v, std::size_t s, std::size_t e) {
        if (!found || v > value || (v == value && (s < start || (s == start && e < end)))) {
            value = v;
            start = s;
            end = e;
            found = true;
        }
    }
};

inline std::size_t min_window_obs(double tau0, std::size_t T, std::size_t min_len) {
    if (!(tau0 > 0.0 && tau0 < 1.0)) throw std::invalid_argument("tau0 must lie in (0,1)");
    const std::size_t w0 = frac_to_index(tau0, T);
    if (w0 < min_len)
        throw std::invalid_argument("minimum window of " + std::to_string(w0) +
                                    " observations is too short (need " + std::to_string(min_len) +
                                    ")");
    return w0;
}

inline SupResult finish(ArgMax best, StatSequence seq, std::size_t skipped, std::size_t T,
                        const char* what) {
    if (!best.found) throw DegenerateFit(std::string(what) + ": every window is degenerate");
    SupResult r;
    r.value = best.value;
    r.start = best.start;
    r.end = best.end;
    r.tau1 = static_cast<double>(best.start) / static_cast<double>(T);
    r.tau2 = static_cast<double>(best.end) / static_cast<double>(T);
    r.skipped_windows = skipped;
    r.sequence = std::move(seq);
    return r;
}

}  // namespace detail

/// Sup of ADF over expanding windows (0, e], e = floor(tau0 T)..T.
inline SupResult sadf(const Series& y, double tau0, const AdfConfig& cfg = {}) {
    const std::size_t T = y.size();
    AdfScanner scan(y, cfg);
    const std::size_t w0 = detail::min_window_obs(tau0, T, scan.min_length());
    StatSequence seq{"sadf", tau0, T, {}};
    detail::ArgMax best;
    std::size_t skipped = 0;
    scan.expanding(0, w0, T, [&](std::size_t e, std::optional<double> t) {
        SeqEntry en{static_cast<double>(e) / static_cast<double>(T), e};
        if (t) {
            en.value = *t;
            best.offer(*t, 0, e);
        } else {
            en.skipped = true;
            ++skipped;
        }
        seq.entries.push_back(en);
    });
    return detail::finish(best, std::move(seq), skipped, T, "sadf");
}

/**
 * Backward sup ADF for end points e_first..e_last with a minimum window of w0
 * observations. Used directly by the composite bootstrap, which fixes w0 from
 * the full sample.
 */
inline SupResult bsadf_range(const Series& y, std::size_t w0, std::size_t e_first,
                             std::size_t e_last, const AdfConfig& cfg = {}, double tau0 = 0.0) {
    const std::size_t T = y.size();
    AdfScanner scan(y, cfg);
    if (w0 < scan.min_length()) throw std::invalid_argument("minimum window too short");
    if (e_first < w0 || e_last > T || e_first > e_last)
        throw std::invalid_argument("bsadf range out of bounds");
    StatSequence seq{"bsadf", tau0, T, {}};
    detail::ArgMax best;
    std::size_t skipped = 0;
    // windows starting at 0 come from the expanding scan shared with sadf
    std::vector<std::optional<double>> from_origin(e_last + 1);
    scan.expanding(0, e_first, e_last, [&](std::size_t e, std::optional<double> t) { from_origin[e] = t; });
    for (std::size_t e = e_first; e <= e_last; ++e) {
        detail::ArgMax local;
        if (from_origin[e]) local.offer(*from_origin[e], 0, e);
        else ++skipped;
        if (e > w0)
            scan.backward(e, e - w0, [&](std::size_t s, std::optional<double> t) {
                if (t) local.offer(*t, s, e);
                else ++skipped;
            }, 1);
        SeqEntry en{static_cast<double>(e) / static_cast<double>(T), e};
        if (local.found) {
            en.value = local.value;
            best.offer(local.value, local.start, e);
        } else {
            en.skipped = true;
        }
        seq.entries.push_back(en);
    }
    return detail::finish(best, std::move(seq), skipped, T, "gsadf");
}

/// Double sup of ADF over all (tau1, tau2) with tau2 - tau1 >= tau0; the
/// sequence holds the backward sup ADF (BSADF) for each tau2.
inline SupResult gsadf(const Series& y, double tau0, const AdfConfig& cfg = {}) {
    const std::size_t T = y.size();
    AdfScanner scan(y, cfg);
    const std::size_t w0 = detail::min_window_obs(tau0, T, scan.min_length());
    SupResult r = bsadf_range(y, w0, w0, T, cfg, tau0);
    r.sequence.kind = "bsadf";
    return r;
}

/**
 * Sup of the recursive Chow t-ratio for phi in
 *   d(y~)_t = phi * 1(t > b) * y~_{t-1} [+ lags] + e_t,   y~ = y - mean(y),
 * over break points b = 0..floor((1-tau0)T). Sequence entries are indexed by b.
 */
inline SupResult hb_sup_chow(const Series& y, double tau0, int k = 0) {
    const std::size_t T = y.size();
    if (!(tau0 > 0.0 && tau0 < 1.0)) throw std::invalid_argument("tau0 must lie in (0,1)");
    if (k < 0) throw std::invalid_argument("lag order must be non-negative");
    const std::size_t bmax = frac_to_index(1.0 - tau0, T);
    const double ybar = mean(std::span<const double>(y.values()));
    std::vector<double> yt(T);
    for (std::size_t i = 0; i < T; ++i) yt[i] = y[i] - ybar;

    const auto ku = static_cast<std::size_t>(k);
    const std::size_t first = ku + 2;  // first usable observation t
    if (T < first + ku + 3) throw std::invalid_argument("series too short for the HB regression");
    const std::size_t n = T - first + 1;

    StatSequence seq{"hb", tau0, T, {}};
    detail::ArgMax best;
    std::size_t skipped = 0;

    auto record = [&](std::size_t b, std::optional<double> t) {
        SeqEntry en{static_cast<double>(b) / static_cast<double>(T), b};
        if (t && std::isfinite(*t)) {
            en.value = *t;
            best.offer(*t, b, T);
        } else {
            en.skipped = true;
            ++skipped;
        }
        seq.entries.push_back(en);
    };

    if (k == 0) {
        // suffix sums over t = b+1..T (t >= 2)
        std::vector<double> sxx(T + 2, 0.0), sxy(T + 2, 0.0);
        double syy = 0.0;
        for (std::size_t t = T; t >= 2; --t) {
            const double x = yt[t - 2];
            const double d = yt[t - 1] - yt[t - 2];
            sxx[t] = sxx[t + 1] + x * x;
            sxy[t] = sxy[t + 1] + x * d;
            syy += d * d;
        }
        for (std::size_t b = 0; b <= bmax; ++b) {
            const std::size_t from = std::max<std::size_t>(b + 1, 2);
            const double Sxx = sxx[from], Sxy = sxy[from];
            std::optional<double> t;
            if (Sxx > 0.0 && from <= T) {
                const double ssr = syy - Sxy * Sxy / Sxx;
                if (ssr > 0.0) {
                    const double s2 = ssr / static_cast<double>(n - 1);
                    t = Sxy / std::sqrt(s2 * Sxx);
                }
            }
            record(b, t);
        }
    } else {
        const auto p = static_cast<Eigen::Index>(1 + k);
        for (std::size_t b = 0; b <= bmax; ++b) {
            Eigen::MatrixXd X(static_cast<Eigen::Index>(n), p);
            Eigen::VectorXd d(static_cast<Eigen::Index>(n));
            for (std::size_t t = first; t <= T; ++t) {
                const auto i = static_cast<Eigen::Index>(t - first);
                X(i, 0) = t > b ? yt[t - 2] : 0.0;
                for (std::size_t j = 1; j <= ku; ++j) X(i, static_cast<Eigen::Index>(j)) = yt[t - 1 - j] - yt[t - 2 - j];
                d(i) = yt[t - 1] - yt[t - 2];
            }
            std::optional<double> t;
            try {
                t = ols(X, d).t(0);
            } catch (const DegenerateFit&) {
            }
            record(b, t);
        }
    }
    return detail::finish(best, std::move(seq), skipped, T, "hb");
}

/**
 * Sup over expanding windows of the GLS-based DF t-ratio. Each prefix (0, e]
 * is GLS-adjusted afresh with rho_bar = 1 + c_bar/e before the no-intercept
 * regression du_t = delta*u_{t-1} + e_t.
 */
inline SupResult sadf_gls(const Series& y, double tau0, DetSpec det = DetSpec::constant,
                          std::optional<double> c_bar = std::nullopt) {
    const std::size_t T = y.size();
    const double cb = c_bar.value_or(default_gls_cbar(det));
    const std::size_t w0 = detail::min_window_obs(tau0, T, det == DetSpec::trend ? 5 : 4);
    StatSequence seq{"adf-gls", tau0, T, {}};
    detail::ArgMax best;
    std::size_t skipped = 0;
    const std::span<const double> all(y.values());
    for (std::size_t e = w0; e <= T; ++e) {
        SeqEntry en{static_cast<double>(e) / static_cast<double>(T), e};
        try {
            const auto u = gls_adjust(all.first(e), det, cb);
            en.value = no_intercept_df_t(u);
            best.offer(en.value, 0, e);
        } catch (const DegenerateFit&) {
            en.skipped = true;
            ++skipped;
        }
        seq.entries.push_back(en);
    }
    return detail::finish(best, std::move(seq), skipped, T, "sadf-gls");
}

/// Default kernel bandwidth T^{-1/5}.
inline double default_bandwidth(std::size_t T) { return std::pow(static_cast<double>(T), -0.2); }

/**
 * Gaussian-kernel weighted averages of v over the rescaled time axis:
 * out_i = sum_j K((j-i)/(T h)) v_j / sum_j K((j-i)/(T h)).
 */
inline std::vector<double> kernel_smooth(std::span<const double> v, std::size_t T, double h) {
    if (!(h > 0.0 && h < 1.0)) throw std::invalid_argument("bandwidth must lie in (0,1)");
    const std::size_t n = v.size();
    std::vector<double> w(n);
    const double scale = static_cast<double>(T) * h;
    for (std::size_t d = 0; d < n; ++d) {
        const double u = static_cast<double>(d) / scale;
        w[d] = std::exp(-0.5 * u * u);
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double wij = w[i > j ? i - j : j - i];
            num += wij * v[j];
            den += wij;
        }
        if (!(den > 0.0)) throw DegenerateFit("zero kernel mass");
        out[i] = num / den;
    }
    return out;
}

/// Nonparametric variance path sigma2_t for t = 2..T (element i is t = i+2).
inline std::vector<double> kernel_variance(const Series& y, double h) {
    auto d = y.differences();
    for (auto& v : d) v *= v;
    auto s2 = kernel_smooth(d, y.size(), h);
    for (double v : s2)
        if (!(v > 0.0)) throw DegenerateFit("zero kernel variance estimate");
    return s2;
}

/**
 * Sup of the variance-weighted statistic BZ over expanding windows, for a
 * given variance path (element i corresponds to t = i+2). y~_t = y_t - y_1.
 */
inline SupResult sbz_with_variance(const Series& y, double tau0, std::span<const double> sigma2) {
    const std::size_t T = y.size();
    if (sigma2.size() != T - 1) throw std::invalid_argument("variance path length must be T-1");
    const std::size_t w0 = detail::min_window_obs(tau0, T, 3);
    StatSequence seq{"bz", tau0, T, {}};
    detail::ArgMax best;
    std::size_t skipped = 0;
    double num = 0.0, den = 0.0;
    const double y1 = y[0];
    for (std::size_t t = 2; t <= T; ++t) {
        const double lag = y[t - 2] - y1;
        const double d = y[t - 1] - y[t - 2];
        const double w = 1.0 / sigma2[t - 2];
        num += d * lag * w;
        den += lag * lag * w;
        if (t < w0) continue;
        SeqEntry en{static_cast<double>(t) / static_cast<double>(T), t};
        if (den > 0.0) {
            en.value = num / std::sqrt(den);
            best.offer(en.value, 0, t);
        } else {
            en.skipped = true;
            ++skipped;
        }
        seq.entries.push_back(en);
    }
    return detail::finish(best, std::move(seq), skipped, T, "sbz");
}

/// SBZ with the Gaussian-kernel variance estimate (default bandwidth T^{-1/5}).
inline SupResult sbz(const Series& y, double tau0, std::optional<double> bandwidth = std::nullopt) {
    const double h = bandwidth.value_or(default_bandwidth(y.size()));
    const auto s2 = kernel_variance(y, h);
    return sbz_with_variance(y, tau0, s2);
}

// ---------------------------------------------------------------------------
// Sign-based statistics
// ---------------------------------------------------------------------------

enum class SignMode { raw, demeaned };

struct SignOptions {
    SignMode mode = SignMode::raw;
    int filter_lags = 0;
};

namespace detail {
inline double sign_of(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}  // namespace detail

/**
 * Cumulated signs C_1..C_T (C_1 = 0). With filter_lags k > 0 the sign is taken
 * of dy_t - sum_j phi_j(t) dy_{t-j}, phi(t) from the regression of dy_i on
 * (1, y_{i-1}, dy_{i-1..i-k}) over i = k+5..t; while that regression has no
 * residual degrees of freedom the raw sign is used.
 */
inline std::vector<double> cumulated_signs(const Series& y, const SignOptions& opt = {}) {
    const std::size_t T = y.size();
    const auto& v = y.values();
    if (opt.filter_lags < 0) throw std::invalid_argument("filter lags must be non-negative");
    const auto k = static_cast<std::size_t>(opt.filter_lags);

    std::vector<double> sgn(T + 1, 0.0);  // sgn[t], t = 2..T
    if (k == 0) {
        for (std::size_t t = 2; t <= T; ++t) sgn[t] = detail::sign_of(v[t - 1] - v[t - 2]);
    } else {
        const AdfConfig cfg{DetSpec::constant, opt.filter_lags};
        const int p = cfg.params();
        if (p > kMaxParams) throw std::invalid_argument("filter lag order too large");
        std::size_t rows = 0;
        double row[kMaxParams];
        for (std::size_t t = 2; t <= T; ++t) {
            const double d = v[t - 1] - v[t - 2];
            sgn[t] = detail::sign_of(d);
            if (t < k + 5) continue;
            std::span<double> x(row, static_cast<std::size_t>(p));
            detail::adf_row(v, t, cfg, x);
            if (++rows <= static_cast<std::size_t>(p)) continue;
            Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), p);
            Eigen::VectorXd dd(static_cast<Eigen::Index>(rows));
            for (std::size_t i = k + 5; i <= t; ++i) {
                detail::adf_row(v, i, cfg, x);
                for (int c = 0; c < p; ++c) X(static_cast<Eigen::Index>(i - k - 5), c) = row[c];
                dd(static_cast<Eigen::Index>(i - k - 5)) = v[i - 1] - v[i - 2];
            }
            try {
                const auto r = ols(X, dd, true);
                double filtered = d;
                for (std::size_t j = 1; j <= k; ++j)
                    filtered -= r.coeffs(static_cast<Eigen::Index>(1 + j)) * (v[t - 1 - j] - v[t - 2 - j]);
                sgn[t] = detail::sign_of(filtered);
            } catch (const DegenerateFit&) {
            } catch (const std::invalid_argument&) {
            }
        }
    }

    if (opt.mode == SignMode::demeaned) {
        double running = 0.0;
        std::vector<double> dm(T + 1, 0.0);
        for (std::size_t t = 2; t <= T; ++t) {
            running += sgn[t];
            dm[t] = sgn[t] - running / static_cast<double>(t - 1);
        }
        sgn = std::move(dm);
    }

    std::vector<double> C(T, 0.0);
    for (std::size_t t = 2; t <= T; ++t) C[t - 1] = C[t - 2] + sgn[t];
    return C;
}

/// O(1) window statistics on cumulated signs via prefix sums.
class SignScan {
public:
    explicit SignScan(std::vector<double> C) : C_(std::move(C)) {
        const std::size_t T = C_.size();
        pxx_.assign(T + 1, 0.0);
        pxy_.assign(T + 1, 0.0);
        pyy_.assign(T + 1, 0.0);
        // rows t = 2..T: x = C_{t-1}, d = C_t - C_{t-1}; prefix index t
        for (std::size_t t = 2; t <= T; ++t) {
            const double x = C_[t - 2];
            const double d = C_[t - 1] - C_[t - 2];
            pxx_[t] = pxx_[t - 1] + x * x;
            pxy_[t] = pxy_[t - 1] + x * d;
            pyy_[t] = pyy_[t - 1] + d * d;
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return C_.size(); }
    [[nodiscard]] const std::vector<double>& levels() const noexcept { return C_; }

    struct Moments {
        double sxx, sxy, syy;
        std::size_t n;
    };

    /// Sums over rows t = s+2..e of the window (s, e].
    [[nodiscard]] Moments moments(std::size_t s, std::size_t e) const {
        const std::size_t lo = s + 1;
        return {pxx_[e] - pxx_[lo], pxy_[e] - pxy_[lo], pyy_[e] - pyy_[lo], e - s - 1};
    }

    /// Residual variance s^2(s, e) = SSR / (n - 1).
    [[nodiscard]] std::optional<double> s2(std::size_t s, std::size_t e) const {
        const auto m = moments(s, e);
        if (m.n < 2 || !(m.sxx > 0.0)) return std::nullopt;
        const double ssr = m.syy - m.sxy * m.sxy / m.sxx;
        if (!(ssr > 0.0)) return std::nullopt;
        return ssr / static_cast<double>(m.n - 1);
    }

    /// sADF t-ratio over (s, e]; nullopt when degenerate.
    [[nodiscard]] std::optional<double> sadf(std::size_t s, std::size_t e) const {
        const auto m = moments(s, e);
        const auto v = s2(s, e);
        if (!v) return std::nullopt;
        return (m.sxy / m.sxx) / std::sqrt(*v / m.sxx);
    }

    /// Statistic with s^2 replaced by a supplied variance (used by sign dating).
    [[nodiscard]] std::optional<double> sadf_with_variance(std::size_t s, std::size_t e,
                                                           double variance) const {
        const auto m = moments(s, e);
        if (m.n < 2 || !(m.sxx > 0.0) || !(variance > 0.0)) return std::nullopt;
        return (m.sxy / m.sxx) / std::sqrt(variance / m.sxx);
    }

private:
    std::vector<double> C_;
    std::vector<double> pxx_, pxy_, pyy_;
};

struct SignResult {
    SupResult ssadf;
    SupResult sgsadf;
};

/// sSADF (tau1 = 0) and sGSADF (double sup) on cumulated signs.
inline SignResult sign_statistics(const Series& y, double tau0, const SignOptions& opt = {}) {
    const std::size_t T = y.size();
    const std::size_t w0 = detail::min_window_obs(tau0, T, 3);
    SignScan scan(cumulated_signs(y, opt));
    {
        const auto& C = scan.levels();
        bool any = false;
        for (std::size_t t = 1; t < T; ++t) any = any || C[t] != C[t - 1];
        if (!any) throw DegenerateFit("all signs are zero");
    }

    StatSequence s1{"sadf-sign", tau0, T, {}};
    StatSequence s2{"bsadf-sign", tau0, T, {}};
    detail::ArgMax b1, b2;
    std::size_t skip1 = 0, skip2 = 0;
    for (std::size_t e = w0; e <= T; ++e) {
        const double tau2 = static_cast<double>(e) / static_cast<double>(T);
        SeqEntry en1{tau2, e}, en2{tau2, e};
        if (auto v = scan.sadf(0, e)) {
            en1.value = *v;
            b1.offer(*v, 0, e);
        } else {
            en1.skipped = true;
            ++skip1;
        }
        detail::ArgMax local;
        for (std::size_t s = 0; s + w0 <= e; ++s) {
            if (auto v = scan.sadf(s, e)) local.offer(*v, s, e);
            else ++skip2;
        }
        if (local.found) {
            en2.value = local.value;
            b2.offer(local.value, local.start, e);
        } else {
            en2.skipped = true;
        }
        s1.entries.push_back(en1);
        s2.entries.push_back(en2);
    }
    return {detail::finish(b1, std::move(s1), skip1, T, "ssadf"),
            detail::finish(b2, std::move(s2), skip2, T, "sgsadf")};
}

// ---------------------------------------------------------------------------
// Variance profile and time-transformed statistics
// ---------------------------------------------------------------------------

/**
 * Estimated variance profile on the grid u/n, u = 0..n, where n = T-1 is the
 * number of increments and the first observation plays the role of y_0.
 */
struct VarianceProfile {
    std::vector<double> eta;        ///< eta[u], eta[0] = 0, eta[n] = 1
    std::vector<double> residuals;  ///< residual proxy for increments 1..n
    double omega2 = 0.0;            ///< mean squared residual

    [[nodiscard]] std::size_t increments() const noexcept { return eta.size() - 1; }

    /// Left-most preimage of v under the piecewise-linear profile, in increment units [0, n].
    [[nodiscard]] double inverse(double v) const {
        const std::size_t n = increments();
        if (v <= 0.0) return 0.0;
        if (v >= 1.0) {
            for (std::size_t u = 0; u <= n; ++u)
                if (eta[u] >= 1.0) return static_cast<double>(u);
            return static_cast<double>(n);
        }
        const auto it = std::lower_bound(eta.begin(), eta.end(), v);
        const auto u = static_cast<std::size_t>(it - eta.begin());
        if (eta[u] == v || u == 0) return static_cast<double>(u);
        const double a = eta[u - 1], b = eta[u];
        return static_cast<double>(u - 1) + (v - a) / (b - a);
    }
};

/// Profile from residuals of increments around a kernel-smoothed local mean.
inline VarianceProfile variance_profile(const Series& y, std::optional<double> bandwidth = std::nullopt) {
    const std::size_t T = y.size();
    if (T < 20) throw std::invalid_argument("variance profile needs T >= 20");
    const double h = bandwidth.value_or(default_bandwidth(T));
    const auto d = y.differences();
    const auto m = kernel_smooth(d, T, h);
    VarianceProfile p;
    const std::size_t n = d.size();
    p.residuals.resize(n);
    p.eta.assign(n + 1, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p.residuals[i] = d[i] - m[i];
        total += p.residuals[i] * p.residuals[i];
        p.eta[i + 1] = total;
    }
    if (!(total > 0.0)) throw DegenerateFit("all residuals are zero");
    for (auto& e : p.eta) e /= total;
    p.eta[n] = 1.0;
    p.omega2 = total / static_cast<double>(n);
    return p;
}

/// Homoskedastic profile eta(s) = s with the given average variance.
inline VarianceProfile identity_profile(std::size_t increments, double omega2) {
    VarianceProfile p;
    p.eta.resize(increments + 1);
    for (std::size_t u = 0; u <= increments; ++u)
        p.eta[u] = static_cast<double>(u) / static_cast<double>(increments);
    p.omega2 = omega2;
    return p;
}

/// y~_t = y_{t'} - y_0 with t' = floor(g(t/n) n), t = 0..n.
inline std::vector<double> time_transform(const Series& y, const VarianceProfile& p) {
    const std::size_t n = p.increments();
    if (n + 1 != y.size()) throw std::invalid_argument("profile does not match series length");
    std::vector<double> out(n + 1);
    for (std::size_t t = 0; t <= n; ++t) {
        const double x = p.inverse(static_cast<double>(t) / static_cast<double>(n));
        const auto tp = std::min<std::size_t>(static_cast<std::size_t>(std::floor(x + 1e-9)), n);
        out[t] = y[tp] - y[0];
    }
    return out;
}

/// TADF over (s, e] on transformed levels z_0..z_n.
inline std::optional<double> tadf_window(std::span<const double> z, std::span<const double> prefix_sq,
                                         double omega2, std::size_t s, std::size_t e) {
    const double den2 = prefix_sq[e] - prefix_sq[s];
    if (!(den2 > 0.0)) return std::nullopt;
    const double num = z[e] * z[e] - z[s] * z[s] - omega2 * static_cast<double>(e - s);
    return num / (2.0 * std::sqrt(omega2) * std::sqrt(den2));
}

struct TimeTransformedResult {
    SupResult stadf;
    SupResult gstadf;
    VarianceProfile profile;
    std::vector<double> transformed;
};

/// STADF / GSTADF on already-transformed levels z_0..z_n.
inline TimeTransformedResult tadf_family(std::vector<double> z, double omega2, double tau0) {
    if (!(omega2 > 0.0)) throw std::invalid_argument("average variance must be positive");
    const std::size_t n = z.size() - 1;
    const std::size_t w0 = detail::min_window_obs(tau0, n, 2);
    std::vector<double> q(n + 1, 0.0);  // q[e] = sum_{i<e} z_i^2
    for (std::size_t e = 1; e <= n; ++e) q[e] = q[e - 1] + z[e - 1] * z[e - 1];

    StatSequence s1{"tadf", tau0, n, {}};
    StatSequence s2{"btadf", tau0, n, {}};
    detail::ArgMax b1, b2;
    std::size_t skip1 = 0, skip2 = 0;
    for (std::size_t e = w0; e <= n; ++e) {
        const double tau2 = static_cast<double>(e) / static_cast<double>(n);
        SeqEntry en1{tau2, e}, en2{tau2, e};
        if (auto v = tadf_window(z, q, omega2, 0, e)) {
            en1.value = *v;
            b1.offer(*v, 0, e);
        } else {
            en1.skipped = true;
            ++skip1;
        }
        detail::ArgMax local;
        for (std::size_t s = 0; s + w0 <= e; ++s) {
            if (auto v = tadf_window(z, q, omega2, s, e)) local.offer(*v, s, e);
            else ++skip2;
        }
        if (local.found) {
            en2.value = local.value;
            b2.offer(local.value, local.start, e);
        } else {
            en2.skipped = true;
        }
        s1.entries.push_back(en1);
        s2.entries.push_back(en2);
    }
    TimeTransformedResult r;
    r.stadf = detail::finish(b1, std::move(s1), skip1, n, "stadf");
    r.gstadf = detail::finish(b2, std::move(s2), skip2, n, "gstadf");
    r.transformed = std::move(z);
    return r;
}

inline TimeTransformedResult time_transformed_tests(const Series& y, double tau0,
                                                    std::optional<double> bandwidth = std::nullopt) {
    auto profile = variance_profile(y, bandwidth);
    auto z = time_transform(y, profile);
    auto r = tadf_family(std::move(z), profile.omega2, tau0);
    r.profile = std::move(profile);
    return r;
}

// ---------------------------------------------------------------------------
// End-of-sample statistics
// ---------------------------------------------------------------------------

struct EndOfSampleStats {
    double S = 0.0;
    double R = 0.0;
    std::optional<double> S_w;  ///< undefined on a flat window
};

inline constexpr std::size_t kDefaultEndWindow = 10;

/// S, R and studentised S over t = j+1..j+m (1-based; requires j >= 1, j+m <= T).
inline EndOfSampleStats end_of_sample_stats(const Series& y, std::size_t m, std::size_t j) {
    if (m < 2) throw std::invalid_argument("window length m must be at least 2");
    if (j < 1 || j + m > y.size()) throw std::invalid_argument("window anchor out of range");
    EndOfSampleStats r;
    double sq = 0.0;
    std::vector<double> d(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t t = j + 1 + i;
        d[i] = y.at_obs(t) - y.at_obs(t - 1);
        const double term = static_cast<double>(i + 1) * d[i];
        r.S += term;
        sq += term * term;
    }
    double tail = 0.0;
    for (std::size_t i = m; i-- > 0;) {
        tail += d[i];
        r.R += tail * tail;
    }
    if (sq > 0.0) r.S_w = r.S / std::sqrt(sq);
    return r;
}

/// Union decision: reject when any statistic exceeds psi times its own critical value.
inline bool union_of_rejections(std::span<const double> stats, std::span<const double> cvs, double psi = 1.0) {
    if (stats.size() != cvs.size()) throw std::invalid_argument("statistics and critical values differ in length");
    if (stats.size() < 2) throw std::invalid_argument("a union needs at least two tests");
    if (!(psi > 0.0)) throw std::invalid_argument("scaling constant must be positive");
    for (std::size_t i = 0; i < stats.size(); ++i) {
        if (!std::isfinite(cvs[i])) throw std::invalid_argument("critical values must be finite");
        if (stats[i] > psi * cvs[i]) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Dispatcher and coefficient sequences
// ---------------------------------------------------------------------------

/// Options shared by every statistic; fields irrelevant to a kind are ignored.
struct TestOptions {
    double tau0 = 0.1;
    AdfConfig adf{};
    std::optional<double> c_bar;
    std::optional<double> bandwidth;
    SignOptions sign{};
};

inline SupResult compute_sup(StatKind kind, const Series& y, const TestOptions& o) {
    switch (kind) {
        case StatKind::adf: {
            SupResult r;
            r.value = adf_stat(y, 0, y.size(), o.adf);
            r.end = y.size();
            r.tau2 = 1.0;
            return r;
        }
        case StatKind::sadf: return sadf(y, o.tau0, o.adf);
        case StatKind::gsadf: return gsadf(y, o.tau0, o.adf);
        case StatKind::hb: return hb_sup_chow(y, o.tau0, o.adf.k);
        case StatKind::sadf_gls: return sadf_gls(y, o.tau0, o.adf.det, o.c_bar);
        case StatKind::sbz: return sbz(y, o.tau0, o.bandwidth);
        case StatKind::ssadf: return sign_statistics(y, o.tau0, o.sign).ssadf;
        case StatKind::sgsadf: return sign_statistics(y, o.tau0, o.sign).sgsadf;
        case StatKind::stadf: return time_transformed_tests(y, o.tau0, o.bandwidth).stadf;
        case StatKind::gstadf: return time_transformed_tests(y, o.tau0, o.bandwidth).gstadf;
    }
    throw std::invalid_argument("unknown statistic");
}

inline double compute_statistic(StatKind kind, const Series& y, const TestOptions& o) {
    return compute_sup(kind, y, o).value;
}

/// rho_hat over expanding windows (0, e], e = w0..T.
inline StatSequence recursive_coefficients(const Series& y, std::size_t w0, const AdfConfig& cfg = {}) {
    StatSequence seq{"rho-recursive", 0.0, y.size(), {}};
    for (std::size_t e = w0; e <= y.size(); ++e) {
        SeqEntry en{static_cast<double>(e) / static_cast<double>(y.size()), e};
        try {
            en.value = fit_adf_window(y, 0, e, cfg).rho_hat;
        } catch (const DegenerateFit&) {
            en.skipped = true;
        }
        seq.entries.push_back(en);
    }
    return seq;
}

/// delta_hat over rolling windows (s-S, s], s = S..T.
inline StatSequence rolling_coefficients(const Series& y, std::size_t S, const AdfConfig& cfg = {}) {
    if (S > y.size()) throw std::invalid_argument("rolling window longer than the series");
    StatSequence seq{"delta-rolling", 0.0, y.size(), {}};
    for (std::size_t s = S; s <= y.size(); ++s) {
        SeqEntry en{static_cast<double>(s) / static_cast<double>(y.size()), s};
        try {
            en.value = fit_adf_window(y, s - S, s, cfg).delta_hat;
        } catch (const DegenerateFit&) {
            en.skipped = true;
        }
        seq.entries.push_back(en);
    }
    return seq;
}

}  // namespace bubbles
