#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "bubbles/series.hpp"

namespace bubbles {

/// Deterministic terms and lag order of the Dickey-Fuller regression.
struct AdfConfig {
    DetSpec det = DetSpec::constant;
    int k = 0;

    [[nodiscard]] int params() const noexcept { return det_terms(det) + 1 + k; }
    /// Position of the y_{t-1} coefficient in AdfFit::coeffs.
    [[nodiscard]] int delta_index() const noexcept { return det_terms(det); }
};

/**
 * Least-squares fit of
 *   dy_t = [mu] + [beta*t] + delta*y_{t-1} + sum_j phi_j dy_{t-j} + e_t
 * over one window. coeffs are ordered [deterministics..., delta, phi_1..phi_k];
 * the trend regressor is the absolute observation index t.
 */
struct AdfFit {
    double delta_hat = 0.0;
    double rho_hat = 1.0;
    double t_stat = 0.0;
    double se_delta = 0.0;
    double sigma2_hat = 0.0;
    double ssr = 0.0;
    std::size_t nobs = 0;
    std::vector<double> residuals;
    std::vector<double> coeffs;
};

/// Plain OLS result used by every dense fit in the library.
struct OlsResult {
    Eigen::VectorXd coeffs;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd xtx_inv;  ///< (X'X)^{-1}
    double ssr = 0.0;
    std::size_t nobs = 0;
    std::size_t params = 0;

    [[nodiscard]] double sigma2() const { return ssr / static_cast<double>(nobs - params); }
    [[nodiscard]] double se(std::size_t j) const { return std::sqrt(sigma2() * xtx_inv(j, j)); }
    [[nodiscard]] double t(std::size_t j) const { return coeffs(j) / se(j); }
};

/**
 * Rank-revealing QR least squares, computed in extended precision. Throws DegenerateFit for rank-deficient
 * designs and for exact fits (zero residual variance), and invalid_argument
 * when there are no residual degrees of freedom.
 */
inline OlsResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     bool allow_exact_fit = false) {
    using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    if (n <= p) throw std::invalid_argument("regression has no residual degrees of freedom");
    const MatL Xl = X.cast<long double>();
    const VecL yl = y.cast<long double>();
    Eigen::ColPivHouseholderQR<MatL> qr(Xl);
    qr.setThreshold(1e-10L);
    if (static_cast<std::size_t>(qr.rank()) < p) throw DegenerateFit("singular design matrix");

    const VecL b = qr.solve(yl);
    const VecL e = yl - Xl * b;
    const auto pi = static_cast<Eigen::Index>(p);
    const MatL R = qr.matrixR().topLeftCorner(pi, pi).template triangularView<Eigen::Upper>();
    const MatL Rinv = R.template triangularView<Eigen::Upper>().solve(MatL::Identity(pi, pi));
    const MatL cz = Rinv * Rinv.transpose();
    const MatL inv = qr.colsPermutation() * cz * qr.colsPermutation().transpose();

    OlsResult r;
    r.nobs = n;
    r.params = p;
    r.coeffs = b.cast<double>();
    r.residuals = e.cast<double>();
    r.ssr = static_cast<double>(e.squaredNorm());
    r.xtx_inv = inv.cast<double>();
    if (!allow_exact_fit && !(r.ssr > 0.0)) throw DegenerateFit("zero residual variance");
    return r;
}

namespace detail {

inline void check_window(const Series& y, std::size_t start, std::size_t end,
                         const AdfConfig& cfg) {
    if (cfg.k < 0) throw std::invalid_argument("lag order must be non-negative");
    if (end > y.size() || start >= end) throw std::invalid_argument("window out of range");
    const std::size_t len = end - start;
    const auto need = static_cast<std::size_t>(cfg.k + 1 + cfg.params() + 1);
    if (len < need)
        throw std::invalid_argument("window too short for the regression (length " +
                                    std::to_string(len) + ", need " + std::to_string(need) + ")");
}

/// Fills the regressor row of observation t (1-based). x must hold cfg.params() values.
inline void adf_row(const std::vector<double>& v, std::size_t t, const AdfConfig& cfg,
                    std::span<double> x) {
    int c = 0;
    if (cfg.det != DetSpec::none) x[c++] = 1.0;
    if (cfg.det == DetSpec::trend) x[c++] = static_cast<double>(t);
    x[c++] = v[t - 2];
    for (int j = 1; j <= cfg.k; ++j) x[c++] = v[t - 1 - j] - v[t - 2 - j];
}

inline double adf_target(const std::vector<double>& v, std::size_t t) { return v[t - 1] - v[t - 2]; }

}  // namespace detail

/**
 * Dense ADF regression over the half-open window (start, end] of 1-based
 * observations. Only values inside the window are used: the regression runs
 * over t = start+k+2 .. end, so nobs = (end - start) - k - 1. The window is
 * anchored at its first value (when deterministics are present) and divided
 * by a power of two before fitting, so exactly representable shifts and
 * power-of-two rescalings leave the t-ratio bit-identical.
 */
inline AdfFit fit_adf_window(const Series& y, std::size_t start, std::size_t end,
                             const AdfConfig& cfg = {}) {
    detail::check_window(y, start, end, cfg);
    const auto p = static_cast<std::size_t>(cfg.params());
    const std::size_t first = start + static_cast<std::size_t>(cfg.k) + 2;
    const std::size_t n = end - first + 1;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    Eigen::VectorXd d(static_cast<Eigen::Index>(n));
    const auto& v = y.values();
    const double anchor = cfg.det == DetSpec::none ? 0.0 : v[start];
    double top = 0.0;
    for (std::size_t i = start; i < end; ++i) top = std::max(top, std::abs(v[i] - anchor));
    int exponent = 0;
    if (top > 0.0) (void)std::frexp(top, &exponent);
    std::vector<double> w(v.size(), 0.0);
    for (std::size_t i = start; i < end; ++i) w[i] = std::ldexp(v[i] - anchor, -exponent);
    std::vector<double> row(p);
    for (std::size_t t = first; t <= end; ++t) {
        detail::adf_row(w, t, cfg, row);
        const auto i = static_cast<Eigen::Index>(t - first);
        for (std::size_t j = 0; j < p; ++j) X(i, static_cast<Eigen::Index>(j)) = row[j];
        d(i) = detail::adf_target(w, t);
    }
    const OlsResult r = ols(X, d, /*allow_exact_fit=*/true);
    const auto di = static_cast<std::size_t>(cfg.delta_index());

    AdfFit f;
    f.nobs = n;
    f.delta_hat = r.coeffs(static_cast<Eigen::Index>(di));
    f.rho_hat = 1.0 + f.delta_hat;
    f.ssr = std::ldexp(r.ssr, 2 * exponent);
    f.sigma2_hat = std::ldexp(r.sigma2(), 2 * exponent);
    f.se_delta = r.se(di);
    if (r.ssr > 0.0) f.t_stat = f.delta_hat / f.se_delta;
    else if (f.delta_hat != 0.0) f.t_stat = std::copysign(std::numeric_limits<double>::infinity(), f.delta_hat);
    else throw DegenerateFit("zero residual variance");
    for (Eigen::Index i = 0; i < r.residuals.size(); ++i) f.residuals.push_back(std::ldexp(r.residuals(i), exponent));
    f.coeffs.assign(r.coeffs.data(), r.coeffs.data() + r.coeffs.size());
    for (std::size_t j = 0; j < static_cast<std::size_t>(det_terms(cfg.det)); ++j)
        f.coeffs[j] = std::ldexp(f.coeffs[j], exponent);
    if (cfg.det != DetSpec::none) f.coeffs[0] -= f.delta_hat * anchor;
    return f;
}

/// ADF t-ratio for delta over (start, end].
inline double adf_stat(const Series& y, std::size_t start, std::size_t end,
                       const AdfConfig& cfg = {}) {
    return fit_adf_window(y, start, end, cfg).t_stat;
}

/// Default GLS non-centrality: 1.6 with a constant, 2.4 with a trend.
inline double default_gls_cbar(DetSpec det) {
    switch (det) {
        case DetSpec::constant: return 1.6;
        case DetSpec::trend: return 2.4;
        case DetSpec::none: break;
    }
    throw std::invalid_argument("GLS adjustment needs a constant or trend");
}

/**
 * Quasi-differenced (GLS) removal of deterministics with rho_bar = 1 + c_bar/n,
 * n being the length of the supplied series. Returns u_t = y_t - z_t'theta.
 */
inline std::vector<double> gls_adjust(std::span<const double> y, DetSpec det, double c_bar) {
    if (det == DetSpec::none) throw std::invalid_argument("GLS adjustment needs a constant or trend");
    if (y.size() < 3) throw std::invalid_argument("GLS adjustment needs at least 3 observations");
    if (!std::isfinite(c_bar)) throw std::invalid_argument("c_bar must be finite");
    const auto n = static_cast<Eigen::Index>(y.size());
    const Eigen::Index q = det == DetSpec::trend ? 2 : 1;
    const double rho = 1.0 + c_bar / static_cast<double>(y.size());

    Eigen::MatrixXd Z(n, q);
    Eigen::VectorXd yq(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const double tt = static_cast<double>(t + 1);
        const auto yt = y[static_cast<std::size_t>(t)];
        if (t == 0) {
            yq(t) = yt;
            Z(t, 0) = 1.0;
            if (q == 2) Z(t, 1) = tt;
        } else {
            yq(t) = yt - rho * y[static_cast<std::size_t>(t - 1)];
            Z(t, 0) = 1.0 - rho;
            if (q == 2) Z(t, 1) = tt - rho * (tt - 1.0);
        }
    }
    const OlsResult r = ols(Z, yq, /*allow_exact_fit=*/true);
    std::vector<double> u(y.size());
    for (Eigen::Index t = 0; t < n; ++t) {
        double fitted = r.coeffs(0);
        if (q == 2) fitted += r.coeffs(1) * static_cast<double>(t + 1);
        u[static_cast<std::size_t>(t)] = y[static_cast<std::size_t>(t)] - fitted;
    }
    return u;
}

inline Series gls_adjust(const Series& y, DetSpec det, double c_bar) {
    return Series(gls_adjust(std::span<const double>(y.values()), det, c_bar), y.labels(), y.name());
}

/// t-ratio of the no-intercept regression dz_t = delta*z_{t-1} + e_t, t = 2..n.
inline double no_intercept_df_t(std::span<const double> z) {
    if (z.size() < 3) throw std::invalid_argument("need at least 3 observations");
    double sxx = 0, sxy = 0;
    for (std::size_t t = 1; t < z.size(); ++t) {
        sxx += z[t - 1] * z[t - 1];
        sxy += z[t - 1] * (z[t] - z[t - 1]);
    }
    if (!(sxx > 0)) throw DegenerateFit("zero regressor variation");
    const double b = sxy / sxx;
    double ssr = 0;
    for (std::size_t t = 1; t < z.size(); ++t) {
        const double e = (z[t] - z[t - 1]) - b * z[t - 1];
        ssr += e * e;
    }
    if (!(ssr > 0)) throw DegenerateFit("zero residual variance");
    const double s2 = ssr / static_cast<double>(z.size() - 2);
    return b / std::sqrt(s2 / sxx);
}

// ---------------------------------------------------------------------------
// Incremental machinery for recursive scans.
// ---------------------------------------------------------------------------

inline constexpr int kMaxParams = 16;
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxParams, kMaxParams>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxParams, 1>;

/**
 * Least squares updated one row at a time by Givens rotations. Keeps the
 * triangular factor R, the rotated response Q'y and the residual sum of
 * squares, so accuracy follows cond(X) rather than cond(X)^2.
 */
class QrAccumulator {
    using Mat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxParams, kMaxParams>;
    using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1, 0, kMaxParams, 1>;

public:
    explicit QrAccumulator(int p) : r_(Mat::Zero(p, p)), z_(Vec::Zero(p)), norm2_(Vec::Zero(p)), p_(p) {}

    void add(std::span<const double> x, double y) {
        long double row[kMaxParams];
        for (int i = 0; i < p_; ++i) {
            row[i] = x[static_cast<std::size_t>(i)];
            norm2_(i) += row[i] * row[i];
        }
        long double w = y;
        for (int i = 0; i < p_; ++i) {
            if (row[i] == 0.0) continue;
            const long double h = std::hypot(r_(i, i), row[i]);
            const long double c = r_(i, i) / h, s = row[i] / h;
            r_(i, i) = h;
            for (int j = i + 1; j < p_; ++j) {
                const long double a = r_(i, j);
                r_(i, j) = c * a + s * row[j];
                row[j] = c * row[j] - s * a;
            }
            const long double a = z_(i);
            z_(i) = c * a + s * w;
            w = c * w - s * a;
        }
        ssr_ += w * w;
        yty_ += static_cast<long double>(y) * y;
        ++n_;
    }

    [[nodiscard]] std::size_t count() const noexcept { return n_; }

    /// t-ratio for coefficient j, or nullopt when a column is numerically dependent
    /// on the others (|R_ii| <= 1e-10 of its norm) or the fit is exact.
    [[nodiscard]] std::optional<double> t_ratio(int j) const {
        if (n_ <= static_cast<std::size_t>(p_)) return std::nullopt;
        for (int i = 0; i < p_; ++i)
            if (!(std::abs(r_(i, i)) > 1e-10L * std::sqrt(norm2_(i)))) return std::nullopt;
        if (!(ssr_ > 1e-24L * yty_)) return std::nullopt;
        const auto R = r_.template triangularView<Eigen::Upper>();
        const Vec b = R.solve(z_);
        Vec e = Vec::Zero(p_);
        e(j) = 1.0L;
        const Vec u = R.transpose().solve(e);
        const long double s2 = ssr_ / static_cast<long double>(n_ - static_cast<std::size_t>(p_));
        return static_cast<double>(b(j) / std::sqrt(s2 * u.squaredNorm()));
    }

private:
    Mat r_;
    Vec z_;
    Vec norm2_;
    long double ssr_ = 0.0L;
    long double yty_ = 0.0L;
    std::size_t n_ = 0;
    int p_;
};

/// Welford co-moments for dy on (1, x): the constant, k = 0 case.
class CenteredMoments {
public:
    void add(long double x, long double y) noexcept {
        ++n_;
        const long double dx = x - mx_;
        mx_ += dx / static_cast<long double>(n_);
        const long double dy = y - my_;
        my_ += dy / static_cast<long double>(n_);
        cxx_ += dx * (x - mx_);
        cxy_ += dx * (y - my_);
        cyy_ += dy * (y - my_);
    }

    [[nodiscard]] std::optional<double> t_ratio() const noexcept {
        if (n_ < 3) return std::nullopt;
        const long double scale = cxx_ + static_cast<long double>(n_) * mx_ * mx_;
        if (!(cxx_ > 1e-12L * scale)) return std::nullopt;
        const long double b = cxy_ / cxx_;
        const long double ssr = cyy_ - b * cxy_;
        if (!(ssr > 1e-9L * cyy_)) return std::nullopt;
        const long double s2 = ssr / static_cast<long double>(n_ - 2);
        return static_cast<double>(b / std::sqrt(s2 / cxx_));
    }

private:
    std::size_t n_ = 0;
    long double mx_ = 0, my_ = 0, cxx_ = 0, cxy_ = 0, cyy_ = 0;
};

/// Raw moments for dy on x without intercept: the no-deterministics, k = 0 case.
class RawMoments {
public:
    void add(long double x, long double y) noexcept {
        ++n_;
        sxx_ += x * x;
        sxy_ += x * y;
        syy_ += y * y;
    }

    [[nodiscard]] std::optional<double> t_ratio() const noexcept {
        if (n_ < 2 || !(sxx_ > 0)) return std::nullopt;
        const long double b = sxy_ / sxx_;
        const long double ssr = syy_ - b * sxy_;
        if (!(ssr > 1e-9L * syy_)) return std::nullopt;
        const long double s2 = ssr / static_cast<long double>(n_ - 1);
        return static_cast<double>(b / std::sqrt(s2 / sxx_));
    }

private:
    std::size_t n_ = 0;
    long double sxx_ = 0, sxy_ = 0, syy_ = 0;
};

/**
 * ADF t-ratios for families of nested windows, updated one observation at a
 * time. Whenever the incremental solution is numerically unsafe the window is
 * refitted densely; windows whose dense fit is degenerate yield nullopt. The
 * full-sample window always takes the dense value, so it agrees with adf_stat.
 */
class AdfScanner {
public:
    AdfScanner(const Series& y, AdfConfig cfg) : y_(&y), cfg_(cfg) {
        if (cfg.k < 0) throw std::invalid_argument("lag order must be non-negative");
        if (cfg.params() > kMaxParams) throw std::invalid_argument("lag order too large");
    }

    [[nodiscard]] const AdfConfig& config() const noexcept { return cfg_; }

    /// Smallest admissible window length for this configuration.
    [[nodiscard]] std::size_t min_length() const noexcept {
        return static_cast<std::size_t>(cfg_.k + 1 + cfg_.params() + 1);
    }

    [[nodiscard]] std::optional<double> dense(std::size_t start, std::size_t end) const {
        try {
            const double t = adf_stat(*y_, start, end, cfg_);
            return std::isfinite(t) ? std::optional<double>(t) : std::nullopt;
        } catch (const DegenerateFit&) {
            return std::nullopt;
        }
    }

    /// Calls f(end, t) for windows (start, end], end = e_first..e_last.
    template <class F>
    void expanding(std::size_t start, std::size_t e_first, std::size_t e_last, F&& f) const {
        check(start, e_first, e_last);
        const std::size_t first_row = start + static_cast<std::size_t>(cfg_.k) + 2;
        run(f, [&](auto& acc, auto&& emit) {
            for (std::size_t t = first_row; t <= e_last; ++t) {
                add_row(acc, t);
                if (t >= e_first) emit(t, start, t, acc);
            }
        });
    }

    /// Calls f(start, t) for windows (start, end], start = s_first down to s_last.
    template <class F>
    void backward(std::size_t end, std::size_t s_first, F&& f, std::size_t s_last = 0) const {
        check(s_first, end, end);
        if (s_last > s_first) throw std::invalid_argument("scan range out of bounds");
        run(f, [&](auto& acc, auto&& emit) {
            for (std::size_t t = end; t >= s_first + static_cast<std::size_t>(cfg_.k) + 2; --t)
                add_row(acc, t);
            for (std::size_t s = s_first + 1; s-- > s_last;) {
                if (s < s_first) add_row(acc, s + static_cast<std::size_t>(cfg_.k) + 2);
                emit(s, s, end, acc);
            }
        });
    }

private:
    void check(std::size_t start, std::size_t e_first, std::size_t e_last) const {
        if (e_last > y_->size() || e_first > e_last || start >= e_first)
            throw std::invalid_argument("scan range out of bounds");
        if (e_first - start < min_length()) throw std::invalid_argument("window too short for the regression");
    }

    void add_row(CenteredMoments& acc, std::size_t t) const {
        const auto& v = y_->values();
        acc.add(v[t - 2], static_cast<long double>(v[t - 1]) - v[t - 2]);
    }
    void add_row(RawMoments& acc, std::size_t t) const {
        const auto& v = y_->values();
        acc.add(v[t - 2], static_cast<long double>(v[t - 1]) - v[t - 2]);
    }
    void add_row(QrAccumulator& acc, std::size_t t) const {
        double row[kMaxParams];
        std::span<double> x(row, static_cast<std::size_t>(cfg_.params()));
        detail::adf_row(y_->values(), t, cfg_, x);
        acc.add(x, detail::adf_target(y_->values(), t));
    }

    template <class F, class Body>
    void run(F& f, Body&& body) const {
        auto emit = [&](std::size_t key, std::size_t s, std::size_t e, const auto& acc) {
            std::optional<double> t;
            if (s == 0 && e == y_->size()) {
                f(key, dense(s, e));
                return;
            }
            if constexpr (std::is_same_v<std::decay_t<decltype(acc)>, QrAccumulator>)
                t = acc.t_ratio(cfg_.delta_index());
            else
                t = acc.t_ratio();
            if (!t) t = dense(s, e);
            f(key, t);
        };
        if (cfg_.k == 0 && cfg_.det == DetSpec::constant) {
            CenteredMoments acc;
            body(acc, emit);
        } else if (cfg_.k == 0 && cfg_.det == DetSpec::none) {
            RawMoments acc;
            body(acc, emit);
        } else {
            QrAccumulator acc(cfg_.params());
            body(acc, emit);
        }
    }

    const Series* y_;
    AdfConfig cfg_;
};

}  // namespace bubbles
