#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bubbles/recursive.hpp"
#include "bubbles/series.hpp"

namespace bubbles {

/// One bubble regime; recovery and model are set only by model-based dating.
struct Episode {
    double origin = 0.0;
    double collapse = 0.0;
    std::optional<double> recovery;
    std::optional<int> model;
    std::size_t origin_index = 0;
    std::size_t collapse_index = 0;
    std::optional<std::size_t> recovery_index;
    bool ongoing = false;  ///< no collapse before the end of the sample
};

inline Episode make_episode(std::size_t origin, std::size_t collapse, std::size_t T) {
    Episode e;
    e.origin_index = origin;
    e.collapse_index = collapse;
    e.origin = static_cast<double>(origin) / static_cast<double>(T);
    e.collapse = static_cast<double>(collapse) / static_cast<double>(T);
    return e;
}

enum class CvSource { asymptotic_rule, simulated, bootstrap };

inline std::string to_string(CvSource s) {
    switch (s) {
        case CvSource::asymptotic_rule: return "asymptotic-rule";
        case CvSource::simulated: return "simulated";
        case CvSource::bootstrap: return "bootstrap";
    }
    return "asymptotic-rule";
}

struct CvSequence {
    std::vector<double> values;
    CvSource source = CvSource::asymptotic_rule;
};

/// Critical value rule (2/3) log((log T)^2).
inline double cv_rule(std::size_t T) {
    if (T < 3) throw std::invalid_argument("cv rule needs T >= 3");
    const double l = std::log(static_cast<double>(T));
    return 2.0 / 3.0 * std::log(l * l);
}

inline CvSequence constant_cv(const StatSequence& seq, double value, CvSource source) {
    return {std::vector<double>(seq.entries.size(), value), source};
}

inline CvSequence rule_cv(const StatSequence& seq) {
    return constant_cv(seq, cv_rule(seq.sample_size), CvSource::asymptotic_rule);
}

/// Default duration floor delta * log(T) / T.
inline double default_min_duration(std::size_t T, double delta = 1.0) {
    return delta * std::log(static_cast<double>(T)) / static_cast<double>(T);
}

/**
 * Crossing rule: an episode starts at the first entry strictly above its
 * critical value and ends at the first later entry strictly below it whose
 * tau2 is at least origin + min_duration. Searching restarts after each
 * collapse. An episode still open at the end collapses at the last entry and
 * is flagged as ongoing.
 */
inline std::vector<Episode> crossing_stamp(const StatSequence& seq, const CvSequence& cv,
                                           double min_duration) {
    if (seq.entries.size() != cv.values.size())
        throw std::invalid_argument("statistic and critical value sequences differ in length");
    const std::size_t T = seq.sample_size;
    std::vector<Episode> out;
    const auto& E = seq.entries;
    std::size_t i = 0;
    while (i < E.size()) {
        while (i < E.size() && (E[i].skipped || !(E[i].value > cv.values[i]))) ++i;
        if (i >= E.size()) break;
        const std::size_t o = i;
        const double floor_tau = E[o].tau2 + min_duration - 1e-12;
        std::size_t c = o + 1;
        while (c < E.size() && (E[c].skipped || E[c].tau2 < floor_tau || !(E[c].value < cv.values[c]))) ++c;
        if (c >= E.size()) {
            Episode ep = make_episode(E[o].end, E.back().end, T);
            ep.collapse = 1.0;
            ep.ongoing = true;
            out.push_back(ep);
            break;
        }
        out.push_back(make_episode(E[o].end, E[c].end, T));
        i = c + 1;
    }
    return out;
}

/// Dating from the recursive ADF sequence of SADF.
inline std::vector<Episode> pwy_stamp(const StatSequence& seq, const CvSequence& cv, double min_duration) {
    return crossing_stamp(seq, cv, min_duration);
}

/// Dating from the BSADF sequence emitted by gsadf.
inline std::vector<Episode> psy_stamp(const StatSequence& bsadf, const CvSequence& cv, double min_duration) {
    return crossing_stamp(bsadf, cv, min_duration);
}

/// First monitoring entry strictly above the training maximum, as an index into the monitoring entries.
inline std::optional<std::size_t> training_max_monitor(const StatSequence& training, const StatSequence& monitor) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& e : training.entries)
        if (!e.skipped) {
            mx = std::max(mx, e.value);
            any = true;
        }
    if (!any) throw std::invalid_argument("training sequence has no valid entries");
    for (std::size_t i = 0; i < monitor.entries.size(); ++i)
        if (!monitor.entries[i].skipped && monitor.entries[i].value > mx) return i;
    return std::nullopt;
}

struct BicInitStep {
    std::size_t start = 0;
    double bic_ur = 0.0;
    double bic_ar = 0.0;
    double delta_hat = 0.0;
};

struct BicInitResult {
    std::size_t start = 1;
    std::vector<BicInitStep> path;
};

/// Default n_min: 10% of the observations before T_e, at least 3.
inline std::size_t default_n_min(std::size_t Te) { return std::max<std::size_t>(3, Te / 10); }

/**
 * Initial-condition search. For start s (initially T_e - n_min) the sample is
 * y_s..y_{T_e} with m = T_e - s regression observations t = s+1..T_e:
 *   BIC_UR = log(sum (dy_t - mean dy)^2 / m) + log(m)/m
 *   BIC_AR = log(sum (y_t - mu - delta y_{t-1})^2 / m) + 2 log(m)/m.
 * The start moves back by one while BIC_UR > BIC_AR and delta > 1, stopping at 1.
 */
inline BicInitResult bic_init(const Series& y, std::size_t Te, std::size_t n_min) {
    if (n_min < 3) throw std::invalid_argument("n_min must be at least 3");
    if (Te > y.size() || Te < n_min + 1) throw std::invalid_argument("T_e too small for n_min");
    BicInitResult res;
    std::size_t s = Te - n_min;
    for (;;) {
        const std::size_t m = Te - s;
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0, sd = 0, sdd = 0;
        for (std::size_t t = s + 1; t <= Te; ++t) {
            const double x = y.at_obs(t - 1), v = y.at_obs(t), d = v - x;
            sx += x;
            sy += v;
            sxx += x * x;
            sxy += x * v;
            syy += v * v;
            sd += d;
            sdd += d * d;
        }
        const double md = static_cast<double>(m);
        const double cxx = sxx - sx * sx / md;
        const double cxy = sxy - sx * sy / md;
        const double cyy = syy - sy * sy / md;
        const double cdd = sdd - sd * sd / md;
        if (!(cxx > 0.0)) throw DegenerateFit("BIC search: constant regressor");
        const double delta = cxy / cxx;
        const double ssr_ar = cyy - delta * cxy;
        if (!(ssr_ar > 0.0) || !(cdd > 0.0)) throw DegenerateFit("BIC search: exact fit");
        BicInitStep st;
        st.start = s;
        st.delta_hat = delta;
        st.bic_ur = std::log(cdd / md) + std::log(md) / md;
        st.bic_ar = std::log(ssr_ar / md) + 2.0 * std::log(md) / md;
        res.path.push_back(st);
        if (!(st.bic_ur > st.bic_ar && delta > 1.0) || s == 1) break;
        --s;
    }
    res.start = s;
    return res;
}

// ---------------------------------------------------------------------------
// Model-based dating
// ---------------------------------------------------------------------------

/// BIC penalty k for Models 1-4.
inline constexpr std::array<int, 4> kModelPenalty{3, 4, 6, 7};

inline constexpr std::size_t kDefaultMinSegment = 3;

struct BubbleFit {
    int model = 4;
    std::size_t T1 = 0, T2 = 0, T3 = 0;
    double ssr = std::numeric_limits<double>::infinity();
    bool valid = false;
    std::array<double, 4> coeffs{};  ///< mu1, delta1, mu2, delta2
};

/**
 * SSR of the dummy regression
 *   dy_t = mu1 D_t(T1,T2) + delta1 D_t(T1,T2) y_{t-1} + mu2 D_t(T2,T3) + delta2 D_t(T2,T3) y_{t-1} + e_t
 * over t = 2..T, D_t(a,b) = 1(a < t <= b). Regimes are disjoint so each one is
 * an independent two-parameter fit; rows outside both regimes contribute dy^2.
 * Every evaluation is O(1) from prefix sums.
 */
class BubbleModelSearch {
public:
    explicit BubbleModelSearch(const Series& y, std::size_t min_segment = kDefaultMinSegment)
        : y_(&y), min_seg_(min_segment) {
        if (min_segment < 3) throw std::invalid_argument("minimum segment must be at least 3");
        const std::size_t T = y.size();
        px_.assign(T + 1, 0.0L);
        pxx_.assign(T + 1, 0.0L);
        pd_.assign(T + 1, 0.0L);
        pxd_.assign(T + 1, 0.0L);
        pdd_.assign(T + 1, 0.0L);
        for (std::size_t t = 2; t <= T; ++t) {
            const long double x = y.at_obs(t - 1);
            const long double d = static_cast<long double>(y.at_obs(t)) - x;
            px_[t] = px_[t - 1] + x;
            pxx_[t] = pxx_[t - 1] + x * x;
            pd_[t] = pd_[t - 1] + d;
            pxd_[t] = pxd_[t - 1] + x * d;
            pdd_[t] = pdd_[t - 1] + d * d;
        }
        total_ = pdd_[T];
    }

    [[nodiscard]] std::size_t size() const noexcept { return y_->size(); }
    [[nodiscard]] std::size_t min_segment() const noexcept { return min_seg_; }
    [[nodiscard]] double total_ss() const noexcept { return static_cast<double>(total_); }

    /// Whether (T1, T2, T3) respects the model's restrictions and segment lengths.
    [[nodiscard]] bool admissible(int model, std::size_t T1, std::size_t T2, std::size_t T3) const {
        const std::size_t T = size();
        if (T1 < 1 || T2 > T || T3 > T || T2 < T1 + min_seg_) return false;
        switch (model) {
            case 1: return T2 == T && T3 == T;
            case 2: return T3 == T2;
            case 3: return T3 == T && T3 >= T2 + min_seg_;
            case 4: return T3 >= T2 + min_seg_;
            default: return false;
        }
    }

    [[nodiscard]] BubbleFit evaluate(int model, std::size_t T1, std::size_t T2, std::size_t T3) const {
        if (model < 1 || model > 4) throw std::invalid_argument("model must be 1..4");
        BubbleFit f;
        f.model = model;
        f.T1 = T1;
        f.T2 = T2;
        f.T3 = T3;
        if (!admissible(model, T1, T2, T3)) throw std::invalid_argument("dates violate the model restrictions");
        const auto& y = *y_;
        if (!(y.at_obs(T1) < y.at_obs(T2))) return f;
        const bool collapse = model >= 3;
        if (collapse && !(y.at_obs(T2) > y.at_obs(T3))) return f;
        long double rss = total_;
        auto r1 = regime(T1, T2);
        if (!r1) return f;
        rss -= pdd_[T2] - pdd_[T1];
        rss += r1->ssr;
        f.coeffs[0] = static_cast<double>(r1->mu);
        f.coeffs[1] = static_cast<double>(r1->delta);
        if (collapse) {
            auto r2 = regime(T2, T3);
            if (!r2) return f;
            rss -= pdd_[T3] - pdd_[T2];
            rss += r2->ssr;
            f.coeffs[2] = static_cast<double>(r2->mu);
            f.coeffs[3] = static_cast<double>(r2->delta);
        }
        f.ssr = std::max(0.0, static_cast<double>(rss));
        f.valid = true;
        return f;
    }

private:
    struct RegimeFit {
        long double ssr, mu, delta;
    };

    /// Two-parameter fit of dy on (1, y_{t-1}) over rows t = a+1..b.
    [[nodiscard]] std::optional<RegimeFit> regime(std::size_t a, std::size_t b) const {
        const long double n = static_cast<long double>(b - a);
        const std::size_t lo = a;  // prefix sums start at t = 2, a >= 1
        const long double sx = px_[b] - px_[lo], sxx = pxx_[b] - pxx_[lo];
        const long double sd = pd_[b] - pd_[lo], sxd = pxd_[b] - pxd_[lo], sdd = pdd_[b] - pdd_[lo];
        const long double cxx = sxx - sx * sx / n;
        if (!(cxx > 1e-12L * std::max(sxx, 1e-300L))) return std::nullopt;
        const long double cxd = sxd - sx * sd / n;
        const long double cdd = sdd - sd * sd / n;
        RegimeFit r;
        r.delta = cxd / cxx;
        r.mu = (sd - r.delta * sx) / n;
        r.ssr = std::max(0.0L, cdd - r.delta * cxd);
        return r;
    }

    const Series* y_;
    std::size_t min_seg_;
    std::vector<long double> px_, pxx_, pd_, pxd_, pdd_;
    long double total_ = 0.0L;
};

/// SSR of one candidate; dates are fractions mapped with floor(tau T).
inline BubbleFit fit_bubble_model(const Series& y, int model, double tau1, double tau2, double tau3,
                                  std::size_t min_segment = kDefaultMinSegment) {
    const std::size_t T = y.size();
    BubbleModelSearch s(y, min_segment);
    return s.evaluate(model, frac_to_index(tau1, T), frac_to_index(tau2, T), frac_to_index(tau3, T));
}

namespace detail {

inline bool better_fit(const BubbleFit& a, const BubbleFit& b) {
    if (!a.valid) return false;
    if (!b.valid) return true;
    if (a.ssr != b.ssr) return a.ssr < b.ssr;
    if (a.T1 != b.T1) return a.T1 < b.T1;
    if (a.T2 != b.T2) return a.T2 < b.T2;
    return a.T3 < b.T3;
}

/// Enumerates admissible dates of one model with T1 in [l1,h1], T2 in [l2,h2], T3 in [l3,h3] on a stride.
template <class F>
void for_each_candidate(const BubbleModelSearch& s, int model, std::array<std::size_t, 6> box,
                        std::size_t stride, F&& f) {
    const std::size_t T = s.size();
    const std::size_t g = s.min_segment();
    auto clamp_lo = [](std::size_t v, std::size_t lo) { return std::max(v, lo); };
    for (std::size_t T1 = clamp_lo(box[0], 1); T1 <= box[1]; T1 += stride) {
        if (model == 1) {
            if (T >= T1 + g) f(T1, T, T);
            continue;
        }
        for (std::size_t T2 = clamp_lo(box[2], T1 + g); T2 <= box[3] && T2 <= T; T2 += stride) {
            if (model == 2) {
                f(T1, T2, T2);
            } else if (model == 3) {
                if (T >= T2 + g) f(T1, T2, T);
            } else {
                for (std::size_t T3 = clamp_lo(box[4], T2 + g); T3 <= box[5] && T3 <= T; T3 += stride)
                    f(T1, T2, T3);
            }
        }
    }
}

}  // namespace detail

inline constexpr std::size_t kExhaustiveLimit = 200;

/**
 * Minimum-SSR dates for one model. Exhaustive for T <= 200; otherwise a grid
 * with stride ceil(T/200) followed by an exact search within one stride of
 * the coarse optimum. Ties go to the lexicographically smallest dates.
 */
inline BubbleFit best_bubble_fit(const BubbleModelSearch& s, int model) {
    const std::size_t T = s.size();
    BubbleFit best;
    best.model = model;
    auto offer = [&](std::size_t a, std::size_t b, std::size_t c) {
        if (!s.admissible(model, a, b, c)) return;
        auto f = s.evaluate(model, a, b, c);
        if (detail::better_fit(f, best)) best = f;
    };
    const std::array<std::size_t, 6> full{1, T, 1, T, 1, T};
    if (T <= kExhaustiveLimit) {
        detail::for_each_candidate(s, model, full, 1, offer);
        return best;
    }
    const std::size_t stride = (T + kExhaustiveLimit - 1) / kExhaustiveLimit;
    detail::for_each_candidate(s, model, full, stride, offer);
    if (!best.valid) return best;
    auto lo = [&](std::size_t v) { return v > stride ? v - stride : 1; };
    auto hi = [&](std::size_t v) { return std::min(T, v + stride); };
    const std::array<std::size_t, 6> box{lo(best.T1), hi(best.T1), lo(best.T2), hi(best.T2), lo(best.T3), hi(best.T3)};
    detail::for_each_candidate(s, model, box, 1, offer);
    return best;
}

inline double bubble_bic(double ssr, std::size_t T, int model, double total_ss) {
    const double Td = static_cast<double>(T);
    const double floor_ssr = std::max(ssr, 1e-14 * std::max(total_ss, 1e-300));
    return Td * std::log(floor_ssr / Td) + kModelPenalty[static_cast<std::size_t>(model - 1)] * std::log(Td);
}

struct ModelSelection {
    int model = 0;
    Episode episode;
    std::array<double, 4> bic{};  ///< NaN when a model has no admissible candidate
    std::array<BubbleFit, 4> fits{};
};

inline Episode episode_from_fit(const BubbleFit& f, std::size_t T) {
    Episode e = make_episode(f.T1, f.T2, T);
    e.model = f.model;
    if (f.model >= 3) {
        e.recovery_index = f.T3;
        e.recovery = static_cast<double>(f.T3) / static_cast<double>(T);
    }
    return e;
}

/// Minimises SSR for each model and selects the one with the smallest BIC.
inline ModelSelection select_model_bic(const Series& y, std::size_t min_segment = kDefaultMinSegment,
                                       std::array<bool, 4> models = {true, true, true, true}) {
    BubbleModelSearch s(y, min_segment);
    ModelSelection sel;
    double best = std::numeric_limits<double>::infinity();
    for (int m = 1; m <= 4; ++m) {
        const auto mi = static_cast<std::size_t>(m - 1);
        sel.bic[mi] = std::numeric_limits<double>::quiet_NaN();
        if (!models[mi]) continue;
        sel.fits[mi] = best_bubble_fit(s, m);
        if (!sel.fits[mi].valid) continue;
        sel.bic[mi] = bubble_bic(sel.fits[mi].ssr, y.size(), m, s.total_ss());
        if (sel.bic[mi] < best) {
            best = sel.bic[mi];
            sel.model = m;
        }
    }
    if (sel.model == 0) throw DegenerateFit("no admissible bubble model candidate");
    sel.episode = episode_from_fit(sel.fits[static_cast<std::size_t>(sel.model - 1)], y.size());
    return sel;
}

struct TwoStepResult {
    std::vector<Episode> preliminary;
    std::vector<Episode> refined;
    std::vector<std::pair<std::size_t, std::size_t>> subsamples;  ///< (lo, hi] per episode
};

/**
 * PSY dating followed by BIC model selection on each episode's subsample,
 * which runs from the midpoint between the previous collapse and this origin
 * to the midpoint between this collapse and the next origin.
 */
inline TwoStepResult two_step_stamp(const Series& y, double tau0, const AdfConfig& cfg = {},
                                    std::optional<double> min_duration = std::nullopt,
                                    std::optional<CvSequence> cv = std::nullopt) {
    const std::size_t T = y.size();
    const auto g = gsadf(y, tau0, cfg);
    const CvSequence c = cv ? *cv : rule_cv(g.sequence);
    TwoStepResult r;
    r.preliminary = psy_stamp(g.sequence, c, min_duration.value_or(default_min_duration(T)));
    const auto& P = r.preliminary;
    for (std::size_t i = 0; i < P.size(); ++i) {
        const std::size_t lo = i == 0 ? 0 : (P[i - 1].collapse_index + P[i].origin_index) / 2;
        const std::size_t hi = i + 1 == P.size() ? T : (P[i].collapse_index + P[i + 1].origin_index) / 2;
        r.subsamples.emplace_back(lo, hi);
        Episode refined = P[i];
        try {
            const Series sub = y.window(lo, hi);
            const auto sel = select_model_bic(sub);
            const auto& f = sel.fits[static_cast<std::size_t>(sel.model - 1)];
            BubbleFit shifted = f;
            shifted.T1 += lo;
            shifted.T2 += lo;
            shifted.T3 += lo;
            refined = episode_from_fit(shifted, T);
        } catch (const DegenerateFit&) {
        } catch (const DataError&) {
        }
        r.refined.push_back(refined);
    }
    return r;
}

inline constexpr double kSignStampEpsilon = 0.01;

struct SignStampResult {
    Episode episode;
    double value = 0.0;
};

/**
 * Argmax over windows (s, e], e - s >= floor(tau0 T), of the sign statistic
 * with s^2(s,e) replaced by s~^2(s,e)^eps, where
 *   s~^2(s,e) = (e s^2(0,e) - s s^2(0,s)) / (e - s - 1).
 * Windows with s in {1, 2} (s^2(0,s) undefined) or non-positive s~^2 are skipped.
 */
inline SignStampResult sign_stamp(const Series& y, double tau0, double eps = kSignStampEpsilon,
                                  const SignOptions& opt = {}) {
    const std::size_t T = y.size();
    const std::size_t w0 = detail::min_window_obs(tau0, T, 3);
    SignScan scan(cumulated_signs(y, opt));
    std::vector<std::optional<double>> s2_prefix(T + 1);
    for (std::size_t x = 3; x <= T; ++x) s2_prefix[x] = scan.s2(0, x);
    detail::ArgMax best;
    for (std::size_t e = w0; e <= T; ++e) {
        if (!s2_prefix[e]) continue;
        for (std::size_t s = 0; s + w0 <= e; ++s) {
            double tail = 0.0;
            if (s > 0) {
                if (!s2_prefix[s]) continue;
                tail = static_cast<double>(s) * *s2_prefix[s];
            }
            if (e - s < 2) continue;
            const double st = (static_cast<double>(e) * *s2_prefix[e] - tail) / static_cast<double>(e - s - 1);
            if (!(st > 0.0)) continue;
            if (auto v = scan.sadf_with_variance(s, e, std::pow(st, eps))) best.offer(*v, s, e);
        }
    }
    if (!best.found) throw DegenerateFit("sign dating: every window is degenerate");
    return {make_episode(best.start, best.end, T), best.value};
}

}  // namespace bubbles
