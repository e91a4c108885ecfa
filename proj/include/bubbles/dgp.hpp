#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "bubbles/bootstrap.hpp"
#include "bubbles/parallel.hpp"
#include "bubbles/random.hpp"
#include "bubbles/recursive.hpp"
#include "bubbles/series.hpp"
#include "bubbles/stats.hpp"

namespace bubbles {

/// Deterministic volatility function omega(s) on [0,1]; sigma_t = omega(t/T).
struct VolPath {
    enum class Kind { constant, single_break, double_break, trend };
    Kind kind = Kind::constant;
    double base = 1.0;     ///< sigma before the first break / at s = 0
    double ratio = 1.0;    ///< level after the break relative to base (trend: level at s = 1)
    double break1 = 0.5;
    double break2 = 0.75;  ///< double break: volatility returns to base after break2

    static VolPath constant(double sigma = 1.0) { return {Kind::constant, sigma, 1.0, 0.5, 0.75}; }
    static VolPath single_break(double at, double ratio, double sigma = 1.0) {
        return {Kind::single_break, sigma, ratio, at, 1.0};
    }
    static VolPath double_break(double from, double to, double ratio, double sigma = 1.0) {
        return {Kind::double_break, sigma, ratio, from, to};
    }
    static VolPath trend(double ratio, double sigma = 1.0) { return {Kind::trend, sigma, ratio, 0.0, 1.0}; }

    void validate() const {
        if (!(base > 0.0) || !(ratio > 0.0) || !std::isfinite(base) || !std::isfinite(ratio))
            throw std::invalid_argument("volatility path must be strictly positive and finite");
        if (kind == Kind::single_break && !(break1 >= 0.0 && break1 <= 1.0))
            throw std::invalid_argument("volatility break outside [0,1]");
        if (kind == Kind::double_break && !(break1 >= 0.0 && break1 <= break2 && break2 <= 1.0))
            throw std::invalid_argument("volatility breaks out of order");
    }

    [[nodiscard]] double at(double s) const {
        switch (kind) {
            case Kind::constant: return base;
            case Kind::single_break: return s <= break1 ? base : base * ratio;
            case Kind::double_break: return (s > break1 && s <= break2) ? base * ratio : base;
            case Kind::trend: return base * (1.0 + (ratio - 1.0) * s);
        }
        return base;
    }

    /// sigma_1..sigma_T.
    [[nodiscard]] std::vector<double> path(std::size_t T) const {
        validate();
        std::vector<double> out(T);
        for (std::size_t t = 1; t <= T; ++t) out[t - 1] = at(static_cast<double>(t) / static_cast<double>(T));
        return out;
    }
};

inline std::string to_string(VolPath::Kind k) {
    switch (k) {
        case VolPath::Kind::constant: return "constant";
        case VolPath::Kind::single_break: return "single-break";
        case VolPath::Kind::double_break: return "double-break";
        case VolPath::Kind::trend: return "trend";
    }
    return "constant";
}

inline VolPath::Kind vol_kind_from_string(const std::string& s) {
    for (auto k : {VolPath::Kind::constant, VolPath::Kind::single_break, VolPath::Kind::double_break,
                   VolPath::Kind::trend})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown volatility path '" + s + "'");
}

enum class DgpKind { rw_drift, pwy_bubble, collapse_bubble, mildly_explosive };

inline std::string to_string(DgpKind k) {
    switch (k) {
        case DgpKind::rw_drift: return "rw-drift";
        case DgpKind::pwy_bubble: return "pwy-bubble";
        case DgpKind::collapse_bubble: return "collapse-bubble";
        case DgpKind::mildly_explosive: return "mildly-explosive";
    }
    return "rw-drift";
}

inline DgpKind dgp_from_string(const std::string& s) {
    for (auto k : {DgpKind::rw_drift, DgpKind::pwy_bubble, DgpKind::collapse_bubble, DgpKind::mildly_explosive})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown data generating process '" + s + "'");
}

/**
 * Parameters of the simulated processes.
 *
 *  rw-drift          y_t = mu T^-eta + y_{t-1} + e_t
 *  pwy-bubble        random walk, rho = 1 + c T^-alpha on T_e <= t <= T_c, then a
 *                    random walk restarted from y_{T_e} + reinit
 *  collapse-bubble   y_t = level + u_t; u is a random walk with drift mu T^-eta
 *                    except (1+delta1)u_{t-1} on T_e < t <= T_c and
 *                    (1-delta2)u_{t-1} on T_c < t <= T_r,
 *                    delta1 = c T^-alpha, delta2 = c2 T^-beta unless fixed
 *  mildly-explosive  y_t = mu T^-eta + rho y_{t-1} + e_t, rho = 1 + c T^-alpha
 *
 * e_t = scale * sigma_t * z_t with z standard normal or unit-variance Student t.
 */
struct DgpSpec {
    DgpKind kind = DgpKind::rw_drift;
    std::size_t T = 200;
    double mu = 0.0;
    double eta = 0.0;
    double tau_e = 0.4;
    double tau_c = 0.6;
    double tau_r = 0.7;
    double c = 1.0;
    double alpha = 0.6;
    double c2 = 1.0;
    double beta = 0.5;
    std::optional<double> delta1;
    std::optional<double> delta2;
    double reinit = 0.0;
    double level = 0.0;
    double y0 = 0.0;
    double scale = 1.0;
    std::optional<double> student_df;
    std::uint64_t seed = 0;

    void validate() const {
        if (T < 20) throw std::invalid_argument("simulated series need T >= 20");
        if (!(tau_e >= 0.0 && tau_e < tau_c && tau_c <= tau_r && tau_r <= 1.0))
            throw std::invalid_argument("regime dates must satisfy 0 <= tau_e < tau_c <= tau_r <= 1");
        if (!(alpha >= 0.0 && alpha < 1.0) || !(beta >= 0.0 && beta < 1.0))
            throw std::invalid_argument("exponents must lie in [0,1)");
        if (eta < 0.0) throw std::invalid_argument("drift exponent must be non-negative");
        if (!(scale >= 0.0)) throw std::invalid_argument("innovation scale must be non-negative");
        if (student_df && !(*student_df > 2.0)) throw std::invalid_argument("Student t needs df > 2");
    }

    [[nodiscard]] double drift() const { return mu * std::pow(static_cast<double>(T), -eta); }
    [[nodiscard]] double explosive_root() const { return 1.0 + c * std::pow(static_cast<double>(T), -alpha); }
    [[nodiscard]] double d1() const { return delta1.value_or(c * std::pow(static_cast<double>(T), -alpha)); }
    [[nodiscard]] double d2() const { return delta2.value_or(c2 * std::pow(static_cast<double>(T), -beta)); }
};

/// Draws z_1..z_T (standard normal or unit-variance Student t).
inline std::vector<double> draw_innovations(std::size_t T, std::optional<double> df, Rng& rng) {
    std::vector<double> z(T);
    if (df) {
        std::student_t_distribution<double> st(*df);
        const double k = std::sqrt((*df - 2.0) / *df);
        for (auto& v : z) v = st(rng) * k;
    } else {
        std::normal_distribution<double> nd(0.0, 1.0);
        for (auto& v : z) v = nd(rng);
    }
    return z;
}

/// Builds y_1..y_T from given shocks z_1..z_T (scaled by scale * sigma_t).
inline Series simulate_from_shocks(const DgpSpec& spec, const VolPath& vol, const std::vector<double>& z) {
    spec.validate();
    const std::size_t T = spec.T;
    if (z.size() != T) throw std::invalid_argument("shock vector length differs from T");
    const auto sigma = vol.path(T);
    std::vector<double> e(T + 1, 0.0);
    for (std::size_t t = 1; t <= T; ++t) e[t] = spec.scale * sigma[t - 1] * z[t - 1];

    std::vector<double> y(T + 1);
    y[0] = spec.y0;
    const std::size_t Te = frac_to_index(spec.tau_e, T);
    const std::size_t Tc = frac_to_index(spec.tau_c, T);
    const std::size_t Tr = frac_to_index(spec.tau_r, T);
    switch (spec.kind) {
        case DgpKind::rw_drift: {
            const double m = spec.drift();
            for (std::size_t t = 1; t <= T; ++t) y[t] = m + y[t - 1] + e[t];
            break;
        }
        case DgpKind::pwy_bubble: {
            const double rho = spec.explosive_root();
            for (std::size_t t = 1; t <= T; ++t) {
                if (t < Te) y[t] = y[t - 1] + e[t];
                else if (t <= Tc) y[t] = rho * y[t - 1] + e[t];
                else if (t == Tc + 1) y[t] = y[Te] + spec.reinit + e[t];
                else y[t] = y[t - 1] + e[t];
            }
            break;
        }
        case DgpKind::collapse_bubble: {
            const double m = spec.drift(), d1 = spec.d1(), d2 = spec.d2();
            std::vector<double> u(T + 1);
            u[0] = spec.y0;
            for (std::size_t t = 1; t <= T; ++t) {
                if (t > Te && t <= Tc) u[t] = (1.0 + d1) * u[t - 1] + e[t];
                else if (t > Tc && t <= Tr) u[t] = (1.0 - d2) * u[t - 1] + e[t];
                else u[t] = m + u[t - 1] + e[t];
            }
            for (std::size_t t = 0; t <= T; ++t) y[t] = spec.level + u[t];
            break;
        }
        case DgpKind::mildly_explosive: {
            const double m = spec.drift(), rho = spec.explosive_root();
            for (std::size_t t = 1; t <= T; ++t) y[t] = m + rho * y[t - 1] + e[t];
            break;
        }
    }
    return Series(std::vector<double>(y.begin() + 1, y.end()));
}

inline Series simulate(const DgpSpec& spec, const VolPath& vol, Rng& rng) {
    return simulate_from_shocks(spec, vol, draw_innovations(spec.T, spec.student_df, rng));
}

/// Simulation driven by spec.seed.
inline Series simulate(const DgpSpec& spec, const VolPath& vol = VolPath::constant()) {
    Rng rng = stream_rng(spec.seed, 0);
    return simulate(spec, vol, rng);
}

// ---------------------------------------------------------------------------
// Critical value tables
// ---------------------------------------------------------------------------

struct CvRecord {
    std::string statistic;
    std::size_t T = 0;
    double tau0 = 0.0;
    std::string det;
    int k = 0;
    double quantile = 0.0;
    double value = 0.0;

    [[nodiscard]] auto key() const { return std::tie(statistic, T, tau0, det, k, quantile); }
};

/// Simulated quantiles with provenance; serialised as JSON or CSV.
struct CvTable {
    static constexpr int kSchemaVersion = 1;
    std::size_t replications = 0;
    std::uint64_t seed = 0;
    std::string generator = "mt19937_64 with splitmix64 stream derivation";
    std::string null_model = "driftless random walk, y0 = 0, N(0,1) shocks";
    std::vector<std::string> warnings;
    std::vector<CvRecord> records;

    void sort() {
        std::sort(records.begin(), records.end(), [](const CvRecord& a, const CvRecord& b) { return a.key() < b.key(); });
    }

    /// Exact-key lookup; tau0 and quantile compared to 1e-9.
    [[nodiscard]] std::optional<double> lookup(const std::string& statistic, std::size_t T, double tau0,
                                               const std::string& det, int k, double q) const {
        for (const auto& r : records)
            if (r.statistic == statistic && r.T == T && std::abs(r.tau0 - tau0) < 1e-9 && r.det == det &&
                r.k == k && std::abs(r.quantile - q) < 1e-9)
                return r.value;
        return std::nullopt;
    }

    [[nodiscard]] nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["kind"] = "cv-table";
        j["metadata"] = {{"replications", replications},
                         {"seed", seed},
                         {"generator", generator},
                         {"null_model", null_model},
                         {"warnings", warnings}};
        auto recs = nlohmann::ordered_json::array();
        for (const auto& r : records)
            recs.push_back({{"statistic", r.statistic},
                            {"T", r.T},
                            {"tau0", r.tau0},
                            {"det", r.det},
                            {"k", r.k},
                            {"quantile", r.quantile},
                            {"value", r.value}});
        j["records"] = recs;
        return j;
    }

    static CvTable from_json(const nlohmann::json& j) {
        if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion)
            throw DataError("unsupported critical value table schema");
        CvTable t;
        const auto& m = j.at("metadata");
        t.replications = m.at("replications").get<std::size_t>();
        t.seed = m.at("seed").get<std::uint64_t>();
        t.generator = m.value("generator", t.generator);
        t.null_model = m.value("null_model", t.null_model);
        if (m.contains("warnings")) t.warnings = m.at("warnings").get<std::vector<std::string>>();
        for (const auto& r : j.at("records"))
            t.records.push_back({r.at("statistic").get<std::string>(), r.at("T").get<std::size_t>(),
                                 r.at("tau0").get<double>(), r.at("det").get<std::string>(), r.at("k").get<int>(),
                                 r.at("quantile").get<double>(), r.at("value").get<double>()});
        t.sort();
        return t;
    }

    void save_json(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write '" + path + "'");
        out << to_json().dump(2) << '\n';
    }

    static CvTable load_json(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open '" + path + "'");
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed critical value table '" + path + "': " + e.what());
        }
    }

    void save_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write '" + path + "'");
        out << "statistic,T,tau0,det,k,quantile,value\n";
        for (const auto& r : records)
            out << r.statistic << ',' << r.T << ',' << detail::format_double(r.tau0) << ',' << r.det << ',' << r.k
                << ',' << detail::format_double(r.quantile) << ',' << detail::format_double(r.value) << '\n';
    }
};

struct TabulateOptions {
    StatKind statistic = StatKind::sadf;
    std::vector<std::size_t> sizes{100};
    std::optional<double> tau0;  ///< default_min_window(T) when empty
    AdfConfig adf{};
    std::vector<double> levels{0.90, 0.95, 0.99};
    std::size_t replications = 2000;
    std::uint64_t seed = 0;
};

/// Null distribution of a statistic under the driftless random walk; replicate r for size index i uses stream_rng(seed, i, r).
inline std::vector<double> simulate_null_statistics(StatKind kind, std::size_t T, const TestOptions& opts,
                                                    std::size_t reps, std::uint64_t seed, std::uint64_t stream) {
    std::vector<double> out(reps, std::numeric_limits<double>::quiet_NaN());
    DgpSpec spec;
    spec.T = T;
    parallel_for(reps, [&](std::size_t r) {
        Rng rng = stream_rng(seed, stream, r);
        const Series y = simulate(spec, VolPath::constant(), rng);
        try {
            out[r] = compute_statistic(kind, y, opts);
        } catch (const DegenerateFit&) {
        }
    });
    return out;
}

inline CvTable tabulate_critical_values(const TabulateOptions& o) {
    if (o.replications < 1) throw std::invalid_argument("need at least one replication");
    CvTable table;
    table.replications = o.replications;
    table.seed = o.seed;
    if (o.replications < 1000)
        table.warnings.push_back("fewer than 1000 replications; quantiles are not table grade");
    for (std::size_t i = 0; i < o.sizes.size(); ++i) {
        const std::size_t T = o.sizes[i];
        TestOptions topt;
        topt.tau0 = o.tau0.value_or(default_min_window(T));
        topt.adf = o.adf;
        auto stats = detail::finite_only(simulate_null_statistics(o.statistic, T, topt, o.replications, o.seed, i));
        if (stats.size() < o.replications)
            table.warnings.push_back(std::to_string(o.replications - stats.size()) +
                                     " degenerate replications dropped at T=" + std::to_string(T));
        std::sort(stats.begin(), stats.end());
        for (double q : o.levels)
            table.records.push_back({to_string(o.statistic), T, topt.tau0, to_string(o.adf.det), o.adf.k, q,
                                     quantile(stats, q)});
    }
    table.sort();
    return table;
}

// ---------------------------------------------------------------------------
// Size and power
// ---------------------------------------------------------------------------

/// How a simulated series is tested: fixed critical value or wild bootstrap.
struct StudyTest {
    StatKind statistic = StatKind::sadf;
    TestOptions options{};
    bool bootstrap = false;
    double critical_value = 0.0;  ///< used when bootstrap is false
    std::size_t B = 399;
    MultiplierKind multiplier = MultiplierKind::gaussian;
};

struct Scenario {
    DgpSpec spec;
    VolPath vol = VolPath::constant();
};

struct RejectionRate {
    double rate = 0.0;
    double se = 0.0;
    std::size_t replications = 0;
    std::size_t failed = 0;
};

struct StudyResult {
    RejectionRate size;
    RejectionRate power;
};

/// One decision for series y at significance level alpha.
inline bool study_decision(const StudyTest& test, const Series& y, double alpha, std::uint64_t seed) {
    if (test.bootstrap) {
        const auto rep = wild_bootstrap_pvalue(y, test.statistic, test.options, test.B, test.multiplier, seed);
        return rep.p_value <= alpha;
    }
    return compute_statistic(test.statistic, y, test.options) > test.critical_value;
}

/// Rejection frequency over reps; replicate r uses stream (seed, stream, r) for data and bootstrap.
inline RejectionRate rejection_rate(const StudyTest& test, const Scenario& sc, std::size_t reps, double alpha,
                                    std::uint64_t seed, std::uint64_t stream) {
    std::vector<int> hit(reps, -1);
    parallel_for(reps, [&](std::size_t r) {
        Rng rng = stream_rng(seed, stream, r);
        const Series y = simulate(sc.spec, sc.vol, rng);
        try {
            hit[r] = study_decision(test, y, alpha, splitmix64(rng())) ? 1 : 0;
        } catch (const DegenerateFit&) {
        }
    });
    RejectionRate rr;
    std::size_t n = 0, k = 0;
    for (int h : hit) {
        if (h < 0) {
            ++rr.failed;
            continue;
        }
        ++n;
        k += static_cast<std::size_t>(h);
    }
    rr.replications = n;
    if (n > 0) {
        rr.rate = static_cast<double>(k) / static_cast<double>(n);
        rr.se = std::sqrt(rr.rate * (1.0 - rr.rate) / static_cast<double>(n));
    }
    return rr;
}

inline StudyResult size_power_study(const StudyTest& test, const Scenario& null, const Scenario& alt,
                                    std::size_t reps, double alpha, std::uint64_t seed) {
    null.spec.validate();
    alt.spec.validate();
    return {rejection_rate(test, null, reps, alpha, seed, 0), rejection_rate(test, alt, reps, alpha, seed, 1)};
}

}  // namespace bubbles
