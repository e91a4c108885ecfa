#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bubbles/bubbles.hpp"
#include "bubbles/report.hpp"

namespace bubbles::cli {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything that determines the numbers in a report.
struct RunConfig {
    std::string subcommand;
    std::vector<std::string> inputs;
    std::string column;
    std::vector<std::string> stats{"gsadf"};
    std::string tau0 = "auto";
    std::string det = "const";
    int k = 0;
    std::size_t B = 399;
    std::uint64_t seed = 1;
    double level = 0.05;
    std::string cv;  ///< empty selects the subcommand default
    std::size_t Tb = kDefaultControlWindow;
    std::string method;
    std::string multiplier = "gaussian";
    std::size_t m = kDefaultEndWindow;
    std::optional<double> bandwidth;
    std::optional<double> cbar;
    std::string sign_mode = "raw";
    int filter_lags = 0;
    double delta = 1.0;
    double epsilon = kSignStampEpsilon;
    // simulation
    std::vector<std::size_t> sizes{100};
    std::size_t reps = 1000;
    std::vector<double> levels{0.90, 0.95, 0.99};
    std::string dgp_null = "rw-drift";
    std::string dgp_alt = "pwy-bubble";
    std::size_t T = 200;
    double tau_e = 0.4, tau_c = 0.6, tau_r = 0.7;
    double c = 1.0, alpha = 0.6;
    std::string vol = "constant";
    double vol_ratio = 1.0, vol_break = 0.5, vol_break2 = 0.75;
    // relate
    std::optional<std::size_t> tpx, tpy;
    std::optional<std::size_t> window;
    int dmax = kDefaultMaxDelay;
    int delay = 0;
    // plot-data
    std::string report;

    [[nodiscard]] Json to_json() const {
        Json j;
        j["subcommand"] = subcommand;
        j["inputs"] = inputs;
        j["column"] = column;
        j["stats"] = stats;
        j["tau0"] = tau0;
        j["det"] = det;
        j["k"] = k;
        j["B"] = B;
        j["seed"] = seed;
        j["level"] = level;
        j["cv"] = cv;
        j["Tb"] = Tb;
        j["method"] = method;
        j["multiplier"] = multiplier;
        j["m"] = m;
        j["bandwidth"] = optional_json(bandwidth);
        j["cbar"] = optional_json(cbar);
        j["sign_mode"] = sign_mode;
        j["filter_lags"] = filter_lags;
        j["delta"] = delta;
        j["epsilon"] = epsilon;
        j["sizes"] = sizes;
        j["reps"] = reps;
        j["levels"] = levels;
        j["dgp_null"] = dgp_null;
        j["dgp_alt"] = dgp_alt;
        j["T"] = T;
        j["tau_e"] = tau_e;
        j["tau_c"] = tau_c;
        j["tau_r"] = tau_r;
        j["c"] = c;
        j["alpha"] = alpha;
        j["vol"] = vol;
        j["vol_ratio"] = vol_ratio;
        j["vol_break"] = vol_break;
        j["vol_break2"] = vol_break2;
        j["tpx"] = optional_json(tpx);
        j["tpy"] = optional_json(tpy);
        j["window"] = optional_json(window);
        j["dmax"] = dmax;
        j["delay"] = delay;
        j["report"] = report;
        return j;
    }

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig c;
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        auto get_opt = [&](const char* key, auto& field) {
            using V = typename std::decay_t<decltype(field)>::value_type;
            if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<V>();
        };
        get("subcommand", c.subcommand);
        get("inputs", c.inputs);
        get("column", c.column);
        get("stats", c.stats);
        get("tau0", c.tau0);
        get("det", c.det);
        get("k", c.k);
        get("B", c.B);
        get("seed", c.seed);
        get("level", c.level);
        get("cv", c.cv);
        get("Tb", c.Tb);
        get("method", c.method);
        get("multiplier", c.multiplier);
        get("m", c.m);
        get_opt("bandwidth", c.bandwidth);
        get_opt("cbar", c.cbar);
        get("sign_mode", c.sign_mode);
        get("filter_lags", c.filter_lags);
        get("delta", c.delta);
        get("epsilon", c.epsilon);
        get("sizes", c.sizes);
        get("reps", c.reps);
        get("levels", c.levels);
        get("dgp_null", c.dgp_null);
        get("dgp_alt", c.dgp_alt);
        get("T", c.T);
        get("tau_e", c.tau_e);
        get("tau_c", c.tau_c);
        get("tau_r", c.tau_r);
        get("c", c.c);
        get("alpha", c.alpha);
        get("vol", c.vol);
        get("vol_ratio", c.vol_ratio);
        get("vol_break", c.vol_break);
        get("vol_break2", c.vol_break2);
        get_opt("tpx", c.tpx);
        get_opt("tpy", c.tpy);
        get_opt("window", c.window);
        get("dmax", c.dmax);
        get("delay", c.delay);
        get("report", c.report);
        return c;
    }
};

namespace detail {

inline Series load_input(const RunConfig& cfg, std::size_t i = 0) {
    if (cfg.inputs.size() <= i) throw UsageError("missing --input");
    return load_series(cfg.inputs[i], ColumnSpec::parse(cfg.column));
}

inline double resolve_tau0(const RunConfig& cfg, std::size_t T) {
    if (cfg.tau0 == "auto") return default_min_window(T);
    const auto v = bubbles::detail::parse_double(cfg.tau0);
    if (!v || !(*v > 0.0 && *v < 1.0)) throw UsageError("--tau0 must be 'auto' or a fraction in (0,1)");
    return *v;
}

inline bool is_sign(StatKind k) { return k == StatKind::ssadf || k == StatKind::sgsadf; }

inline std::vector<StatKind> parse_stats(const RunConfig& cfg) {
    std::vector<StatKind> out;
    for (const auto& s : cfg.stats) out.push_back(stat_from_string(s));
    if (out.empty()) throw UsageError("--stat needs at least one statistic");
    bool sign = false, gls = false;
    for (auto k : out) {
        sign = sign || is_sign(k);
        gls = gls || k == StatKind::sadf_gls;
    }
    if (sign && gls)
        throw UsageError("sign-based statistics and SADF-GLS cannot be combined: the sign statistics ignore the "
                         "GLS deterministic adjustment");
    if (cfg.cbar && !gls) throw UsageError("--cbar applies only to sadf-gls");
    if (cfg.filter_lags != 0 && !sign) throw UsageError("--filter-lags applies only to sign statistics");
    return out;
}

inline TestOptions test_options(const RunConfig& cfg, std::size_t T) {
    TestOptions o;
    o.tau0 = resolve_tau0(cfg, T);
    o.adf.det = det_from_string(cfg.det);
    o.adf.k = cfg.k;
    o.c_bar = cfg.cbar;
    o.bandwidth = cfg.bandwidth;
    if (cfg.sign_mode == "raw") o.sign.mode = SignMode::raw;
    else if (cfg.sign_mode == "demeaned") o.sign.mode = SignMode::demeaned;
    else throw UsageError("--sign-mode must be raw or demeaned");
    o.sign.filter_lags = cfg.filter_lags;
    if (cfg.k < 0) throw UsageError("--k must be non-negative");
    return o;
}

struct CvChoice {
    enum class Kind { rule, table, bootstrap, value } kind = Kind::rule;
    std::string path;
    double value = 0.0;
};

inline CvChoice parse_cv(const std::string& s, const std::string& fallback) {
    const std::string v = s.empty() ? fallback : s;
    CvChoice c;
    if (v == "rule") c.kind = CvChoice::Kind::rule;
    else if (v == "bootstrap") c.kind = CvChoice::Kind::bootstrap;
    else if (v.rfind("table:", 0) == 0) {
        c.kind = CvChoice::Kind::table;
        c.path = v.substr(6);
    } else if (v.rfind("value:", 0) == 0) {
        c.kind = CvChoice::Kind::value;
        const auto x = bubbles::detail::parse_double(v.substr(6));
        if (!x) throw UsageError("--cv value:<x> needs a number");
        c.value = *x;
    } else {
        throw UsageError("--cv must be rule, bootstrap, table:<path> or value:<x>");
    }
    return c;
}

inline CvTable load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed critical value table '" + path + "': " + e.what());
    }
    try {
        if (j.contains("results") && j.at("results").contains("table")) return CvTable::from_json(j.at("results").at("table"));
        if (j.contains("table")) return CvTable::from_json(j.at("table"));
        return CvTable::from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed critical value table '" + path + "': " + e.what());
    }
}

inline double table_cv(const std::string& path, StatKind kind, std::size_t T, const TestOptions& o, double level) {
    const auto t = load_table(path);
    const auto v = t.lookup(to_string(kind), T, o.tau0, to_string(o.adf.det), o.adf.k, 1.0 - level);
    if (!v)
        throw DataError("critical value table has no entry for " + to_string(kind) + " at T=" + std::to_string(T) +
                        ", tau0=" + bubbles::detail::format_double(o.tau0) + ", quantile " +
                        bubbles::detail::format_double(1.0 - level));
    return *v;
}

inline Json series_json(const Series& y) {
    Json j{{"name", y.name()}, {"T", y.size()}};
    if (y.has_labels()) j["labels"] = y.labels();
    return j;
}

inline Json cv_json(const CvSequence& cv) {
    Json a = Json::array();
    for (double v : cv.values) a.push_back(v);
    return {{"source", to_string(cv.source)}, {"values", a}};
}

inline VolPath make_vol(const RunConfig& cfg) {
    VolPath v;
    v.kind = vol_kind_from_string(cfg.vol);
    v.ratio = cfg.vol_ratio;
    v.break1 = cfg.vol_break;
    v.break2 = cfg.vol_break2;
    v.validate();
    return v;
}

inline DgpSpec make_dgp(const RunConfig& cfg, const std::string& kind) {
    DgpSpec s;
    s.kind = dgp_from_string(kind);
    s.T = cfg.T;
    s.tau_e = cfg.tau_e;
    s.tau_c = cfg.tau_c;
    s.tau_r = cfg.tau_r;
    s.c = cfg.c;
    s.alpha = cfg.alpha;
    s.seed = cfg.seed;
    s.validate();
    return s;
}

// --------------------------------------------------------------------------

inline Json run_test(const RunConfig& cfg) {
    const Series y = load_input(cfg);
    const auto kinds = parse_stats(cfg);
    const TestOptions o = test_options(cfg, y.size());
    const auto cvc = parse_cv(cfg.cv, "bootstrap");
    const auto mult = multiplier_from_string(cfg.multiplier);
    Json res;
    res["tau0"] = o.tau0;
    res["cv_source"] = cfg.cv.empty() ? "bootstrap" : cfg.cv;

    if (kinds.size() > 1) {
        if (cvc.kind == CvChoice::Kind::bootstrap) {
            const auto u = bootstrap_union(y, kinds, o, cfg.B, cfg.seed, cfg.level, mult);
            res["union"] = {{"members", u.members}, {"statistics", u.statistics}, {"member_cv", u.member_cv},
                            {"U", u.U},             {"cv_U", u.cv_U},            {"reject", u.reject},
                            {"B", u.B}};
            res["decision"] = u.reject ? "reject" : "no-reject";
            return res;
        }
        std::vector<double> stats, cvs;
        Json members = Json::array();
        for (auto k : kinds) {
            const double s = compute_statistic(k, y, o);
            double c = 0.0;
            if (cvc.kind == CvChoice::Kind::table) c = table_cv(cvc.path, k, y.size(), o, cfg.level);
            else if (cvc.kind == CvChoice::Kind::value) c = cvc.value;
            else c = cv_rule(y.size());
            stats.push_back(s);
            cvs.push_back(c);
            members.push_back({{"statistic", to_string(k)}, {"value", s}, {"cv", c}});
        }
        const bool rej = union_of_rejections(stats, cvs, 1.0);
        res["union"] = {{"members", members}, {"psi", 1.0}, {"reject", rej}};
        res["decision"] = rej ? "reject" : "no-reject";
        return res;
    }

    const StatKind kind = kinds.front();
    const SupResult sup = compute_sup(kind, y, o);
    res["statistic"] = to_string(kind);
    res["result"] = to_json(sup);
    bool reject = false;
    switch (cvc.kind) {
        case CvChoice::Kind::bootstrap: {
            const auto rep = wild_bootstrap_pvalue(y, kind, o, cfg.B, mult, cfg.seed);
            res["bootstrap"] = {{"p_value", rep.p_value},
                                {"B", rep.B},
                                {"failed", rep.failed},
                                {"multiplier", to_string(rep.multiplier)},
                                {"critical_value", rep.critical_value(cfg.level)}};
            res["critical_value"] = rep.critical_value(cfg.level);
            res["p_value"] = rep.p_value;
            reject = rep.p_value <= cfg.level;
            break;
        }
        case CvChoice::Kind::table: {
            const double c = table_cv(cvc.path, kind, y.size(), o, cfg.level);
            res["critical_value"] = c;
            reject = sup.value > c;
            break;
        }
        case CvChoice::Kind::value:
            res["critical_value"] = cvc.value;
            reject = sup.value > cvc.value;
            break;
        case CvChoice::Kind::rule: {
            const double c = cv_rule(y.size());
            res["critical_value"] = c;
            reject = sup.value > c;
            break;
        }
    }
    res["level"] = cfg.level;
    res["decision"] = reject ? "reject" : "no-reject";
    return res;
}

inline CvSequence stamping_cv(const RunConfig& cfg, const Series& y, const StatSequence& seq, StatKind kind,
                              const TestOptions& o) {
    const auto cvc = parse_cv(cfg.cv, "rule");
    switch (cvc.kind) {
        case CvChoice::Kind::rule: return rule_cv(seq);
        case CvChoice::Kind::value: return constant_cv(seq, cvc.value, CvSource::simulated);
        case CvChoice::Kind::table:
            return constant_cv(seq, table_cv(cvc.path, kind, y.size(), o, cfg.level), CvSource::simulated);
        case CvChoice::Kind::bootstrap: {
            const auto rep = wild_bootstrap_pvalue(y, kind, o, cfg.B, multiplier_from_string(cfg.multiplier), cfg.seed);
            return constant_cv(seq, rep.critical_value(cfg.level), CvSource::bootstrap);
        }
    }
    return rule_cv(seq);
}

inline Json run_datestamp(const RunConfig& cfg) {
    const Series y = load_input(cfg);
    const TestOptions o = test_options(cfg, y.size());
    const std::string method = cfg.method.empty() ? "psy" : cfg.method;
    const double min_dur = default_min_duration(y.size(), cfg.delta);
    Json res;
    res["method"] = method;
    res["tau0"] = o.tau0;
    res["min_duration"] = min_dur;
    if (method == "pwy" || method == "psy") {
        const StatKind kind = method == "pwy" ? StatKind::sadf : StatKind::gsadf;
        const SupResult sup = compute_sup(kind, y, o);
        const CvSequence cv = stamping_cv(cfg, y, sup.sequence, kind, o);
        const auto eps = crossing_stamp(sup.sequence, cv, min_dur);
        res["sequence"] = to_json(sup.sequence);
        res["cv"] = cv_json(cv);
        res["episodes"] = to_json(eps, &y);
    } else if (method == "two-step") {
        const auto g = gsadf(y, o.tau0, o.adf);
        const CvSequence cv = stamping_cv(cfg, y, g.sequence, StatKind::gsadf, o);
        const auto r = two_step_stamp(y, o.tau0, o.adf, min_dur, cv);
        Json subs = Json::array();
        for (auto [lo, hi] : r.subsamples) subs.push_back({lo, hi});
        res["sequence"] = to_json(g.sequence);
        res["cv"] = cv_json(cv);
        res["preliminary"] = to_json(r.preliminary, &y);
        res["subsamples"] = subs;
        res["episodes"] = to_json(r.refined, &y);
    } else if (method == "sign") {
        const auto r = sign_stamp(y, o.tau0, cfg.epsilon, o.sign);
        res["epsilon"] = cfg.epsilon;
        res["value"] = r.value;
        res["episodes"] = to_json(std::vector<Episode>{r.episode}, &y);
    } else if (method == "ssr-bic") {
        const auto sel = select_model_bic(y);
        Json bic = Json::array();
        for (double b : sel.bic) bic.push_back(number_or_null(b));
        res["model"] = sel.model;
        res["bic"] = bic;
        res["episodes"] = to_json(std::vector<Episode>{sel.episode}, &y);
    } else {
        throw UsageError("--method for datestamp must be pwy, psy, two-step, sign or ssr-bic");
    }
    return res;
}

inline Json run_monitor(const RunConfig& cfg) {
    const Series y = load_input(cfg);
    const TestOptions o = test_options(cfg, y.size());
    const auto mult = multiplier_from_string(cfg.multiplier);
    const auto comp = composite_monitor_cv(y, o.tau0, cfg.Tb, cfg.B, cfg.seed, o.adf, cfg.level, mult);
    const auto g = gsadf(y, o.tau0, o.adf);
    const CvSequence cv = constant_cv(g.sequence, comp.critical_value, CvSource::bootstrap);
    const auto eps = psy_stamp(g.sequence, cv, default_min_duration(y.size(), cfg.delta));
    Json res;
    res["tau0"] = o.tau0;
    res["Tb"] = cfg.Tb;
    res["control_window"] = {comp.first_end, comp.last_end};
    res["critical_value"] = comp.critical_value;
    res["phi"] = comp.phi;
    Json first = nullptr;
    for (const auto& e : g.sequence.entries)
        if (!e.skipped && e.value > comp.critical_value) {
            first = e.end;
            break;
        }
    res["first_detection"] = first;
    res["sequence"] = to_json(g.sequence);
    res["cv"] = cv_json(cv);
    res["episodes"] = to_json(eps, &y);
    return res;
}

inline Json run_simulate_cv(const RunConfig& cfg) {
    TabulateOptions t;
    const auto kinds = parse_stats(cfg);
    if (kinds.size() != 1) throw UsageError("simulate-cv tabulates one statistic at a time");
    t.statistic = kinds.front();
    t.sizes = cfg.sizes;
    if (cfg.tau0 != "auto") t.tau0 = resolve_tau0(cfg, 100);
    t.adf.det = det_from_string(cfg.det);
    t.adf.k = cfg.k;
    t.levels = cfg.levels;
    t.replications = cfg.reps;
    t.seed = cfg.seed;
    const auto table = tabulate_critical_values(t);
    return {{"table", table.to_json()}};
}

inline Json rate_json(const RejectionRate& r) {
    return {{"rate", r.rate}, {"se", r.se}, {"replications", r.replications}, {"failed", r.failed}};
}

inline Json run_study(const RunConfig& cfg) {
    const auto kinds = parse_stats(cfg);
    if (kinds.size() != 1) throw UsageError("study evaluates one statistic at a time");
    StudyTest test;
    test.statistic = kinds.front();
    test.options = test_options(cfg, cfg.T);
    test.B = cfg.B;
    test.multiplier = multiplier_from_string(cfg.multiplier);
    const auto cvc = parse_cv(cfg.cv, "bootstrap");
    switch (cvc.kind) {
        case CvChoice::Kind::bootstrap: test.bootstrap = true; break;
        case CvChoice::Kind::value: test.critical_value = cvc.value; break;
        case CvChoice::Kind::rule: test.critical_value = cv_rule(cfg.T); break;
        case CvChoice::Kind::table:
            test.critical_value = table_cv(cvc.path, test.statistic, cfg.T, test.options, cfg.level);
            break;
    }
    const VolPath vol = make_vol(cfg);
    const Scenario null{make_dgp(cfg, cfg.dgp_null), vol};
    const Scenario alt{make_dgp(cfg, cfg.dgp_alt), vol};
    const auto r = size_power_study(test, null, alt, cfg.reps, cfg.level, cfg.seed);
    Json res;
    res["tau0"] = test.options.tau0;
    if (!test.bootstrap) res["critical_value"] = test.critical_value;
    res["size"] = rate_json(r.size);
    res["power"] = rate_json(r.power);
    return res;
}

inline std::size_t argmax_index(const StatSequence& s) {
    std::size_t best = 0;
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& e : s.entries)
        if (!e.skipped && e.value > v) {
            v = e.value;
            best = e.end;
        }
    if (best == 0) throw DegenerateFit("coefficient sequence has no valid entries");
    return best;
}

inline Json run_relate(const RunConfig& cfg) {
    if (cfg.inputs.size() != 2) throw UsageError("relate needs exactly two --input series");
    const Series a = load_input(cfg, 0);
    const Series b = load_input(cfg, 1);
    if (a.size() != b.size()) throw DataError("related series must have equal length");
    const TestOptions o = test_options(cfg, a.size());
    const std::string method = cfg.method.empty() ? "migration" : cfg.method;
    Json res;
    res["method"] = method;
    if (method == "migration") {
        const std::size_t w0 = frac_to_index(o.tau0, a.size());
        const auto tx = recursive_coefficients(a, w0, o.adf);
        const auto ty = recursive_coefficients(b, w0, o.adf);
        const std::size_t px = cfg.tpx.value_or(argmax_index(tx));
        const std::size_t py = cfg.tpy.value_or(argmax_index(ty));
        const auto r = migration_test(tx, ty, px, py);
        res["T_pX"] = px;
        res["T_pY"] = py;
        res["beta0"] = r.beta0_hat;
        res["beta1"] = r.beta1_hat;
        res["se_beta1"] = r.se_beta1;
        res["Z_beta"] = r.Z_beta;
        res["p_value"] = r.p_value;
        res["decision"] = r.p_value <= cfg.level ? "reject" : "no-reject";
    } else if (method == "contagion") {
        const std::size_t S = cfg.window.value_or(frac_to_index(o.tau0, a.size()));
        const auto core = rolling_coefficients(a, S, o.adf);
        const auto target = rolling_coefficients(b, S, o.adf);
        const auto r = contagion_delay(core, target, 0, cfg.dmax);
        Json r2 = Json::array();
        for (double v : r.R2_by_delay) r2.push_back(number_or_null(v));
        res["window"] = S;
        res["d_hat"] = r.d_hat;
        res["theta1"] = r.theta1_hat;
        res["theta2"] = r.theta2_hat;
        res["R2"] = r.R2;
        res["R2_by_delay"] = r2;
    } else if (method == "cobubble") {
        const auto r = cobubble_test(a, b, cfg.delay, cfg.B, cfg.seed, multiplier_from_string(cfg.multiplier));
        res["delay"] = cfg.delay;
        res["S"] = r.S;
        res["p_value"] = r.p_value;
        res["overlap"] = r.overlap;
        res["intercept"] = r.intercept;
        res["slope"] = r.slope;
        res["decision"] = r.p_value <= cfg.level ? "reject" : "no-reject";
    } else {
        throw UsageError("--method for relate must be migration, contagion or cobubble");
    }
    return res;
}

}  // namespace detail

/// Tidy CSV (index, label, tau2, statistic, cv, in_episode) from a report's sequence.
inline std::string emit_plot_data(const nlohmann::json& report) {
    const auto& res = report.at("results");
    const nlohmann::json* seq = nullptr;
    if (res.contains("sequence")) seq = &res.at("sequence");
    else if (res.contains("result") && res.at("result").contains("sequence")) seq = &res.at("result").at("sequence");
    if (!seq) throw DataError("report has no statistic sequence");
    std::vector<std::string> labels;
    if (report.contains("series") && report.at("series").contains("labels"))
        labels = report.at("series").at("labels").get<std::vector<std::string>>();
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    if (res.contains("episodes"))
        for (const auto& e : res.at("episodes"))
            ranges.emplace_back(e.at("origin_index").get<std::size_t>(), e.at("collapse_index").get<std::size_t>());
    const nlohmann::json* cv = res.contains("cv") ? &res.at("cv").at("values") : nullptr;

    std::ostringstream out;
    out << "index,label,tau2,statistic,cv,in_episode\n";
    const auto& idx = seq->at("index");
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto t = idx[i].get<std::size_t>();
        out << t << ',' << (t >= 1 && t <= labels.size() ? labels[t - 1] : std::string()) << ','
            << bubbles::detail::format_double(seq->at("tau2")[i].get<double>()) << ',';
        const auto& v = seq->at("value")[i];
        if (!v.is_null()) out << bubbles::detail::format_double(v.get<double>());
        out << ',';
        if (cv && i < cv->size()) out << bubbles::detail::format_double((*cv)[i].get<double>());
        bool flag = false;
        for (auto [lo, hi] : ranges) flag = flag || (t >= lo && t <= hi);
        out << ',' << (flag ? 1 : 0) << '\n';
    }
    return out.str();
}

/// Runs one configured subcommand and returns the full report.
inline Json execute(const RunConfig& cfg) {
    Json results;
    if (cfg.subcommand == "test") results = detail::run_test(cfg);
    else if (cfg.subcommand == "datestamp") results = detail::run_datestamp(cfg);
    else if (cfg.subcommand == "monitor") results = detail::run_monitor(cfg);
    else if (cfg.subcommand == "simulate-cv") results = detail::run_simulate_cv(cfg);
    else if (cfg.subcommand == "study") results = detail::run_study(cfg);
    else if (cfg.subcommand == "relate") results = detail::run_relate(cfg);
    else throw UsageError("unknown subcommand '" + cfg.subcommand + "'");

    Json report;
    report["schema_version"] = kReportSchemaVersion;
    report["tool"] = "bubbles";
    report["config"] = cfg.to_json();
    if (!cfg.inputs.empty() && cfg.subcommand != "relate") report["series"] = detail::series_json(detail::load_input(cfg));
    report["results"] = results;
    return report;
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
    if (path.empty() || path == "-") {
        fallback << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

inline std::uint64_t default_seed() {
    if (const char* s = std::getenv("BUBBLES_SEED")) {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            throw UsageError("BUBBLES_SEED must be a non-negative integer");
        }
    }
    return 1;
}

/// Command-line entry point; returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Right-tailed unit root tests, bubble dating and simulation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "bubbles 1.0.0");

    RunConfig cfg;
    std::string out_path, config_path, tau0_str = "auto";
    unsigned threads = 0;
    std::optional<std::uint64_t> seed_flag;

    auto common = [&](CLI::App* sub, bool data = true) {
        if (data) {
            sub->add_option("--input", cfg.inputs, "CSV input file (repeat for relate)");
            sub->add_option("--column", cfg.column, "value column name or 0-based position");
        }
        sub->add_option("--stat", cfg.stats, "statistic(s): adf sadf gsadf hb sadf-gls sbz ssadf sgsadf stadf gstadf")
            ->delimiter(',');
        sub->add_option("--tau0", cfg.tau0, "minimum window fraction or 'auto'");
        sub->add_option("--det", cfg.det, "deterministic terms")->check(CLI::IsMember({"none", "const", "trend"}));
        sub->add_option("--k", cfg.k, "ADF lag order");
        sub->add_option("--B", cfg.B, "bootstrap replications");
        sub->add_option("--seed", seed_flag, "random seed (default $BUBBLES_SEED or 1)");
        sub->add_option("--level", cfg.level, "significance level");
        sub->add_option("--cv", cfg.cv, "critical values: rule, bootstrap, table:<path>, value:<x>");
        sub->add_option("--Tb", cfg.Tb, "composite bootstrap control window");
        sub->add_option("--method", cfg.method, "method for datestamp / relate");
        sub->add_option("--multiplier", cfg.multiplier, "bootstrap multiplier")
            ->check(CLI::IsMember({"gaussian", "rademacher", "skewed"}));
        sub->add_option("--m", cfg.m, "end-of-sample window length");
        sub->add_option("--bandwidth", cfg.bandwidth, "kernel bandwidth in (0,1)");
        sub->add_option("--cbar", cfg.cbar, "GLS non-centrality");
        sub->add_option("--sign-mode", cfg.sign_mode, "raw or demeaned");
        sub->add_option("--filter-lags", cfg.filter_lags, "sign filter lag order");
        sub->add_option("--delta", cfg.delta, "duration floor multiplier of log(T)/T");
        sub->add_option("--epsilon", cfg.epsilon, "sign dating variance exponent");
        sub->add_option("--out", out_path, "output file (default stdout)");
        sub->add_option("--threads", threads, "worker thread cap (0 = all cores)");
        sub->add_option("--config", config_path, "JSON config or report to re-run");
    };

    auto* test = app.add_subcommand("test", "compute a test statistic and its decision");
    common(test);
    auto* date = app.add_subcommand("datestamp", "estimate bubble episodes (pwy|psy|two-step|sign|ssr-bic)");
    common(date);
    auto* mon = app.add_subcommand("monitor", "composite bootstrap monitoring pass");
    common(mon);
    auto* sim = app.add_subcommand("simulate-cv", "tabulate null critical values");
    common(sim, false);
    sim->add_option("--sizes", cfg.sizes, "sample sizes")->delimiter(',');
    sim->add_option("--reps", cfg.reps, "replications");
    sim->add_option("--levels", cfg.levels, "quantile levels")->delimiter(',');
    auto* study = app.add_subcommand("study", "size and power by simulation");
    common(study, false);
    study->add_option("--reps", cfg.reps, "replications");
    study->add_option("--T", cfg.T, "sample size");
    study->add_option("--dgp-null", cfg.dgp_null, "null process");
    study->add_option("--dgp-alt", cfg.dgp_alt, "alternative process");
    study->add_option("--tau-e", cfg.tau_e, "bubble origin fraction");
    study->add_option("--tau-c", cfg.tau_c, "bubble collapse fraction");
    study->add_option("--tau-r", cfg.tau_r, "recovery fraction");
    study->add_option("--c", cfg.c, "localising constant");
    study->add_option("--alpha", cfg.alpha, "localising exponent");
    study->add_option("--vol", cfg.vol, "volatility path: constant, single-break, double-break, trend");
    study->add_option("--vol-ratio", cfg.vol_ratio, "volatility ratio");
    study->add_option("--vol-break", cfg.vol_break, "first volatility break fraction");
    study->add_option("--vol-break2", cfg.vol_break2, "second volatility break fraction");
    auto* rel = app.add_subcommand("relate", "migration, contagion or co-bubble analysis of two series");
    common(rel);
    rel->add_option("--tpx", cfg.tpx, "peak index of the first series");
    rel->add_option("--tpy", cfg.tpy, "peak index of the second series");
    rel->add_option("--window", cfg.window, "rolling window length");
    rel->add_option("--dmax", cfg.dmax, "largest contagion delay");
    rel->add_option("--delay", cfg.delay, "co-bubble shift i");
    auto* plot = app.add_subcommand("plot-data", "tidy CSV from a report");
    std::string report_path;
    plot->add_option("--report", report_path, "report JSON")->required();
    plot->add_option("--out", out_path, "output CSV (default stdout)");
    auto* rerun = app.add_subcommand("run", "re-run the configuration embedded in a report or config file");
    rerun->add_option("--config", config_path, "JSON config or report")->required();
    rerun->add_option("--out", out_path, "output file (default stdout)");
    rerun->add_option("--threads", threads, "worker thread cap (0 = all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        set_max_threads(threads);
        if (plot->parsed()) {
            std::ifstream in(report_path);
            if (!in) throw DataError("cannot open '" + report_path + "'");
            nlohmann::json rep;
            try {
                rep = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw DataError(std::string("malformed report: ") + e.what());
            }
            write_text(out_path, emit_plot_data(rep), out);
            return kExitOk;
        }
        CLI::App* chosen = app.get_subcommands().front();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw DataError("cannot open '" + config_path + "'");
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::exception& e) {
                throw DataError(std::string("malformed config: ") + e.what());
            }
            RunConfig loaded = RunConfig::from_json(j.contains("config") ? j.at("config") : j);
            if (chosen != rerun) {
                if (loaded.subcommand != chosen->get_name())
                    throw UsageError("config was written for '" + loaded.subcommand + "'");
            }
            cfg = loaded;
        } else {
            cfg.subcommand = chosen->get_name();
            cfg.seed = seed_flag.value_or(default_seed());
        }
        const Json report = execute(cfg);
        write_text(out_path, report.dump(2) + "\n", out);
        return kExitOk;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const DegenerateFit& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace bubbles::cli
