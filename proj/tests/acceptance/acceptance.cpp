#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bubbles/bubbles.hpp"
#include "cli_app.hpp"
#include "helpers.hpp"
#include "oracle_checks.hpp"

using namespace bubbles;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1. Nesting of sup statistics on random series.
Outcome nesting() {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t violations = 0;
    std::string first;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto v = oracle::draw_case(100000 + s, 100);
        const Series y(v);
        const double tau0 = default_min_window(100);
        const double adf = adf_stat(y, 0, 100);
        const auto sa = sadf(y, tau0);
        const auto ga = gsadf(y, tau0);
        const auto sg = sign_statistics(y, tau0);
        const auto tt = time_transformed_tests(y, tau0);
        const bool ok = ga.value >= sa.value && sa.value >= adf && sg.sgsadf.value >= sg.ssadf.value &&
                        tt.gstadf.value >= tt.stadf.value;
        if (!ok && violations++ == 0) first = fmt(" first at series %llu", static_cast<unsigned long long>(s));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {violations == 0 && secs < 60.0, fmt("%zu violations in 1000 series, %.1f s", violations, secs) + first};
}

// 2. Every sup statistic and date search against the dense oracle.
Outcome oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t comparisons = 0, bad = 0;
    std::string first;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const std::size_t T = 20 + s % 11;
        const auto v = oracle::draw_case(200000 + s, T);
        const double tau0 = s % 2 == 0 ? default_min_window(T) : 0.25;
        const auto mm = oracle::compare_all(v, tau0);
        comparisons += mm.comparisons;
        bad += mm.items.size();
        if (!mm.items.empty() && first.empty()) first = " first: series " + std::to_string(s) + " " + mm.items.front();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {bad == 0 && secs < 300.0, fmt("%zu mismatches in %zu comparisons, %.1f s", bad, comparisons, secs) + first};
}

// 3. Constants.
Outcome constants() {
    std::vector<std::string> bad;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) bad.push_back(what);
    };
    for (std::size_t T : {50, 100, 200, 400, 1000})
        check(default_min_window(T) == 0.01 + 1.8 / std::sqrt(static_cast<double>(T)), "tau0 rule");
    check(default_gls_cbar(DetSpec::constant) == 1.6 && default_gls_cbar(DetSpec::trend) == 2.4, "c_bar");
    check(kDefaultEndWindow == 10, "m");
    for (std::size_t T : {100, 400, 1000}) {
        const double l = std::log(static_cast<double>(T));
        check(cv_rule(T) == 2.0 / 3.0 * std::log(l * l), "cv rule");
    }
    check(cauchy_percentile(0.90) == 6.315 && cauchy_percentile(0.95) == 12.7 && cauchy_percentile(0.99) == 63.65674,
          "cauchy percentiles");
    check(kSignStampEpsilon == 0.01, "epsilon");
    check(kDefaultControlWindow == 24, "T_b");
    check(kModelPenalty == std::array<int, 4>{3, 4, 6, 7}, "BIC penalties");
    Rng rng = stream_rng(3, 0);
    Multiplier w(MultiplierKind::skewed);
    double m1 = 0, m2 = 0, m3 = 0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double x = w(rng);
        m1 += x;
        m2 += x * x;
        m3 += x * x * x;
    }
    m1 /= n;
    m2 /= n;
    m3 /= n;
    check(std::abs(m1) <= 0.02 && std::abs(m2 - 1) <= 0.02 && std::abs(m3 - 1) <= 0.02, "skewed moments");
    std::string d = fmt("skewed multiplier moments %.4f %.4f %.4f", m1, m2, m3);
    for (const auto& b : bad) d += "; wrong " + b;
    return {bad.empty(), d};
}

// 4. Exact invariances.
Outcome invariances() {
    std::size_t checks = 0, bad = 0;
    auto same = [&](double a, double b) {
        ++checks;
        if (!(a == b)) ++bad;
    };
    const std::vector<VolPath> vols{VolPath::single_break(0.3, 5.0), VolPath::double_break(0.2, 0.6, 0.1),
                                    VolPath::trend(7.0)};
    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng rng = stream_rng(4, s);
        DgpSpec spec;
        spec.T = 150;
        const auto z = draw_innovations(spec.T, std::nullopt, rng);
        const Series base = simulate_from_shocks(spec, VolPath::constant(), z);
        std::vector<double> random_sigma(spec.T);
        std::uniform_real_distribution<double> u(0.05, 20.0);
        for (auto& x : random_sigma) x = u(rng);
        std::vector<double> acc(spec.T);
        double c = 0;
        for (std::size_t t = 0; t < spec.T; ++t) acc[t] = c += random_sigma[t] * z[t];
        std::vector<Series> variants{Series(acc)};
        for (const auto& v : vols) variants.push_back(simulate_from_shocks(spec, v, z));
        std::vector<double> shifted(base.values());
        for (auto& x : shifted) x += 250.0;
        variants.emplace_back(shifted);
        for (auto mode : {SignMode::raw, SignMode::demeaned}) {
            const auto r0 = sign_statistics(base, 0.2, {mode, 0});
            for (const auto& y : variants) {
                const auto r = sign_statistics(y, 0.2, {mode, 0});
                same(r.ssadf.value, r0.ssadf.value);
                same(r.sgsadf.value, r0.sgsadf.value);
            }
        }

        const auto v = testing_util::dyadic_walk(150, 300 + s);
        std::vector<double> loc(v), sc(v);
        for (auto& x : loc) x += 1000.0 - static_cast<double>(s);
        for (auto& x : sc) x = std::ldexp(x, static_cast<int>(s % 7) - 3);
        for (auto det : {DetSpec::constant, DetSpec::trend})
            for (int k = 0; k <= 2; ++k) {
                const double a = adf_stat(Series(v), 0, 150, {det, k});
                same(adf_stat(Series(loc), 0, 150, {det, k}), a);
                same(adf_stat(Series(sc), 0, 150, {det, k}), a);
            }
        same(sbz(Series(loc), 0.2).value, sbz(Series(v), 0.2).value);
    }
    return {bad == 0, fmt("%zu of %zu bit-exact comparisons differ", bad, checks)};
}

// 5. Size of the bootstrap GSADF under non-stationary volatility.
Outcome size_control() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t T = 200, reps = 1000;
    const double tau0 = default_min_window(T);
    StudyTest boot;
    boot.statistic = StatKind::gsadf;
    boot.options.tau0 = tau0;
    boot.bootstrap = true;
    boot.B = 399;
    Scenario sc;
    sc.spec.T = T;
    const std::vector<std::pair<std::string, VolPath>> vols{{"single-break", VolPath::single_break(0.5, 3.0)},
                                                            {"double-break", VolPath::double_break(0.4, 0.6, 3.0)},
                                                            {"trending", VolPath::trend(3.0)}};
    bool ok = true;
    std::string d;
    std::uint64_t stream = 10;
    for (const auto& [name, vol] : vols) {
        sc.vol = vol;
        const auto r = rejection_rate(boot, sc, reps, 0.05, 51, stream++);
        ok = ok && r.rate >= 0.03 && r.rate <= 0.08;
        d += fmt("%s %.3f, ", name.c_str(), r.rate);
    }
    TestOptions o;
    o.tau0 = tau0;
    const auto null = simulate_null_statistics(StatKind::sadf, T, o, 5000, 52, 0);
    StudyTest plain;
    plain.statistic = StatKind::sadf;
    plain.options = o;
    plain.critical_value = quantile(detail::finite_only(null), 0.95);
    sc.vol = VolPath::single_break(0.5, 3.0);
    const auto r = rejection_rate(plain, sc, reps, 0.05, 53, 0);
    ok = ok && r.rate > 0.08;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    d += fmt("plain SADF single-break %.3f (cv %.3f), %.0f s", r.rate, plain.critical_value, secs);
    return {ok, d};
}

/// First-episode origin fraction; 1 when nothing is detected.
double origin_or_end(const std::vector<Episode>& eps) { return eps.empty() ? 1.0 : eps.front().origin; }

/// Draws from spec until the bubble starts from a positive level, so the explosive regime is upward.
Series upward_draw(const DgpSpec& spec, std::uint64_t seed, std::uint64_t r) {
    const auto Te = static_cast<std::size_t>(std::floor(spec.tau_e * static_cast<double>(spec.T)));
    for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng = stream_rng(seed, r, attempt);
        Series y = simulate(spec, VolPath::constant(), rng);
        if (y.at_obs(Te) - spec.level > 0.0) return y;
    }
}

// 6. Date-stamping accuracy.
Outcome dating() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> rmse;
    std::string d;
    for (std::size_t T : {200, 400, 800}) {
        DgpSpec spec;
        spec.kind = DgpKind::pwy_bubble;
        spec.T = T;
        spec.c = 1.0;
        spec.alpha = 0.6;
        std::vector<double> err(300);
        parallel_for(300, [&](std::size_t r) {
            const Series y = upward_draw(spec, 61 + T, r);
            const double tau0 = default_min_window(T);
            const auto g = gsadf(y, tau0);
            const auto eps = psy_stamp(g.sequence, rule_cv(g.sequence), default_min_duration(T));
            err[r] = origin_or_end(eps) - spec.tau_e;
        });
        double s = 0;
        for (double e : err) s += e * e;
        rmse.push_back(std::sqrt(s / 300.0));
        d += fmt("RMSE T=%zu %.4f, ", T, rmse.back());
    }
    const bool trend = rmse[0] > rmse[1] && rmse[1] > rmse[2];

    DgpSpec spec;
    spec.kind = DgpKind::collapse_bubble;
    spec.T = 400;
    std::vector<double> e_psy(300), e_two(300);
    parallel_for(300, [&](std::size_t r) {
        const Series y = upward_draw(spec, 62, r);
        const auto res = two_step_stamp(y, default_min_window(400));
        e_psy[r] = std::abs(origin_or_end(res.preliminary) - spec.tau_e);
        e_two[r] = std::abs(origin_or_end(res.refined) - spec.tau_e);
    });
    const double mae_psy = mean(e_psy), mae_two = mean(e_two);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    d += fmt("origin MAE two-step %.4f vs PSY %.4f, %.0f s", mae_two, mae_psy, secs);
    return {trend && mae_two <= mae_psy, d};
}

// 7. Coverage of the mildly explosive confidence intervals.
Outcome coverage() {
    DgpSpec spec;
    spec.kind = DgpKind::mildly_explosive;
    spec.T = 1000;
    spec.c = 1.0;
    spec.alpha = 0.6;
    const double rho = spec.explosive_root();
    std::vector<int> cauchy(2000), tci(2000);
    parallel_for(2000, [&](std::size_t r) {
        Rng rng = stream_rng(71, r);
        const Series y = simulate(spec, VolPath::constant(), rng);
        const auto a = cauchy_ci(y, 0.95);
        const auto b = t_ci(y, DetSpec::none, 0.95);
        cauchy[r] = a.lower <= rho && rho <= a.upper;
        tci[r] = b.lower <= rho && rho <= b.upper;
    });
    const double cc = std::accumulate(cauchy.begin(), cauchy.end(), 0.0) / 2000.0;
    const double ct = std::accumulate(tci.begin(), tci.end(), 0.0) / 2000.0;
    const bool ok = std::abs(cc - 0.95) <= 0.03 && std::abs(ct - 0.95) <= 0.03;
    return {ok, fmt("coverage Cauchy %.4f, t %.4f", cc, ct)};
}

// 8. Family-wise false detection of the composite monitor.
Outcome monitoring() {
    const std::size_t T = 200, reps = 500;
    const double tau0 = default_min_window(T);
    DgpSpec spec;
    spec.T = T;
    const VolPath vol = VolPath::single_break(0.2, 3.0);
    std::vector<int> hit(reps);
    parallel_for(reps, [&](std::size_t r) {
        Rng rng = stream_rng(81, r);
        const Series y = simulate(spec, vol, rng);
        const auto c = composite_monitor_cv(y, tau0, kDefaultControlWindow, 199, splitmix64(rng()));
        const auto m = bsadf_range(y, c.first_end, c.first_end, c.last_end, {}, tau0);
        hit[r] = m.value > c.critical_value;
    });
    const double rate = std::accumulate(hit.begin(), hit.end(), 0.0) / static_cast<double>(reps);
    return {rate >= 0.02 && rate <= 0.09, fmt("false detection rate %.4f over the control window", rate)};
}

// 9. Reports re-executed from their embedded configuration.
Outcome determinism() {
    testing_util::TempDir dir;
    const Series a = testing_util::bubble_series(160, 70, 110, 1.05, 91);
    const Series b = testing_util::bubble_series(160, 85, 125, 1.05, 92);
    auto write = [&](const std::string& name, const Series& y) {
        std::ostringstream os;
        os << "date,value\n";
        for (std::size_t i = 0; i < y.size(); ++i) os << "t" << i + 1 << ',' << detail::format_double(y[i]) << '\n';
        return dir.write(name, os.str());
    };
    const auto fa = write("a.csv", a), fb = write("b.csv", b);
    auto run = [](std::vector<std::string> args) {
        args.insert(args.begin(), "bubbles");
        std::vector<const char*> argv;
        for (const auto& s : args) argv.push_back(s.c_str());
        std::ostringstream out, err;
        return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    };
    auto slurp = [](const std::string& p) {
        std::ifstream in(p);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    const std::vector<std::vector<std::string>> runs{
        {"test", "--input", fa, "--stat", "gsadf", "--B", "199", "--seed", "7"},
        {"test", "--input", fa, "--stat", "gsadf,sgsadf,stadf", "--B", "99", "--multiplier", "skewed"},
        {"test", "--input", fa, "--stat", "hb,sadf-gls", "--cv", "rule"},
        {"datestamp", "--input", fa, "--method", "psy"},
        {"datestamp", "--input", fa, "--method", "two-step"},
        {"datestamp", "--input", fa, "--method", "ssr-bic"},
        {"datestamp", "--input", fa, "--method", "sign"},
        {"monitor", "--input", fa, "--B", "99"},
        {"relate", "--input", fa, "--input", fb, "--method", "cobubble", "--B", "99"},
        {"relate", "--input", fa, "--input", fb, "--method", "contagion"},
        {"simulate-cv", "--stat", "sadf", "--sizes", "60,80", "--reps", "300", "--seed", "3"},
        {"study", "--stat", "gsadf", "--cv", "bootstrap", "--T", "60", "--reps", "10", "--B", "99", "--vol",
         "trend"}};
    std::size_t bad = 0;
    std::string first;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        auto args = runs[i];
        const auto r1 = dir.file("r" + std::to_string(i) + "a.json");
        const auto r2 = dir.file("r" + std::to_string(i) + "b.json");
        args.insert(args.end(), {"--out", r1});
        const int c1 = run(args);
        const int c2 = run({"run", "--config", r1, "--out", r2});
        const bool ok = c1 == 0 && c2 == 0 && !slurp(r1).empty() && slurp(r1) == slurp(r2);
        if (!ok && bad++ == 0) first = " first: " + runs[i][0] + " run " + std::to_string(i);
    }
    return {bad == 0, fmt("%zu of %zu re-executed reports differ", bad, runs.size()) + first};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"nesting invariants", nesting},          {"oracle equivalence", oracle_equivalence},
        {"constants", constants},                 {"exact invariances", invariances},
        {"size control", size_control},           {"date-stamping accuracy", dating},
        {"confidence interval coverage", coverage}, {"monitoring false detections", monitoring},
        {"determinism", determinism}};
    int only = 0;
    if (argc == 3 && std::strcmp(argv[1], "--only") == 0) only = std::atoi(argv[2]);
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && static_cast<int>(i + 1) != only) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("criterion %zu %s: %s (%s)\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
