#include <gtest/gtest.h>

#include <sstream>

#include "cli_app.hpp"
#include "helpers.hpp"

using namespace bubbles;
using testing_util::TempDir;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "bubbles");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string write_series(const TempDir& d, const std::string& name, const Series& y) {
    std::ostringstream os;
    os << "date,price\n";
    for (std::size_t i = 0; i < y.size(); ++i) os << "d" << i + 1 << ',' << detail::format_double(y[i]) << '\n';
    return d.write(name, os.str());
}

}  // namespace

TEST(Cli, AutoTau0ResolvesFromSampleSize) {
    TempDir d;
    const auto in = write_series(d, "y.csv", testing_util::rw_series(100, 1));
    const auto r = run({"test", "--input", in, "--stat", "gsadf", "--tau0", "auto", "--cv", "rule"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j["results"]["tau0"].get<double>(), 0.19, 1e-15);
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_EQ(j["config"]["seed"], 1);
}

TEST(Cli, RerunFromReportIsByteIdentical) {
    TempDir d;
    const auto in = write_series(d, "y.csv", testing_util::bubble_series(120, 60, 90, 1.04, 2));
    ASSERT_EQ(run({"test", "--input", in, "--stat", "sadf", "--B", "99", "--seed", "5", "--out", d.file("a.json")}).code, 0);
    ASSERT_EQ(run({"run", "--config", d.file("a.json"), "--out", d.file("b.json")}).code, 0);
    EXPECT_EQ(slurp(d.file("a.json")), slurp(d.file("b.json")));
    ASSERT_EQ(run({"run", "--config", d.file("b.json"), "--out", d.file("c.json")}).code, 0);
    EXPECT_EQ(slurp(d.file("b.json")), slurp(d.file("c.json")));
}

TEST(Cli, NoCrossingGivesEmptyEpisodeList) {
    TempDir d;
    std::vector<double> v(100);
    for (std::size_t i = 0; i < 100; ++i) v[i] = 50.0 - 0.3 * static_cast<double>(i) + std::sin(static_cast<double>(i));
    const auto in = write_series(d, "y.csv", Series(v));
    const auto r = run({"datestamp", "--input", in, "--method", "psy", "--out", d.file("r.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(d.file("r.json")));
    EXPECT_TRUE(j["results"]["episodes"].empty());
    const auto p = run({"plot-data", "--report", d.file("r.json")});
    ASSERT_EQ(p.code, 0);
    std::istringstream lines(p.out);
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "index,label,tau2,statistic,cv,in_episode");
    std::size_t rows = 0, flagged = 0;
    while (std::getline(lines, line)) {
        ++rows;
        flagged += line.back() == '1';
    }
    EXPECT_EQ(rows, j["results"]["sequence"]["index"].size());
    EXPECT_EQ(flagged, 0u);
}

TEST(Cli, PlotDataFlagsMatchEpisodes) {
    TempDir d;
    const auto in = write_series(d, "y.csv", testing_util::bubble_series(150, 80, 115, 1.05, 3));
    ASSERT_EQ(run({"datestamp", "--input", in, "--out", d.file("r.json")}).code, 0);
    const auto j = nlohmann::json::parse(slurp(d.file("r.json")));
    const auto& eps = j["results"]["episodes"];
    ASSERT_FALSE(eps.empty());
    const auto p = run({"plot-data", "--report", d.file("r.json"), "--out", d.file("p.csv")});
    ASSERT_EQ(p.code, 0);
    std::istringstream lines(slurp(d.file("p.csv")));
    std::string line;
    std::getline(lines, line);
    std::size_t rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        const auto idx = std::stoul(line.substr(0, line.find(',')));
        bool inside = false;
        for (const auto& e : eps)
            inside = inside || (idx >= e["origin_index"].get<std::size_t>() && idx <= e["collapse_index"].get<std::size_t>());
        EXPECT_EQ(line.back() == '1', inside) << line;
    }
    EXPECT_EQ(rows, j["results"]["sequence"]["index"].size());
}

TEST(Cli, ExitCodes) {
    TempDir d;
    const auto in = write_series(d, "y.csv", testing_util::rw_series(80, 1));
    EXPECT_EQ(run({"test", "--input", in, "--bogus"}).code, 1);
    EXPECT_EQ(run({"test", "--input", d.file("missing.csv")}).code, 2);
    const auto bad = d.write("bad.csv", "a\n1\nx\n");
    EXPECT_EQ(run({"test", "--input", bad}).code, 2);
    const auto r = run({"test", "--input", in, "--stat", "sgsadf,sadf-gls", "--cv", "rule"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("cannot be combined"), std::string::npos);
    EXPECT_EQ(run({"test", "--input", in, "--det", "quadratic"}).code, 1);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, NonRejectionIsSuccess) {
    TempDir d;
    const auto in = write_series(d, "y.csv", testing_util::rw_series(80, 4));
    const auto r = run({"test", "--input", in, "--stat", "sadf", "--cv", "value:100"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out)["results"]["decision"], "no-reject");
}

TEST(Cli, TableProducedAndConsumed) {
    TempDir d;
    ASSERT_EQ(run({"simulate-cv", "--stat", "sadf", "--sizes", "80", "--reps", "200", "--out", d.file("t.json")}).code, 0);
    const auto in = write_series(d, "y.csv", testing_util::rw_series(80, 4));
    const auto r = run({"test", "--input", in, "--stat", "sadf", "--cv", "table:" + d.file("t.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = CvTable::from_json(nlohmann::json::parse(slurp(d.file("t.json")))["results"]["table"]);
    EXPECT_EQ(nlohmann::json::parse(r.out)["results"]["critical_value"].get<double>(),
              t.lookup("sadf", 80, default_min_window(80), "const", 0, 0.95).value());
    const auto miss = run({"test", "--input", in, "--stat", "gsadf", "--cv", "table:" + d.file("t.json")});
    EXPECT_EQ(miss.code, 2);
}

TEST(Cli, UnionAndMonitorAndRelate) {
    TempDir d;
    const auto a = write_series(d, "a.csv", testing_util::bubble_series(120, 50, 80, 1.04, 5));
    const auto b = write_series(d, "b.csv", testing_util::bubble_series(120, 60, 95, 1.04, 6));
    auto u = run({"test", "--input", a, "--stat", "gsadf,sgsadf", "--B", "99"});
    ASSERT_EQ(u.code, 0) << u.err;
    EXPECT_TRUE(nlohmann::json::parse(u.out)["results"].contains("union"));
    auto m = run({"monitor", "--input", a, "--B", "99", "--Tb", "12"});
    ASSERT_EQ(m.code, 0) << m.err;
    for (const std::string method : {"migration", "contagion", "cobubble"}) {
        auto r = run({"relate", "--input", a, "--input", b, "--method", method, "--B", "99"});
        EXPECT_EQ(r.code, 0) << method << ": " << r.err;
    }
    for (const std::string method : {"pwy", "two-step", "sign", "ssr-bic"}) {
        auto r = run({"datestamp", "--input", a, "--method", method});
        EXPECT_EQ(r.code, 0) << method << ": " << r.err;
    }
}

TEST(Cli, StudyRuns) {
    const auto r = run({"study", "--stat", "sadf", "--cv", "rule", "--T", "60", "--reps", "20", "--vol", "single-break",
                        "--vol-ratio", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j["results"]["size"].contains("rate"));
}

TEST(Cli, SeedFromEnvironment) {
    ::setenv("BUBBLES_SEED", "77", 1);
    TempDir d;
    const auto in = write_series(d, "y.csv", testing_util::rw_series(60, 1));
    const auto r = run({"test", "--input", in, "--stat", "sadf", "--cv", "rule"});
    ::unsetenv("BUBBLES_SEED");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(nlohmann::json::parse(r.out)["config"]["seed"], 77);
}
