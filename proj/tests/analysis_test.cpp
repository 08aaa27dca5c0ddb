#include <cmath>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "optcon/analysis.hpp"
#include "optcon/scenario_io.hpp"
#include "oracles.hpp"

using namespace optcon;

namespace {

Trace two_agent_trace() {
    Trace tr;
    tr.times = {0.0};
    tr.x = {{{0.0}, {2.0}}};
    tr.y = {{0.0, 2.0}};
    tr.u = {{0.1, -0.25}};
    tr.theta = {{0.0, 1.0 / 3.0}};
    tr.r = {{1.0, 1.0}};
    tr.v = {{-1e-20, 1e20}};
    tr.zeta = {{-1.0, M_PI}};
    return tr;
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::path(::testing::TempDir()) / "optcon_analysis";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(ConsensusError, Cases) {
    EXPECT_EQ(consensus_error(two_agent_trace()), std::vector<double>{1.0});
    Trace flat;
    flat.times = {0.0, 1.0};
    flat.y = {{3.0, 3.0, 3.0}, {3.0, 3.0, 3.0}};
    EXPECT_EQ(consensus_error(flat), (std::vector<double>{0.0, 0.0}));
    EXPECT_THROW(consensus_error(Trace{}), AnalysisError);
}

TEST(OptimalityGap, Cases) {
    EXPECT_EQ(optimality_gap(two_agent_trace(), 1.0), std::vector<double>{1.0});
    EXPECT_EQ(optimality_gap(two_agent_trace(), 2.0), std::vector<double>{2.0});
    Trace at;
    at.times = {0.0};
    at.y = {{0.75, 0.75}};
    EXPECT_EQ(optimality_gap(at, 0.75), std::vector<double>{0.0});
}

TEST(FitRate, ExactExponential) {
    std::vector<double> t, v;
    for (int k = 0; k <= 50; ++k) {
        t.push_back(0.1 * k);
        v.push_back(std::exp(-2.0 * t.back()));
    }
    EXPECT_NEAR(fit_exponential_rate(t, v), 2.0, 1e-6);
}

TEST(FitRate, ConstantIsZero) {
    const std::vector<double> t{0, 1, 2, 3}, v{4, 4, 4, 4};
    EXPECT_NEAR(fit_exponential_rate(t, v), 0.0, 1e-15);
}

TEST(FitRate, ScaleInvariant) {
    std::vector<double> t, v, w;
    for (int k = 0; k < 30; ++k) {
        t.push_back(0.2 * k);
        v.push_back(std::exp(-0.7 * t.back()) * (1.0 + 0.1 * std::sin(3.0 * t.back())));
        w.push_back(1234.5 * v.back());
    }
    EXPECT_NEAR(fit_exponential_rate(t, v), fit_exponential_rate(t, w), 1e-12);
}

TEST(FitRate, TrimsTinyValuesAndRejectsShortSeries) {
    const std::vector<double> t{0, 1, 2, 3, 4}, v{1.0, std::exp(-1.0), std::exp(-2.0), 0.0, 1e-12};
    EXPECT_NEAR(fit_exponential_rate(t, v), 1.0, 1e-12);
    EXPECT_THROW(fit_exponential_rate(std::vector<double>{0, 1}, std::vector<double>{1, 0.5}), AnalysisError);
    EXPECT_THROW(fit_exponential_rate(std::vector<double>{0, 1, 2}, std::vector<double>{1, 0, 0}), AnalysisError);
}

TEST(FitRate, Window) {
    std::vector<double> t, v;
    for (int k = 0; k <= 100; ++k) {
        t.push_back(0.1 * k);
        v.push_back(t.back() < 5.0 ? 1.0 : std::exp(-3.0 * t.back()));
    }
    EXPECT_NEAR(fit_exponential_rate(t, v, 5.0, 10.0), 3.0, 1e-9);
}

TEST(FitRate, GeneratorRunDecays) {
    const auto s = example1().scenario;
    GeneratorRun run{s.graph, make_costs(s.costs), GainSchedule{5.0, 20.0}, s.init.r, s.init.v, 8.0, 1e-3, 50};
    const auto tr = run_generator(run);
    std::vector<double> err;
    for (const auto& r : tr.r) err.push_back((r.array() - 0.75).abs().maxCoeff());
    EXPECT_GT(fit_exponential_rate(tr.times, err, 2.0, 8.0), 0.0);
}

TEST(Metrics, Report) {
    Trace tr = two_agent_trace();
    const auto m = compute_metrics(tr, 1.0, 0.0, 1.0);
    EXPECT_TRUE(std::isnan(m.fitted_rate));
    EXPECT_EQ(m.final_values, (std::vector<double>{0.0, 2.0}));
    EXPECT_EQ(m.max_abs_u, 0.25);
    EXPECT_EQ(m.max_theta, 1.0 / 3.0);
}

TEST(Csv, HeaderAndRowCount) {
    std::ostringstream os;
    write_csv(two_agent_trace(), os);
    const std::string text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "t,agent,y,u,theta,r,v,zeta");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(Csv, RoundTripThroughIndependentReader) {
    const auto path = scratch("round_trip.csv").string();
    const auto tr = two_agent_trace();
    export_csv(tr, path);
    std::string header;
    const auto rows = oracle::read_trace_csv(path, &header);
    EXPECT_EQ(header, kTraceCsvHeader);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1].agent, 2u);
    EXPECT_EQ(rows[1].theta, 1.0 / 3.0);
    EXPECT_EQ(rows[1].zeta, M_PI);
    EXPECT_EQ(rows[0].v, -1e-20);
    EXPECT_EQ(rows[1].v, 1e20);
}

TEST(Csv, ExampleTraceRowsAndByteIdenticalReexport) {
    auto s = example1().scenario;
    s.t_end = 1.0;
    s.events.clear();
    const auto tr = run_scenario(s);
    EXPECT_EQ(tr.size(), 101u);

    const auto a = scratch("a.csv").string(), b = scratch("b.csv").string();
    export_csv(tr, a);
    export_csv(tr, b);
    EXPECT_EQ(oracle::slurp(a), oracle::slurp(b));

    const auto rows = oracle::read_trace_csv(a);
    ASSERT_EQ(rows.size(), 8u * tr.size());
    // time-major, agent-minor
    EXPECT_EQ(rows[7].agent, 8u);
    EXPECT_EQ(rows[8].agent, 1u);
    EXPECT_EQ(rows[8].t, tr.times[1]);
    for (std::size_t k = 0; k < tr.size(); ++k)
        for (std::size_t i = 0; i < 8; ++i) {
            const auto& row = rows[k * 8 + i];
            ASSERT_EQ(row.y, tr.y[k][i]);
            ASSERT_EQ(row.u, tr.u[k][i]);
            ASSERT_EQ(row.r, tr.r[k][i]);
        }
}

TEST(Csv, UnwritablePathNamesThePath) {
    try {
        export_csv(two_agent_trace(), "/nonexistent-dir/x.csv");
        FAIL();
    } catch (const AnalysisError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/x.csv"), std::string::npos);
    }
}
