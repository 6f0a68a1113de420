#include "oracles.hpp"

#include "srsurv/panel_csv.hpp"
#include "srsurv/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace srsurv;

namespace {

std::string panel_text(const Dataset& ds) {
    std::ostringstream out;
    write_panel_csv(out, ds);
    return out.str();
}

ScenarioFile config(const std::string& text) {
    std::istringstream in(text);
    return parse_scenario_config(in, "scenario.cfg");
}

std::string config_error(const std::string& text) {
    try {
        config(text);
    } catch (const SimulationError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("rates for the two cumulative incidences") {
    auto low = EventDistribution::exponential_with_survival(0.9, 8.0);
    auto high = EventDistribution::exponential_with_survival(0.5, 8.0);
    CHECK(low.rate == doctest::Approx(0.0132).epsilon(0.005));
    CHECK(high.rate == doctest::Approx(0.0866).epsilon(0.005));
    CHECK(1.0 - std::exp(-0.0132 * 8.0) == doctest::Approx(0.100).epsilon(0.01));
    auto w = EventDistribution::weibull_with_survival(1.5, 0.5, 8.0);
    CHECK(w.baseline_survival(8.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(high.baseline_survival(8.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("generator calibration") {
    ScenarioConfig c;
    c.n_subjects = 100000;
    c.beta_true.resize(0);
    c.event = EventDistribution::exponential(0.0132);
    c.truth = ErrorModel::perfect();
    SUBCASE("cumulative incidence by the last visit") {
        auto g = generate_replicate(c, 0);
        double p = 1.0 - std::exp(-0.0132 * 8.0);
        double hits = 0.0;
        for (double x : g.event_times) hits += x <= 8.0 ? 1.0 : 0.0;
        const double n = static_cast<double>(g.event_times.size());
        CHECK(std::abs(hits / n - p) < 3.0 * std::sqrt(p * (1 - p) / n));
    }
    SUBCASE("weibull") {
        c.event = EventDistribution::weibull_with_survival(1.5, 0.5, 8.0);
        auto g = generate_replicate(c, 1);
        double hits = 0.0, early = 0.0;
        for (double x : g.event_times) {
            hits += x <= 8.0 ? 1.0 : 0.0;
            early += x <= 4.0 ? 1.0 : 0.0;
        }
        const double n = static_cast<double>(g.event_times.size());
        double p4 = 1.0 - c.event.baseline_survival(4.0);
        CHECK(std::abs(hits / n - 0.5) < 3.0 * std::sqrt(0.25 / n));
        CHECK(std::abs(early / n - p4) < 3.0 * std::sqrt(p4 * (1 - p4) / n));
    }
    SUBCASE("prevalent fraction") {
        c.truth = ErrorModel(0.61, 0.995, 0.93);
        c.prevalent = PrevalentSampling::bernoulli;
        auto g = generate_replicate(c, 2);
        double k = 0.0;
        for (char v : g.prevalent) k += v;
        const double n = static_cast<double>(g.prevalent.size());
        CHECK(std::abs(k / n - 0.07) < 3.0 * std::sqrt(0.07 * 0.93 / n));
    }
}

TEST_CASE("exact prevalent count") {
    ScenarioConfig c;
    c.missing_prob = 0.0;
    c.truth = ErrorModel(0.61, 0.995, 0.93);
    for (std::uint64_t r = 0; r < 5; ++r) {
        auto g = generate_replicate(c, r);
        std::size_t k = 0;
        for (std::size_t i = 0; i < g.prevalent.size(); ++i)
            if (g.prevalent[i]) {
                ++k;
                CHECK(g.event_times[i] < 0.0);
            }
        CHECK(k == 70);
        CHECK(g.dataset.N() == 1000);
    }
}

TEST_CASE("perfect reports place the first positive in the event interval") {
    ScenarioConfig c;
    c.missing_prob = 0.0;
    c.truth = ErrorModel::perfect();
    auto g = generate_replicate(c, 4);
    for (std::size_t i = 0; i < g.dataset.N(); ++i) {
        const auto& s = g.dataset.subjects[i];
        double x = g.event_times[i];
        if (x > 8.0) {
            CHECK(s.visits.size() == 8);
            CHECK(s.visits.back().result == 0);
        } else {
            CHECK(s.visits.back().result == 1);
            CHECK(s.visits.back().time == std::ceil(x));
        }
    }
}

TEST_CASE("missing visits and adaptive stopping") {
    ScenarioConfig c;
    c.n_subjects = 20000;
    auto g = generate_replicate(c, 0);
    std::size_t observed = 0, slots = 0;
    for (const auto& s : g.dataset.subjects) {
        int positives = 0;
        for (const auto& v : s.visits) positives += v.result;
        CHECK(positives <= 1);
        if (s.visits.back().result == 0) {
            slots += 8;
            observed += s.visits.size();
        }
    }
    // Among subjects who never stop, visits are kept with probability 0.7.
    double rate = static_cast<double>(observed) / static_cast<double>(slots);
    CHECK(rate == doctest::Approx(0.7).epsilon(0.02));
    CHECK(validate(g.dataset).empty());
}

TEST_CASE("determinism") {
    ScenarioConfig c;
    c.n_replicates = 8;
    c.truth = ErrorModel(0.61, 0.995, 0.96);
    CHECK(panel_text(generate_dataset(c, 3)) == panel_text(generate_dataset(c, 3)));
    CHECK(panel_text(generate_dataset(c, 3)) != panel_text(generate_dataset(c, 4)));
    ScenarioConfig other = c;
    other.seed += 1;
    CHECK(panel_text(generate_dataset(c, 3)) != panel_text(generate_dataset(other, 3)));

    std::vector<AnalysisArm> arms = {adjusted_arm(c), unadjusted_arm(c, Unadjusted::both)};
    auto one = run_scenario(c, arms, 1);
    auto three = run_scenario(c, arms, 3);
    std::ostringstream a, b;
    write_summary_csv(a, one.summaries);
    write_summary_csv(b, three.summaries);
    CHECK(a.str() == b.str());
}

TEST_CASE("summary statistics") {
    AnalysisArm arm{"adjusted", ErrorModel(0.61, 0.995)};
    std::vector<ReplicateOutcome> o = {{true, 1.1, 0.1, 0, ""}, {true, 0.9, 0.1, 0, ""}, {true, 1.3, 0.1, 0, ""},
                                       {false, 5.0, 0.1, 0, "x"}, {true, 0.95, 0.2, 0, ""}};
    auto s = summarize("t", arm, 1.0, o);
    CHECK(s.n_replicates == 5);
    CHECK(s.n_converged == 4);
    CHECK(s.mean_estimate == doctest::Approx(1.0625));
    CHECK(s.mean_bias_pct == doctest::Approx(6.25));
    CHECK(s.mean_estimated_se == doctest::Approx(0.125));
    // 1.3 misses its interval (|0.3| > 1.96 * 0.1).
    CHECK(s.coverage_pct == doctest::Approx(75.0));
    double n = 4.0, bias = s.mean_estimate - 1.0;
    CHECK(s.rmse * s.rmse == doctest::Approx(s.empirical_sd * s.empirical_sd * (n - 1) / n + bias * bias).epsilon(1e-12));
}

TEST_CASE("rmse identity on simulated runs") {
    ScenarioConfig c;
    c.n_replicates = 30;
    auto run = run_scenario(c, {adjusted_arm(c), unadjusted_arm(c, Unadjusted::reports)});
    for (const auto& s : run.summaries) {
        double n = static_cast<double>(s.n_converged);
        double bias = s.mean_estimate - s.beta_true;
        CHECK(s.rmse * s.rmse == doctest::Approx(s.empirical_sd * s.empirical_sd * (n - 1) / n + bias * bias).epsilon(1e-10));
        CHECK(s.n_converged <= s.n_replicates);
    }
    std::ostringstream out;
    write_summary_csv(out, run.summaries);
    std::istringstream in(out.str());
    auto back = read_summary_csv(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0].rmse == run.summaries[0].rmse);
    CHECK(back[1].coverage_pct == run.summaries[1].coverage_pct);
    CHECK(back[1].analysis_model.phi1() == 1.0);
}

TEST_CASE("unadjusted arms") {
    ScenarioConfig c;
    c.truth = ErrorModel(0.61, 0.995, 0.93);
    auto r = unadjusted_arm(c, Unadjusted::reports).model;
    CHECK(r.phi1() == 1.0);
    CHECK(r.eta() == 0.93);
    auto e = unadjusted_arm(c, Unadjusted::entry).model;
    CHECK(e.phi1() == 0.61);
    CHECK(e.eta() == 1.0);
    CHECK(adjusted_arm(c).model.phi0() == 0.995);
}

TEST_CASE("scenario config files") {
    auto f = config(
        "# design\n"
        "name = demo\n"
        "n_subjects = 500\n"
        "s_end = 0.9   # low incidence\n"
        "beta = 1, -0.5\n"
        "phi1 = 0.75\n"
        "phi0 = 1\n"
        "n_replicates = 3\n"
        "seed = 42\n"
        "arms = adjusted\n");
    CHECK(f.config.name == "demo");
    CHECK(f.config.n_subjects == 500);
    CHECK(f.config.P() == 2);
    CHECK(f.config.event.rate == doctest::Approx(-std::log(0.9) / 8.0));
    CHECK(f.config.seed == 42);
    REQUIRE(f.arms.size() == 1);
    CHECK(f.arms[0].model.phi1() == 0.75);

    auto w = config("event_dist = weibull\nshape = 1.5\ns_end = 0.5\nunadjusted = entry\n");
    CHECK(w.config.event.kind == EventDistribution::Kind::weibull);
    REQUIRE(w.arms.size() == 2);

    CHECK(config_error("s_end = 0.5\nbogus = 1\n").find("'bogus'") != std::string::npos);
    CHECK(config_error("s_end = 0.5\ns_end = 0.4\n").find("duplicate key 's_end'") != std::string::npos);
    CHECK(config_error("s_end = 0.5\nn_subjects = many\n").find("'n_subjects'") != std::string::npos);
    CHECK(config_error("s_end = 0.5\nrate = 0.1\n").find("'rate'") != std::string::npos);
    CHECK(config_error("event_dist = weibull\ns_end = 0.5\n").find("'shape'") != std::string::npos);
    CHECK(config_error("s_end = 0.5\nphi1 = 0.2\nphi0 = 0.5\n").find("'phi1'") != std::string::npos);
    CHECK(config_error("s_end = 0.5\nmissing_prob = 1.5\n").find("missing_prob") != std::string::npos);
    CHECK(config_error("s_end = 0.5\narms = adjusted, sideways\n").find("'arms'") != std::string::npos);
    CHECK(config_error("s_end = 0.5\nn_replicates = 0\n").find("n_replicates") != std::string::npos);
    CHECK(config_error("no equals sign\n").find("scenario.cfg:1") != std::string::npos);
}

TEST_CASE("published tables") {
    CHECK(published_rows(Table::table1).size() == 12);
    CHECK(published_rows(Table::table2).size() == 12);
    auto c = table_scenario(Table::table1, 0.61, 0.995, 0.5, 1.0, 10, 1);
    CHECK(c.n_subjects == 1000);
    CHECK(c.n_visits == 8);
    CHECK(c.missing_prob == 0.3);
    CHECK(c.beta_true[0] == 1.0);
    CHECK(c.event.rate == doctest::Approx(0.0866).epsilon(0.005));
}

TEST_CASE("a one-replicate reproduction is a complete report") {
    auto rep = reproduce_tables(Table::table2, 1, 7);
    REQUIRE(rep.rows.size() == 12);
    std::ostringstream text, csv;
    write_report_text(text, rep);
    write_report_csv(csv, rep);
    std::size_t text_lines = 0, csv_lines = 0;
    std::string line;
    std::istringstream t(text.str()), c(csv.str());
    while (std::getline(t, line))
        if (line.find("converged]") != std::string::npos) ++text_lines;
    while (std::getline(c, line)) ++csv_lines;
    CHECK(text_lines == 12);
    CHECK(csv_lines == 13);
    CHECK_THROWS_AS(reproduce_tables(Table::table1, 0), SimulationError);
}
