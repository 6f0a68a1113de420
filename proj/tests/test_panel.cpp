#include "oracles.hpp"

#include "srsurv/panel.hpp"
#include "srsurv/panel_csv.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

using namespace srsurv;

namespace {

bool has_rule(const ValidationReport& r, const std::string& rule) {
    for (const auto& v : r)
        if (v.rule == rule) return true;
    return false;
}

PanelReadResult parse(const std::string& text, PanelReadOptions opts = {}) {
    std::istringstream in(text);
    return read_panel_csv(in, "panel.csv", opts);
}

std::string error_of(const std::string& text, PanelReadOptions opts = {}) {
    try {
        parse(text, opts);
    } catch (const PanelError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("grid is the union of visit times") {
    std::vector<SubjectPanel> s = {oracle::subject("a", {1.0, 2.0}, {0, 0}), oracle::subject("b", {2.0, 3.0}, {0, 1})};
    StudyGrid g = collect_grid(s);
    CHECK(g.taus() == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(g.J() == 3);
    CHECK(g.n_intervals() == 4);
    CHECK(g.tau(0) == 0.0);
    CHECK(std::isinf(g.tau(4)));
    CHECK(g.index_of(2.0).value() == 2);
    CHECK_FALSE(g.index_of(2.5).has_value());
}

TEST_CASE("rounding to the nearest multiple") {
    std::vector<SubjectPanel> s = {oracle::subject("a", {0.9, 2.1}, {0, 0})};
    auto gb = build_grid(s, 1.0);
    CHECK(gb.grid.taus() == std::vector<double>{1.0, 2.0});
    CHECK(s[0].visits[0].time == 1.0);
    CHECK(s[0].visits[1].time == 2.0);
    CHECK(gb.merged_visits == 0);
}

TEST_CASE("annual schedule of eight visits") {
    std::vector<SubjectPanel> s = {oracle::subject("a", {1, 2, 3, 4, 5, 6, 7, 8}, {0, 0, 0, 0, 0, 0, 0, 0})};
    StudyGrid g = collect_grid(s);
    CHECK(g.J() == 8);
    CHECK(g.n_intervals() == 9);
    for (std::size_t j = 1; j <= 8; ++j) CHECK(g.tau(j) == static_cast<double>(j));
}

TEST_CASE("rounding collisions keep the later record") {
    std::vector<SubjectPanel> s = {oracle::subject("a", {0.8, 1.2, 2.0}, {0, 1, 1})};
    // 0.8 and 1.2 both round to 1; the later (positive) survives.
    auto gb = build_grid(s, 1.0);
    REQUIRE(s[0].visits.size() == 2);
    CHECK(s[0].visits[0].time == 1.0);
    CHECK(s[0].visits[0].result == 1);
    CHECK(gb.merged_visits == 1);
}

TEST_CASE("rounding errors") {
    std::vector<SubjectPanel> empty;
    CHECK_THROWS_AS(build_grid(empty, 1.0), PanelError);
    std::vector<SubjectPanel> s = {oracle::subject("a", {1.0}, {0})};
    CHECK_THROWS_AS(build_grid(s, 0.0), PanelError);
    CHECK_THROWS_AS(build_grid(s, -1.0), PanelError);
}

TEST_CASE("grid building is idempotent on rounded data") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<SubjectPanel> s;
        for (int i = 0; i < 15; ++i) {
            std::vector<double> t;
            std::vector<int> r;
            double x = 0.0;
            for (int k = 0; k < 5; ++k) {
                x += oracle::uniform(rng, 0.2, 1.7);
                t.push_back(x);
                r.push_back(0);
            }
            s.push_back(oracle::subject(std::to_string(i), t, r));
        }
        auto first = build_grid(s, 0.5);
        auto copy = s;
        auto second = build_grid(copy, 0.5);
        CHECK(first.grid.taus() == second.grid.taus());
        CHECK(second.merged_visits == 0);
    }
}

TEST_CASE("validation rules") {
    SUBCASE("positive not terminal under an adaptive schedule") {
        auto ds = oracle::dataset({oracle::subject("a", {1, 2}, {1, 0})});
        auto r = validate(ds);
        REQUIRE(r.size() == 1);
        CHECK(r[0].rule == rules::positive_not_terminal);
        CHECK(r[0].subject_id == "a");
        ds.schedule = Schedule::predetermined;
        CHECK(validate(ds).empty());
    }
    SUBCASE("off-grid visit") {
        auto ds = oracle::dataset({oracle::subject("a", {1, 2, 3}, {0, 0, 0})});
        ds.subjects.push_back(oracle::subject("b", {2.5}, {0}));
        CHECK(has_rule(validate(ds), rules::off_grid));
    }
    SUBCASE("clean dataset") {
        auto ds = oracle::dataset({oracle::subject("a", {1, 2, 3}, {0, 0, 1}), oracle::subject("b", {2}, {0})});
        CHECK(validate(ds).empty());
    }
    SUBCASE("structural rules") {
        Dataset empty;
        CHECK(has_rule(validate(empty), rules::empty_dataset));
        auto ds = oracle::dataset({oracle::subject("a", {1, 2}, {0, 0})});
        ds.subjects.push_back(oracle::subject("none", {}, {}));
        ds.subjects.push_back(oracle::subject("dup", {2, 2}, {0, 0}));
        ds.subjects.push_back(oracle::subject("bad", {1}, {2}));
        auto r = validate(ds);
        CHECK(has_rule(r, rules::no_visits));
        CHECK(has_rule(r, rules::not_increasing));
        CHECK(has_rule(r, rules::bad_result));
    }
    SUBCASE("covariate length") {
        auto ds = oracle::dataset({oracle::subject("a", {1}, {0}, {1.0}), oracle::subject("b", {1}, {0}, {1.0, 2.0})}, 1);
        CHECK(has_rule(validate(ds), rules::covariate_length));
    }
}

TEST_CASE("every validated visit maps to a unique grid index") {
    auto ds = oracle::dataset({oracle::subject("a", {0.5, 1.5, 4}, {0, 0, 1}), oracle::subject("b", {1.5, 2}, {0, 0})});
    REQUIRE(validate(ds).empty());
    for (const auto& s : ds.subjects)
        for (const auto& v : s.visits) {
            auto j = ds.grid.index_of(v.time);
            REQUIRE(j.has_value());
            CHECK(ds.grid.tau(*j) == v.time);
        }
}

TEST_CASE("error model constraints") {
    CHECK_NOTHROW(ErrorModel(0.61, 0.995, 0.96));
    CHECK_THROWS_AS(ErrorModel(0.0, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(ErrorModel(0.5, 1.1), std::invalid_argument);
    CHECK_THROWS_AS(ErrorModel(0.5, 0.5), std::invalid_argument);  // phi1 == 1 - phi0
    CHECK_THROWS_AS(ErrorModel(0.9, 0.9, 0.0), std::invalid_argument);
}

TEST_CASE("read a single subject") {
    auto r = parse("subject_id,time,result\n1,1,0\n1,2,0\n1,3,1\n");
    CHECK(r.dataset.N() == 1);
    CHECK(r.dataset.subjects[0].visits.size() == 3);
    CHECK(r.dataset.grid.J() == 3);
    CHECK(r.dataset.P() == 0);
    CHECK(r.imputed_values == 0);
}

TEST_CASE("parse errors name the line") {
    CHECK(error_of("subject_id,time,result\n1,1,0\n1,2,yes\n").find("panel.csv:3") != std::string::npos);
    CHECK(error_of("subject_id,time,result\n1,1,0\n1,2,yes\n").find("non-binary") != std::string::npos);
    CHECK(error_of("subject_id,time,result\n1,abc,0\n").find("panel.csv:2") != std::string::npos);
    CHECK(error_of("subject_id,time,result,z\n1,1,0\n").find("panel.csv:2") != std::string::npos);
    CHECK(error_of("subject_id,time,outcome\n1,1,0\n").find("unknown column") != std::string::npos);
}

TEST_CASE("covariate gaps are carried forward") {
    auto r = parse("subject_id,time,result,z\n1,1,0,0.7\n1,2,0,\n1,3,0,\n1,4,1,1.5\n");
    const auto& s = r.dataset.subjects[0];
    CHECK(r.imputed_values == 2);
    CHECK(s.covariate_at(1)[0] == 0.7);
    CHECK(s.covariate_at(3)[0] == 0.7);
    CHECK(s.covariate_at(4)[0] == 1.5);
}

TEST_CASE("covariate missing at the first visit") {
    std::string msg = error_of("subject_id,time,result,z\n1,1,0,\n1,2,0,3\n");
    CHECK(msg.find("panel.csv:2") != std::string::npos);
    CHECK(msg.find("z") != std::string::npos);
}

TEST_CASE("imputation does not alter observed values") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        std::ostringstream csv;
        csv << "subject_id,time,result,a,b\n";
        std::vector<std::vector<std::optional<double>>> observed;
        for (int k = 1; k <= 6; ++k) {
            std::vector<std::optional<double>> row(2);
            csv << "s," << k << ",0";
            for (int c = 0; c < 2; ++c) {
                bool present = k == 1 || oracle::uniform(rng, 0, 1) < 0.5;
                if (present) row[c] = std::round(oracle::uniform(rng, -5, 5) * 100) / 100;
                csv << ',';
                if (row[c]) csv << *row[c];
            }
            csv << '\n';
            observed.push_back(row);
        }
        auto r = parse(csv.str());
        const auto& s = r.dataset.subjects[0];
        std::size_t missing = 0;
        std::vector<double> last(2);
        for (int k = 1; k <= 6; ++k)
            for (int c = 0; c < 2; ++c) {
                const auto& v = observed[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(c)];
                if (v) last[static_cast<std::size_t>(c)] = *v;
                else ++missing;
                CHECK(s.covariate_at(k)[c] == last[static_cast<std::size_t>(c)]);
            }
        CHECK(r.imputed_values == missing);
    }
}

TEST_CASE("baseline covariate file") {
    std::string dir = std::filesystem::temp_directory_path() / "srsurv_test_panel";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir + "/panel.csv") << "subject_id,time,result\na,1,0\na,2,1\nb,1,0\n";
        std::ofstream(dir + "/base.csv") << "subject_id,age\na,61\nb,70\n";
        std::ofstream(dir + "/bad.csv") << "subject_id,weight\na,61\nb,70\n";
    }
    PanelReadOptions o;
    o.baseline_path = dir + "/base.csv";
    auto r = read_panel_csv(dir + "/panel.csv", o);
    CHECK(r.dataset.P() == 1);
    CHECK(r.dataset.covariate_names[0] == "age");
    CHECK(r.dataset.fixed_design()(1, 0) == 70.0);
    CHECK_FALSE(r.dataset.time_varying());
}

TEST_CASE("strict reading rejects invalid panels") {
    std::string text = "subject_id,time,result\n1,1,1\n1,2,0\n";
    CHECK(error_of(text).find("positive not terminal") != std::string::npos);
    PanelReadOptions lax;
    lax.strict = false;
    auto r = parse(text, lax);
    CHECK(has_rule(r.report, rules::positive_not_terminal));
    PanelReadOptions pre;
    pre.schedule = Schedule::predetermined;
    CHECK(parse(text, pre).report.empty());
}

TEST_CASE("panel CSV round trip") {
    auto r = parse("subject_id,time,result,z\nx,0.5,0,1.25\nx,1.5,1,\ny,1.5,0,-2\n");
    std::ostringstream out;
    write_panel_csv(out, r.dataset);
    auto back = parse(out.str());
    REQUIRE(back.dataset.N() == 2);
    CHECK(back.dataset.grid.taus() == r.dataset.grid.taus());
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& a = r.dataset.subjects[i];
        const auto& b = back.dataset.subjects[i];
        CHECK(a.id == b.id);
        REQUIRE(a.visits.size() == b.visits.size());
        for (std::size_t k = 0; k < a.visits.size(); ++k) {
            CHECK(a.visits[k].time == b.visits[k].time);
            CHECK(a.visits[k].result == b.visits[k].result);
            CHECK(a.covariate_at(a.visits[k].time)[0] == b.covariate_at(b.visits[k].time)[0]);
        }
    }
}

TEST_CASE("quoted CSV fields") {
    auto f = split_csv_line("\"a,b\", 2 ,x");
    REQUIRE(f.size() == 3);
    CHECK(f[0] == "a,b");
    CHECK(f[1] == "2");
}
