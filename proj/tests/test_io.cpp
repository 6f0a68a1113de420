#include "oracles.hpp"

#include "srsurv/io.hpp"
#include "srsurv/panel_csv.hpp"
#include "srsurv/simulate.hpp"

#include <doctest.h>

#include <sstream>

using namespace srsurv;

namespace {

FitResult sample_fit() {
    ScenarioConfig c;
    c.n_subjects = 500;
    c.truth = ErrorModel(0.61, 0.995, 0.96);
    auto ds = generate_dataset(c, 0);
    return fit(ds, c.truth, ModelKind::cov_fixed);
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(split_csv_line(line));
    return rows;
}

}  // namespace

TEST_CASE("fit JSON round trip") {
    auto f = sample_fit();
    REQUIRE(f.has_covariance);
    auto j = to_json(f);
    CHECK(j["schema_version"] == 1);
    CHECK(j["model"] == "cov_fixed");
    CHECK(j["grid"]["J"] == f.J());
    auto g = fit_from_json(nlohmann::json::parse(j.dump()));
    CHECK(g.model == f.model);
    CHECK(g.taus == f.taus);
    CHECK(g.loglik == f.loglik);
    CHECK(g.beta_hat == f.beta_hat);
    CHECK(g.survival_hat.s == f.survival_hat.s);
    CHECK(g.covariance == f.covariance);
    CHECK(g.natural_covariance == f.natural_covariance);
    CHECK(g.error_model.eta() == 0.96);
    REQUIRE(g.coefficients.size() == 1);
    CHECK(g.coefficients[0].hr_upper == f.coefficients[0].hr_upper);
    CHECK(g.beta_se(0) == f.beta_se(0));
    // Re-serializing gives the same document.
    CHECK(to_json(g).dump() == j.dump());
}

TEST_CASE("undefined values serialize as null") {
    auto f = sample_fit();
    f.has_covariance = false;
    f.covariance.resize(0, 0);
    f.natural_covariance.resize(0, 0);
    for (auto& c : f.coefficients) c.se = c.z = c.hr_lower = c.hr_upper = std::numeric_limits<double>::quiet_NaN();
    auto j = to_json(f);
    CHECK(j["coefficients"][0]["se"].is_null());
    CHECK(j["survival_se"].is_null());
    auto g = fit_from_json(j);
    CHECK(std::isnan(g.coefficients[0].se));
    CHECK_FALSE(g.has_covariance);
    CHECK_THROWS(fit_from_json(nlohmann::json{{"schema_version", 2}}));
}

TEST_CASE("coefficient and survival CSVs") {
    auto f = sample_fit();
    std::ostringstream coef, surv;
    write_coefficients_csv(coef, f);
    write_survival_csv(surv, survival_curve(f, Eigen::VectorXd::Zero(1)));
    auto c = csv_rows(coef.str());
    REQUIRE(c.size() == 2);
    CHECK(c[0] == std::vector<std::string>{"name", "estimate", "se", "z", "p_value", "hazard_ratio", "hr_lower", "hr_upper"});
    CHECK(c[1][0] == "z1");
    CHECK(std::stod(c[1][1]) == f.beta_hat[0]);
    auto s = csv_rows(surv.str());
    REQUIRE(s.size() == f.J() + 2);
    CHECK(s[0] == std::vector<std::string>{"tau", "survival", "lower", "upper"});
    CHECK(s[1] == std::vector<std::string>{"0", "1", "1", "1"});
    for (std::size_t k = 2; k < s.size(); ++k) {
        CHECK(std::stod(s[k][0]) == f.taus[k - 2]);
        CHECK(std::stod(s[k][2]) <= std::stod(s[k][1]));
        CHECK(std::stod(s[k][1]) <= std::stod(s[k][3]));
    }
}

TEST_CASE("grid CSV round trip") {
    ScenarioConfig c;
    c.n_subjects = 400;
    auto ds = generate_dataset(c, 1);
    auto g = sensitivity_grid(ds, ModelKind::cov_fixed, parse_grid_spec("phi1=0.61,0.7;phi0=0.995"));
    std::ostringstream out;
    write_grid_csv(out, g);
    std::istringstream in(out.str());
    auto rows = read_grid_csv(in);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].phi1 == 0.7);
    CHECK(rows[0].hazard_ratio == g.cells[0].fit->coefficients[0].hazard_ratio);
    CHECK(rows[0].converged == g.cells[0].fit->converged);
    CHECK(rows[0].error.empty());
}
