#include "srsurv/io.hpp"

#include "srsurv/panel_csv.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace srsurv {

using nlohmann::json;

namespace {

// JSON has no NaN; missing values are written as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json vec(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(number(v[k]));
    return a;
}

Eigen::VectorXd vec_from(const json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t k = 0; k < a.size(); ++k) v[static_cast<Eigen::Index>(k)] = number_from(a[k]);
    return v;
}

json mat(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec(m.row(i).transpose()));
    return a;
}

Eigen::MatrixXd mat_from(const json& a) {
    if (a.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(a[0].size()));
    for (std::size_t i = 0; i < a.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = vec_from(a[i]).transpose();
    return m;
}

std::string csv_num(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

}  // namespace

json to_json(const FitResult& f) {
    json j;
    j["schema_version"] = 1;
    j["model"] = to_string(f.model);
    j["n_subjects"] = f.n_subjects;
    j["covariate_names"] = f.covariate_names;
    j["error_model"] = {{"phi1", f.error_model.phi1()}, {"phi0", f.error_model.phi0()}, {"eta", f.error_model.eta()}};
    j["grid"] = {{"taus", f.taus}, {"J", f.J()}};
    j["estimates"] = {{"beta", vec(f.beta_hat)},
                      {"gamma", vec(f.working.gamma)},
                      {"lambda", vec(f.lambda_hat.lambdas)},
                      {"survival", vec(f.survival_hat.s)}};
    json coefs = json::array();
    for (const auto& c : f.coefficients)
        coefs.push_back({{"name", c.name},
                         {"estimate", number(c.estimate)},
                         {"se", number(c.se)},
                         {"z", number(c.z)},
                         {"p_value", number(c.p_value)},
                         {"hazard_ratio", number(c.hazard_ratio)},
                         {"hr_lower", number(c.hr_lower)},
                         {"hr_upper", number(c.hr_upper)}});
    j["coefficients"] = coefs;
    if (f.has_covariance) {
        j["survival_se"] = vec(f.natural_covariance.diagonal().tail(static_cast<Eigen::Index>(f.J())).cwiseMax(0.0).cwiseSqrt());
    } else {
        j["survival_se"] = nullptr;
    }
    j["covariance"] = {{"available", f.has_covariance},
                       {"order_working", "gamma_0..gamma_{J-1}, beta_1..beta_P"},
                       {"order_natural", "beta_1..beta_P, S_2..S_{J+1}"},
                       {"working", mat(f.covariance)},
                       {"natural", mat(f.natural_covariance)}};
    j["convergence"] = {{"converged", f.converged},
                        {"iterations", f.iterations},
                        {"evaluations", f.evaluations},
                        {"max_abs_gradient", number(f.max_abs_gradient)},
                        {"loglik", number(f.loglik)},
                        {"message", f.message},
                        {"frozen", f.frozen},
                        {"clamped_predictors", f.clamped_predictors},
                        {"notes", f.notes}};
    return j;
}

FitResult fit_from_json(const json& j) {
    if (j.value("schema_version", 0) != 1) throw std::runtime_error("unsupported fit JSON schema version");
    FitResult f;
    f.model = model_kind_from_string(j.at("model").get<std::string>());
    f.n_subjects = j.at("n_subjects").get<std::size_t>();
    f.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
    const auto& em = j.at("error_model");
    f.error_model = ErrorModel(em.at("phi1").get<double>(), em.at("phi0").get<double>(), em.at("eta").get<double>());
    f.taus = j.at("grid").at("taus").get<std::vector<double>>();
    const auto& est = j.at("estimates");
    f.beta_hat = vec_from(est.at("beta"));
    f.working.gamma = vec_from(est.at("gamma"));
    f.working.beta = f.beta_hat;
    f.lambda_hat.lambdas = vec_from(est.at("lambda"));
    f.survival_hat.s = vec_from(est.at("survival"));
    for (const auto& c : j.at("coefficients")) {
        CoefficientSummary s;
        s.name = c.at("name").get<std::string>();
        s.estimate = number_from(c.at("estimate"));
        s.se = number_from(c.at("se"));
        s.z = number_from(c.at("z"));
        s.p_value = number_from(c.at("p_value"));
        s.hazard_ratio = number_from(c.at("hazard_ratio"));
        s.hr_lower = number_from(c.at("hr_lower"));
        s.hr_upper = number_from(c.at("hr_upper"));
        f.coefficients.push_back(std::move(s));
    }
    const auto& cov = j.at("covariance");
    f.has_covariance = cov.at("available").get<bool>();
    f.covariance = mat_from(cov.at("working"));
    f.natural_covariance = mat_from(cov.at("natural"));
    const auto& conv = j.at("convergence");
    f.converged = conv.at("converged").get<bool>();
    f.iterations = conv.at("iterations").get<int>();
    f.evaluations = conv.at("evaluations").get<int>();
    f.max_abs_gradient = number_from(conv.at("max_abs_gradient"));
    f.loglik = number_from(conv.at("loglik"));
    f.message = conv.at("message").get<std::string>();
    f.frozen = conv.at("frozen").get<std::vector<std::size_t>>();
    f.clamped_predictors = conv.at("clamped_predictors").get<std::size_t>();
    f.notes = conv.at("notes").get<std::vector<std::string>>();
    return f;
}

void write_coefficients_csv(std::ostream& out, const FitResult& f) {
    out << "name,estimate,se,z,p_value,hazard_ratio,hr_lower,hr_upper\n";
    for (const auto& c : f.coefficients)
        out << c.name << ',' << csv_num(c.estimate) << ',' << csv_num(c.se) << ',' << csv_num(c.z) << ','
            << csv_num(c.p_value) << ',' << csv_num(c.hazard_ratio) << ',' << csv_num(c.hr_lower) << ','
            << csv_num(c.hr_upper) << '\n';
}

void write_survival_csv(std::ostream& out, const std::vector<SurvivalPoint>& curve) {
    out << "tau,survival,lower,upper\n0,1,1,1\n";
    for (const auto& p : curve)
        out << csv_num(p.tau) << ',' << csv_num(p.survival) << ',' << csv_num(p.lower) << ',' << csv_num(p.upper) << '\n';
}

void write_grid_csv(std::ostream& out, const SensitivityGrid& g) {
    out << "phi1,phi0,eta,hazard_ratio,ci_low,ci_high,converged,error\n";
    for (const auto& c : g.cells) {
        out << csv_num(c.cell.phi1) << ',' << csv_num(c.cell.phi0) << ',' << csv_num(c.cell.eta) << ',';
        if (c.fit && g.coefficient < c.fit->coefficients.size()) {
            const auto& k = c.fit->coefficients[g.coefficient];
            out << csv_num(k.hazard_ratio) << ',' << csv_num(k.hr_lower) << ',' << csv_num(k.hr_upper) << ','
                << (c.fit->converged ? 1 : 0) << ',';
        } else {
            out << ",,,0,";
        }
        std::string err = c.error;
        for (auto& ch : err)
            if (ch == '"') ch = '\'';
        out << (err.empty() ? "" : "\"" + err + "\"") << '\n';
    }
}

std::vector<GridCsvRow> read_grid_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("phi1,phi0,eta,hazard_ratio", 0) != 0)
        throw std::runtime_error("grid CSV: unexpected header");
    auto num = [](const std::string& s) { return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s); };
    std::vector<GridCsvRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 8) throw std::runtime_error("grid CSV: expected 8 fields");
        rows.push_back({num(f[0]), num(f[1]), num(f[2]), num(f[3]), num(f[4]), num(f[5]), f[6] == "1", f[7]});
    }
    return rows;
}

}  // namespace srsurv
