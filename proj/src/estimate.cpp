#include "srsurv/estimate.hpp"

#include "srsurv/bfgs.hpp"
#include "srsurv/parallel.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace srsurv {

namespace {

constexpr double kZ975 = 1.959963984540054;
constexpr double kBoundaryIncrement = 1e-8;

}  // namespace

double FitResult::beta_se(std::size_t k) const {
    if (!has_covariance) return std::numeric_limits<double>::quiet_NaN();
    auto idx = static_cast<Eigen::Index>(J() + k);
    return std::sqrt(std::max(0.0, covariance(idx, idx)));
}

WorkingParams life_table_start(const Dataset& ds, std::size_t P) {
    const std::size_t J = ds.grid.J();
    std::vector<double> at_risk(J, 0.0), events(J, 0.0);
    for (const auto& s : ds.subjects) {
        if (s.visits.empty()) continue;
        double first_pos = std::numeric_limits<double>::infinity();
        for (const auto& v : s.visits)
            if (v.result == 1) {
                first_pos = v.time;
                break;
            }
        double last = s.visits.back().time;
        for (std::size_t k = 0; k < J; ++k) {
            double right = ds.grid.tau(k + 1);
            if (last < right || first_pos < right) break;
            at_risk[k] += 1.0;
            if (first_pos == right) events[k] += 1.0;
        }
    }
    double tot_r = 0.0, tot_e = 0.0;
    for (std::size_t k = 0; k < J; ++k) {
        tot_r += at_risk[k];
        tot_e += events[k];
    }
    double pooled = tot_r > 0.0 ? tot_e / tot_r : 0.1;
    WorkingParams w;
    w.gamma.resize(static_cast<Eigen::Index>(J));
    for (std::size_t k = 0; k < J; ++k) {
        double q = at_risk[k] > 0.0 ? events[k] / at_risk[k] : pooled;
        q = std::clamp(q, 1e-3, 0.5);
        w.gamma[static_cast<Eigen::Index>(k)] = std::log(-std::log1p(-q));
    }
    w.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P));
    return w;
}

Eigen::MatrixXd numerical_hessian(const Objective& obj, const Eigen::VectorXd& x, double rel_step) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index k = 0; k < n; ++k) {
        double h = rel_step * std::max(1.0, std::abs(x[k]));
        xp[k] = x[k] + h;
        auto up = obj.evaluate_flat(xp);
        xp[k] = x[k] - h;
        auto dn = obj.evaluate_flat(xp);
        xp[k] = x[k];
        H.col(k) = (up.gradient - dn.gradient) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

namespace {

void fill_covariance(const Objective& obj, FitResult& r) {
    const auto J = static_cast<Eigen::Index>(r.J());
    const auto P = static_cast<Eigen::Index>(r.P());
    const Eigen::Index n = J + P;
    Eigen::VectorXd x = r.working.flat();
    Eigen::MatrixXd info = -numerical_hessian(obj, x);

    // Increments that collapsed onto Lambda = 0 carry no curvature; they are
    // held at the boundary, like frozen coordinates.
    const double total = r.lambda_hat.lambdas.sum();
    std::vector<Eigen::Index> free;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (std::find(r.frozen.begin(), r.frozen.end(), static_cast<std::size_t>(k)) != r.frozen.end()) continue;
        if (k < J && r.lambda_hat.lambdas[k] <= kBoundaryIncrement * total) {
            r.notes.push_back("interval " + std::to_string(k) + " at the boundary (Lambda ~ 0), held fixed for covariance");
            continue;
        }
        free.push_back(k);
    }
    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = info(free[a], free[b]);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
    if (es.info() != Eigen::Success || m == 0) {
        r.notes.push_back("covariance omitted: eigen decomposition failed");
        return;
    }
    double top = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() <= 1e-12 * top) {
        r.notes.push_back("covariance omitted: observed information is singular or indefinite");
        return;
    }
    Eigen::MatrixXd inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    r.covariance = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) r.covariance(free[a], free[b]) = inv(a, b);
    r.covariance = 0.5 * (r.covariance + r.covariance.transpose());
    r.has_covariance = true;

    // (beta, S_2..S_{J+1}) = G (gamma, beta)
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(P + J, n);
    for (Eigen::Index k = 0; k < P; ++k) G(k, J + k) = 1.0;
    for (Eigen::Index c = 1; c <= J; ++c)
        for (Eigen::Index j = 0; j < c; ++j) G(P + c - 1, j) = -r.survival_hat.s[c] * r.lambda_hat.lambdas[j];
    r.natural_covariance = G * r.covariance * G.transpose();
}

void fill_coefficients(FitResult& r) {
    r.coefficients.clear();
    for (std::size_t k = 0; k < r.P(); ++k) {
        CoefficientSummary c;
        c.name = k < r.covariate_names.size() ? r.covariate_names[k] : "beta" + std::to_string(k + 1);
        c.estimate = r.beta_hat[static_cast<Eigen::Index>(k)];
        c.hazard_ratio = std::exp(c.estimate);
        c.se = r.beta_se(k);
        if (r.has_covariance && c.se > 0.0) {
            c.z = c.estimate / c.se;
            c.p_value = normal_two_sided_p(c.z);
            c.hr_lower = std::exp(c.estimate - kZ975 * c.se);
            c.hr_upper = std::exp(c.estimate + kZ975 * c.se);
        } else {
            c.z = c.p_value = c.hr_lower = c.hr_upper = std::numeric_limits<double>::quiet_NaN();
        }
        r.coefficients.push_back(std::move(c));
    }
}

}  // namespace

FitResult fit(const Dataset& ds, const ErrorModel& em, ModelKind model, const FitOptions& options) {
    auto report = validate(ds);
    if (!report.empty()) {
        std::ostringstream msg;
        msg << "dataset failed validation: subject " << report.front().subject_id << ": " << report.front().rule;
        if (report.size() > 1) msg << " (+" << report.size() - 1 << " more)";
        throw PanelError(msg.str());
    }
    Objective obj(ds, em, model, options.threads);
    const std::size_t J = obj.J(), P = obj.P();

    WorkingParams start = options.start ? *options.start : life_table_start(ds, P);
    if (start.size() != J + P) throw LikelihoodError("starting values do not match the model dimensions");
    auto first = obj.evaluate(start, false);
    if (first.infeasible >= 0)
        throw LikelihoodError("subject " + ds.subjects[static_cast<std::size_t>(first.infeasible)].id +
                              " has zero likelihood under the error model (impossible report pattern)");

    BfgsOptions bo;
    bo.max_iterations = options.max_iterations;
    bo.rel_tol = options.rel_tol;
    bo.grad_tol = options.grad_tol;
    Bfgs solver(bo);
    auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        auto ev = obj.evaluate_flat(x);
        g = -ev.gradient;
        return std::isfinite(ev.loglik) ? -ev.loglik : std::numeric_limits<double>::infinity();
    };
    const double threshold = options.freeze_threshold;
    auto freeze = [&](const Eigen::VectorXd& x, Eigen::Index k) {
        return static_cast<std::size_t>(k) < J && std::abs(x[k]) > threshold;
    };
    BfgsResult br = solver.minimize(fg, start.flat(), freeze);

    FitResult r;
    r.model = model;
    r.error_model = em;
    r.taus = ds.grid.taus();
    if (model != ModelKind::onesample) r.covariate_names = ds.covariate_names;
    r.n_subjects = ds.N();
    r.working = WorkingParams::from_flat(br.x, J, P);
    r.beta_hat = r.working.beta;
    r.lambda_hat = r.working.hazards();
    r.survival_hat = r.lambda_hat.survival();
    auto final_eval = obj.evaluate(r.working);
    r.loglik = final_eval.loglik;
    r.clamped_predictors = final_eval.clamped;
    r.iterations = br.iterations;
    r.evaluations = br.evaluations;
    r.converged = br.converged;
    r.message = br.message;
    for (std::size_t k = 0; k < br.frozen.size(); ++k)
        if (br.frozen[k]) {
            r.frozen.push_back(k);
            r.notes.push_back("interval " + std::to_string(k) + " frozen at gamma=" +
                              std::to_string(br.x[static_cast<Eigen::Index>(k)]));
        }
    Eigen::VectorXd g = final_eval.gradient;
    for (auto k : r.frozen) g[static_cast<Eigen::Index>(k)] = 0.0;
    r.max_abs_gradient = g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0;
    if (r.clamped_predictors > 0)
        r.notes.push_back(std::to_string(r.clamped_predictors) + " linear predictor(s) clamped at the optimum");

    if (options.compute_covariance) fill_covariance(obj, r);
    fill_coefficients(r);
    return r;
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double chi_square_upper_p(double statistic, double df) {
    if (!(df > 0.0)) throw std::invalid_argument("chi-square degrees of freedom must be positive");
    if (statistic <= 0.0) return 1.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * statistic);
}

TestResult wald_test(const FitResult& f, std::size_t k) {
    if (k >= f.P()) throw std::out_of_range("coefficient index out of range");
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.P()));
    c[static_cast<Eigen::Index>(k)] = 1.0;
    return wald_test(f, c);
}

TestResult wald_test(const FitResult& f, const Eigen::VectorXd& c) {
    if (!f.has_covariance) throw std::logic_error("Wald test needs a covariance matrix");
    if (static_cast<std::size_t>(c.size()) != f.P()) throw std::invalid_argument("contrast length must equal P");
    const auto J = static_cast<Eigen::Index>(f.J());
    const auto P = static_cast<Eigen::Index>(f.P());
    double var = c.dot(f.covariance.block(J, J, P, P) * c);
    if (!(var > 0.0)) throw std::logic_error("contrast has zero variance");
    TestResult t;
    t.statistic = c.dot(f.beta_hat) / std::sqrt(var);
    t.p_value = normal_two_sided_p(t.statistic);
    return t;
}

TestResult lr_test(const FitResult& full, const FitResult& reduced, double df) {
    double diff = full.loglik - reduced.loglik;
    if (diff < -1e-8)
        throw std::logic_error("full-model log-likelihood is below the reduced model's; the optimizer did not converge");
    TestResult t;
    t.statistic = std::max(0.0, 2.0 * diff);
    t.p_value = t.statistic == 0.0 ? 1.0 : chi_square_upper_p(t.statistic, df);
    return t;
}

std::vector<SurvivalPoint> survival_curve(const FitResult& f, const Eigen::VectorXd& profile) {
    if (static_cast<std::size_t>(profile.size()) != f.P())
        throw std::invalid_argument("covariate profile has length " + std::to_string(profile.size()) + ", expected " +
                                    std::to_string(f.P()));
    const auto J = static_cast<Eigen::Index>(f.J());
    const auto P = static_cast<Eigen::Index>(f.P());
    double lin = P > 0 ? profile.dot(f.beta_hat) : 0.0;
    bool zero_profile = P == 0 || profile.isZero(0.0);
    std::vector<SurvivalPoint> out;
    double H = 0.0;
    for (Eigen::Index c = 1; c <= J; ++c) {
        H += f.lambda_hat.lambdas[c - 1];
        SurvivalPoint pt;
        pt.tau = f.taus[static_cast<std::size_t>(c - 1)];
        pt.survival = zero_profile ? f.survival_hat.s[c] : std::pow(f.survival_hat.s[c], std::exp(lin));
        if (f.has_covariance && H > 0.0) {
            Eigen::VectorXd grad = Eigen::VectorXd::Zero(J + P);
            for (Eigen::Index j = 0; j < c; ++j) grad[j] = f.lambda_hat.lambdas[j] / H;
            grad.tail(P) = profile;
            double se = std::sqrt(std::max(0.0, grad.dot(f.covariance * grad)));
            double cll = std::log(H) + lin;
            pt.lower = std::exp(-std::exp(cll + kZ975 * se));
            pt.upper = std::exp(-std::exp(cll - kZ975 * se));
        } else {
            pt.lower = pt.upper = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(pt);
    }
    return out;
}

std::vector<GridCell> parse_grid_spec(const std::string& spec) {
    std::vector<double> phi1{1.0}, phi0{1.0}, eta{1.0};
    bool seen1 = false, seen0 = false, seen_eta = false;
    std::stringstream parts(spec);
    std::string part;
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t");
        auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(parts, part, ';')) {
        part = trim(part);
        if (part.empty()) continue;
        auto eq = part.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("grid spec term '" + part + "' lacks '='");
        std::string key = trim(part.substr(0, eq));
        std::vector<double> values;
        std::stringstream vs(part.substr(eq + 1));
        std::string tok;
        while (std::getline(vs, tok, ',')) {
            tok = trim(tok);
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(tok, &used);
            } catch (...) {
                used = 0;
            }
            if (tok.empty() || used != tok.size()) throw std::invalid_argument("grid spec value '" + tok + "' for " + key + " is not a number");
            if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("grid spec value for " + key + " must lie in (0,1]");
            values.push_back(v);
        }
        if (values.empty()) throw std::invalid_argument("grid spec key " + key + " has no values");
        bool* seen = nullptr;
        if (key == "phi1") {
            phi1 = values;
            seen = &seen1;
        } else if (key == "phi0") {
            phi0 = values;
            seen = &seen0;
        } else if (key == "eta") {
            eta = values;
            seen = &seen_eta;
        } else {
            throw std::invalid_argument("unknown grid spec key '" + key + "'");
        }
        if (*seen) throw std::invalid_argument("grid spec key " + key + " given twice");
        *seen = true;
    }
    if (!seen1 && !seen0 && !seen_eta) throw std::invalid_argument("grid spec is empty");
    std::vector<GridCell> cells;
    for (double a : phi1)
        for (double b : phi0)
            for (double c : eta) cells.push_back({a, b, c});
    return cells;
}

SensitivityGrid sensitivity_grid(const Dataset& ds, ModelKind model, const std::vector<GridCell>& cells,
                                 const FitOptions& options, unsigned threads) {
    if (cells.empty()) throw std::invalid_argument("sensitivity grid needs at least one cell");
    SensitivityGrid grid;
    grid.cells.resize(cells.size());
    parallel_for(cells.size(), threads, [&](std::size_t k) {
        auto& out = grid.cells[k];
        out.cell = cells[k];
        try {
            ErrorModel em(cells[k].phi1, cells[k].phi0, cells[k].eta);
            out.fit = fit(ds, em, model, options);
        } catch (const std::exception& e) {
            out.error = e.what();
        }
    });
    return grid;
}

}  // namespace srsurv
