#pragma once

#include "srsurv/likelihood.hpp"
#include "srsurv/panel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace srsurv {

struct FitOptions {
    int max_iterations = 1000;
    double rel_tol = 1e-9;
    double grad_tol = 1e-5;
    double freeze_threshold = 30.0;  // |gamma_j| beyond this pins the interval
    bool compute_covariance = true;
    unsigned threads = 1;            // per-evaluation subject parallelism
    std::optional<WorkingParams> start;
};

struct CoefficientSummary {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    double hazard_ratio = 1.0;
    double hr_lower = 0.0;
    double hr_upper = 0.0;
};

struct FitResult {
    ModelKind model = ModelKind::cov_fixed;
    ErrorModel error_model;
    std::vector<double> taus;
    std::vector<std::string> covariate_names;
    std::size_t n_subjects = 0;

    WorkingParams working;
    Eigen::VectorXd beta_hat;
    SurvivalParams survival_hat;
    HazardIncrements lambda_hat;
    double loglik = 0.0;

    bool converged = false;
    int iterations = 0;
    int evaluations = 0;
    double max_abs_gradient = 0.0;
    std::size_t clamped_predictors = 0;
    std::string message;

    bool has_covariance = false;
    Eigen::MatrixXd covariance;          // working scale, order (gamma, beta)
    Eigen::MatrixXd natural_covariance;  // order (beta, S_2..S_{J+1})
    std::vector<std::size_t> frozen;     // frozen gamma indices
    std::vector<std::string> notes;

    std::vector<CoefficientSummary> coefficients;

    std::size_t J() const { return taus.size(); }
    std::size_t P() const { return static_cast<std::size_t>(beta_hat.size()); }
    double beta_se(std::size_t k) const;
};

// Maximizes the log-likelihood over (gamma, beta). eta < 1 in the error
// model switches on the prevalent-case mixture.
FitResult fit(const Dataset& dataset, const ErrorModel& error_model, ModelKind model, const FitOptions& options = {});

// Naive life-table start treating reports as exact.
WorkingParams life_table_start(const Dataset& dataset, std::size_t P);

// Observed information by central differences of the analytic gradient.
Eigen::MatrixXd numerical_hessian(const Objective& objective, const Eigen::VectorXd& x, double rel_step = 1e-5);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

double normal_two_sided_p(double z);
double chi_square_upper_p(double statistic, double df);

TestResult wald_test(const FitResult& fit, std::size_t coefficient);
TestResult wald_test(const FitResult& fit, const Eigen::VectorXd& contrast);
TestResult lr_test(const FitResult& full, const FitResult& reduced, double df);

struct SurvivalPoint {
    double tau = 0.0;
    double survival = 1.0;
    double lower = 0.0;
    double upper = 1.0;
};

// S(tau_j | profile) for j = 1..J with 95% intervals from the delta method
// on log(-log S).
std::vector<SurvivalPoint> survival_curve(const FitResult& fit, const Eigen::VectorXd& profile);

struct GridCell {
    double phi1 = 1.0;
    double phi0 = 1.0;
    double eta = 1.0;
};

struct SensitivityCell {
    GridCell cell;
    std::optional<FitResult> fit;
    std::string error;
};

struct SensitivityGrid {
    std::vector<SensitivityCell> cells;
    std::size_t coefficient = 0;  // coefficient whose hazard ratio is reported
};

// Parses "phi1=0.5,0.61;phi0=0.993,0.995;eta=0.96,0.98" into the cartesian
// product, phi1 slowest. Missing keys default to 1.
std::vector<GridCell> parse_grid_spec(const std::string& spec);

SensitivityGrid sensitivity_grid(const Dataset& dataset, ModelKind model, const std::vector<GridCell>& cells,
                                 const FitOptions& options = {}, unsigned threads = 1);

}  // namespace srsurv
