#pragma once

#include "srsurv/estimate.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace srsurv {

// FitResult JSON schema (version 1):
//   model, n_subjects, covariate_names,
//   error_model {phi1, phi0, eta},
//   grid {taus, J},
//   estimates {beta, gamma, lambda, survival},
//   coefficients [{name, estimate, se, z, p_value, hazard_ratio, hr_lower, hr_upper}],
//   survival_se, covariance {working, natural, available},
//   convergence {converged, iterations, evaluations, max_abs_gradient, loglik, message, frozen, notes, clamped}
nlohmann::json to_json(const FitResult& fit);
FitResult fit_from_json(const nlohmann::json& j);

// name,estimate,se,z,p_value,hazard_ratio,hr_lower,hr_upper
void write_coefficients_csv(std::ostream& out, const FitResult& fit);
// tau,survival,lower,upper; first row is (0,1,1,1).
void write_survival_csv(std::ostream& out, const std::vector<SurvivalPoint>& curve);
// phi1,phi0,eta,hazard_ratio,ci_low,ci_high,converged,error
void write_grid_csv(std::ostream& out, const SensitivityGrid& grid);

struct GridCsvRow {
    double phi1, phi0, eta, hazard_ratio, ci_low, ci_high;
    bool converged;
    std::string error;
};
std::vector<GridCsvRow> read_grid_csv(std::istream& in);

}  // namespace srsurv
