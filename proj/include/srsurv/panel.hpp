#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace srsurv {

class PanelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Visit {
    double time = 0.0;
    int result = 0;  // 1 = positive self-report
};

// Covariate vector recorded at a visit time (time-varying analyses).
struct CovariateRecord {
    double time = 0.0;
    Eigen::VectorXd value;
};

// One subject's visits, self-reports and covariate history.
//
// `baseline` holds the time-fixed covariate vector z_i. `path` holds the
// time-indexed covariate history; it is empty for time-fixed data.
struct SubjectPanel {
    std::string id;
    std::vector<Visit> visits;
    Eigen::VectorXd baseline;
    std::vector<CovariateRecord> path;

    bool time_varying() const { return !path.empty(); }
    std::size_t n_covariates() const;

    // Covariate value in force at time t: the latest path record with
    // record time <= t. Before the first record the baseline vector is used
    // when present, otherwise the first record.
    Eigen::VectorXd covariate_at(double t) const;

    // Covariates for a time-fixed model.
    Eigen::VectorXd fixed_covariates() const;

    double last_visit_time() const { return visits.empty() ? 0.0 : visits.back().time; }
};

// Ordered distinct visit times tau_1 < ... < tau_J. tau_0 = 0 and
// tau_{J+1} = infinity are implicit.
class StudyGrid {
public:
    StudyGrid() = default;
    explicit StudyGrid(std::vector<double> taus);

    std::size_t J() const { return taus_.size(); }
    std::size_t n_intervals() const { return taus_.size() + 1; }
    const std::vector<double>& taus() const { return taus_; }

    // tau_j for j in [0, J+1]; tau_0 = 0, tau_{J+1} = +inf.
    double tau(std::size_t j) const;

    // 1-based j such that t == tau_j exactly, if any.
    std::optional<std::size_t> index_of(double t) const;

private:
    std::vector<double> taus_;
};

class ErrorModel {
public:
    ErrorModel() = default;
    // Throws std::invalid_argument unless all values lie in (0,1] and
    // phi1 > 1 - phi0.
    ErrorModel(double phi1, double phi0, double eta = 1.0);

    double phi1() const { return phi1_; }
    double phi0() const { return phi0_; }
    double eta() const { return eta_; }

    static ErrorModel perfect() { return ErrorModel(1.0, 1.0, 1.0); }

private:
    double phi1_ = 1.0;
    double phi0_ = 1.0;
    double eta_ = 1.0;
};

enum class Schedule { adaptive, predetermined };

struct Dataset {
    std::vector<SubjectPanel> subjects;
    StudyGrid grid;
    std::vector<std::string> covariate_names;
    Schedule schedule = Schedule::adaptive;

    std::size_t N() const { return subjects.size(); }
    std::size_t P() const { return covariate_names.size(); }
    bool time_varying() const;

    // N x P matrix of time-fixed covariates.
    Eigen::MatrixXd fixed_design() const;
};

struct Violation {
    std::string subject_id;
    std::string rule;
    std::string detail;
};

using ValidationReport = std::vector<Violation>;

// Rule names used in validation reports.
namespace rules {
inline constexpr const char* empty_dataset = "empty dataset";
inline constexpr const char* no_visits = "no visits";
inline constexpr const char* non_positive_time = "non-positive visit time";
inline constexpr const char* not_increasing = "visit times not strictly increasing";
inline constexpr const char* bad_result = "non-binary result";
inline constexpr const char* positive_not_terminal = "positive not terminal";
inline constexpr const char* off_grid = "off-grid visit time";
inline constexpr const char* covariate_length = "covariate length mismatch";
inline constexpr const char* empty_grid = "empty grid";
}  // namespace rules

struct GridBuild {
    StudyGrid grid;
    std::size_t merged_visits = 0;  // collisions removed by rounding
};

// Rounds visit times to the nearest multiple of `rounding` (when given),
// merging same-subject collisions by keeping the later record's result,
// then returns the sorted distinct visit times.
GridBuild build_grid(std::vector<SubjectPanel>& subjects, std::optional<double> rounding = std::nullopt);

// Sorted distinct visit times, without rounding or mutation.
StudyGrid collect_grid(const std::vector<SubjectPanel>& subjects);

ValidationReport validate(const Dataset& dataset);

std::string to_string(Schedule s);
Schedule schedule_from_string(const std::string& s);

}  // namespace srsurv
