#pragma once

#include "srsurv/estimate.hpp"
#include "srsurv/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace srsurv {

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EventDistribution {
    enum class Kind { exponential, weibull };
    Kind kind = Kind::exponential;
    double rate = 0.0866;  // exponential baseline hazard
    double shape = 1.0;    // weibull
    double scale = 1.0;    // weibull, S0(t) = exp(-(t/scale)^shape)

    static EventDistribution exponential(double rate);
    static EventDistribution weibull(double shape, double scale);
    // Baseline parameter giving S0(horizon) = s_end.
    static EventDistribution exponential_with_survival(double s_end, double horizon);
    static EventDistribution weibull_with_survival(double shape, double s_end, double horizon);

    double baseline_survival(double t) const;
    // Draws X given exp(z'beta) from a unit exponential variate.
    double event_time(double unit_exponential, double relative_hazard) const;
};

struct CovariateGenerator {
    enum class Kind { bernoulli, table };
    Kind kind = Kind::bernoulli;
    double p = 0.5;         // bernoulli success probability per covariate
    Eigen::MatrixXd table;  // rows recycled across subjects
};

enum class PrevalentSampling { exact, bernoulli };

struct ScenarioConfig {
    std::string name = "scenario";
    std::size_t n_subjects = 1000;
    std::size_t n_visits = 8;
    double visit_spacing = 1.0;
    double missing_prob = 0.3;
    EventDistribution event = EventDistribution::exponential_with_survival(0.5, 8.0);
    Eigen::VectorXd beta_true = Eigen::VectorXd::Constant(1, 1.0);
    CovariateGenerator covariates;
    ErrorModel truth{0.61, 0.995, 1.0};
    // exact: round(N (1 - eta)) prevalent subjects; bernoulli: independent.
    PrevalentSampling prevalent = PrevalentSampling::exact;
    Schedule schedule = Schedule::adaptive;
    std::size_t n_replicates = 1000;
    std::uint64_t seed = 20150521;

    double horizon() const { return static_cast<double>(n_visits) * visit_spacing; }
    std::size_t P() const { return static_cast<std::size_t>(beta_true.size()); }
    void check() const;
};

struct AnalysisArm {
    std::string name;
    ErrorModel model;
};

enum class Unadjusted { reports, entry, both };

AnalysisArm adjusted_arm(const ScenarioConfig& config);
// reports: phi1 = phi0 = 1; entry: eta = 1; both: all three set to 1.
AnalysisArm unadjusted_arm(const ScenarioConfig& config, Unadjusted what);

struct GeneratedData {
    Dataset dataset;
    std::vector<double> event_times;  // negative for prevalent subjects
    std::vector<char> prevalent;
    std::size_t dropped_subjects = 0;  // all visits missing
};

// Independent stream for (seed, replicate), independent of execution order.
std::mt19937_64 replicate_engine(std::uint64_t seed, std::uint64_t replicate);

GeneratedData generate_replicate(const ScenarioConfig& config, std::uint64_t replicate_index);
Dataset generate_dataset(const ScenarioConfig& config, std::uint64_t replicate_index);

struct ReplicateOutcome {
    bool converged = false;
    double estimate = 0.0;
    double se = 0.0;
    double loglik = 0.0;
    std::string error;
};

struct ScenarioSummary {
    std::string scenario;
    std::string arm;
    ErrorModel analysis_model;
    double beta_true = 0.0;
    std::size_t n_replicates = 0;
    std::size_t n_converged = 0;
    double mean_estimate = 0.0;
    double mean_bias_pct = 0.0;
    double bias_pct_mcse = 0.0;
    double empirical_sd = 0.0;
    double mean_estimated_se = 0.0;
    double rmse = 0.0;
    double coverage_pct = 0.0;
    double coverage_mcse = 0.0;
};

struct ScenarioRun {
    std::vector<ScenarioSummary> summaries;           // one per arm
    std::vector<std::vector<ReplicateOutcome>> outcomes;  // [arm][replicate]
};

ScenarioSummary summarize(const std::string& scenario, const AnalysisArm& arm, double beta_true,
                          const std::vector<ReplicateOutcome>& outcomes);

// Fits every replicate under each arm (same data across arms). Throws
// SimulationError when an arm has no converged replicate.
ScenarioRun run_scenario(const ScenarioConfig& config, const std::vector<AnalysisArm>& arms, unsigned threads = 1,
                         const FitOptions& fit_options = {});

enum class Table { table1, table2 };

struct PublishedRow {
    double phi1, phi0, s_end, eta;
    bool adjusted;
    double bias_pct, std_err, rmse, coverage_pct;
};

const std::vector<PublishedRow>& published_rows(Table which);

struct TableRow {
    PublishedRow published;
    ScenarioSummary reproduced;
};

struct TableReport {
    Table which = Table::table1;
    std::size_t replicates = 0;
    std::vector<TableRow> rows;
};

ScenarioConfig table_scenario(Table which, double phi1, double phi0, double s_end, double eta, std::size_t replicates,
                              std::uint64_t seed);
TableReport reproduce_tables(Table which, std::size_t replicates, std::uint64_t seed = 20150521, unsigned threads = 1);

void write_report_text(std::ostream& out, const TableReport& report);
void write_report_csv(std::ostream& out, const TableReport& report);

void write_summary_csv(std::ostream& out, const std::vector<ScenarioSummary>& rows);
std::vector<ScenarioSummary> read_summary_csv(std::istream& in);

struct ScenarioFile {
    ScenarioConfig config;
    std::vector<AnalysisArm> arms;
};

// key = value lines, '#' comments. See README for the schema.
ScenarioFile parse_scenario_config(std::istream& in, const std::string& source_name = "<config>");
ScenarioFile read_scenario_config(const std::string& path);

std::string to_string(Table t);
Table table_from_string(const std::string& s);

}  // namespace srsurv
