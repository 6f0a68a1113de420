#include "srsurv/estimate.hpp"
#include "srsurv/io.hpp"
#include "srsurv/panel_csv.hpp"
#include "srsurv/parallel.hpp"
#include "srsurv/simulate.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace srsurv;

constexpr std::uint64_t kDefaultSeed = 20150521;

enum Exit { kOk = 0, kInputError = 1, kNotConverged = 2 };

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    return out;
}

struct PanelFlags {
    std::string panel;
    std::string covariates;
    std::optional<double> rounding;
    std::string schedule = "adaptive";
    bool time_varying = false;

    void add(CLI::App* app) {
        app->add_option("panel", panel, "Panel CSV (subject_id,time,result[,cov...])")->required()->check(CLI::ExistingFile);
        app->add_option("--covariates", covariates, "Baseline covariate CSV (subject_id,cov...)")->check(CLI::ExistingFile);
        app->add_option("--round", rounding, "Round visit times to this granularity")->check(CLI::PositiveNumber);
        app->add_option("--schedule", schedule, "adaptive or predetermined")->check(CLI::IsMember({"adaptive", "predetermined"}));
        app->add_flag("--time-varying", time_varying, "Use the covariate path recorded at each visit");
    }

    PanelReadResult read(int verbosity) const {
        PanelReadOptions o;
        o.rounding = rounding;
        o.schedule = schedule_from_string(schedule);
        if (!covariates.empty()) o.baseline_path = covariates;
        auto r = read_panel_csv(panel, o);
        if (verbosity > 0)
            fmt::print(stderr, "read {} subjects, J = {}, {} covariate(s), {} LOCF fill(s), {} merged visit(s)\n",
                       r.dataset.N(), r.dataset.grid.J(), r.dataset.P(), r.imputed_values, r.merged_visits);
        return r;
    }

    ModelKind model(const Dataset& ds) const {
        if (time_varying) return ModelKind::cov_timevarying;
        return ds.P() > 0 ? ModelKind::cov_fixed : ModelKind::onesample;
    }
};

int cmd_fit(const PanelFlags& pf, double phi1, double phi0, double eta, const std::string& out_prefix,
            const std::vector<double>& profile_in, unsigned threads, int verbosity) {
    ErrorModel em(phi1, phi0, eta);
    auto read = pf.read(verbosity);
    const Dataset& ds = read.dataset;
    ModelKind model = pf.model(ds);
    FitOptions opts;
    opts.threads = threads;
    FitResult f = fit(ds, em, model, opts);

    Eigen::VectorXd profile = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.P()));
    if (!profile_in.empty()) {
        if (profile_in.size() != f.P())
            throw InputError(fmt::format("--profile has {} values, model has {} covariate(s)", profile_in.size(), f.P()));
        for (std::size_t k = 0; k < profile_in.size(); ++k) profile[static_cast<Eigen::Index>(k)] = profile_in[k];
    }

    auto json_out = open_out(out_prefix + ".json");
    json_out << to_json(f).dump(2) << '\n';
    auto coef_out = open_out(out_prefix + "_coefficients.csv");
    write_coefficients_csv(coef_out, f);
    auto surv_out = open_out(out_prefix + "_survival.csv");
    write_survival_csv(surv_out, survival_curve(f, profile));

    if (verbosity > 0 || !f.converged) {
        fmt::print(stderr, "loglik {:.6f}  iterations {}  converged {}  ({})\n", f.loglik, f.iterations, f.converged,
                   f.message);
        for (const auto& n : f.notes) fmt::print(stderr, "note: {}\n", n);
    }
    for (const auto& c : f.coefficients)
        fmt::print("{}: beta {:.4f} (se {:.4f}), HR {:.3f} ({:.3f}, {:.3f}), p = {:.3g}\n", c.name, c.estimate, c.se,
                   c.hazard_ratio, c.hr_lower, c.hr_upper, c.p_value);
    return f.converged ? kOk : kNotConverged;
}

int cmd_simulate(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed,
                 std::optional<std::size_t> replicates, const std::string& panel_out, unsigned threads, int verbosity) {
    ScenarioFile file = read_scenario_config(config_path);
    if (seed) file.config.seed = *seed;
    if (replicates) {
        if (*replicates < 1) throw InputError("--replicates must be >= 1");
        file.config.n_replicates = *replicates;
    }
    if (!panel_out.empty()) write_panel_csv(panel_out, generate_dataset(file.config, 0));
    auto run = run_scenario(file.config, file.arms, threads);
    auto csv = open_out(out);
    write_summary_csv(csv, run.summaries);
    if (verbosity >= 0)
        for (const auto& s : run.summaries)
            fmt::print("{} [{}]: bias {:.2f}% (+-{:.2f}), sd {:.4f}, se {:.4f}, rmse {:.4f}, coverage {:.1f}% ({}/{} converged)\n",
                       s.scenario, s.arm, s.mean_bias_pct, s.bias_pct_mcse, s.empirical_sd, s.mean_estimated_se, s.rmse,
                       s.coverage_pct, s.n_converged, s.n_replicates);
    return kOk;
}

int cmd_reproduce(const std::string& table, std::size_t replicates, std::uint64_t seed, const std::string& csv_path,
                  const std::string& text_path, unsigned threads) {
    auto report = reproduce_tables(table_from_string(table), replicates, seed, threads);
    std::ostringstream text;
    write_report_text(text, report);
    std::cout << text.str();
    if (!text_path.empty()) open_out(text_path) << text.str();
    if (!csv_path.empty()) {
        auto csv = open_out(csv_path);
        write_report_csv(csv, report);
    }
    return kOk;
}

int cmd_sensitivity(const PanelFlags& pf, const std::string& spec, const std::string& out, const std::string& coefficient,
                    unsigned threads, int verbosity) {
    std::vector<GridCell> cells;
    try {
        cells = parse_grid_spec(spec);
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("--grid: ") + e.what());
    }
    auto read = pf.read(verbosity);
    const Dataset& ds = read.dataset;
    ModelKind model = pf.model(ds);
    if (model == ModelKind::onesample) throw InputError("sensitivity analysis needs at least one covariate");
    SensitivityGrid grid = sensitivity_grid(ds, model, cells, {}, threads);
    if (!coefficient.empty()) {
        auto it = std::find(ds.covariate_names.begin(), ds.covariate_names.end(), coefficient);
        if (it == ds.covariate_names.end()) throw InputError("--coefficient: unknown covariate '" + coefficient + "'");
        grid.coefficient = static_cast<std::size_t>(it - ds.covariate_names.begin());
    }
    auto csv = open_out(out);
    write_grid_csv(csv, grid);
    bool all_ok = true;
    for (const auto& c : grid.cells) {
        if (!c.fit || !c.fit->converged) all_ok = false;
        if (!c.error.empty()) fmt::print(stderr, "cell phi1={} phi0={} eta={}: {}\n", c.cell.phi1, c.cell.phi0, c.cell.eta, c.error);
    }
    if (verbosity > 0) fmt::print(stderr, "{} cell(s) written to {}\n", grid.cells.size(), out);
    return all_ok ? kOk : kNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Proportional-hazards fits for error-prone, periodic self-reported outcomes"};
    app.require_subcommand(1);
    app.fallthrough();
    int verbosity = 0;
    unsigned threads = srsurv::default_threads();
    app.add_flag("-v,--verbose", verbosity, "More diagnostics on stderr");
    app.add_option("--threads", threads, "Worker threads (default: SRSURV_THREADS or hardware)")->check(CLI::PositiveNumber);

    PanelFlags fit_flags;
    double phi1 = 1.0, phi0 = 1.0, eta = 1.0;
    std::string out_prefix = "fit";
    std::vector<double> profile;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a panel CSV");
    fit_flags.add(fit_cmd);
    fit_cmd->add_option("--phi1", phi1, "Sensitivity of self-reports")->required()->check(CLI::Range(0.0, 1.0));
    fit_cmd->add_option("--phi0", phi0, "Specificity of self-reports")->required()->check(CLI::Range(0.0, 1.0));
    fit_cmd->add_option("--eta", eta, "Negative predictive value of the baseline report")->check(CLI::Range(0.0, 1.0));
    fit_cmd->add_option("--out", out_prefix, "Output prefix for .json, _coefficients.csv, _survival.csv");
    fit_cmd->add_option("--profile", profile, "Covariate profile for the survival curve (default zeros)")->delimiter(',');

    std::string config, sim_out = "summary.csv", panel_out;
    std::optional<std::uint64_t> sim_seed;
    std::optional<std::size_t> sim_reps;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a simulation scenario from a config file");
    sim_cmd->add_option("config", config, "Scenario config (key = value)")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--out", sim_out, "Summary CSV path");
    sim_cmd->add_option("--seed", sim_seed, "Override the config seed");
    sim_cmd->add_option("--replicates", sim_reps, "Override n_replicates");
    sim_cmd->add_option("--panel-out", panel_out, "Also write replicate 0 as a panel CSV");

    std::string table = "table1", rep_csv, rep_text;
    std::size_t replicates = 100;
    std::uint64_t rep_seed = kDefaultSeed;
    auto* rep_cmd = app.add_subcommand("reproduce", "Re-run the published simulation tables");
    rep_cmd->add_option("--table", table, "table1 or table2")->check(CLI::IsMember({"table1", "table2"}));
    rep_cmd->add_option("--replicates", replicates, "Replicates per row")->check(CLI::PositiveNumber);
    rep_cmd->add_option("--seed", rep_seed, "Base seed");
    rep_cmd->add_option("--out", rep_csv, "CSV report path");
    rep_cmd->add_option("--text", rep_text, "Text report path");

    PanelFlags sens_flags;
    std::string grid_spec, sens_out = "grid.csv", coefficient;
    auto* sens_cmd = app.add_subcommand("sensitivity", "Refit over a grid of (phi1, phi0, eta)");
    sens_flags.add(sens_cmd);
    sens_cmd->add_option("--grid", grid_spec, "e.g. \"phi1=0.5,0.61;phi0=0.993,0.995;eta=0.96,0.98\"")->required();
    sens_cmd->add_option("--out", sens_out, "Grid CSV path");
    sens_cmd->add_option("--coefficient", coefficient, "Covariate whose hazard ratio is reported (default first)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInputError;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit_flags, phi1, phi0, eta, out_prefix, profile, threads, verbosity);
        if (*sim_cmd) return cmd_simulate(config, sim_out, sim_seed, sim_reps, panel_out, threads, verbosity);
        if (*rep_cmd) return cmd_reproduce(table, replicates, rep_seed, rep_csv, rep_text, threads);
        if (*sens_cmd) return cmd_sensitivity(sens_flags, grid_spec, sens_out, coefficient, threads, verbosity);
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kInputError;
    }
    return kInputError;
}
