#include "srsurv/estimate.hpp"
#include "srsurv/io.hpp"
#include "srsurv/panel.hpp"
#include "srsurv/panel_csv.hpp"
#include "srsurv/simulate.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace srsurv;

namespace {

ModelKind model_arg(const std::string& model, const Dataset& ds) {
    if (model == "auto") {
        if (ds.P() == 0) return ModelKind::onesample;
        return ds.time_varying() ? ModelKind::cov_timevarying : ModelKind::cov_fixed;
    }
    return model_kind_from_string(model);
}

// Builds a dataset from long-format columns, one entry per visit.
Dataset dataset_from_columns(const std::vector<std::string>& ids, const std::vector<double>& times,
                             const std::vector<int>& results, const Eigen::MatrixXd& covariates,
                             const std::vector<std::string>& names, const std::string& schedule) {
    const std::size_t n = ids.size();
    if (times.size() != n || results.size() != n) throw std::invalid_argument("ids, times and results differ in length");
    if (covariates.size() > 0 && static_cast<std::size_t>(covariates.rows()) != n)
        throw std::invalid_argument("covariates need one row per visit");
    std::ostringstream csv;
    csv.precision(17);
    csv << "subject_id,time,result";
    for (const auto& name : names) csv << ',' << name;
    csv << '\n';
    for (std::size_t r = 0; r < n; ++r) {
        csv << ids[r] << ',' << times[r] << ',' << results[r];
        for (Eigen::Index k = 0; k < covariates.cols(); ++k) csv << ',' << covariates(static_cast<Eigen::Index>(r), k);
        csv << '\n';
    }
    if (static_cast<std::size_t>(covariates.cols()) != names.size())
        throw std::invalid_argument("covariate names do not match the covariate columns");
    std::istringstream in(csv.str());
    PanelReadOptions opt;
    opt.schedule = schedule_from_string(schedule);
    return read_panel_csv(in, "<columns>", opt).dataset;
}

std::string summaries_csv(const std::vector<ScenarioSummary>& rows) {
    std::ostringstream out;
    write_summary_csv(out, rows);
    return out.str();
}

py::dict summary_dict(const ScenarioSummary& s) {
    py::dict d;
    d["scenario"] = s.scenario;
    d["arm"] = s.arm;
    d["beta_true"] = s.beta_true;
    d["n_replicates"] = s.n_replicates;
    d["n_converged"] = s.n_converged;
    d["mean_estimate"] = s.mean_estimate;
    d["bias_pct"] = s.mean_bias_pct;
    d["bias_pct_mcse"] = s.bias_pct_mcse;
    d["empirical_sd"] = s.empirical_sd;
    d["mean_se"] = s.mean_estimated_se;
    d["rmse"] = s.rmse;
    d["coverage_pct"] = s.coverage_pct;
    return d;
}

}  // namespace

PYBIND11_MODULE(_srsurv, m) {
    m.doc() = "Discrete-time survival models for error-prone self-reports";

    py::register_exception<PanelError>(m, "PanelError", PyExc_ValueError);
    py::register_exception<LikelihoodError>(m, "LikelihoodError", PyExc_ValueError);
    py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);

    py::class_<ErrorModel>(m, "ErrorModel")
        .def(py::init<double, double, double>(), py::arg("phi1"), py::arg("phi0"), py::arg("eta") = 1.0)
        .def_property_readonly("phi1", &ErrorModel::phi1)
        .def_property_readonly("phi0", &ErrorModel::phi0)
        .def_property_readonly("eta", &ErrorModel::eta)
        .def("__repr__", [](const ErrorModel& e) {
            std::ostringstream s;
            s << "ErrorModel(phi1=" << e.phi1() << ", phi0=" << e.phi0() << ", eta=" << e.eta() << ")";
            return s.str();
        });

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("n_subjects", &Dataset::N)
        .def_property_readonly("taus", [](const Dataset& d) { return d.grid.taus(); })
        .def_readonly("covariate_names", &Dataset::covariate_names)
        .def_property_readonly("schedule", [](const Dataset& d) { return to_string(d.schedule); })
        .def_property_readonly("time_varying", &Dataset::time_varying)
        .def("fixed_design", &Dataset::fixed_design)
        .def("subject_ids", [](const Dataset& d) {
            std::vector<std::string> ids;
            for (const auto& s : d.subjects) ids.push_back(s.id);
            return ids;
        })
        .def("to_csv", [](const Dataset& d) {
            std::ostringstream out;
            write_panel_csv(out, d);
            return out.str();
        });

    m.def(
        "read_panel_csv",
        [](const std::string& path, std::optional<double> rounding, const std::string& schedule,
           std::optional<std::string> baseline, bool strict) {
            PanelReadOptions opt;
            opt.rounding = rounding;
            opt.schedule = schedule_from_string(schedule);
            opt.baseline_path = std::move(baseline);
            opt.strict = strict;
            return read_panel_csv(path, opt).dataset;
        },
        py::arg("path"), py::arg("rounding") = py::none(), py::arg("schedule") = "adaptive",
        py::arg("baseline") = py::none(), py::arg("strict") = true);

    m.def("dataset_from_columns", &dataset_from_columns, py::arg("ids"), py::arg("times"), py::arg("results"),
          py::arg("covariates") = Eigen::MatrixXd(), py::arg("names") = std::vector<std::string>{},
          py::arg("schedule") = "adaptive");

    py::class_<CoefficientSummary>(m, "Coefficient")
        .def_readonly("name", &CoefficientSummary::name)
        .def_readonly("estimate", &CoefficientSummary::estimate)
        .def_readonly("se", &CoefficientSummary::se)
        .def_readonly("z", &CoefficientSummary::z)
        .def_readonly("p_value", &CoefficientSummary::p_value)
        .def_readonly("hazard_ratio", &CoefficientSummary::hazard_ratio)
        .def_readonly("hr_lower", &CoefficientSummary::hr_lower)
        .def_readonly("hr_upper", &CoefficientSummary::hr_upper);

    py::class_<FitResult>(m, "FitResult")
        .def_property_readonly("model", [](const FitResult& f) { return to_string(f.model); })
        .def_readonly("error_model", &FitResult::error_model)
        .def_readonly("taus", &FitResult::taus)
        .def_readonly("n_subjects", &FitResult::n_subjects)
        .def_readonly("loglik", &FitResult::loglik)
        .def_readonly("beta", &FitResult::beta_hat)
        .def_property_readonly("survival", [](const FitResult& f) { return f.survival_hat.s; })
        .def_property_readonly("hazard_increments", [](const FitResult& f) { return f.lambda_hat.lambdas; })
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("iterations", &FitResult::iterations)
        .def_readonly("message", &FitResult::message)
        .def_readonly("has_covariance", &FitResult::has_covariance)
        .def_readonly("covariance", &FitResult::natural_covariance)
        .def_readonly("working_covariance", &FitResult::covariance)
        .def_readonly("frozen", &FitResult::frozen)
        .def_readonly("notes", &FitResult::notes)
        .def_readonly("coefficients", &FitResult::coefficients)
        .def("to_json", [](const FitResult& f) { return to_json(f).dump(2); })
        .def_static("from_json", [](const std::string& s) { return fit_from_json(nlohmann::json::parse(s)); })
        .def(
            "survival_curve",
            [](const FitResult& f, std::optional<Eigen::VectorXd> profile) {
                auto curve = survival_curve(f, profile ? *profile : Eigen::VectorXd::Zero(f.beta_hat.size()));
                py::list out;
                for (const auto& p : curve) out.append(py::make_tuple(p.tau, p.survival, p.lower, p.upper));
                return out;
            },
            py::arg("profile") = py::none());

    m.def(
        "fit",
        [](const Dataset& ds, const ErrorModel& em, const std::string& model, unsigned threads, bool covariance) {
            FitOptions opt;
            opt.threads = threads;
            opt.compute_covariance = covariance;
            py::gil_scoped_release release;
            return fit(ds, em, model_arg(model, ds), opt);
        },
        py::arg("dataset"), py::arg("error_model"), py::arg("model") = "auto", py::arg("threads") = 1,
        py::arg("covariance") = true);

    m.def(
        "wald_test",
        [](const FitResult& f, std::size_t k) {
            auto t = wald_test(f, k);
            return py::make_tuple(t.statistic, t.p_value);
        },
        py::arg("fit"), py::arg("coefficient"));
    m.def(
        "wald_contrast",
        [](const FitResult& f, const Eigen::VectorXd& c) {
            auto t = wald_test(f, c);
            return py::make_tuple(t.statistic, t.p_value);
        },
        py::arg("fit"), py::arg("contrast"));
    m.def(
        "lr_test",
        [](const FitResult& full, const FitResult& reduced, double df) {
            auto t = lr_test(full, reduced, df);
            return py::make_tuple(t.statistic, t.p_value);
        },
        py::arg("full"), py::arg("reduced"), py::arg("df"));

    m.def(
        "sensitivity",
        [](const Dataset& ds, const std::string& grid, const std::string& model, unsigned threads) {
            std::vector<GridCell> cells = parse_grid_spec(grid);
            SensitivityGrid g;
            {
                py::gil_scoped_release release;
                g = sensitivity_grid(ds, model_arg(model, ds), cells, {}, threads);
            }
            py::list rows;
            for (const auto& c : g.cells) {
                py::dict d;
                d["phi1"] = c.cell.phi1;
                d["phi0"] = c.cell.phi0;
                d["eta"] = c.cell.eta;
                d["fit"] = c.fit ? py::cast(*c.fit) : py::none();
                d["error"] = c.error;
                rows.append(d);
            }
            return rows;
        },
        py::arg("dataset"), py::arg("grid"), py::arg("model") = "auto", py::arg("threads") = 1);

    py::class_<ScenarioFile>(m, "Scenario")
        .def_static(
            "from_text",
            [](const std::string& text) {
                std::istringstream in(text);
                return parse_scenario_config(in);
            },
            py::arg("text"))
        .def_static("from_file", &read_scenario_config, py::arg("path"))
        .def_property_readonly("name", [](const ScenarioFile& s) { return s.config.name; })
        .def_property_readonly("n_subjects", [](const ScenarioFile& s) { return s.config.n_subjects; })
        .def_property_readonly("n_replicates", [](const ScenarioFile& s) { return s.config.n_replicates; })
        .def_property_readonly("seed", [](const ScenarioFile& s) { return s.config.seed; })
        .def_property_readonly("arms", [](const ScenarioFile& s) {
            std::vector<std::string> names;
            for (const auto& a : s.arms) names.push_back(a.name);
            return names;
        })
        .def(
            "generate",
            [](const ScenarioFile& s, std::uint64_t replicate) { return generate_dataset(s.config, replicate); },
            py::arg("replicate") = 0)
        .def(
            "run",
            [](ScenarioFile s, std::optional<std::size_t> replicates, unsigned threads) {
                if (replicates) s.config.n_replicates = *replicates;
                ScenarioRun run;
                {
                    py::gil_scoped_release release;
                    run = run_scenario(s.config, s.arms, threads);
                }
                py::list out;
                for (const auto& r : run.summaries) out.append(summary_dict(r));
                return py::make_tuple(out, summaries_csv(run.summaries));
            },
            py::arg("replicates") = py::none(), py::arg("threads") = 1);

    m.def(
        "reproduce",
        [](const std::string& table, std::size_t replicates, std::uint64_t seed, unsigned threads) {
            TableReport rep;
            {
                py::gil_scoped_release release;
                rep = reproduce_tables(table_from_string(table), replicates, seed, threads);
            }
            std::ostringstream text;
            write_report_text(text, rep);
            return text.str();
        },
        py::arg("table"), py::arg("replicates") = 1000, py::arg("seed") = 20150521, py::arg("threads") = 1);
}
