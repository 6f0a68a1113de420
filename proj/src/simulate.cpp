#include "srsurv/simulate.hpp"

#include "srsurv/panel_csv.hpp"
#include "srsurv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace srsurv {

EventDistribution EventDistribution::exponential(double rate) {
    EventDistribution d;
    d.kind = Kind::exponential;
    d.rate = rate;
    return d;
}

EventDistribution EventDistribution::weibull(double shape, double scale) {
    EventDistribution d;
    d.kind = Kind::weibull;
    d.shape = shape;
    d.scale = scale;
    return d;
}

EventDistribution EventDistribution::exponential_with_survival(double s_end, double horizon) {
    if (!(s_end > 0.0 && s_end < 1.0)) throw SimulationError("s_end must lie in (0,1)");
    return exponential(-std::log(s_end) / horizon);
}

EventDistribution EventDistribution::weibull_with_survival(double shape, double s_end, double horizon) {
    if (!(s_end > 0.0 && s_end < 1.0)) throw SimulationError("s_end must lie in (0,1)");
    if (!(shape > 0.0)) throw SimulationError("weibull shape must be positive");
    return weibull(shape, horizon / std::pow(-std::log(s_end), 1.0 / shape));
}

double EventDistribution::baseline_survival(double t) const {
    if (t <= 0.0) return 1.0;
    if (kind == Kind::exponential) return std::exp(-rate * t);
    return std::exp(-std::pow(t / scale, shape));
}

double EventDistribution::event_time(double e, double rel) const {
    if (kind == Kind::exponential) return e / (rate * rel);
    return scale * std::pow(e / rel, 1.0 / shape);
}

void ScenarioConfig::check() const {
    auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (n_subjects < 1) throw SimulationError("n_subjects must be >= 1");
    if (n_visits < 1) throw SimulationError("n_visits must be >= 1");
    if (!(visit_spacing > 0.0)) throw SimulationError("visit_spacing must be positive");
    if (!prob(missing_prob) || missing_prob >= 1.0) throw SimulationError("missing_prob must lie in [0,1)");
    if (n_replicates < 1) throw SimulationError("n_replicates must be >= 1");
    if (event.kind == EventDistribution::Kind::exponential && !(event.rate > 0.0))
        throw SimulationError("exponential rate must be positive");
    if (event.kind == EventDistribution::Kind::weibull && !(event.shape > 0.0 && event.scale > 0.0))
        throw SimulationError("weibull shape and scale must be positive");
    if (covariates.kind == CovariateGenerator::Kind::bernoulli && !prob(covariates.p))
        throw SimulationError("covariate_p must lie in [0,1]");
    if (covariates.kind == CovariateGenerator::Kind::table &&
        (covariates.table.rows() == 0 || covariates.table.cols() != beta_true.size()))
        throw SimulationError("covariate table must have one column per beta entry");
    for (Eigen::Index k = 0; k < beta_true.size(); ++k)
        if (!std::isfinite(beta_true[k])) throw SimulationError("beta must be finite");
}

AnalysisArm adjusted_arm(const ScenarioConfig& c) { return {"adjusted", c.truth}; }

AnalysisArm unadjusted_arm(const ScenarioConfig& c, Unadjusted what) {
    const auto& t = c.truth;
    switch (what) {
        case Unadjusted::reports: return {"unadjusted", ErrorModel(1.0, 1.0, t.eta())};
        case Unadjusted::entry: return {"unadjusted", ErrorModel(t.phi1(), t.phi0(), 1.0)};
        case Unadjusted::both: return {"unadjusted", ErrorModel::perfect()};
    }
    return {"unadjusted", ErrorModel::perfect()};
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Uniform on (0,1) from the top 53 bits; never 0 or 1.
double uniform01(std::mt19937_64& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

}  // namespace

std::mt19937_64 replicate_engine(std::uint64_t seed, std::uint64_t replicate) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(replicate + 0x632BE59BD9B4E019ULL)));
}

GeneratedData generate_replicate(const ScenarioConfig& cfg, std::uint64_t replicate) {
    cfg.check();
    auto rng = replicate_engine(cfg.seed, replicate);
    const std::size_t N = cfg.n_subjects;
    const auto P = static_cast<Eigen::Index>(cfg.P());
    const ErrorModel& em = cfg.truth;

    std::vector<char> prevalent(N, 0);
    if (em.eta() < 1.0) {
        if (cfg.prevalent == PrevalentSampling::exact) {
            auto n_prev = static_cast<std::size_t>(std::llround(static_cast<double>(N) * (1.0 - em.eta())));
            std::vector<std::size_t> idx(N);
            std::iota(idx.begin(), idx.end(), 0);
            for (std::size_t k = 0; k < n_prev; ++k) {
                auto pick = k + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(N - k));
                pick = std::min(pick, N - 1);
                std::swap(idx[k], idx[pick]);
                prevalent[idx[k]] = 1;
            }
        } else {
            for (std::size_t i = 0; i < N; ++i) prevalent[i] = uniform01(rng) < 1.0 - em.eta();
        }
    }

    GeneratedData out;
    Dataset& ds = out.dataset;
    ds.schedule = cfg.schedule;
    for (Eigen::Index p = 0; p < P; ++p) ds.covariate_names.push_back("z" + std::to_string(p + 1));

    for (std::size_t i = 0; i < N; ++i) {
        Eigen::VectorXd z(P);
        for (Eigen::Index p = 0; p < P; ++p) {
            if (cfg.covariates.kind == CovariateGenerator::Kind::bernoulli)
                z[p] = uniform01(rng) < cfg.covariates.p ? 1.0 : 0.0;
            else
                z[p] = cfg.covariates.table(static_cast<Eigen::Index>(i) % cfg.covariates.table.rows(), p);
        }
        double rel = P > 0 ? std::exp(z.dot(cfg.beta_true)) : 1.0;
        double e = -std::log(uniform01(rng));
        double X = prevalent[i] ? -1.0 : cfg.event.event_time(e, rel);

        SubjectPanel s;
        s.id = "s" + std::to_string(i + 1);
        s.baseline = z;
        for (std::size_t k = 1; k <= cfg.n_visits; ++k) {
            double t = static_cast<double>(k) * cfg.visit_spacing;
            double u_missing = uniform01(rng);
            double u_report = uniform01(rng);
            if (u_missing < cfg.missing_prob) continue;
            double p_pos = X <= t ? em.phi1() : 1.0 - em.phi0();
            int r = u_report < p_pos ? 1 : 0;
            s.visits.push_back({t, r});
            if (r == 1 && cfg.schedule == Schedule::adaptive) break;
        }
        if (s.visits.empty()) {
            ++out.dropped_subjects;
            continue;
        }
        out.event_times.push_back(X);
        out.prevalent.push_back(prevalent[i]);
        ds.subjects.push_back(std::move(s));
    }
    if (ds.subjects.empty()) throw SimulationError("every simulated subject has all visits missing");
    ds.grid = build_grid(ds.subjects, std::nullopt).grid;
    return out;
}

Dataset generate_dataset(const ScenarioConfig& cfg, std::uint64_t replicate) {
    return generate_replicate(cfg, replicate).dataset;
}

ScenarioSummary summarize(const std::string& scenario, const AnalysisArm& arm, double beta_true,
                          const std::vector<ReplicateOutcome>& outcomes) {
    ScenarioSummary s;
    s.scenario = scenario;
    s.arm = arm.name;
    s.analysis_model = arm.model;
    s.beta_true = beta_true;
    s.n_replicates = outcomes.size();
    double sum = 0.0, sum_se = 0.0, sum_sq_err = 0.0, covered = 0.0;
    for (const auto& o : outcomes) {
        if (!o.converged) continue;
        ++s.n_converged;
        sum += o.estimate;
        sum_se += o.se;
        sum_sq_err += (o.estimate - beta_true) * (o.estimate - beta_true);
        constexpr double z975 = 1.959963984540054;
        if (std::abs(o.estimate - beta_true) <= z975 * o.se) covered += 1.0;
    }
    const double n = static_cast<double>(s.n_converged);
    if (s.n_converged == 0) return s;
    s.mean_estimate = sum / n;
    double ss = 0.0;
    for (const auto& o : outcomes)
        if (o.converged) ss += (o.estimate - s.mean_estimate) * (o.estimate - s.mean_estimate);
    s.empirical_sd = s.n_converged > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    s.mean_estimated_se = sum_se / n;
    s.rmse = std::sqrt(sum_sq_err / n);
    double denom = beta_true != 0.0 ? std::abs(beta_true) : 1.0;
    s.mean_bias_pct = 100.0 * (s.mean_estimate - beta_true) / denom;
    s.bias_pct_mcse = 100.0 * s.empirical_sd / std::sqrt(n) / denom;
    double c = covered / n;
    s.coverage_pct = 100.0 * c;
    s.coverage_mcse = 100.0 * std::sqrt(c * (1.0 - c) / n);
    return s;
}

ScenarioRun run_scenario(const ScenarioConfig& cfg, const std::vector<AnalysisArm>& arms, unsigned threads,
                         const FitOptions& fit_options) {
    cfg.check();
    if (arms.empty()) throw SimulationError("no analysis arm defined");
    const std::size_t R = cfg.n_replicates;
    ScenarioRun run;
    run.outcomes.assign(arms.size(), std::vector<ReplicateOutcome>(R));
    const ModelKind model = cfg.P() > 0 ? ModelKind::cov_fixed : ModelKind::onesample;
    FitOptions opts = fit_options;
    opts.threads = 1;

    parallel_for(R, threads, [&](std::size_t r) {
        Dataset ds = generate_dataset(cfg, r);
        for (std::size_t a = 0; a < arms.size(); ++a) {
            auto& o = run.outcomes[a][r];
            try {
                FitResult f = fit(ds, arms[a].model, model, opts);
                o.loglik = f.loglik;
                if (cfg.P() > 0) {
                    o.estimate = f.beta_hat[0];
                    o.se = f.beta_se(0);
                }
                o.converged = f.converged && (cfg.P() == 0 || (f.has_covariance && std::isfinite(o.se)));
                if (!o.converged) o.error = f.has_covariance ? f.message : "no covariance";
            } catch (const std::exception& e) {
                o.error = e.what();
            }
        }
    });

    const double beta0 = cfg.P() > 0 ? cfg.beta_true[0] : 0.0;
    for (std::size_t a = 0; a < arms.size(); ++a) {
        run.summaries.push_back(summarize(cfg.name, arms[a], beta0, run.outcomes[a]));
        if (run.summaries.back().n_converged == 0) {
            std::string why;
            for (const auto& o : run.outcomes[a])
                if (!o.error.empty()) {
                    why = o.error;
                    break;
                }
            throw SimulationError("scenario " + cfg.name + ", arm " + arms[a].name +
                                  ": no replicate converged" + (why.empty() ? "" : " (" + why + ")"));
        }
    }
    return run;
}

const std::vector<PublishedRow>& published_rows(Table which) {
    static const std::vector<PublishedRow> t1 = {
        {0.75, 1.00, 0.90, 1.0, true, 0.3, 0.17, 0.17, 96.8},    {0.75, 1.00, 0.90, 1.0, false, 0.1, 0.17, 0.17, 97.0},
        {1.00, 0.75, 0.90, 1.0, true, -6.7, 0.82, 0.82, 93.8},   {1.00, 0.75, 0.90, 1.0, false, -90.2, 0.07, 0.90, 0.0},
        {0.61, 0.995, 0.90, 1.0, true, 1.4, 0.21, 0.22, 94.9},   {0.61, 0.995, 0.90, 1.0, false, -16.4, 0.17, 0.23, 82.9},
        {0.75, 1.00, 0.50, 1.0, true, 0.1, 0.09, 0.09, 95.1},    {0.75, 1.00, 0.50, 1.0, false, -1.9, 0.09, 0.09, 93.5},
        {1.00, 0.75, 0.50, 1.0, true, 0.2, 0.19, 0.19, 94.4},    {1.00, 0.75, 0.50, 1.0, false, -59.2, 0.07, 0.60, 0.0},
        {0.61, 0.995, 0.50, 1.0, true, 0.5, 0.09, 0.09, 94.2},   {0.61, 0.995, 0.50, 1.0, false, -6.9, 0.08, 0.11, 86.7},
    };
    static const std::vector<PublishedRow> t2 = {
        {0.61, 0.995, 0.90, 0.99, true, 2.6, 0.22, 0.23, 95.0},  {0.61, 0.995, 0.90, 0.99, false, -4.5, 0.20, 0.21, 94.1},
        {0.61, 0.995, 0.90, 0.96, true, 1.2, 0.24, 0.24, 95.8},  {0.61, 0.995, 0.90, 0.96, false, -22.9, 0.17, 0.29, 72.7},
        {0.61, 0.995, 0.90, 0.93, true, 0.1, 0.25, 0.25, 95.2},  {0.61, 0.995, 0.90, 0.93, false, -36.4, 0.15, 0.40, 36.3},
        {0.61, 0.995, 0.50, 0.99, true, 0.0, 0.09, 0.09, 95.2},  {0.61, 0.995, 0.50, 0.99, false, -1.5, 0.09, 0.09, 94.1},
        {0.61, 0.995, 0.50, 0.96, true, 0.1, 0.10, 0.10, 94.2},  {0.61, 0.995, 0.50, 0.96, false, -5.7, 0.09, 0.11, 89.2},
        {0.61, 0.995, 0.50, 0.93, true, 0.6, 0.10, 0.10, 94.1},  {0.61, 0.995, 0.50, 0.93, false, -9.4, 0.09, 0.13, 80.9},
    };
    return which == Table::table1 ? t1 : t2;
}

ScenarioConfig table_scenario(Table which, double phi1, double phi0, double s_end, double eta, std::size_t replicates,
                              std::uint64_t seed) {
    ScenarioConfig c;
    std::ostringstream name;
    name << to_string(which) << "_phi1=" << phi1 << "_phi0=" << phi0 << "_send=" << s_end;
    if (which == Table::table2) name << "_eta=" << eta;
    c.name = name.str();
    c.n_subjects = 1000;
    c.n_visits = 8;
    c.visit_spacing = 1.0;
    c.missing_prob = 0.3;
    c.event = EventDistribution::exponential_with_survival(s_end, c.horizon());
    c.beta_true = Eigen::VectorXd::Constant(1, 1.0);
    c.covariates.p = 0.5;
    c.truth = ErrorModel(phi1, phi0, eta);
    c.n_replicates = replicates;
    c.seed = seed;
    return c;
}

TableReport reproduce_tables(Table which, std::size_t replicates, std::uint64_t seed, unsigned threads) {
    if (replicates < 1) throw SimulationError("replicate count must be >= 1");
    TableReport report;
    report.which = which;
    report.replicates = replicates;
    const auto& rows = published_rows(which);
    // Rows come in adjusted/unadjusted pairs over the same scenario.
    for (std::size_t k = 0; k + 1 < rows.size(); k += 2) {
        const auto& r = rows[k];
        ScenarioConfig cfg = table_scenario(which, r.phi1, r.phi0, r.s_end, r.eta, replicates, seed + k / 2);
        Unadjusted what = which == Table::table1 ? Unadjusted::reports : Unadjusted::entry;
        auto run = run_scenario(cfg, {adjusted_arm(cfg), unadjusted_arm(cfg, what)}, threads);
        report.rows.push_back({rows[k], run.summaries[0]});
        report.rows.push_back({rows[k + 1], run.summaries[1]});
    }
    return report;
}

void write_report_text(std::ostream& out, const TableReport& rep) {
    out << "Reproduction of " << to_string(rep.which) << " (" << rep.replicates << " replicates x 1000 subjects)\n";
    out << "bias %, sd and coverage % shown as published | reproduced +- Monte Carlo s.e.\n\n";
    out << std::fixed;
    for (const auto& row : rep.rows) {
        const auto& p = row.published;
        const auto& s = row.reproduced;
        out << std::setprecision(3) << "phi1=" << p.phi1 << " phi0=" << p.phi0 << " S_end=" << std::setprecision(2)
            << p.s_end;
        if (rep.which == Table::table2) out << " eta=" << p.eta;
        out << (p.adjusted ? "  adjusted  " : "  unadjusted") << std::setprecision(1) << "  bias " << std::setw(6)
            << p.bias_pct << " | " << std::setw(6) << s.mean_bias_pct << " +- " << s.bias_pct_mcse
            << std::setprecision(2) << "  sd " << p.std_err << " | " << s.empirical_sd << " (se " << s.mean_estimated_se
            << ")" << "  rmse " << p.rmse << " | " << s.rmse << std::setprecision(1) << "  coverage " << std::setw(5)
            << p.coverage_pct << " | " << std::setw(5) << s.coverage_pct << " +- " << s.coverage_mcse << "  ["
            << s.n_converged << "/" << s.n_replicates << " converged]\n";
    }
}

void write_report_csv(std::ostream& out, const TableReport& rep) {
    out << "table,phi1,phi0,s_end,eta,analysis,published_bias_pct,bias_pct,bias_pct_mcse,published_std_err,"
           "empirical_sd,mean_estimated_se,published_rmse,rmse,published_coverage_pct,coverage_pct,coverage_mcse,"
           "n_converged,n_replicates\n";
    out << std::setprecision(10);
    for (const auto& row : rep.rows) {
        const auto& p = row.published;
        const auto& s = row.reproduced;
        out << to_string(rep.which) << ',' << p.phi1 << ',' << p.phi0 << ',' << p.s_end << ',' << p.eta << ','
            << (p.adjusted ? "adjusted" : "unadjusted") << ',' << p.bias_pct << ',' << s.mean_bias_pct << ','
            << s.bias_pct_mcse << ',' << p.std_err << ',' << s.empirical_sd << ',' << s.mean_estimated_se << ','
            << p.rmse << ',' << s.rmse << ',' << p.coverage_pct << ',' << s.coverage_pct << ',' << s.coverage_mcse << ','
            << s.n_converged << ',' << s.n_replicates << '\n';
    }
}

namespace {

const char* kSummaryHeader =
    "scenario,arm,analysis_phi1,analysis_phi0,analysis_eta,beta_true,n_replicates,n_converged,mean_estimate,"
    "mean_bias_pct,bias_pct_mcse,empirical_sd,mean_estimated_se,rmse,coverage_pct,coverage_mcse";

}  // namespace

void write_summary_csv(std::ostream& out, const std::vector<ScenarioSummary>& rows) {
    out << kSummaryHeader << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& s : rows) {
        out << s.scenario << ',' << s.arm << ',' << s.analysis_model.phi1() << ',' << s.analysis_model.phi0() << ','
            << s.analysis_model.eta() << ',' << s.beta_true << ',' << s.n_replicates << ',' << s.n_converged << ','
            << s.mean_estimate << ',' << s.mean_bias_pct << ',' << s.bias_pct_mcse << ',' << s.empirical_sd << ','
            << s.mean_estimated_se << ',' << s.rmse << ',' << s.coverage_pct << ',' << s.coverage_mcse << '\n';
    }
}

std::vector<ScenarioSummary> read_summary_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line).size() != 16 || line.rfind("scenario,arm,", 0) != 0)
        throw SimulationError("summary CSV: unexpected header");
    std::vector<ScenarioSummary> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 16) throw SimulationError("summary CSV line " + std::to_string(lineno) + ": expected 16 fields");
        try {
            ScenarioSummary s;
            s.scenario = f[0];
            s.arm = f[1];
            s.analysis_model = ErrorModel(std::stod(f[2]), std::stod(f[3]), std::stod(f[4]));
            s.beta_true = std::stod(f[5]);
            s.n_replicates = std::stoul(f[6]);
            s.n_converged = std::stoul(f[7]);
            s.mean_estimate = std::stod(f[8]);
            s.mean_bias_pct = std::stod(f[9]);
            s.bias_pct_mcse = std::stod(f[10]);
            s.empirical_sd = std::stod(f[11]);
            s.mean_estimated_se = std::stod(f[12]);
            s.rmse = std::stod(f[13]);
            s.coverage_pct = std::stod(f[14]);
            s.coverage_mcse = std::stod(f[15]);
            rows.push_back(std::move(s));
        } catch (const std::logic_error& e) {
            throw SimulationError("summary CSV line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
    return out;
}

}  // namespace

ScenarioFile parse_scenario_config(std::istream& in, const std::string& src) {
    std::map<std::string, std::pair<std::string, std::size_t>> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw SimulationError(src + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (!kv.emplace(key, std::make_pair(trim(line.substr(eq + 1)), lineno)).second)
            throw SimulationError(src + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }

    static const char* known[] = {"name",     "n_subjects",      "n_visits", "visit_spacing", "missing_prob",
                                  "event_dist", "rate",          "shape",    "scale",         "s_end",
                                  "beta",     "covariate",       "covariate_p", "covariate_table", "phi1",
                                  "phi0",     "eta",             "prevalent", "schedule",     "n_replicates",
                                  "seed",     "arms",            "unadjusted"};
    for (const auto& [key, val] : kv)
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
            throw SimulationError(src + ":" + std::to_string(val.second) + ": unknown key '" + key + "'");

    auto where = [&](const std::string& key) { return src + ": key '" + key + "'"; };
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second.first;
    };
    auto num = [&](const std::string& key, double fallback) {
        auto v = get(key);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            double d = std::stod(*v, &used);
            if (used != v->size()) throw std::invalid_argument(*v);
            return d;
        } catch (const std::exception&) {
            throw SimulationError(where(key) + ": '" + *v + "' is not a number");
        }
    };
    auto count = [&](const std::string& key, std::size_t fallback) {
        double d = num(key, static_cast<double>(fallback));
        if (d < 0.0 || d != std::floor(d)) throw SimulationError(where(key) + ": must be a non-negative integer");
        return static_cast<std::size_t>(d);
    };

    ScenarioFile file;
    ScenarioConfig& c = file.config;
    c.name = get("name").value_or("scenario");
    c.n_subjects = count("n_subjects", c.n_subjects);
    c.n_visits = count("n_visits", c.n_visits);
    c.visit_spacing = num("visit_spacing", c.visit_spacing);
    c.missing_prob = num("missing_prob", c.missing_prob);
    c.n_replicates = count("n_replicates", c.n_replicates);
    if (auto s = get("seed")) {
        try {
            c.seed = std::stoull(*s);
        } catch (const std::exception&) {
            throw SimulationError(where("seed") + ": '" + *s + "' is not an unsigned integer");
        }
    }

    std::string dist = get("event_dist").value_or("exponential");
    bool has_rate = get("rate").has_value(), has_send = get("s_end").has_value(), has_scale = get("scale").has_value();
    if (dist == "exponential") {
        if (has_rate == has_send) throw SimulationError(src + ": exponential events need exactly one of 'rate' or 's_end'");
        c.event = has_rate ? EventDistribution::exponential(num("rate", 0.0))
                           : EventDistribution::exponential_with_survival(num("s_end", 0.5), c.horizon());
    } else if (dist == "weibull") {
        if (!get("shape")) throw SimulationError(where("shape") + ": required for weibull events");
        if (has_scale == has_send) throw SimulationError(src + ": weibull events need exactly one of 'scale' or 's_end'");
        double shape = num("shape", 1.0);
        c.event = has_scale ? EventDistribution::weibull(shape, num("scale", 1.0))
                            : EventDistribution::weibull_with_survival(shape, num("s_end", 0.5), c.horizon());
    } else {
        throw SimulationError(where("event_dist") + ": expected exponential or weibull, got '" + dist + "'");
    }

    if (auto b = get("beta")) {
        auto parts = split_list(*b);
        c.beta_true.resize(static_cast<Eigen::Index>(parts.size()));
        for (std::size_t k = 0; k < parts.size(); ++k) {
            try {
                c.beta_true[static_cast<Eigen::Index>(k)] = std::stod(parts[k]);
            } catch (const std::exception&) {
                throw SimulationError(where("beta") + ": '" + parts[k] + "' is not a number");
            }
        }
        if (parts.size() == 1 && parts[0].empty()) c.beta_true.resize(0);
    }

    std::string cov = get("covariate").value_or("bernoulli");
    if (cov == "bernoulli") {
        c.covariates.kind = CovariateGenerator::Kind::bernoulli;
        c.covariates.p = num("covariate_p", 0.5);
    } else if (cov == "table") {
        auto path = get("covariate_table");
        if (!path) throw SimulationError(where("covariate_table") + ": required when covariate = table");
        std::ifstream tin(*path);
        if (!tin) throw SimulationError(where("covariate_table") + ": cannot open " + *path);
        std::string row;
        std::vector<std::vector<double>> values;
        bool header = true;
        while (std::getline(tin, row)) {
            if (trim(row).empty()) continue;
            if (header) {
                header = false;
                continue;
            }
            std::vector<double> r;
            for (const auto& f : split_csv_line(row)) r.push_back(std::stod(f));
            values.push_back(std::move(r));
        }
        if (values.empty()) throw SimulationError(where("covariate_table") + ": no rows");
        c.covariates.kind = CovariateGenerator::Kind::table;
        c.covariates.table.resize(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values[0].size()));
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i].size() != values[0].size()) throw SimulationError(where("covariate_table") + ": ragged rows");
            for (std::size_t p = 0; p < values[i].size(); ++p)
                c.covariates.table(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = values[i][p];
        }
    } else {
        throw SimulationError(where("covariate") + ": expected bernoulli or table, got '" + cov + "'");
    }

    try {
        c.truth = ErrorModel(num("phi1", 0.61), num("phi0", 0.995), num("eta", 1.0));
    } catch (const std::invalid_argument& e) {
        throw SimulationError(src + ": keys 'phi1'/'phi0'/'eta': " + e.what());
    }

    std::string prev = get("prevalent").value_or("exact");
    if (prev == "exact") c.prevalent = PrevalentSampling::exact;
    else if (prev == "bernoulli") c.prevalent = PrevalentSampling::bernoulli;
    else throw SimulationError(where("prevalent") + ": expected exact or bernoulli");

    try {
        c.schedule = schedule_from_string(get("schedule").value_or("adaptive"));
    } catch (const PanelError& e) {
        throw SimulationError(where("schedule") + ": " + e.what());
    }

    try {
        c.check();
    } catch (const SimulationError& e) {
        throw SimulationError(src + ": " + e.what());
    }

    std::string which = get("unadjusted").value_or("both");
    Unadjusted what = Unadjusted::both;
    if (which == "reports") what = Unadjusted::reports;
    else if (which == "entry") what = Unadjusted::entry;
    else if (which != "both") throw SimulationError(where("unadjusted") + ": expected reports, entry or both");

    for (const auto& arm : split_list(get("arms").value_or("adjusted,unadjusted"))) {
        if (arm == "adjusted") file.arms.push_back(adjusted_arm(c));
        else if (arm == "unadjusted") file.arms.push_back(unadjusted_arm(c, what));
        else throw SimulationError(where("arms") + ": unknown arm '" + arm + "'");
    }
    if (file.arms.empty()) throw SimulationError(where("arms") + ": no arm given");
    return file;
}

ScenarioFile read_scenario_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SimulationError("cannot open scenario config " + path);
    return parse_scenario_config(in, path);
}

std::string to_string(Table t) { return t == Table::table1 ? "table1" : "table2"; }

Table table_from_string(const std::string& s) {
    if (s == "table1") return Table::table1;
    if (s == "table2") return Table::table2;
    throw SimulationError("unknown table '" + s + "' (expected table1 or table2)");
}

}  // namespace srsurv
