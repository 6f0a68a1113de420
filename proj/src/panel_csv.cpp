#include "srsurv/panel_csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

namespace srsurv {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    for (auto& f : fields) {
        auto b = f.find_first_not_of(" \t");
        auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return fields;
}

namespace {

[[noreturn]] void fail(const std::string& src, std::size_t line, const std::string& msg) {
    throw PanelError(src + ":" + std::to_string(line) + ": " + msg);
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct RawRow {
    double time;
    int result;
    std::vector<std::optional<double>> covs;
    std::size_t line;
};

struct Baseline {
    std::vector<std::string> names;
    std::unordered_map<std::string, Eigen::VectorXd> values;
};

Baseline read_baseline(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PanelError("cannot open baseline covariate file " + path);
    Baseline b;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_csv_line(line);
        if (b.names.empty() && lineno == 1) {
            if (f.empty() || f[0] != "subject_id") fail(path, lineno, "header must start with subject_id");
            b.names.assign(f.begin() + 1, f.end());
            continue;
        }
        if (f.size() != b.names.size() + 1)
            fail(path, lineno, "expected " + std::to_string(b.names.size() + 1) + " fields, got " + std::to_string(f.size()));
        Eigen::VectorXd z(static_cast<Eigen::Index>(b.names.size()));
        for (std::size_t p = 0; p < b.names.size(); ++p) {
            auto v = parse_double(f[p + 1]);
            if (!v) fail(path, lineno, "non-numeric or missing value for " + b.names[p]);
            z[static_cast<Eigen::Index>(p)] = *v;
        }
        if (!b.values.emplace(f[0], std::move(z)).second) fail(path, lineno, "duplicate subject_id " + f[0]);
    }
    if (lineno == 0) throw PanelError(path + ": empty file");
    return b;
}

}  // namespace

PanelReadResult read_panel_csv(std::istream& in, const std::string& src, const PanelReadOptions& options) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> cov_names;
    bool have_header = false;

    std::vector<std::string> order;
    std::map<std::string, std::vector<RawRow>> rows;

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_csv_line(line);
        if (!have_header) {
            if (f.size() < 3 || f[0] != "subject_id" || f[1] != "time" || f[2] != "result") {
                std::string bad;
                for (std::size_t k = 0; k < std::min<std::size_t>(3, f.size()); ++k) {
                    static const char* expected[] = {"subject_id", "time", "result"};
                    if (f[k] != expected[k]) {
                        bad = f[k];
                        break;
                    }
                }
                fail(src, lineno, "unknown column '" + bad + "'; header must begin subject_id,time,result");
            }
            cov_names.assign(f.begin() + 3, f.end());
            for (const auto& n : cov_names)
                if (n.empty()) fail(src, lineno, "empty covariate column name");
            have_header = true;
            continue;
        }
        if (f.size() != cov_names.size() + 3)
            fail(src, lineno, "expected " + std::to_string(cov_names.size() + 3) + " fields, got " + std::to_string(f.size()));
        if (f[0].empty()) fail(src, lineno, "empty subject_id");
        auto t = parse_double(f[1]);
        if (!t) fail(src, lineno, "malformed time '" + f[1] + "'");
        if (f[2] != "0" && f[2] != "1") fail(src, lineno, "non-binary result '" + f[2] + "'");
        RawRow r{*t, f[2] == "1" ? 1 : 0, {}, lineno};
        for (std::size_t p = 0; p < cov_names.size(); ++p) {
            const std::string& cell = f[p + 3];
            if (cell.empty()) {
                r.covs.emplace_back(std::nullopt);
                continue;
            }
            auto v = parse_double(cell);
            if (!v) fail(src, lineno, "malformed value '" + cell + "' for covariate " + cov_names[p]);
            r.covs.emplace_back(*v);
        }
        auto [it, inserted] = rows.try_emplace(f[0]);
        if (inserted) order.push_back(f[0]);
        it->second.push_back(std::move(r));
    }
    if (!have_header) throw PanelError(src + ": empty file (header required)");
    if (order.empty()) throw PanelError(src + ": no data rows");

    std::optional<Baseline> baseline;
    if (options.baseline_path) {
        baseline = read_baseline(*options.baseline_path);
        if (!cov_names.empty() && baseline->names != cov_names) {
            for (const auto& n : baseline->names)
                if (std::find(cov_names.begin(), cov_names.end(), n) == cov_names.end())
                    throw PanelError(*options.baseline_path + ": unknown column '" + n + "'");
            throw PanelError(*options.baseline_path + ": covariate columns must match the panel file");
        }
    }

    PanelReadResult out;
    Dataset& ds = out.dataset;
    ds.schedule = options.schedule;
    ds.covariate_names = !cov_names.empty() ? cov_names : (baseline ? baseline->names : std::vector<std::string>{});
    const std::size_t P = cov_names.size();

    for (const auto& id : order) {
        auto& subject_rows = rows[id];
        std::stable_sort(subject_rows.begin(), subject_rows.end(),
                         [](const RawRow& a, const RawRow& b) { return a.time < b.time; });
        SubjectPanel s;
        s.id = id;
        if (baseline) {
            auto b = baseline->values.find(id);
            if (b != baseline->values.end()) s.baseline = b->second;
            else if (P == 0) throw PanelError(*options.baseline_path + ": no baseline covariates for subject " + id);
        }
        std::vector<std::optional<double>> last(P);
        for (std::size_t p = 0; p < P && s.baseline.size() > 0; ++p) last[p] = s.baseline[static_cast<Eigen::Index>(p)];
        for (const auto& r : subject_rows) {
            s.visits.push_back({r.time, r.result});
            if (P == 0) continue;
            CovariateRecord rec{r.time, Eigen::VectorXd(static_cast<Eigen::Index>(P))};
            for (std::size_t p = 0; p < P; ++p) {
                if (r.covs[p]) {
                    last[p] = r.covs[p];
                } else if (last[p]) {
                    ++out.imputed_values;
                } else {
                    fail(src, r.line, "covariate " + cov_names[p] + " missing for subject " + id + " with no prior value");
                }
                rec.value[static_cast<Eigen::Index>(p)] = *last[p];
            }
            s.path.push_back(std::move(rec));
        }
        ds.subjects.push_back(std::move(s));
    }

    auto built = build_grid(ds.subjects, options.rounding);
    ds.grid = std::move(built.grid);
    out.merged_visits = built.merged_visits;
    out.report = validate(ds);
    if (options.strict && !out.report.empty()) {
        std::ostringstream msg;
        msg << src << ": dataset failed validation (" << out.report.size() << " violation(s))";
        for (std::size_t k = 0; k < std::min<std::size_t>(out.report.size(), 10); ++k) {
            const auto& v = out.report[k];
            msg << "\n  subject " << v.subject_id << ": " << v.rule;
            if (!v.detail.empty()) msg << " (" << v.detail << ")";
        }
        throw PanelError(msg.str());
    }
    return out;
}

PanelReadResult read_panel_csv(const std::string& path, const PanelReadOptions& options) {
    std::ifstream in(path);
    if (!in) throw PanelError("cannot open panel file " + path);
    return read_panel_csv(in, path, options);
}

void write_panel_csv(std::ostream& out, const Dataset& ds) {
    out << "subject_id,time,result";
    for (const auto& n : ds.covariate_names) out << ',' << n;
    out << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& s : ds.subjects) {
        for (const auto& v : s.visits) {
            out << s.id << ',' << v.time << ',' << v.result;
            if (ds.P() > 0) {
                Eigen::VectorXd z = s.covariate_at(v.time);
                for (Eigen::Index p = 0; p < z.size(); ++p) out << ',' << z[p];
            }
            out << '\n';
        }
    }
}

void write_panel_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw PanelError("cannot write " + path);
    write_panel_csv(out, ds);
}

}  // namespace srsurv
