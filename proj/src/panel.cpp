#include "srsurv/panel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace srsurv {

std::size_t SubjectPanel::n_covariates() const {
    if (baseline.size() > 0) return static_cast<std::size_t>(baseline.size());
    if (!path.empty()) return static_cast<std::size_t>(path.front().value.size());
    return 0;
}

Eigen::VectorXd SubjectPanel::covariate_at(double t) const {
    const CovariateRecord* current = nullptr;
    for (const auto& rec : path) {
        if (rec.time <= t) current = &rec;
        else break;
    }
    if (current) return current->value;
    if (baseline.size() > 0) return baseline;
    if (!path.empty()) return path.front().value;
    return Eigen::VectorXd();
}

Eigen::VectorXd SubjectPanel::fixed_covariates() const {
    if (baseline.size() > 0) return baseline;
    if (!path.empty()) return path.front().value;
    return Eigen::VectorXd();
}

StudyGrid::StudyGrid(std::vector<double> taus) : taus_(std::move(taus)) {
    if (taus_.empty()) throw PanelError("study grid needs at least one visit time");
    for (std::size_t j = 0; j < taus_.size(); ++j) {
        if (!(taus_[j] > 0.0) || !std::isfinite(taus_[j]))
            throw PanelError("study grid times must be positive and finite");
        if (j > 0 && !(taus_[j] > taus_[j - 1]))
            throw PanelError("study grid times must be strictly increasing");
    }
}

double StudyGrid::tau(std::size_t j) const {
    if (j == 0) return 0.0;
    if (j > taus_.size()) return std::numeric_limits<double>::infinity();
    return taus_[j - 1];
}

std::optional<std::size_t> StudyGrid::index_of(double t) const {
    auto it = std::lower_bound(taus_.begin(), taus_.end(), t);
    if (it == taus_.end() || *it != t) return std::nullopt;
    return static_cast<std::size_t>(it - taus_.begin()) + 1;
}

ErrorModel::ErrorModel(double phi1, double phi0, double eta) : phi1_(phi1), phi0_(phi0), eta_(eta) {
    auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
    if (!in_unit(phi1)) throw std::invalid_argument("phi1 must lie in (0,1]");
    if (!in_unit(phi0)) throw std::invalid_argument("phi0 must lie in (0,1]");
    if (!in_unit(eta)) throw std::invalid_argument("eta must lie in (0,1]");
    if (!(phi1 > 1.0 - phi0))
        throw std::invalid_argument("uninformative error model: need phi1 > 1 - phi0");
}

bool Dataset::time_varying() const {
    return std::any_of(subjects.begin(), subjects.end(), [](const SubjectPanel& s) { return s.time_varying(); });
}

Eigen::MatrixXd Dataset::fixed_design() const {
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(N()), static_cast<Eigen::Index>(P()));
    for (std::size_t i = 0; i < N(); ++i) {
        if (P() == 0) break;
        Eigen::VectorXd z = subjects[i].fixed_covariates();
        if (static_cast<std::size_t>(z.size()) != P())
            throw PanelError("subject " + subjects[i].id + " has covariate length " + std::to_string(z.size()) +
                             ", expected " + std::to_string(P()));
        Z.row(static_cast<Eigen::Index>(i)) = z.transpose();
    }
    return Z;
}

namespace {

double round_to(double t, double g) { return std::round(t / g) * g; }

// Stable-sorts by time and collapses equal times, keeping the last entry of
// each run (the later record).
template <class T, class TimeOf>
std::size_t merge_keep_later(std::vector<T>& items, TimeOf time_of) {
    std::stable_sort(items.begin(), items.end(),
                     [&](const T& a, const T& b) { return time_of(a) < time_of(b); });
    std::vector<T> out;
    out.reserve(items.size());
    std::size_t merged = 0;
    for (auto& item : items) {
        if (!out.empty() && time_of(out.back()) == time_of(item)) {
            out.back() = std::move(item);
            ++merged;
        } else {
            out.push_back(std::move(item));
        }
    }
    items = std::move(out);
    return merged;
}

}  // namespace

GridBuild build_grid(std::vector<SubjectPanel>& subjects, std::optional<double> rounding) {
    if (rounding && !(*rounding > 0.0)) throw PanelError("rounding granularity must be positive");
    GridBuild out;
    std::set<double> times;
    for (auto& s : subjects) {
        if (rounding) {
            // Sort by the original times first so that "later" refers to the
            // later original visit.
            std::stable_sort(s.visits.begin(), s.visits.end(),
                             [](const Visit& a, const Visit& b) { return a.time < b.time; });
            std::stable_sort(s.path.begin(), s.path.end(),
                             [](const CovariateRecord& a, const CovariateRecord& b) { return a.time < b.time; });
            for (auto& v : s.visits) v.time = round_to(v.time, *rounding);
            for (auto& r : s.path) r.time = round_to(r.time, *rounding);
            out.merged_visits += merge_keep_later(s.visits, [](const Visit& v) { return v.time; });
            merge_keep_later(s.path, [](const CovariateRecord& r) { return r.time; });
        }
        for (const auto& v : s.visits) times.insert(v.time);
    }
    if (times.empty()) throw PanelError("cannot build a study grid: no visits");
    std::vector<double> taus(times.begin(), times.end());
    // Non-positive times are reported by validate(); the grid holds only
    // positive ones.
    taus.erase(taus.begin(), std::upper_bound(taus.begin(), taus.end(), 0.0));
    if (taus.empty()) throw PanelError("cannot build a study grid: no positive visit times");
    out.grid = StudyGrid(std::move(taus));
    return out;
}

StudyGrid collect_grid(const std::vector<SubjectPanel>& subjects) {
    auto copy = subjects;
    return build_grid(copy, std::nullopt).grid;
}

ValidationReport validate(const Dataset& dataset) {
    ValidationReport report;
    auto add = [&](const std::string& id, const char* rule, std::string detail = {}) {
        report.push_back({id, rule, std::move(detail)});
    };
    if (dataset.subjects.empty()) add("", rules::empty_dataset);
    if (dataset.grid.J() == 0) add("", rules::empty_grid);

    const std::size_t P = dataset.P();
    for (const auto& s : dataset.subjects) {
        if (s.visits.empty()) {
            add(s.id, rules::no_visits);
            continue;
        }
        for (std::size_t k = 0; k < s.visits.size(); ++k) {
            const Visit& v = s.visits[k];
            if (!(v.time > 0.0)) add(s.id, rules::non_positive_time, "t=" + std::to_string(v.time));
            if (k > 0 && !(v.time > s.visits[k - 1].time))
                add(s.id, rules::not_increasing, "t=" + std::to_string(v.time));
            if (v.result != 0 && v.result != 1) add(s.id, rules::bad_result, "r=" + std::to_string(v.result));
            if (dataset.grid.J() > 0 && !dataset.grid.index_of(v.time))
                add(s.id, rules::off_grid, "t=" + std::to_string(v.time));
            if (dataset.schedule == Schedule::adaptive && v.result == 1 && k + 1 != s.visits.size())
                add(s.id, rules::positive_not_terminal, "t=" + std::to_string(v.time));
        }
        if (s.baseline.size() > 0 && static_cast<std::size_t>(s.baseline.size()) != P)
            add(s.id, rules::covariate_length, "baseline has " + std::to_string(s.baseline.size()));
        for (const auto& rec : s.path)
            if (static_cast<std::size_t>(rec.value.size()) != P)
                add(s.id, rules::covariate_length, "record at t=" + std::to_string(rec.time));
        if (P > 0 && s.baseline.size() == 0 && s.path.empty())
            add(s.id, rules::covariate_length, "no covariates");
    }
    return report;
}

std::string to_string(Schedule s) { return s == Schedule::adaptive ? "adaptive" : "predetermined"; }

Schedule schedule_from_string(const std::string& s) {
    if (s == "adaptive") return Schedule::adaptive;
    if (s == "predetermined") return Schedule::predetermined;
    throw PanelError("unknown schedule '" + s + "' (expected adaptive or predetermined)");
}

}  // namespace srsurv
