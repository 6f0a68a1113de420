#include "srsurv/likelihood.hpp"

#include "srsurv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace srsurv {

void CompensatedSum::add(double v) {
    double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v;
    else comp += (v - t) + sum;
    sum = t;
}

double report_probability(int result, ReportRelation relation, const ErrorModel& em) {
    double positive = relation == ReportRelation::after_event_interval ? em.phi1() : 1.0 - em.phi0();
    return result == 1 ? positive : 1.0 - positive;
}

CoefficientMatrix::CoefficientMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
    spans_.resize(static_cast<std::size_t>(entries_.rows()));
    for (Eigen::Index i = 0; i < entries_.rows(); ++i) {
        Span sp;
        Eigen::Index c = 0;
        while (c < entries_.cols() && entries_(i, c) == 0.0) ++c;
        sp.first = c;
        Eigen::Index l = entries_.cols() - 1;
        while (l >= c && entries_(i, l) == 0.0) --l;
        sp.last = l;
        spans_[static_cast<std::size_t>(i)] = sp;
    }
}

double CoefficientMatrix::structural_zero_fraction() const {
    if (entries_.size() == 0) return 0.0;
    double inside = 0.0;
    for (const auto& sp : spans_) inside += static_cast<double>(std::max<Eigen::Index>(0, sp.last - sp.first + 1));
    return 1.0 - inside / static_cast<double>(entries_.size());
}

CoefficientMatrix build_c_matrix(const Dataset& ds, const ErrorModel& em) {
    const auto J = static_cast<Eigen::Index>(ds.grid.J());
    Eigen::MatrixXd C(static_cast<Eigen::Index>(ds.N()), J + 1);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.N(); ++i) {
        const auto& s = ds.subjects[i];
        idx.clear();
        for (const auto& v : s.visits) {
            auto m = ds.grid.index_of(v.time);
            if (!m) throw PanelError("subject " + s.id + ": visit time " + std::to_string(v.time) + " is not on the grid");
            idx.push_back(*m);
        }
        for (Eigen::Index j = 1; j <= J + 1; ++j) {
            double prod = 1.0;
            for (std::size_t k = 0; k < s.visits.size(); ++k) {
                auto rel = idx[k] >= static_cast<std::size_t>(j) ? ReportRelation::after_event_interval
                                                                 : ReportRelation::before_event_interval;
                prod *= report_probability(s.visits[k].result, rel, em);
            }
            C(static_cast<Eigen::Index>(i), j - 1) = prod;
        }
    }
    return CoefficientMatrix(std::move(C));
}

Eigen::MatrixXd transform_matrix(std::size_t J) {
    if (J < 1) throw LikelihoodError("transform_matrix needs J >= 1");
    const auto n = static_cast<Eigen::Index>(J + 1);
    Eigen::MatrixXd T = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index j = 0; j + 1 < n; ++j) T(j, j + 1) = -1.0;
    return T;
}

CoefficientMatrix to_d_matrix(const CoefficientMatrix& C) {
    Eigen::MatrixXd D = C.entries();
    for (Eigen::Index j = D.cols() - 1; j >= 1; --j) D.col(j) -= C.entries().col(j - 1);
    return CoefficientMatrix(std::move(D));
}

void SurvivalParams::check(bool strict) const {
    if (s.size() < 2) throw LikelihoodError("survival vector needs J+1 >= 2 entries");
    if (s[0] != 1.0) throw LikelihoodError("S_1 must equal 1");
    for (Eigen::Index j = 1; j < s.size(); ++j) {
        bool ok = strict ? (s[j] < s[j - 1] && s[j] > 0.0) : (s[j] <= s[j - 1] && s[j] >= 0.0);
        if (!ok || !std::isfinite(s[j]))
            throw LikelihoodError("survival values must be " + std::string(strict ? "strictly " : "") +
                                  "decreasing within [0,1] (index " + std::to_string(j) + ")");
    }
}

Eigen::VectorXd SurvivalParams::theta() const {
    Eigen::VectorXd th(s.size());
    for (Eigen::Index j = 0; j + 1 < s.size(); ++j) th[j] = s[j] - s[j + 1];
    th[s.size() - 1] = s[s.size() - 1];
    return th;
}

void HazardIncrements::check() const {
    for (Eigen::Index j = 0; j < lambdas.size(); ++j)
        if (!(lambdas[j] >= 0.0) || !std::isfinite(lambdas[j]))
            throw LikelihoodError("hazard increment " + std::to_string(j) + " must be finite and non-negative");
}

SurvivalParams HazardIncrements::survival() const {
    check();
    SurvivalParams sp;
    sp.s.resize(lambdas.size() + 1);
    sp.s[0] = 1.0;
    double H = 0.0;
    for (Eigen::Index j = 0; j < lambdas.size(); ++j) {
        H += lambdas[j];
        sp.s[j + 1] = std::exp(-H);
    }
    return sp;
}

CovariatePaths build_covariate_paths(const Dataset& ds) {
    CovariatePaths paths;
    paths.reserve(ds.N());
    const auto J = static_cast<Eigen::Index>(ds.grid.J());
    const auto P = static_cast<Eigen::Index>(ds.P());
    for (const auto& s : ds.subjects) {
        Eigen::MatrixXd m(J, P);
        for (Eigen::Index j = 0; j < J; ++j) {
            if (P == 0) break;
            Eigen::VectorXd z = s.covariate_at(ds.grid.tau(static_cast<std::size_t>(j)));
            if (z.size() != P) throw PanelError("subject " + s.id + ": covariate path length mismatch");
            m.row(j) = z.transpose();
        }
        paths.push_back(std::move(m));
    }
    return paths;
}

namespace {

double clamped_exp(double lin, std::size_t* clamped = nullptr) {
    if (lin > kLinearPredictorBound || lin < -kLinearPredictorBound) {
        if (clamped) ++*clamped;
        lin = std::clamp(lin, -kLinearPredictorBound, kLinearPredictorBound);
    }
    return std::exp(lin);
}

// Row likelihood through theta = T_r S with C recovered as cumulative sums
// of D. All terms are non-negative here, unlike the D form.
double row_likelihood_theta(const CoefficientMatrix& D, Eigen::Index i, const Eigen::Ref<const Eigen::RowVectorXd>& S,
                            double eta) {
    const Eigen::Index n = D.cols();
    double c = 0.0;
    double total = 0.0;
    double c0 = D(i, 0);
    for (Eigen::Index j = 0; j < n; ++j) {
        c += D(i, j);
        double th = j + 1 < n ? S[j] - S[j + 1] : S[j];
        total += c * th;
    }
    return eta * total + (1.0 - eta) * c0;
}

double checked_sum_log(const CoefficientMatrix& D, const Eigen::MatrixXd& S, double eta) {
    Eigen::VectorXd L = subject_likelihoods(D, S, eta);
    CompensatedSum acc;
    for (Eigen::Index i = 0; i < L.size(); ++i) {
        if (!(L[i] > 0.0))
            throw LikelihoodError("non-positive likelihood for subject row " + std::to_string(i) +
                                  ": data impossible under the error model");
        acc.add(std::log(L[i]));
    }
    return acc.value();
}

void check_dims(const CoefficientMatrix& D, const SurvivalParams& s) {
    if (D.cols() != s.s.size())
        throw LikelihoodError("dimension mismatch: D has " + std::to_string(D.cols()) + " columns, S has " +
                              std::to_string(s.s.size()) + " entries");
    s.check();
}

Eigen::MatrixXd powered_survival(const SurvivalParams& s, const RegressionParams& beta, const Eigen::MatrixXd& Z) {
    if (Z.cols() != beta.beta.size()) throw LikelihoodError("covariate matrix and beta have different lengths");
    Eigen::MatrixXd S(Z.rows(), s.s.size());
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        double e = beta.beta.size() == 0 ? 1.0 : clamped_exp(Z.row(i).dot(beta.beta));
        for (Eigen::Index j = 0; j < s.s.size(); ++j) S(i, j) = e == 1.0 ? s.s[j] : std::pow(s.s[j], e);
    }
    return S;
}

}  // namespace

Eigen::VectorXd subject_likelihoods(const CoefficientMatrix& D, const Eigen::MatrixXd& S, double eta) {
    if (S.rows() != D.rows() || S.cols() != D.cols()) throw LikelihoodError("survival matrix shape mismatch");
    Eigen::VectorXd L(D.rows());
    for (Eigen::Index i = 0; i < D.rows(); ++i) {
        const auto& sp = D.span(i);
        double total = 0.0;
        double magnitude = 0.0;
        for (Eigen::Index j = std::max<Eigen::Index>(sp.first, 0); j <= sp.last; ++j) {
            double term = D(i, j) * S(i, j) * (j == 0 ? 1.0 : eta);
            total += term;
            magnitude += std::abs(term);
        }
        if (!(total > 1e-10 * magnitude)) total = row_likelihood_theta(D, i, S.row(i), eta);
        L[i] = total;
    }
    return L;
}

double loglik_onesample(const CoefficientMatrix& D, const SurvivalParams& s) {
    check_dims(D, s);
    Eigen::MatrixXd S = s.s.transpose().replicate(D.rows(), 1);
    return checked_sum_log(D, S, 1.0);
}

double loglik_cov(const CoefficientMatrix& D, const SurvivalParams& s, const RegressionParams& beta,
                  const Eigen::MatrixXd& Z) {
    return loglik_entry_misclass(D, s, beta, Z, 1.0);
}

double loglik_entry_misclass(const CoefficientMatrix& D, const SurvivalParams& s, const RegressionParams& beta,
                             const Eigen::MatrixXd& Z, double eta) {
    check_dims(D, s);
    if (!(eta > 0.0 && eta <= 1.0)) throw LikelihoodError("eta must lie in (0,1]");
    if (Z.rows() != D.rows()) throw LikelihoodError("covariate matrix row count differs from D");
    return checked_sum_log(D, powered_survival(s, beta, Z), eta);
}

double loglik_timevarying(const CoefficientMatrix& D, const HazardIncrements& lambdas, const RegressionParams& beta,
                          const CovariatePaths& Zt, double eta) {
    lambdas.check();
    if (!(eta > 0.0 && eta <= 1.0)) throw LikelihoodError("eta must lie in (0,1]");
    const Eigen::Index J = lambdas.lambdas.size();
    if (D.cols() != J + 1) throw LikelihoodError("D column count must equal J+1");
    if (static_cast<Eigen::Index>(Zt.size()) != D.rows()) throw LikelihoodError("one covariate path per subject required");
    Eigen::MatrixXd S(D.rows(), J + 1);
    for (Eigen::Index i = 0; i < D.rows(); ++i) {
        const auto& z = Zt[static_cast<std::size_t>(i)];
        if (z.rows() < J || z.cols() != beta.beta.size())
            throw LikelihoodError("covariate path " + std::to_string(i) + " has the wrong shape");
        double H = 0.0;
        S(i, 0) = 1.0;
        for (Eigen::Index j = 0; j < J; ++j) {
            double e = beta.beta.size() == 0 ? 1.0 : clamped_exp(z.row(j).dot(beta.beta));
            H += lambdas.lambdas[j] * e;
            S(i, j + 1) = std::exp(-H);
        }
    }
    return checked_sum_log(D, S, eta);
}

Eigen::VectorXd WorkingParams::flat() const {
    Eigen::VectorXd x(gamma.size() + beta.size());
    x << gamma, beta;
    return x;
}

WorkingParams WorkingParams::from_flat(const Eigen::VectorXd& x, std::size_t J, std::size_t P) {
    if (static_cast<std::size_t>(x.size()) != J + P) throw LikelihoodError("working parameter vector has wrong length");
    WorkingParams w;
    w.gamma = x.head(static_cast<Eigen::Index>(J));
    w.beta = x.tail(static_cast<Eigen::Index>(P));
    return w;
}

HazardIncrements WorkingParams::hazards() const { return {gamma.array().exp().matrix()}; }

SurvivalParams WorkingParams::survival() const { return hazards().survival(); }

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::onesample: return "onesample";
        case ModelKind::cov_fixed: return "cov_fixed";
        case ModelKind::cov_timevarying: return "cov_timevarying";
    }
    return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "onesample") return ModelKind::onesample;
    if (s == "cov_fixed") return ModelKind::cov_fixed;
    if (s == "cov_timevarying") return ModelKind::cov_timevarying;
    throw std::invalid_argument("unknown model '" + s + "'");
}

Objective::Objective(const Dataset& ds, const ErrorModel& em, ModelKind kind, unsigned threads)
    : error_model_(em), kind_(kind), J_(ds.grid.J()), threads_(std::max(1u, threads)) {
    if (J_ < 1) throw LikelihoodError("study grid is empty");
    if (ds.N() == 0) throw LikelihoodError("dataset has no subjects");
    P_ = kind == ModelKind::onesample ? 0 : ds.P();
    if (kind == ModelKind::cov_timevarying && !ds.time_varying())
        throw LikelihoodError("time-varying model requested but the dataset has no covariate paths");
    C_ = build_c_matrix(ds, em);
    D_ = to_d_matrix(C_);

    path_offset_.assign(ds.N() + 1, 0);
    std::vector<Eigen::Index> counts(ds.N());
    for (std::size_t i = 0; i < ds.N(); ++i) {
        Eigen::Index last = D_.span(static_cast<Eigen::Index>(i)).last;
        counts[i] = kind == ModelKind::cov_timevarying
                        ? std::clamp<Eigen::Index>(last, 1, static_cast<Eigen::Index>(J_))
                        : 1;
        path_offset_[i + 1] = path_offset_[i] + counts[i];
    }
    const auto P = static_cast<Eigen::Index>(P_);
    path_rows_.resize(path_offset_.back(), P);
    if (P > 0) {
        for (std::size_t i = 0; i < ds.N(); ++i) {
            const auto& s = ds.subjects[i];
            for (Eigen::Index j = 0; j < counts[i]; ++j) {
                Eigen::VectorXd z = kind == ModelKind::cov_timevarying ? s.covariate_at(ds.grid.tau(static_cast<std::size_t>(j)))
                                                                       : s.fixed_covariates();
                if (z.size() != P) throw PanelError("subject " + s.id + ": covariate length mismatch");
                path_rows_.row(path_offset_[i] + j) = z.transpose();
            }
        }
    }
}

void Objective::evaluate_block(std::size_t begin, std::size_t end, const WorkingParams& w, bool with_gradient,
                               Block& out) const {
    const auto J = static_cast<Eigen::Index>(J_);
    const auto P = static_cast<Eigen::Index>(P_);
    const double eta = error_model_.eta();
    out.grad = Eigen::VectorXd::Zero(J + P);
    CompensatedSum acc;

    Eigen::VectorXd lambda = w.gamma.array().exp();
    Eigen::VectorXd h(J), S(J + 1), W(J + 1);
    std::vector<char> clamped(static_cast<std::size_t>(J));

    for (std::size_t ii = begin; ii < end; ++ii) {
        const auto i = static_cast<Eigen::Index>(ii);
        const Eigen::Index hi = D_.span(i).last;
        const Eigen::Index rows = path_offset_[ii + 1] - path_offset_[ii];
        const Eigen::Index base = path_offset_[ii];

        double e_fixed = 1.0;
        bool fixed_clamped = false;
        if (P > 0 && rows == 1) {
            double lin = path_rows_.row(base).dot(w.beta);
            fixed_clamped = std::abs(lin) > kLinearPredictorBound;
            e_fixed = clamped_exp(lin, &out.clamped);
        }

        S[0] = 1.0;
        double H = 0.0;
        for (Eigen::Index j = 0; j < hi; ++j) {
            double e = e_fixed;
            bool cl = fixed_clamped;
            if (P > 0 && rows > 1) {
                double lin = path_rows_.row(base + std::min(j, rows - 1)).dot(w.beta);
                cl = std::abs(lin) > kLinearPredictorBound;
                e = clamped_exp(lin, &out.clamped);
            }
            clamped[static_cast<std::size_t>(j)] = cl;
            h[j] = lambda[j] * e;
            H += h[j];
            S[j + 1] = std::exp(-H);
        }

        // theta form: every term is non-negative.
        double L = (1.0 - eta) * C_(i, 0);
        double inner = 0.0;
        for (Eigen::Index j = 0; j < hi; ++j) inner += C_(i, j) * S[j] * -std::expm1(-h[j]);
        inner += C_(i, std::max<Eigen::Index>(hi, 0)) * S[std::max<Eigen::Index>(hi, 0)];
        L += eta * inner;

        if (!(L > 0.0)) {
            if (out.infeasible < 0) out.infeasible = i;
            continue;
        }
        acc.add(std::log(L));
        if (!with_gradient) continue;

        // W[j] = sum_{c > j} D_c S_c
        double suffix = 0.0;
        for (Eigen::Index c = hi; c >= 1; --c) {
            suffix += D_(i, c) * S[c];
            W[c - 1] = suffix;
        }
        const double scale = -eta / L;
        for (Eigen::Index j = 0; j < hi; ++j) {
            double g = scale * W[j] * h[j];
            out.grad[j] += g;
            if (P > 0 && !clamped[static_cast<std::size_t>(j)])
                out.grad.tail(P) += g * path_rows_.row(base + std::min(j, rows - 1)).transpose();
        }
    }
    out.sum = acc.sum;
    out.comp = acc.comp;
}

Objective::Evaluation Objective::evaluate(const WorkingParams& w, bool with_gradient) const {
    if (static_cast<std::size_t>(w.gamma.size()) != J_ || static_cast<std::size_t>(w.beta.size()) != P_)
        throw LikelihoodError("working parameters do not match the model dimensions");
    constexpr std::size_t kBlock = 2048;
    const std::size_t n = N();
    const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
    std::vector<Block> blocks(n_blocks);
    parallel_for(n_blocks, threads_, [&](std::size_t b) {
        evaluate_block(b * kBlock, std::min(n, (b + 1) * kBlock), w, with_gradient, blocks[b]);
    });

    Evaluation ev;
    ev.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
    CompensatedSum acc;
    for (const auto& b : blocks) {
        acc.add(b.sum);
        acc.add(b.comp);
        if (with_gradient) ev.gradient += b.grad;
        ev.clamped += b.clamped;
        if (ev.infeasible < 0 && b.infeasible >= 0) ev.infeasible = b.infeasible;
    }
    ev.loglik = ev.infeasible >= 0 ? -std::numeric_limits<double>::infinity() : acc.value();
    return ev;
}

Objective::Evaluation Objective::evaluate_flat(const Eigen::VectorXd& x, bool with_gradient) const {
    return evaluate(WorkingParams::from_flat(x, J_, P_), with_gradient);
}

}  // namespace srsurv
