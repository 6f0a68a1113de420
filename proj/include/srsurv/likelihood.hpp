#pragma once

#include "srsurv/panel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace srsurv {

class LikelihoodError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ReportRelation { before_event_interval, after_event_interval };

// Pr(report | visit lies before / after the interval holding the event).
double report_probability(int result, ReportRelation relation, const ErrorModel& error_model);

// N x (J+1) matrix with the nonzero column span of every row. Rows of C
// (and of D = C T_r) are zero outside their span whenever a perfect test
// or an early last visit creates structural zeros, and every evaluator
// only walks the span.
class CoefficientMatrix {
public:
    struct Span {
        Eigen::Index first = 0;  // first nonzero column, 0-based
        Eigen::Index last = -1;  // last nonzero column, inclusive
    };

    CoefficientMatrix() = default;
    explicit CoefficientMatrix(Eigen::MatrixXd entries);

    const Eigen::MatrixXd& entries() const { return entries_; }
    Eigen::Index rows() const { return entries_.rows(); }
    Eigen::Index cols() const { return entries_.cols(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
    const Span& span(Eigen::Index i) const { return spans_[static_cast<std::size_t>(i)]; }

    // Fraction of entries outside the row spans.
    double structural_zero_fraction() const;

private:
    Eigen::MatrixXd entries_;
    std::vector<Span> spans_;
};

CoefficientMatrix build_c_matrix(const Dataset& dataset, const ErrorModel& error_model);

// (J+1) x (J+1) matrix with theta = T_r S.
Eigen::MatrixXd transform_matrix(std::size_t J);

// D = C T_r, computed as column differences of C.
CoefficientMatrix to_d_matrix(const CoefficientMatrix& C);

// (S_1 = 1, S_2, ..., S_{J+1}).
struct SurvivalParams {
    Eigen::VectorXd s;

    // Throws LikelihoodError unless 1 = S_1 >= S_2 >= ... >= S_{J+1} >= 0.
    // `strict` demands strict decrease and a positive tail.
    void check(bool strict = false) const;
    Eigen::VectorXd theta() const;
};

// (Lambda_0, ..., Lambda_{J-1}).
struct HazardIncrements {
    Eigen::VectorXd lambdas;

    void check() const;
    SurvivalParams survival() const;
};

struct RegressionParams {
    Eigen::VectorXd beta;
};

// Per-subject covariate paths: row j' is z_{ij'}, the covariate vector in
// force over [tau_j', tau_j'+1), j' = 0..J-1.
using CovariatePaths = std::vector<Eigen::MatrixXd>;

CovariatePaths build_covariate_paths(const Dataset& dataset);

// z'beta is clamped to this range before exponentiation.
inline constexpr double kLinearPredictorBound = 50.0;

double loglik_onesample(const CoefficientMatrix& D, const SurvivalParams& s);
double loglik_cov(const CoefficientMatrix& D, const SurvivalParams& s, const RegressionParams& beta,
                  const Eigen::MatrixXd& Z);
double loglik_entry_misclass(const CoefficientMatrix& D, const SurvivalParams& s, const RegressionParams& beta,
                             const Eigen::MatrixXd& Z, double eta);
double loglik_timevarying(const CoefficientMatrix& D, const HazardIncrements& lambdas,
                          const RegressionParams& beta, const CovariatePaths& Zt, double eta = 1.0);

// Per-subject likelihood contributions sum_j D_ij S_ij (with eta scaling
// of columns j > 1).
Eigen::VectorXd subject_likelihoods(const CoefficientMatrix& D, const Eigen::MatrixXd& subject_survival,
                                    double eta = 1.0);

// Unconstrained parameters: Lambda_j = exp(gamma_j), beta free.
struct WorkingParams {
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;

    std::size_t size() const { return static_cast<std::size_t>(gamma.size() + beta.size()); }
    Eigen::VectorXd flat() const;
    static WorkingParams from_flat(const Eigen::VectorXd& x, std::size_t J, std::size_t P);

    HazardIncrements hazards() const;
    SurvivalParams survival() const;
};

enum class ModelKind { onesample, cov_fixed, cov_timevarying };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

// Log-likelihood and analytic gradient in the working parameterization.
//
// The variant follows from the model kind and the error model: eta < 1
// adds the prevalent-case mixture. Evaluation runs over fixed-size subject
// blocks, reduced in block order, so results do not depend on the thread
// count.
class Objective {
public:
    struct Evaluation {
        double loglik = 0.0;
        Eigen::VectorXd gradient;          // d loglik / d (gamma, beta)
        std::size_t clamped = 0;           // clamped linear predictors
        std::ptrdiff_t infeasible = -1;    // first subject with L_i <= 0
    };

    Objective(const Dataset& dataset, const ErrorModel& error_model, ModelKind kind, unsigned threads = 1);

    std::size_t J() const { return J_; }
    std::size_t P() const { return P_; }
    std::size_t dim() const { return J_ + P_; }
    std::size_t N() const { return static_cast<std::size_t>(C_.rows()); }
    ModelKind kind() const { return kind_; }
    const ErrorModel& error_model() const { return error_model_; }
    const CoefficientMatrix& C() const { return C_; }
    const CoefficientMatrix& D() const { return D_; }

    Evaluation evaluate(const WorkingParams& params, bool with_gradient = true) const;
    Evaluation evaluate_flat(const Eigen::VectorXd& x, bool with_gradient = true) const;

private:
    struct Block {
        double sum = 0.0;
        double comp = 0.0;
        Eigen::VectorXd grad;
        std::size_t clamped = 0;
        std::ptrdiff_t infeasible = -1;
    };

    void evaluate_block(std::size_t begin, std::size_t end, const WorkingParams& params, bool with_gradient,
                        Block& out) const;

    ErrorModel error_model_;
    ModelKind kind_;
    std::size_t J_ = 0;
    std::size_t P_ = 0;
    unsigned threads_ = 1;
    CoefficientMatrix C_;
    CoefficientMatrix D_;
    // Covariate rows for subject i are path_rows_[path_offset_[i] ...
    // path_offset_[i+1]); interval j' uses row min(j', count - 1).
    Eigen::MatrixXd path_rows_;
    std::vector<Eigen::Index> path_offset_;
};

// Neumaier-compensated accumulation.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double v);
    double value() const { return sum + comp; }
};

}  // namespace srsurv
