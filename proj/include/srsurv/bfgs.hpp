#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace srsurv {

struct BfgsOptions {
    int max_iterations = 1000;
    double rel_tol = 1e-9;   // relative change in f
    double grad_tol = 1e-5;  // max |g| over free coordinates
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    double max_step = 5.0;  // cap on the infinity norm of a single step
};

struct BfgsResult {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd g;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::vector<bool> frozen;
    std::string message;
};

// Minimizes f. `fg(x, g)` returns f(x) and writes the gradient into g; it
// may return +inf for infeasible points. `freeze(x, k)` is polled after
// every iteration and pins coordinate k at its current value when true.
class Bfgs {
public:
    using ValueAndGradient = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;
    using FreezeRule = std::function<bool(const Eigen::VectorXd&, Eigen::Index)>;

    explicit Bfgs(BfgsOptions options = {}) : options_(options) {}

    BfgsResult minimize(const ValueAndGradient& fg, Eigen::VectorXd x0, const FreezeRule& freeze = {}) const;

    const BfgsOptions& options() const { return options_; }

private:
    BfgsOptions options_;
};

}  // namespace srsurv
