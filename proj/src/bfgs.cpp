#include "srsurv/bfgs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace srsurv {

namespace {

struct Point {
    double a = 0.0;
    double f = 0.0;
    double d = 0.0;  // directional derivative
    Eigen::VectorXd g;
};

double max_abs_free(const Eigen::VectorXd& g, const std::vector<bool>& frozen) {
    double m = 0.0;
    for (Eigen::Index k = 0; k < g.size(); ++k)
        if (!frozen[static_cast<std::size_t>(k)]) m = std::max(m, std::abs(g[k]));
    return m;
}

void apply_mask(Eigen::VectorXd& v, const std::vector<bool>& frozen) {
    for (Eigen::Index k = 0; k < v.size(); ++k)
        if (frozen[static_cast<std::size_t>(k)]) v[k] = 0.0;
}

Eigen::MatrixXd masked_identity(Eigen::Index n, const std::vector<bool>& frozen, double scale) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        if (!frozen[static_cast<std::size_t>(k)]) H(k, k) = scale;
    return H;
}

// Minimizer of the cubic through (a0,f0,d0), (a1,f1,d1).
double cubic_min(const Point& p0, const Point& p1) {
    double d1 = p0.d + p1.d - 3.0 * (p0.f - p1.f) / (p0.a - p1.a);
    double disc = d1 * d1 - p0.d * p1.d;
    if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
    double d2 = std::copysign(std::sqrt(disc), p1.a - p0.a);
    return p1.a - (p1.a - p0.a) * (p1.d + d2 - d1) / (p1.d - p0.d + 2.0 * d2);
}

}  // namespace

BfgsResult Bfgs::minimize(const ValueAndGradient& fg, Eigen::VectorXd x, const FreezeRule& freeze) const {
    const Eigen::Index n = x.size();
    BfgsResult res;
    res.frozen.assign(static_cast<std::size_t>(n), false);
    auto& frozen = res.frozen;

    Eigen::VectorXd g(n);
    double f = fg(x, g);
    ++res.evaluations;
    if (!std::isfinite(f)) {
        res.x = x;
        res.f = f;
        res.g = g;
        res.message = "objective is not finite at the starting point";
        return res;
    }
    if (n == 0) {
        res.x = x;
        res.f = f;
        res.g = g;
        res.converged = true;
        return res;
    }

    auto eval_at = [&](const Eigen::VectorXd& base, const Eigen::VectorXd& p, double a) {
        Point pt;
        pt.a = a;
        pt.g.resize(n);
        pt.f = fg(base + a * p, pt.g);
        ++res.evaluations;
        if (std::isfinite(pt.f)) {
            apply_mask(pt.g, frozen);
            pt.d = pt.g.dot(p);
        } else {
            pt.f = std::numeric_limits<double>::infinity();
            pt.d = std::numeric_limits<double>::quiet_NaN();
        }
        return pt;
    };

    const double c1 = options_.wolfe_c1;
    const double c2 = options_.wolfe_c2;

    // Strong Wolfe line search; returns the accepted point or a = 0 on failure.
    auto line_search = [&](const Eigen::VectorXd& p, double a_init) {
        Point p0{0.0, f, g.dot(p), g};
        auto zoom = [&](Point lo, Point hi) {
            for (int it = 0; it < 40; ++it) {
                double a = std::numeric_limits<double>::quiet_NaN();
                if (std::isfinite(hi.f) && std::isfinite(hi.d)) a = cubic_min(lo, hi);
                double left = std::min(lo.a, hi.a), right = std::max(lo.a, hi.a), w = right - left;
                if (!std::isfinite(a) || a < left + 0.1 * w || a > right - 0.1 * w) a = 0.5 * (lo.a + hi.a);
                Point pt = eval_at(x, p, a);
                if (pt.f > f + c1 * a * p0.d || pt.f >= lo.f) {
                    hi = pt;
                } else {
                    if (std::abs(pt.d) <= -c2 * p0.d) return pt;
                    if (pt.d * (hi.a - lo.a) >= 0.0) hi = lo;
                    lo = pt;
                }
                if (std::abs(hi.a - lo.a) < 1e-16 * std::max(1.0, lo.a)) break;
            }
            // Sufficient decrease without curvature is still progress.
            return lo.a > 0.0 ? lo : Point{};
        };

        Point prev = p0;
        double a = a_init;
        for (int it = 0; it < 40; ++it) {
            Point pt = eval_at(x, p, a);
            if (!std::isfinite(pt.f) || pt.f > f + c1 * a * p0.d || (it > 0 && pt.f >= prev.f)) return zoom(prev, pt);
            if (std::abs(pt.d) <= -c2 * p0.d) return pt;
            if (pt.d >= 0.0) return zoom(pt, prev);
            prev = pt;
            a *= 2.0;
        }
        return prev;
    };

    Eigen::MatrixXd H = masked_identity(n, frozen, 1.0);
    bool fresh = true;  // H is a (scaled) identity
    bool scaled = false;

    for (int iter = 1; iter <= options_.max_iterations; ++iter) {
        res.iterations = iter;
        Eigen::VectorXd p = -H * g;
        apply_mask(p, frozen);
        if (!(p.dot(g) < 0.0)) {
            H = masked_identity(n, frozen, 1.0);
            fresh = true;
            p = -g;
        }
        if (fresh && !scaled) p /= std::max(1.0, p.lpNorm<Eigen::Infinity>());
        double pmax = p.lpNorm<Eigen::Infinity>();
        if (pmax == 0.0) {
            res.converged = true;
            res.message = "zero search direction";
            break;
        }
        double a0 = std::min(1.0, options_.max_step / pmax);

        Point acc = line_search(p, a0);
        if (acc.a <= 0.0) {
            if (!fresh) {
                H = masked_identity(n, frozen, scaled ? H.diagonal().maxCoeff() : 1.0);
                fresh = true;
                --iter;
                continue;
            }
            res.converged = max_abs_free(g, frozen) < options_.grad_tol;
            res.message = "line search made no progress";
            break;
        }

        Eigen::VectorXd s = acc.a * p;
        Eigen::VectorXd y = acc.g - g;
        double f_old = f;
        x += s;
        f = acc.f;
        g = acc.g;

        double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (fresh) {
                H = masked_identity(n, frozen, sy / y.dot(y));
                scaled = true;
            }
            double rho = 1.0 / sy;
            Eigen::VectorXd Hy = H * y;
            H += rho * rho * (sy + y.dot(Hy)) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
            fresh = false;
        }

        if (freeze) {
            bool changed = false;
            for (Eigen::Index k = 0; k < n; ++k) {
                if (!frozen[static_cast<std::size_t>(k)] && freeze(x, k)) {
                    frozen[static_cast<std::size_t>(k)] = true;
                    changed = true;
                }
            }
            if (changed) {
                apply_mask(g, frozen);
                H = masked_identity(n, frozen, 1.0);
                fresh = true;
                scaled = false;
                continue;
            }
        }

        double rel = std::abs(f - f_old) / std::max(1.0, std::abs(f));
        if (rel < options_.rel_tol && max_abs_free(g, frozen) < options_.grad_tol) {
            res.converged = true;
            res.message = "converged";
            break;
        }
    }
    if (res.message.empty()) res.message = "iteration limit reached";
    res.x = std::move(x);
    res.f = f;
    res.g = std::move(g);
    return res;
}

}  // namespace srsurv
