#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "stochtop/errors.hpp"

namespace stochtop {

/// Svanberg-style MMA controls. s_init/s_incr/s_decr drive the moving
/// asymptotes; move limits and the tiny convexity floor raa0 follow the
/// usual mmasub defaults.
struct MmaParams {
    double s_init = 0.5;
    double s_incr = 1.1;
    double s_decr = 0.7;
    int max_iters = 1000; // per subproblem (one continuation stage)
    double move = 0.5;    // move limit as a fraction of the box range
    double albefa = 0.1;
    double raa0 = 1e-5;
    double s_max = 100.0;  // KKT residual scaling cap
    double feas_tol = 1e-5;
    bool record_asymptotes = false;

    void validate() const {
        if (!(s_init > 0.0)) throw ParameterError("MmaParams: s_init must be positive");
        if (!(s_decr > 0.0 && s_decr < 1.0 && s_incr > 1.0))
            throw ParameterError("MmaParams: need 0 < s_decr < 1 < s_incr");
        if (max_iters < 0) throw ParameterError("MmaParams: max_iters must be nonnegative");
        if (!(move > 0.0)) throw ParameterError("MmaParams: move limit must be positive");
    }
};

/// IPOPT-style scaled stationarity residual: ||grad_L||_inf / s_d with
/// s_d = max(s_max, mean |lambda|) / s_max.
inline double kkt_residual_scaled(const Eigen::VectorXd& grad_lagrangian,
                                  const Eigen::VectorXd& multipliers, double s_max = 100.0) {
    if (!(s_max > 0.0)) throw ParameterError("kkt_residual_scaled: s_max must be positive");
    if (multipliers.size() > 0 && multipliers.minCoeff() < 0.0)
        throw ParameterError("kkt_residual_scaled: multipliers must be nonnegative");
    const double mean_abs = multipliers.size() > 0 ? multipliers.cwiseAbs().mean() : 0.0;
    const double s_d = std::max(s_max, mean_abs) / s_max;
    if (grad_lagrangian.size() == 0) return 0.0;
    return grad_lagrangian.lpNorm<Eigen::Infinity>() / s_d;
}

/// Objective/constraint callback: returns the value at x and fills grad.
using ValueGrad = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// min f(x) s.t. g_j(x) <= 0, lower <= x <= upper.
struct MmaProblem {
    ValueGrad objective;
    std::vector<ValueGrad> constraints;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

struct MmaIterate {
    int iter = 0;
    double objective = 0.0;
    Eigen::VectorXd constraints;
    double kkt = std::numeric_limits<double>::infinity();
    double max_change = 0.0;
    Eigen::VectorXd x; // filled only when MmaParams::record_asymptotes is set
};

struct MmaResult {
    Eigen::VectorXd x;
    Eigen::VectorXd multipliers;
    std::vector<MmaIterate> history; // one entry per function/gradient evaluation
    bool converged = false;
    int iterations = 0;
    double kkt = std::numeric_limits<double>::infinity();
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::vector<Eigen::VectorXd> asymptote_low, asymptote_upp; // when recorded
};

namespace detail {

/// Separable convex MMA subproblem
///   min  sum_j p_0j/(U_j-x_j) + q_0j/(x_j-L_j) + r_0
///   s.t. sum_j p_ij/(U_j-x_j) + q_ij/(x_j-L_j) + r_i <= 0,  alpha <= x <= beta
/// solved through its dual. The primal minimizer for fixed multipliers has
/// the closed form x_j = (L_j sqrt(pl) + U_j sqrt(ql)) / (sqrt(pl) + sqrt(ql)).
struct MmaSubproblem {
    Eigen::MatrixXd P, Q;       // (m+1) x n, row 0 holds the objective
    Eigen::VectorXd r;          // m+1
    Eigen::VectorXd low, upp;   // asymptotes
    Eigen::VectorXd alpha, beta;

    int num_constraints() const { return static_cast<int>(P.rows()) - 1; }
    int num_vars() const { return static_cast<int>(P.cols()); }

    Eigen::VectorXd primal_for(const Eigen::VectorXd& lambda) const {
        const int n = num_vars();
        const int m = num_constraints();
        Eigen::VectorXd x(n);
        for (int j = 0; j < n; ++j) {
            double pl = P(0, j);
            double ql = Q(0, j);
            for (int i = 0; i < m; ++i) {
                pl += lambda[i] * P(i + 1, j);
                ql += lambda[i] * Q(i + 1, j);
            }
            const double sp = std::sqrt(pl);
            const double sq = std::sqrt(ql);
            const double xj = (low[j] * sp + upp[j] * sq) / (sp + sq);
            x[j] = std::min(std::max(xj, alpha[j]), beta[j]);
        }
        return x;
    }

    /// Approximated function i (0 = objective) at x.
    double approx_value(int i, const Eigen::VectorXd& x) const {
        double acc = r[i];
        for (int j = 0; j < num_vars(); ++j)
            acc += P(i, j) / (upp[j] - x[j]) + Q(i, j) / (x[j] - low[j]);
        return acc;
    }

    Eigen::VectorXd constraint_values(const Eigen::VectorXd& x) const {
        const int m = num_constraints();
        Eigen::VectorXd g(m);
        for (int i = 0; i < m; ++i) g[i] = approx_value(i + 1, x);
        return g;
    }

    /// Lagrangian at (x, lambda); equals the dual value when x = primal_for(lambda).
    double lagrangian(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) const {
        double acc = approx_value(0, x);
        const Eigen::VectorXd g = constraint_values(x);
        for (int i = 0; i < num_constraints(); ++i) acc += lambda[i] * g[i];
        return acc;
    }

    /// Maximize the concave dual. One constraint uses safeguarded bisection
    /// on the constraint residual; several use a log-barrier gradient ascent.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> solve() const {
        const int m = num_constraints();
        if (m == 0) {
            Eigen::VectorXd lambda(0);
            return {primal_for(lambda), lambda};
        }
        if (m == 1) return solve_single();
        return solve_barrier();
    }

private:
    std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_single() const {
        const auto residual = [&](double lam) {
            Eigen::VectorXd lambda(1);
            lambda[0] = lam;
            return approx_value(1, primal_for(lambda));
        };
        Eigen::VectorXd lambda(1);
        lambda[0] = 0.0;
        if (residual(0.0) <= 0.0) return {primal_for(lambda), lambda};

        constexpr double kLambdaCap = 1e12;
        double hi = 1.0;
        while (residual(hi) > 0.0) {
            hi *= 2.0;
            if (hi > kLambdaCap) {
                // subproblem infeasible within the move limits; return the
                // least-violating point so the outer loop can recover
                lambda[0] = kLambdaCap;
                return {primal_for(lambda), lambda};
            }
        }
        double lo = hi * 0.5 > 1.0 ? hi * 0.5 : 0.0;
        if (residual(lo) <= 0.0) lo = 0.0;
        for (int it = 0; it < 200 && (hi - lo) > 1e-14 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (residual(mid) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        lambda[0] = hi; // feasible side of the bracket
        return {primal_for(lambda), lambda};
    }

    std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_barrier() const {
        const int m = num_constraints();
        Eigen::VectorXd lambda = Eigen::VectorXd::Ones(m);
        const auto barrier_value = [&](const Eigen::VectorXd& lam, double mu) {
            return lagrangian(primal_for(lam), lam) + mu * lam.array().log().sum();
        };
        for (double mu = 1e-1; mu >= 1e-11; mu *= 0.1) {
            for (int it = 0; it < 200; ++it) {
                const Eigen::VectorXd g = constraint_values(primal_for(lambda));
                const Eigen::VectorXd grad = g + mu * lambda.cwiseInverse();
                if (grad.lpNorm<Eigen::Infinity>() <= 0.1 * mu) break;
                // fraction-to-boundary then backtracking on the barrier dual
                double step = 1.0;
                for (int i = 0; i < m; ++i)
                    if (grad[i] < 0.0) step = std::min(step, -0.99 * lambda[i] / grad[i]);
                const double base = barrier_value(lambda, mu);
                const double slope = grad.squaredNorm();
                while (step > 1e-18 &&
                       barrier_value(lambda + step * grad, mu) < base + 0.1 * step * slope)
                    step *= 0.5;
                if (step <= 1e-18) break;
                lambda += step * grad;
            }
        }
        return {primal_for(lambda), lambda};
    }
};

} // namespace detail

/// Method of Moving Asymptotes with box bounds and inequality constraints.
/// Terminates when the scaled KKT residual drops below tol at a feasible
/// iterate, or after max_iters evaluations.
inline MmaResult mma_solve(const MmaProblem& problem, Eigen::VectorXd x, const MmaParams& params,
                           double tol) {
    params.validate();
    const int n = static_cast<int>(x.size());
    const int m = static_cast<int>(problem.constraints.size());
    if (problem.lower.size() != n || problem.upper.size() != n)
        throw ParameterError("mma_solve: bound vectors must match the variable count");
    if (((problem.upper - problem.lower).array() <= 0.0).any())
        throw ParameterError("mma_solve: need lower < upper");
    if (!problem.objective) throw ParameterError("mma_solve: objective callback missing");

    const Eigen::VectorXd range = problem.upper - problem.lower;
    x = x.cwiseMax(problem.lower).cwiseMin(problem.upper);

    MmaResult result;
    result.multipliers = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd xold1, xold2, low, upp;
    Eigen::VectorXd grad_obj(n);
    Eigen::MatrixXd grad_con(m, n);
    Eigen::VectorXd g(m);
    double last_change = 0.0;

    for (int iter = 0; iter < params.max_iters; ++iter) {
        const double f0 = problem.objective(x, grad_obj);
        Eigen::VectorXd row(n);
        for (int i = 0; i < m; ++i) {
            g[i] = problem.constraints[static_cast<std::size_t>(i)](x, row);
            grad_con.row(i) = row;
        }

        // stationarity with the multipliers of the previous subproblem,
        // bound multipliers folded in by projecting at active bounds
        Eigen::VectorXd grad_lag = grad_obj;
        if (m > 0) grad_lag += grad_con.transpose() * result.multipliers;
        for (int j = 0; j < n; ++j) {
            const double act = 1e-12 * range[j];
            if (x[j] <= problem.lower[j] + act && grad_lag[j] > 0.0) grad_lag[j] = 0.0;
            if (x[j] >= problem.upper[j] - act && grad_lag[j] < 0.0) grad_lag[j] = 0.0;
        }
        const double kkt = kkt_residual_scaled(grad_lag, result.multipliers, params.s_max);
        const bool feasible = m == 0 || g.maxCoeff() <= params.feas_tol;

        MmaIterate rec;
        rec.iter = iter;
        rec.objective = f0;
        rec.constraints = g;
        rec.kkt = kkt;
        rec.max_change = last_change;
        if (params.record_asymptotes) rec.x = x;
        result.history.push_back(rec);
        result.objective = f0;
        result.kkt = kkt;

        if (kkt <= tol && feasible) {
            result.converged = true;
            break;
        }

        // moving asymptotes
        if (iter < 2) {
            low = x - params.s_init * range;
            upp = x + params.s_init * range;
        } else {
            for (int j = 0; j < n; ++j) {
                const double trend = (x[j] - xold1[j]) * (xold1[j] - xold2[j]);
                const double factor = trend > 0.0 ? params.s_incr : (trend < 0.0 ? params.s_decr : 1.0);
                low[j] = x[j] - factor * (xold1[j] - low[j]);
                upp[j] = x[j] + factor * (upp[j] - xold1[j]);
                // outer clamp only; the inner gap must keep shrinking under
                // s_decr or interior optima stall at a fixed step amplitude
                low[j] = std::min(std::max(low[j], x[j] - 10.0 * range[j]),
                                  x[j] - 1e-9 * range[j]);
                upp[j] = std::max(std::min(upp[j], x[j] + 10.0 * range[j]),
                                  x[j] + 1e-9 * range[j]);
            }
        }
        if (params.record_asymptotes) {
            result.asymptote_low.push_back(low);
            result.asymptote_upp.push_back(upp);
        }

        detail::MmaSubproblem sub;
        sub.low = low;
        sub.upp = upp;
        sub.alpha = problem.lower.cwiseMax(low + params.albefa * (x - low))
                        .cwiseMax(x - params.move * range);
        sub.beta = problem.upper.cwiseMin(upp - params.albefa * (upp - x))
                       .cwiseMin(x + params.move * range);
        sub.P.resize(m + 1, n);
        sub.Q.resize(m + 1, n);
        sub.r.resize(m + 1);
        for (int i = 0; i <= m; ++i) {
            double offset = i == 0 ? f0 : g[i - 1];
            for (int j = 0; j < n; ++j) {
                const double df = i == 0 ? grad_obj[j] : grad_con(i - 1, j);
                const double dfp = std::max(df, 0.0);
                const double dfm = std::max(-df, 0.0);
                const double ux = upp[j] - x[j];
                const double xl = x[j] - low[j];
                const double floor = params.raa0 / range[j];
                sub.P(i, j) = ux * ux * (1.001 * dfp + 0.001 * dfm + floor);
                sub.Q(i, j) = xl * xl * (0.001 * dfp + 1.001 * dfm + floor);
                offset -= sub.P(i, j) / ux + sub.Q(i, j) / xl;
            }
            sub.r[i] = offset;
        }

        auto [xnew, lambda] = sub.solve();
        result.multipliers = lambda;
        last_change = (xnew - x).cwiseAbs().maxCoeff();
        xold2 = xold1;
        xold1 = x;
        x = xnew;
    }

    result.x = x;
    result.iterations = static_cast<int>(result.history.size());
    return result;
}

} // namespace stochtop
