#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <functional>
#include <vector>

#include "stochtop/errors.hpp"
#include "stochtop/mma.hpp"

namespace stochtop {

struct ContinuationStage {
    double penalty = 3.0;    // p
    double projection = 0.0; // beta
    double tolerance = 1e-4; // scaled KKT tolerance for this stage
};

/// Geometric interpolation between the endpoint tolerances.
inline std::vector<double> geometric_tolerances(int count, double from, double to) {
    if (count < 1) throw ParameterError("geometric_tolerances: need at least one stage");
    if (!(from > 0.0 && to > 0.0)) throw ParameterError("geometric_tolerances: tolerances must be positive");
    std::vector<double> tols(static_cast<std::size_t>(count));
    if (count == 1) {
        tols[0] = to;
        return tols;
    }
    const double ratio = std::pow(to / from, 1.0 / (count - 1));
    double t = from;
    for (int k = 0; k < count; ++k) {
        tols[static_cast<std::size_t>(k)] = t;
        t *= ratio;
    }
    tols.front() = from;
    tols.back() = to;
    return tols;
}

/// Two-leg continuation: the penalty climbs at zero projection, then the
/// projection climbs at the final penalty. Each leg gets its own
/// exponentially decreasing tolerance sequence between the endpoints.
struct ContinuationSchedule {
    std::vector<ContinuationStage> stages;

    static ContinuationSchedule standard(double p_from = 1.0, double p_to = 6.0,
                                         double p_step = 0.5, double beta_from = 0.0,
                                         double beta_to = 20.0, double beta_step = 4.0,
                                         double tol_from = 1e-3, double tol_to = 1e-4) {
        if (!(p_step > 0.0) || !(beta_step > 0.0))
            throw ParameterError("ContinuationSchedule: steps must be positive");
        if (p_to < p_from || beta_to < beta_from)
            throw ParameterError("ContinuationSchedule: end values must not precede start values");
        ContinuationSchedule schedule;
        const int p_count = static_cast<int>(std::llround((p_to - p_from) / p_step)) + 1;
        const int b_count = static_cast<int>(std::llround((beta_to - beta_from) / beta_step)) + 1;
        const auto p_tols = geometric_tolerances(p_count, tol_from, tol_to);
        const auto b_tols = geometric_tolerances(b_count, tol_from, tol_to);
        for (int k = 0; k < p_count; ++k)
            schedule.stages.push_back({p_from + k * p_step, beta_from,
                                       p_tols[static_cast<std::size_t>(k)]});
        for (int k = 0; k < b_count; ++k)
            schedule.stages.push_back({p_to, beta_from + k * beta_step,
                                       b_tols[static_cast<std::size_t>(k)]});
        return schedule;
    }

    void validate() const {
        if (stages.empty()) throw ParameterError("ContinuationSchedule: empty schedule");
        for (std::size_t k = 0; k < stages.size(); ++k) {
            if (!(stages[k].tolerance > 0.0))
                throw ParameterError("ContinuationSchedule: tolerances must be positive");
            if (!(stages[k].penalty >= 1.0) || !(stages[k].projection >= 0.0))
                throw ParameterError("ContinuationSchedule: invalid stage parameters");
            if (k > 0 && stages[k].penalty < stages[k - 1].penalty)
                throw ParameterError("ContinuationSchedule: penalty must be nondecreasing");
            if (k > 0 && stages[k].penalty == stages[k - 1].penalty &&
                stages[k].projection < stages[k - 1].projection)
                throw ParameterError("ContinuationSchedule: projection must be nondecreasing");
        }
    }
};

struct StageRecord {
    ContinuationStage stage;
    int iterations = 0;
    bool converged = false;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double kkt = std::numeric_limits<double>::quiet_NaN();
    long solves = 0;
    double seconds = 0.0;
    std::vector<MmaIterate> iterates;
};

struct ContinuationResult {
    Eigen::VectorXd x;
    Eigen::VectorXd multipliers;
    std::vector<StageRecord> stages;
};

/// Builds the MMA problem for a stage (given its warm-start point, so the
/// factory can normalize the objective there).
using StageProblemFactory =
    std::function<MmaProblem(const ContinuationStage&, const Eigen::VectorXd&)>;

/// Warm-started continuation over the schedule. `solve_counter`, when
/// provided, is sampled around each stage to attribute linear solves.
inline ContinuationResult continuation_run(const StageProblemFactory& factory,
                                           const ContinuationSchedule& schedule,
                                           const Eigen::VectorXd& x0, const MmaParams& params,
                                           const std::function<long()>& solve_counter = {}) {
    schedule.validate();
    ContinuationResult result;
    result.x = x0;
    for (const ContinuationStage& stage : schedule.stages) {
        const auto t0 = std::chrono::steady_clock::now();
        const long solves_before = solve_counter ? solve_counter() : 0;
        const MmaProblem problem = factory(stage, result.x);
        MmaResult solved = mma_solve(problem, result.x, params, stage.tolerance);
        result.x = solved.x;
        result.multipliers = solved.multipliers;

        StageRecord rec;
        rec.stage = stage;
        rec.iterations = solved.iterations;
        rec.converged = solved.converged;
        rec.objective = solved.objective;
        rec.kkt = solved.kkt;
        rec.solves = solve_counter ? solve_counter() - solves_before : 0;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.iterates = std::move(solved.history);
        result.stages.push_back(std::move(rec));
    }
    return result;
}

} // namespace stochtop
