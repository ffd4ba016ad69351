#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "stochtop/continuation.hpp"
#include "stochtop/estimators.hpp"
#include "stochtop/mma.hpp"
#include "stochtop/simp.hpp"

using namespace stochtop;

TEST_CASE("scaled KKT residual formula") {
    Eigen::VectorXd grad(3);
    grad << 0.1, -0.4, 0.2;

    CHECK(kkt_residual_scaled(grad, Eigen::VectorXd::Zero(2)) == Catch::Approx(0.4));
    CHECK(kkt_residual_scaled(grad, Eigen::VectorXd::Constant(2, 50.0)) == Catch::Approx(0.4));
    CHECK(kkt_residual_scaled(grad, Eigen::VectorXd::Constant(2, 1000.0)) ==
          Catch::Approx(0.04));
    CHECK_THROWS_AS(kkt_residual_scaled(grad, Eigen::VectorXd::Constant(2, -1.0)),
                    ParameterError);
}

TEST_CASE("separable quadratic without constraints") {
    const int n = 15;
    MmaProblem problem;
    problem.lower = Eigen::VectorXd::Zero(n);
    problem.upper = Eigen::VectorXd::Ones(n);
    problem.objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        grad = 2.0 * (x.array() - 0.3).matrix();
        return (x.array() - 0.3).square().sum();
    };
    MmaParams params;
    const MmaResult res =
        mma_solve(problem, Eigen::VectorXd::Constant(n, 0.9), params, 1e-7);
    CHECK(res.converged);
    CHECK((res.x.array() - 0.3).cwiseAbs().maxCoeff() < 1e-6);
    for (const MmaIterate& it : res.history) CHECK(it.constraints.size() == 0);
}

TEST_CASE("linear objective with an active mean constraint") {
    const int n = 20;
    std::mt19937_64 rng(211);
    const Eigen::VectorXd c = oracles::random_vector(n, rng, 0.5, 2.0);

    MmaProblem problem;
    problem.lower = Eigen::VectorXd::Zero(n);
    problem.upper = Eigen::VectorXd::Ones(n);
    problem.objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        grad = c;
        return c.dot(x);
    };
    problem.constraints.push_back([](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        grad = Eigen::VectorXd::Constant(x.size(), -1.0 / x.size());
        return 0.4 - x.mean();
    });

    MmaParams params;
    params.max_iters = 400;
    const MmaResult res =
        mma_solve(problem, Eigen::VectorXd::Constant(n, 0.5), params, 1e-6);
    CHECK(res.x.mean() == Catch::Approx(0.4).margin(1e-3));

    // greedy LP oracle: fill the cheapest coordinates until the mass is 0.4 n
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return c[a] < c[b]; });
    double mass = 0.4 * n, best = 0.0;
    for (int idx : order) {
        const double take = std::min(1.0, mass);
        best += take * c[idx];
        mass -= take;
        if (mass <= 0.0) break;
    }
    CHECK(c.dot(res.x) == Catch::Approx(best).epsilon(1e-2));

    for (const MmaIterate& it : res.history) CHECK(it.constraints.size() == 1);
}

TEST_CASE("iterates stay inside the box") {
    const int n = 8;
    MmaProblem problem;
    problem.lower = Eigen::VectorXd::Zero(n);
    problem.upper = Eigen::VectorXd::Ones(n);
    problem.objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        grad = -Eigen::VectorXd::Ones(x.size()); // push everything to the top
        return -x.sum();
    };
    MmaParams params;
    params.max_iters = 60;
    params.record_asymptotes = true;
    const MmaResult res =
        mma_solve(problem, Eigen::VectorXd::Constant(n, 0.5), params, 1e-9);
    for (const MmaIterate& it : res.history) {
        CHECK(it.x.minCoeff() >= 0.0);
        CHECK(it.x.maxCoeff() <= 1.0);
    }
    CHECK(res.x.minCoeff() > 0.95); // reached the upper bound region
}

TEST_CASE("asymptote adaptation follows the s_incr/s_decr rule") {
    const int n = 4;
    MmaProblem problem;
    problem.lower = Eigen::VectorXd::Zero(n);
    problem.upper = Eigen::VectorXd::Ones(n);
    problem.objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        grad = 2.0 * (x.array() - 0.62).matrix();
        return (x.array() - 0.62).square().sum();
    };
    MmaParams params;
    params.max_iters = 8;
    params.record_asymptotes = true;
    const MmaResult res =
        mma_solve(problem, Eigen::VectorXd::Constant(n, 0.1), params, 1e-14);

    REQUIRE(res.asymptote_low.size() >= 4);
    const Eigen::VectorXd range = problem.upper - problem.lower;
    // first two iterations: initialized at s_init * range
    for (int k = 0; k < 2; ++k) {
        const Eigen::VectorXd expected = res.history[k].x - params.s_init * range;
        CHECK((res.asymptote_low[k] - expected).cwiseAbs().maxCoeff() < 1e-14);
    }
    // afterwards: grow by s_incr when the last two changes agree, shrink by
    // s_decr when they alternate, with the standard clamps
    for (std::size_t k = 2; k < res.asymptote_low.size(); ++k) {
        for (int j = 0; j < n; ++j) {
            const double xk = res.history[k].x[j];
            const double x1 = res.history[k - 1].x[j];
            const double x2 = res.history[k - 2].x[j];
            const double trend = (xk - x1) * (x1 - x2);
            const double factor =
                trend > 0.0 ? params.s_incr : (trend < 0.0 ? params.s_decr : 1.0);
            double low = xk - factor * (x1 - res.asymptote_low[k - 1][j]);
            low = std::min(std::max(low, xk - 10.0 * range[j]), xk - 1e-9 * range[j]);
            CHECK(res.asymptote_low[k][j] == Catch::Approx(low).margin(1e-14));
        }
    }
}

namespace {

/// Convex-subproblem KKT certificate: feasibility, complementarity, and the
/// Lagrangian minimum property at the returned point.
void check_subproblem_kkt(const detail::MmaSubproblem& sub, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& lambda) {
    const Eigen::VectorXd g = sub.constraint_values(x);
    for (int i = 0; i < sub.num_constraints(); ++i) {
        CHECK(g[i] <= 1e-8);
        CHECK(lambda[i] >= 0.0);
        CHECK(std::abs(lambda[i] * g[i]) < 1e-6 * std::max(1.0, lambda[i]));
    }
    const double at_solution = sub.lagrangian(x, lambda);
    for (int j = 0; j < sub.num_vars(); ++j) {
        for (double delta : {-1e-3, 1e-3}) {
            Eigen::VectorXd y = x;
            y[j] = std::min(std::max(y[j] + delta, sub.alpha[j]), sub.beta[j]);
            CHECK(sub.lagrangian(y, lambda) >= at_solution - 1e-12 * std::abs(at_solution));
        }
    }
}

} // namespace

TEST_CASE("MMA subproblem dual solves satisfy the subproblem KKT conditions") {
    SECTION("single constraint (bisection path)") {
        detail::MmaSubproblem sub;
        sub.P.resize(2, 3);
        sub.Q.resize(2, 3);
        sub.P << 0.1, 0.2, 0.3, 0.05, 0.0, 0.1;
        sub.Q << 0.2, 0.1, 0.05, 0.0, 0.08, 0.0;
        sub.r.resize(2);
        sub.r << 0.0, -0.25;
        sub.low = Eigen::VectorXd::Constant(3, -1.0);
        sub.upp = Eigen::VectorXd::Constant(3, 1.0);
        sub.alpha = Eigen::VectorXd::Constant(3, -0.4);
        sub.beta = Eigen::VectorXd::Constant(3, 0.4);
        const auto [x, lambda] = sub.solve();
        REQUIRE(lambda.size() == 1);
        check_subproblem_kkt(sub, x, lambda);
    }

    SECTION("two constraints (log-barrier path)") {
        detail::MmaSubproblem sub;
        sub.P.resize(3, 4);
        sub.Q.resize(3, 4);
        sub.P << 0.1, 0.2, 0.3, 0.15,
                 0.05, 0.0, 0.1, 0.02,
                 0.0, 0.07, 0.0, 0.1;
        sub.Q << 0.2, 0.1, 0.05, 0.12,
                 0.0, 0.08, 0.0, 0.05,
                 0.06, 0.0, 0.09, 0.0;
        sub.r.resize(3);
        sub.r << 0.0, -0.3, -0.35;
        sub.low = Eigen::VectorXd::Constant(4, -1.0);
        sub.upp = Eigen::VectorXd::Constant(4, 1.0);
        sub.alpha = Eigen::VectorXd::Constant(4, -0.4);
        sub.beta = Eigen::VectorXd::Constant(4, 0.4);
        const auto [x, lambda] = sub.solve();
        REQUIRE(lambda.size() == 2);
        check_subproblem_kkt(sub, x, lambda);
    }
}

TEST_CASE("volume-constrained compliance minimization on a 12x4 strip") {
    GroundMesh mesh(12, 4, 1.0, 0.3, 1.0);
    mesh.fix_left_edge();
    const FilterMatrix filter = build_filter(mesh, 1.5);
    const int ne = mesh.num_elements();
    const double volfrac = 0.4, penalty = 3.0, x_min = 0.001;

    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(mesh.num_dofs(), 1);
    F(2 * mesh.node_id(12, 2) + 1, 0) = -1.0; // unit tip load pulling down

    GlobalSystem sys(mesh, Eigen::VectorXd::Ones(ne));
    auto scale = std::make_shared<double>(0.0);

    MmaProblem problem;
    problem.lower = Eigen::VectorXd::Zero(ne);
    problem.upper = Eigen::VectorXd::Ones(ne);
    problem.objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        const DensityField field = forward_chain(x, filter, penalty, 0.0, x_min);
        sys.refactorize(field.rho);
        const ExactMeanResult res = exact_mean_and_grad(F, sys);
        if (*scale == 0.0) *scale = 1.0 / res.mu;
        grad = backprop_chain(field, filter, res.grad_rho) * *scale;
        return res.mu * *scale;
    };
    problem.constraints.push_back([&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        const DensityField field = forward_chain(x, filter, penalty, 0.0, x_min);
        grad = backprop_chain(field, filter, Eigen::VectorXd::Constant(ne, 1.0 / ne)) / volfrac;
        return field.rho.mean() / volfrac - 1.0;
    });

    MmaParams params;
    params.max_iters = 300;
    const MmaResult res =
        mma_solve(problem, Eigen::VectorXd::Constant(ne, volfrac), params, 1e-4);

    const DensityField final_field = forward_chain(res.x, filter, penalty, 0.0, x_min);
    CHECK(final_field.rho.mean() == Catch::Approx(volfrac).margin(1e-3));

    // monotone decreasing objective once the asymptotes settle
    for (std::size_t k = 5; k + 1 < res.history.size(); ++k)
        CHECK(res.history[k + 1].objective <= res.history[k].objective * (1.0 + 1e-9));
}

TEST_CASE("continuation schedule construction") {
    const ContinuationSchedule schedule = ContinuationSchedule::standard();
    schedule.validate();
    REQUIRE(schedule.stages.size() == 17); // 11 penalty stages + 6 projection stages

    CHECK(schedule.stages[0].penalty == 1.0);
    CHECK(schedule.stages[0].projection == 0.0);
    CHECK(schedule.stages[0].tolerance == Catch::Approx(1e-3));
    CHECK(schedule.stages[10].penalty == 6.0);
    CHECK(schedule.stages[10].tolerance == Catch::Approx(1e-4));
    CHECK(schedule.stages[11].penalty == 6.0);
    CHECK(schedule.stages[11].projection == 0.0);
    CHECK(schedule.stages[11].tolerance == Catch::Approx(1e-3));
    CHECK(schedule.stages[16].projection == 20.0);
    CHECK(schedule.stages[16].tolerance == Catch::Approx(1e-4));

    for (int k = 0; k < 10; ++k)
        CHECK(schedule.stages[k + 1].penalty - schedule.stages[k].penalty ==
              Catch::Approx(0.5));
    for (int k = 11; k < 16; ++k)
        CHECK(schedule.stages[k + 1].projection - schedule.stages[k].projection ==
              Catch::Approx(4.0));

    // geometric tolerance interpolation inside each leg
    for (int k = 1; k < 10; ++k)
        CHECK(schedule.stages[k + 1].tolerance / schedule.stages[k].tolerance ==
              Catch::Approx(schedule.stages[1].tolerance / schedule.stages[0].tolerance));

    ContinuationSchedule bad;
    bad.stages = {{3.0, 0.0, 1e-3}, {2.0, 0.0, 1e-4}};
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    CHECK_THROWS_AS(ContinuationSchedule::standard(1.0, 6.0, -0.5), ParameterError);
}

TEST_CASE("single-stage continuation equals one mma_solve") {
    const int n = 10;
    const auto make_problem = [&]() {
        MmaProblem problem;
        problem.lower = Eigen::VectorXd::Zero(n);
        problem.upper = Eigen::VectorXd::Ones(n);
        problem.objective = [](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
            grad = 2.0 * (x.array() - 0.55).matrix();
            return (x.array() - 0.55).square().sum();
        };
        return problem;
    };

    ContinuationSchedule single;
    single.stages = {{3.0, 0.0, 1e-6}};
    MmaParams params;
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(n, 0.2);

    int factory_calls = 0;
    const ContinuationResult cont = continuation_run(
        [&](const ContinuationStage&, const Eigen::VectorXd&) {
            ++factory_calls;
            return make_problem();
        },
        single, x0, params);
    const MmaResult direct = mma_solve(make_problem(), x0, params, 1e-6);

    CHECK(factory_calls == 1);
    REQUIRE(cont.stages.size() == 1);
    CHECK(cont.stages[0].converged);
    CHECK((cont.x - direct.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(cont.stages[0].iterations == direct.iterations);
}

TEST_CASE("continuation warm-starts and attributes per-stage work") {
    const int n = 6;
    long evals = 0;
    const auto factory = [&](const ContinuationStage& stage, const Eigen::VectorXd& x_start) {
        // each stage shifts the quadratic target; warm start means the
        // factory sees the previous stage's solution
        CHECK(x_start.size() == n);
        MmaProblem problem;
        problem.lower = Eigen::VectorXd::Zero(n);
        problem.upper = Eigen::VectorXd::Ones(n);
        const double target = 0.1 * stage.penalty;
        problem.objective = [&evals, target](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
            ++evals;
            grad = 2.0 * (x.array() - target).matrix();
            return (x.array() - target).square().sum();
        };
        return problem;
    };

    ContinuationSchedule schedule;
    schedule.stages = {{1.0, 0.0, 1e-6}, {2.0, 0.0, 1e-6}, {3.0, 0.0, 1e-7}};
    MmaParams params;
    const ContinuationResult res = continuation_run(factory, schedule, Eigen::VectorXd::Zero(n),
                                                    params, [&] { return evals; });
    REQUIRE(res.stages.size() == 3);
    CHECK((res.x.array() - 0.3).cwiseAbs().maxCoeff() < 1e-5);
    long total = 0;
    for (const StageRecord& s : res.stages) {
        CHECK(s.converged);
        CHECK(s.solves == s.iterations); // one "solve" per evaluation here
        total += s.iterations;
    }
    CHECK(total == evals);
}

TEST_CASE("zero-iteration solve returns the start point untouched") {
    MmaProblem problem;
    problem.lower = Eigen::VectorXd::Zero(3);
    problem.upper = Eigen::VectorXd::Ones(3);
    int calls = 0;
    problem.objective = [&](const Eigen::VectorXd&, Eigen::VectorXd& grad) {
        ++calls;
        grad.setZero(3);
        return 0.0;
    };
    MmaParams params;
    params.max_iters = 0;
    const MmaResult res =
        mma_solve(problem, Eigen::VectorXd::Constant(3, 0.4), params, 1e-6);
    CHECK(calls == 0);
    CHECK(res.iterations == 0);
    CHECK(!res.converged);
    CHECK((res.x.array() - 0.4).cwiseAbs().maxCoeff() == 0.0);
}
