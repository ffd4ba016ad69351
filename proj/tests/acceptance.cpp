// Acceptance suite: one pass/fail line per criterion, nonzero exit code on
// any failure. Criteria are property- and oracle-based; the end-to-end runs
// use the 60x20 cantilever at desk scale.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "stochtop/stochtop.hpp"

using namespace stochtop;

namespace {

int failures = 0;

void criterion(int number, const std::string& name, double time_limit_s,
               const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
        ok = false;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (time_limit_s > 0.0 && seconds > time_limit_s) {
        ok = false;
        detail += (detail.empty() ? "" : "; ") + std::string("time limit exceeded");
    }
    std::printf("%s  criterion %2d: %s (%s) [%.1f s]\n", ok ? "PASS" : "FAIL", number,
                name.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
}

GroundMesh cantilever(int nx, int ny) {
    GroundMesh mesh(nx, ny, 1.0, 0.3, 1.0);
    mesh.fix_left_edge();
    return mesh;
}

Eigen::VectorXd random_in(int n, std::mt19937_64& rng, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * detail::uniform01(rng);
    return v;
}

Eigen::MatrixXd random_free_loads(const GroundMesh& mesh, int count, std::mt19937_64& rng) {
    Eigen::MatrixXd F(mesh.num_dofs(), count);
    for (int j = 0; j < count; ++j)
        for (int d = 0; d < mesh.num_dofs(); ++d)
            F(d, j) = mesh.dof_fixed(d) ? 0.0 : detail::standard_normal(rng);
    return F;
}

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-300});
}

template <class Fn>
double central_fd(Fn&& f, const Eigen::VectorXd& x, const Eigen::VectorXd& dir, double h) {
    return (f(x + h * dir) - f(x - h * dir)) / (2.0 * h);
}

RunConfig paper_scale_config() {
    RunConfig cfg;
    cfg.nx = 60;
    cfg.ny = 20;
    cfg.filter_radius = 2.0;
    cfg.volume_fraction = 0.4;
    cfg.num_scenarios = 64;
    cfg.rank = 10;
    cfg.seed = 2024;
    cfg.continuation = true;
    cfg.output_dir = ""; // no artifacts from the acceptance binary
    return cfg;
}

} // namespace

int main() {
    // 1. Exactness identity: full Hadamard probe sets reproduce C and mu_C.
    criterion(1, "exactness identity for L in {4,8,64}, N = L Hadamard probes", 10.0,
              [](std::string& detail) {
                  std::mt19937_64 rng(1001);
                  const GroundMesh mesh = cantilever(8, 4);
                  GlobalSystem sys(mesh, Eigen::VectorXd::Ones(mesh.num_elements()));
                  double worst = 0.0;
                  for (int L : {4, 8, 64}) {
                      sys.refactorize(random_in(mesh.num_elements(), rng, 0.3, 1.0));
                      const Eigen::MatrixXd F = random_free_loads(mesh, L, rng);
                      const Eigen::VectorXd exact = exact_compliances(F, sys);
                      const ProbingSet probes = hadamard_probes(L, L);
                      const DiagEstimate diag = estimate_diag(F, sys, probes);
                      const TraceEstimate trace = estimate_mean_and_grad(F, sys, probes);
                      for (int i = 0; i < L; ++i)
                          worst = std::max(worst, rel_err(diag.compliances[i], exact[i]));
                      worst = std::max(worst, rel_err(trace.mu, exact.mean()));
                  }
                  std::ostringstream os;
                  os << "max rel err " << worst;
                  detail = os.str();
                  return worst <= 1e-10;
              });

    // 2. Unbiasedness of the Rademacher trace estimator over 500 seeds.
    criterion(2, "Rademacher trace estimator unbiased within 3 SE over 500 seeds", 60.0,
              [](std::string& detail) {
                  const GroundMesh mesh = cantilever(10, 5);
                  const int L = 32, N = 4, seeds = 500;
                  const LoadScenarioSet set = sample_scenarios(mesh, 6, L, 321);
                  std::mt19937_64 rng(1002);
                  GlobalSystem sys(mesh, random_in(mesh.num_elements(), rng, 0.4, 1.0));
                  const double mu = exact_compliances(set.F, sys).mean();
                  Eigen::VectorXd estimates(seeds);
                  for (int s = 0; s < seeds; ++s)
                      estimates[s] =
                          estimate_mean_and_grad(set.F, sys, rademacher_probes(L, N, 5000 + s)).mu;
                  const double avg = estimates.mean();
                  const double sd =
                      std::sqrt((estimates.array() - avg).square().sum() / (seeds - 1));
                  const double se = sd / std::sqrt(double(seeds));
                  std::ostringstream os;
                  os << "|avg - mu| = " << std::abs(avg - mu) << ", 3 SE = " << 3.0 * se;
                  detail = os.str();
                  return std::abs(avg - mu) <= 3.0 * se;
              });

    // 3. All four gradient paths against central finite differences.
    criterion(3, "four gradient paths match finite differences (rel err <= 1e-5)", 120.0,
              [](std::string& detail) {
                  const GroundMesh mesh = cantilever(12, 4);
                  const int ne = mesh.num_elements();
                  const int L = 8, N = 4;
                  const FilterMatrix filter = build_filter(mesh, 1.5);
                  const LoadScenarioSet set = sample_scenarios(mesh, 5, L, 99);
                  const Eigen::MatrixXd& F = set.F;
                  const ProbingSet probes = hadamard_probes(L, N);
                  std::mt19937_64 rng(1003);
                  const Eigen::VectorXd rho0 = random_in(ne, rng, 0.3, 0.9);
                  GlobalSystem sys(mesh, rho0);
                  double worst = 0.0;
                  const double h = 1e-6;

                  // (a) exact mean adjoint
                  sys.refactorize(rho0);
                  const Eigen::VectorXd grad_a = exact_mean_and_grad(F, sys).grad_rho;
                  const auto exact_mu = [&](const Eigen::VectorXd& r) {
                      sys.refactorize(r);
                      return exact_compliances(F, sys).mean();
                  };
                  // (b) trace-estimate gradient with frozen probes
                  sys.refactorize(rho0);
                  const Eigen::VectorXd grad_b = estimate_mean_and_grad(F, sys, probes).grad_rho;
                  const auto trace_mu = [&](const Eigen::VectorXd& r) {
                      sys.refactorize(r);
                      return estimate_mean_and_grad(F, sys, probes).mu;
                  };
                  // (c) JVP gradient of C_hat . w with frozen probes
                  const Eigen::VectorXd w = random_in(L, rng, -1.0, 1.0);
                  sys.refactorize(rho0);
                  const DiagEstimate diag = estimate_diag(F, sys, probes);
                  const Eigen::VectorXd grad_c = grad_weighted_compliances(w, diag.cache, F, sys);
                  const auto jvp_value = [&](const Eigen::VectorXd& r) {
                      sys.refactorize(r);
                      return w.dot(estimate_diag(F, sys, probes).compliances);
                  };
                  // (d) full chain: design -> rho -> C -> mean + 2 std (exact)
                  const Eigen::VectorXd x0 = random_in(ne, rng, 0.2, 0.8);
                  const auto chain_value = [&](const Eigen::VectorXd& x) {
                      const DensityField field = forward_chain(x, filter, 3.0, 4.0, 0.001);
                      sys.refactorize(field.rho);
                      const Eigen::VectorXd c = exact_compliances(F, sys);
                      return mean_std_objective(c, 2.0).value;
                  };
                  const DensityField field0 = forward_chain(x0, filter, 3.0, 4.0, 0.001);
                  sys.refactorize(field0.rho);
                  {
                      const Eigen::MatrixXd U = sys.solve(F);
                      Eigen::VectorXd c(L);
                      for (int i = 0; i < L; ++i) c[i] = F.col(i).dot(U.col(i));
                      const WeightedObjective obj = mean_std_objective(c, 2.0);
                      const Eigen::VectorXd grad_rho = exact_grad_weighted(obj.dvalue_dC, U, sys);
                      const Eigen::VectorXd grad_d = backprop_chain(field0, filter, grad_rho);

                      for (int k = 0; k < 20; ++k) {
                          Eigen::VectorXd dir = random_in(ne, rng, -1.0, 1.0);
                          dir.normalize();
                          worst = std::max(worst,
                                           rel_err(grad_a.dot(dir), central_fd(exact_mu, rho0, dir, h)));
                          worst = std::max(worst,
                                           rel_err(grad_b.dot(dir), central_fd(trace_mu, rho0, dir, h)));
                          worst = std::max(worst,
                                           rel_err(grad_c.dot(dir), central_fd(jvp_value, rho0, dir, h)));
                          worst = std::max(worst,
                                           rel_err(grad_d.dot(dir), central_fd(chain_value, x0, dir, h)));
                      }
                  }
                  std::ostringstream os;
                  os << "max rel err " << worst;
                  detail = os.str();
                  return worst <= 1e-5;
              });

    // 4. Solve-count audit per value+gradient evaluation.
    criterion(4, "solve counts: exact = L, trace = N, diag JVP = 2N", 30.0,
              [](std::string& detail) {
                  const GroundMesh mesh = cantilever(10, 4);
                  const int L = 12, N = 5;
                  const LoadScenarioSet set = sample_scenarios(mesh, 5, L, 7);
                  const ProbingSet probes = rademacher_probes(L, N, 3);
                  GlobalSystem sys(mesh, Eigen::VectorXd::Constant(mesh.num_elements(), 0.6));

                  long before = sys.solve_count();
                  exact_mean_and_grad(set.F, sys);
                  const long exact_cost = sys.solve_count() - before;

                  before = sys.solve_count();
                  estimate_mean_and_grad(set.F, sys, probes);
                  const long trace_cost = sys.solve_count() - before;

                  before = sys.solve_count();
                  const DiagEstimate diag = estimate_diag(set.F, sys, probes);
                  grad_weighted_compliances(Eigen::VectorXd::Ones(L), diag.cache, set.F, sys);
                  const long jvp_cost = sys.solve_count() - before;

                  std::ostringstream os;
                  os << "exact " << exact_cost << "/" << L << ", trace " << trace_cost << "/" << N
                     << ", diag " << jvp_cost << "/" << 2 * N;
                  detail = os.str();
                  return exact_cost == L && trace_cost == N && jvp_cost == 2 * N;
              });

    // 5. Lemma 1 bilinear-form bounds over 1e4 random SPD triples.
    criterion(5, "Lemma 1 bounds on 10^4 random SPD triples", 60.0, [](std::string& detail) {
        std::mt19937_64 rng(1005);
        const int dim = 8;
        int violations = 0;
        double worst_slack = 0.0;
        for (int trial = 0; trial < 10000; ++trial) {
            Eigen::MatrixXd R(dim, dim);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) R(i, j) = stochtop::detail::standard_normal(rng);
            const Eigen::MatrixXd K =
                R.transpose() * R + 1e-6 * Eigen::MatrixXd::Identity(dim, dim);
            Eigen::VectorXd u(dim), v(dim);
            for (int i = 0; i < dim; ++i) {
                u[i] = stochtop::detail::standard_normal(rng);
                v[i] = stochtop::detail::standard_normal(rng);
            }
            const auto check = [&](const Eigen::MatrixXd& M) {
                const double cross = std::abs(u.dot(M * v));
                const double sum_form = (u + v).dot(M * (u + v));
                const double diag_form = u.dot(M * u) + v.dot(M * v);
                const double semidef_bound =
                    0.5 * std::max(std::abs(sum_form), std::abs(diag_form));
                const double general_bound =
                    0.5 * (std::abs(sum_form) + std::abs(u.dot(M * u)) + std::abs(v.dot(M * v)));
                const double scale = std::max({1.0, semidef_bound, cross});
                if (cross > semidef_bound + 1e-12 * scale) ++violations;
                if (cross > general_bound + 1e-12 * scale) ++violations;
                worst_slack = std::max(worst_slack, (cross - semidef_bound) / scale);
            };
            check(K);          // positive semi-definite case
            check((-K).eval()); // negative semi-definite case
        }
        std::ostringstream os;
        os << violations << " violations, worst normalized slack " << worst_slack;
        detail = os.str();
        return violations == 0;
    });

    // 6. Statistics partials: exact mean weights, FD-checked sigma and var.
    criterion(6, "statistics partials (mean exact, sigma/var FD <= 1e-8, zero sums)", 30.0,
              [](std::string& detail) {
                  std::mt19937_64 rng(1006);
                  double worst = 0.0;
                  bool mean_exact = true;
                  double worst_sum = 0.0;
                  for (int L : {2, 5, 30}) {
                      const Eigen::VectorXd c = random_in(L, rng, 1.0, 9.0);
                      const Eigen::VectorXd wm = stat_partials(c, Stat::kMean);
                      for (int i = 0; i < L; ++i)
                          if (wm[i] != 1.0 / L) mean_exact = false;
                      const Eigen::VectorXd ws = stat_partials(c, Stat::kStd);
                      const Eigen::VectorXd wv = stat_partials(c, Stat::kVar);
                      worst_sum = std::max({worst_sum, std::abs(ws.sum()), std::abs(wv.sum())});
                      const auto sigma_of = [](const Eigen::VectorXd& v) { return stats(v).sigma; };
                      const auto var_of = [](const Eigen::VectorXd& v) { return stats(v).var; };
                      Eigen::VectorXd ws_fd(L), wv_fd(L);
                      for (int i = 0; i < L; ++i) {
                          const Eigen::VectorXd axis = Eigen::VectorXd::Unit(L, i);
                          ws_fd[i] = central_fd(sigma_of, c, axis, 1e-5);
                          wv_fd[i] = central_fd(var_of, c, axis, 1e-5);
                      }
                      worst = std::max({worst, (ws_fd - ws).norm() / ws.norm(),
                                        (wv_fd - wv).norm() / wv.norm()});
                  }
                  std::ostringstream os;
                  os << "max FD rel err " << worst << ", max |sum| " << worst_sum;
                  detail = os.str();
                  return mean_exact && worst <= 1e-8 && worst_sum <= 1e-12;
              });

    // 7. Zero-mean loads: off-diagonal gram ratios sum to -1.
    criterion(7, "centered loads satisfy sum_{j!=i} a_ij/a_ii = -1 (+-1e-9)", 30.0,
              [](std::string& detail) {
                  const GroundMesh mesh = cantilever(6, 3);
                  std::mt19937_64 rng(1007);
                  GlobalSystem sys(mesh, random_in(mesh.num_elements(), rng, 0.3, 1.0));
                  Eigen::MatrixXd F = random_free_loads(mesh, 12, rng);
                  F.colwise() -= F.rowwise().mean().eval();
                  const Eigen::MatrixXd A = F.transpose() * sys.solve(F);
                  double worst = 0.0;
                  for (int i = 0; i < 12; ++i) {
                      const double ratio_sum = (A.row(i).sum() - A(i, i)) / A(i, i);
                      worst = std::max(worst, std::abs(ratio_sum + 1.0));
                  }
                  std::ostringstream os;
                  os << "max |sum + 1| = " << worst;
                  detail = os.str();
                  return worst <= 1e-9;
              });

    // 8. End-to-end mean minimization at paper scale (exact vs trace).
    criterion(8, "60x20 mean minimization: exact and trace runs, V = 0.400, within 25%", 1800.0,
              [](std::string& detail) {
                  RunConfig exact_cfg = paper_scale_config();
                  exact_cfg.method = Method::kExact;
                  exact_cfg.objective = Objective::kMean;
                  const RunReport exact_run = run(exact_cfg);

                  RunConfig trace_cfg = paper_scale_config();
                  trace_cfg.method = Method::kTrace;
                  trace_cfg.objective = Objective::kMean;
                  trace_cfg.probe_kind = ProbeKind::kHadamard;
                  trace_cfg.num_probes = 8;
                  const RunReport trace_run = run(trace_cfg);

                  const double gap =
                      std::abs(trace_run.exact_mu - exact_run.exact_mu) / exact_run.exact_mu;
                  std::ostringstream os;
                  os << "exact mu " << exact_run.exact_mu << " (V " << exact_run.volume
                     << "), trace-design mu " << trace_run.exact_mu << " (V " << trace_run.volume
                     << "), gap " << gap * 100.0 << "%";
                  detail = os.str();
                  return std::abs(exact_run.volume - 0.4) <= 1e-3 &&
                         std::abs(trace_run.volume - 0.4) <= 1e-3 && gap <= 0.25;
              });

    // 9. Corrected mean-std run: corrected approx vs exact re-evaluation.
    criterion(9, "60x20 corrected mean-std run within 5% of its exact re-evaluation", 1800.0,
              [](std::string& detail) {
                  RunConfig cfg = paper_scale_config();
                  cfg.method = Method::kDiagCorrected;
                  cfg.objective = Objective::kMeanStd;
                  cfg.std_multiplier = 2.0;
                  cfg.probe_kind = ProbeKind::kHadamard;
                  cfg.num_probes = 8;
                  const RunReport report = run(cfg);
                  const double gap =
                      std::abs(report.approx_objective - report.exact_objective) /
                      report.exact_objective;
                  std::ostringstream os;
                  os << "corrected " << report.approx_objective << ", exact "
                     << report.exact_objective << ", gap " << gap * 100.0 << "%, V "
                     << report.volume;
                  detail = os.str();
                  return gap <= 0.05 && std::abs(report.volume - 0.4) <= 1e-3;
              });

    // 10. Continuation schedule: 17 subproblems, tolerance endpoints.
    criterion(10, "schedule: 17 subproblems (11 p + 6 beta), tolerances 1e-3 -> 1e-4", 60.0,
              [](std::string& detail) {
                  const ContinuationSchedule schedule = ContinuationSchedule::standard();
                  bool ok = schedule.stages.size() == 17;
                  int p_stages = 0, beta_stages = 0;
                  for (std::size_t k = 0; k < schedule.stages.size(); ++k)
                      (k < 11 ? p_stages : beta_stages) += 1;
                  ok = ok && p_stages == 11 && beta_stages == 6;
                  ok = ok && schedule.stages[0].tolerance == 1e-3 &&
                       rel_err(schedule.stages[10].tolerance, 1e-4) < 1e-12 &&
                       schedule.stages[11].tolerance == 1e-3 &&
                       rel_err(schedule.stages[16].tolerance, 1e-4) < 1e-12;
                  ok = ok && schedule.stages[0].penalty == 1.0 &&
                       schedule.stages[10].penalty == 6.0 &&
                       schedule.stages[16].projection == 20.0;

                  // a full 17-stage run executes 17 subproblems
                  RunConfig cfg;
                  cfg.nx = 6;
                  cfg.ny = 2;
                  cfg.filter_radius = 1.5;
                  cfg.num_scenarios = 4;
                  cfg.rank = 4;
                  cfg.seed = 5;
                  cfg.max_iters = 1;
                  cfg.continuation = true;
                  cfg.output_dir = "";
                  const RunReport report = run(cfg);
                  ok = ok && report.stages.size() == 17;

                  std::ostringstream os;
                  os << schedule.stages.size() << " stages, run executed " << report.stages.size();
                  detail = os.str();
                  return ok;
              });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures;
}
