#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "stochtop/config.hpp"
#include "stochtop/continuation.hpp"
#include "stochtop/estimators.hpp"
#include "stochtop/fem.hpp"
#include "stochtop/mma.hpp"
#include "stochtop/probing.hpp"
#include "stochtop/scenarios.hpp"
#include "stochtop/simp.hpp"
#include "stochtop/stats.hpp"

namespace stochtop {

inline constexpr const char* kOutputDirEnvVar = "STOCHTOP_OUTPUT_DIR";

/// Final-run summary mirroring the paper-style tables: exact statistics are
/// always re-evaluated at the final design; estimator-side values sit next
/// to them when an approximate method drove the optimization.
struct RunReport {
    Eigen::VectorXd compliances; // exact per-scenario C at the final design
    double exact_mu = 0.0;
    double exact_sigma = std::numeric_limits<double>::quiet_NaN();
    double exact_c_max = 0.0;
    double exact_c_min = 0.0;
    double exact_objective = 0.0;

    double approx_mu = std::numeric_limits<double>::quiet_NaN();
    double approx_sigma = std::numeric_limits<double>::quiet_NaN();
    double approx_objective = std::numeric_limits<double>::quiet_NaN();
    bool approx_corrected = false;

    double gamma_mean = 1.0;
    double gamma_std = 1.0;

    double volume = 0.0;
    Eigen::VectorXd x;   // final design variables
    Eigen::VectorXd rho; // final densities (last stage's chain)

    std::vector<StageRecord> stages;
    int total_evaluations = 0;
    long solves_correction = 0;
    long solves_optimization = 0;
    long solves_final_report = 0;
    long solves_total = 0;
    double wall_seconds = 0.0;

    RunConfig config;
};

namespace detail {

inline std::string resolved_output_dir(const std::string& configured) {
    const char* env = std::getenv(kOutputDirEnvVar);
    if (env && *env) return env;
    return configured;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_pgm(const std::string& path, const GroundMesh& mesh, const Eigen::VectorXd& rho) {
    std::ofstream out(path);
    if (!out) throw ParameterError("write_pgm: cannot open " + path);
    out << "P2\n" << mesh.nx() << ' ' << mesh.ny() << "\n255\n";
    for (int ey = mesh.ny() - 1; ey >= 0; --ey) {
        for (int ex = 0; ex < mesh.nx(); ++ex) {
            const double v = rho[ex * mesh.ny() + ey];
            out << static_cast<int>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
            out << (ex + 1 == mesh.nx() ? '\n' : ' ');
        }
    }
}

inline void write_density_csv(const std::string& path, const GroundMesh& mesh,
                              const Eigen::VectorXd& rho) {
    std::ofstream out(path);
    if (!out) throw ParameterError("write_density_csv: cannot open " + path);
    for (int ey = mesh.ny() - 1; ey >= 0; --ey) {
        for (int ex = 0; ex < mesh.nx(); ++ex) {
            if (ex) out << ',';
            out << format_double(rho[ex * mesh.ny() + ey]);
        }
        out << '\n';
    }
}

inline const char* method_name(Method m) {
    switch (m) {
        case Method::kExact: return "exact";
        case Method::kTrace: return "trace";
        case Method::kDiagCorrected: return "diag_corrected";
    }
    return "?";
}

inline const char* objective_name(Objective o) {
    return o == Objective::kMean ? "mean" : "mean_std";
}

inline const char* probe_kind_name(ProbeKind k) {
    return k == ProbeKind::kHadamard ? "hadamard" : "rademacher";
}

inline std::string base_loads_text(const std::vector<PointLoad>& loads) {
    std::string out;
    for (const PointLoad& l : loads) {
        if (!out.empty()) out += "; ";
        out += format_double(l.x) + "," + format_double(l.y) + "," + format_double(l.fx) + "," +
               format_double(l.fy);
    }
    return out;
}

/// Round-trippable `key = value` dump of the effective configuration.
inline void write_config(std::ostream& out, const RunConfig& cfg) {
    out << "nx = " << cfg.nx << "\nny = " << cfg.ny << "\n";
    out << "youngs_modulus = " << format_double(cfg.youngs_modulus) << "\n";
    out << "poisson_ratio = " << format_double(cfg.poisson_ratio) << "\n";
    out << "thickness = " << format_double(cfg.thickness) << "\n";
    out << "filter_radius = " << format_double(cfg.filter_radius) << "\n";
    out << "x_min = " << format_double(cfg.x_min) << "\n";
    out << "volume_fraction = " << format_double(cfg.volume_fraction) << "\n";
    if (cfg.initial_density >= 0.0)
        out << "initial_density = " << format_double(cfg.initial_density) << "\n";
    out << "objective = " << objective_name(cfg.objective) << "\n";
    out << "std_multiplier = " << format_double(cfg.std_multiplier) << "\n";
    out << "method = " << method_name(cfg.method) << "\n";
    out << "probe_kind = " << probe_kind_name(cfg.probe_kind) << "\n";
    out << "num_probes = " << cfg.num_probes << "\n";
    out << "num_scenarios = " << cfg.num_scenarios << "\n";
    out << "rank = " << cfg.rank << "\n";
    out << "seed = " << cfg.seed << "\n";
    if (!cfg.scenario_file.empty()) out << "scenario_file = " << cfg.scenario_file << "\n";
    if (!cfg.base_loads.empty()) out << "base_loads = " << base_loads_text(cfg.base_loads) << "\n";
    out << "max_iters = " << cfg.max_iters << "\n";
    out << "mma_move = " << format_double(cfg.mma_move) << "\n";
    out << "continuation = " << (cfg.continuation ? "true" : "false") << "\n";
    out << "penalty_from = " << format_double(cfg.penalty_from) << "\n";
    out << "penalty_to = " << format_double(cfg.penalty_to) << "\n";
    out << "penalty_step = " << format_double(cfg.penalty_step) << "\n";
    out << "projection_from = " << format_double(cfg.projection_from) << "\n";
    out << "projection_to = " << format_double(cfg.projection_to) << "\n";
    out << "projection_step = " << format_double(cfg.projection_step) << "\n";
    out << "tol_from = " << format_double(cfg.tol_from) << "\n";
    out << "tol_to = " << format_double(cfg.tol_to) << "\n";
    if (!cfg.output_dir.empty()) out << "output_dir = " << cfg.output_dir << "\n";
}

inline nlohmann::ordered_json report_to_json(const RunReport& report) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json cfg;
    {
        std::ostringstream text;
        write_config(text, report.config);
        std::istringstream lines(text.str());
        std::string line;
        while (std::getline(lines, line)) {
            const auto eq = line.find(" = ");
            if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 3);
        }
    }
    j["config"] = cfg;
    j["volume"] = report.volume;
    j["exact"] = {{"mu", report.exact_mu},
                  {"sigma", report.exact_sigma},
                  {"c_max", report.exact_c_max},
                  {"c_min", report.exact_c_min},
                  {"objective", report.exact_objective}};
    if (report.config.method != Method::kExact) {
        j["approx"] = {{"mu", report.approx_mu},
                       {"sigma", report.approx_sigma},
                       {"objective", report.approx_objective},
                       {"corrected", report.approx_corrected}};
    }
    j["correction"] = {{"gamma_mean", report.gamma_mean}, {"gamma_std", report.gamma_std}};
    j["solves"] = {{"correction", report.solves_correction},
                   {"optimization", report.solves_optimization},
                   {"final_report", report.solves_final_report},
                   {"total", report.solves_total}};
    j["evaluations"] = report.total_evaluations;
    nlohmann::ordered_json stages = nlohmann::ordered_json::array();
    for (const StageRecord& s : report.stages) {
        stages.push_back({{"penalty", s.stage.penalty},
                          {"projection", s.stage.projection},
                          {"tolerance", s.stage.tolerance},
                          {"iterations", s.iterations},
                          {"converged", s.converged},
                          {"objective", s.objective},
                          {"kkt", s.kkt},
                          {"solves", s.solves},
                          {"seconds", s.seconds}});
    }
    j["stages"] = stages;
    j["wall_seconds"] = report.wall_seconds;
    j["compliances"] = std::vector<double>(report.compliances.begin(), report.compliances.end());
    return j;
}

inline void write_report_csv(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) throw ParameterError("write_report_csv: cannot open " + path);
    const bool approx = report.config.method != Method::kExact;
    const char* label = report.approx_corrected ? "corrected_approx" : "uncorrected_approx";
    out << "stat,exact" << (approx ? std::string(",") + label : std::string()) << "\n";
    auto row = [&](const char* name, double exact_value, double approx_value) {
        out << name << ',' << format_double(exact_value);
        if (approx) out << ',' << format_double(approx_value);
        out << '\n';
    };
    row("mu_C_Nmm", report.exact_mu, report.approx_mu);
    row("sigma_C_Nmm", report.exact_sigma, report.approx_sigma);
    row("objective_Nmm", report.exact_objective, report.approx_objective);
    row("C_max_Nmm", report.exact_c_max, std::numeric_limits<double>::quiet_NaN());
    row("C_min_Nmm", report.exact_c_min, std::numeric_limits<double>::quiet_NaN());
    row("V", report.volume, std::numeric_limits<double>::quiet_NaN());
    out << "time_s," << format_double(report.wall_seconds) << (approx ? "," : "") << "\n";
    out << "solves," << report.solves_total << (approx ? "," : "") << "\n";
}

inline void write_history_csv(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) throw ParameterError("write_history_csv: cannot open " + path);
    out << "stage,penalty,projection,iter,objective_scaled,constraint,kkt,max_change\n";
    int stage_index = 0;
    for (const StageRecord& s : report.stages) {
        for (const MmaIterate& it : s.iterates) {
            out << stage_index << ',' << format_double(s.stage.penalty) << ','
                << format_double(s.stage.projection) << ',' << it.iter << ','
                << format_double(it.objective) << ','
                << format_double(it.constraints.size() ? it.constraints[0]
                                                       : std::numeric_limits<double>::quiet_NaN())
                << ',' << format_double(it.kkt) << ',' << format_double(it.max_change) << '\n';
        }
        ++stage_index;
    }
}

inline void write_stages_csv(const std::string& path, const RunReport& report) {
    std::ofstream out(path);
    if (!out) throw ParameterError("write_stages_csv: cannot open " + path);
    out << "stage,penalty,projection,tolerance,iterations,converged,objective_scaled,kkt,solves,"
           "seconds\n";
    int stage_index = 0;
    for (const StageRecord& s : report.stages) {
        out << stage_index++ << ',' << format_double(s.stage.penalty) << ','
            << format_double(s.stage.projection) << ',' << format_double(s.stage.tolerance) << ','
            << s.iterations << ',' << (s.converged ? 1 : 0) << ',' << format_double(s.objective)
            << ',' << format_double(s.kkt) << ',' << s.solves << ',' << format_double(s.seconds)
            << '\n';
    }
}

} // namespace detail

/// Per-evaluation solve cost of a method (the #Lin audit unit).
inline long solves_per_evaluation(const RunConfig& cfg) {
    switch (cfg.method) {
        case Method::kExact: return cfg.num_scenarios;
        case Method::kTrace: return cfg.num_probes;
        case Method::kDiagCorrected: return 2L * cfg.num_probes;
    }
    return 0;
}

/// Assemble the run's pieces (mesh, filter, scenarios, probes) from the
/// configuration. Shared by run(), the profile and the ratio commands.
struct RunSetup {
    std::unique_ptr<GroundMesh> mesh;
    FilterMatrix filter;
    LoadScenarioSet scenarios;
    ProbingSet probes; // empty V when the method is exact and none are needed
};

inline RunSetup make_setup(const RunConfig& cfg, bool want_probes) {
    validate(cfg);
    RunSetup setup;
    setup.mesh = std::make_unique<GroundMesh>(cfg.nx, cfg.ny, cfg.youngs_modulus,
                                              cfg.poisson_ratio, cfg.thickness);
    setup.mesh->fix_left_edge();
    setup.filter = build_filter(*setup.mesh, cfg.filter_radius);
    if (!cfg.scenario_file.empty()) {
        setup.scenarios = load_scenarios(cfg.scenario_file);
        if (setup.scenarios.F.rows() != setup.mesh->num_dofs())
            throw ConfigError("config: scenario file dof count does not match the mesh");
        if (setup.scenarios.scenario_count() != cfg.num_scenarios)
            throw ConfigError("config: scenario file L does not match num_scenarios");
    } else {
        setup.scenarios =
            sample_scenarios(*setup.mesh, cfg.rank, cfg.num_scenarios, cfg.seed, cfg.base_loads);
    }
    if (want_probes) {
        // probe stream deliberately decoupled from the scenario stream
        setup.probes = cfg.probe_kind == ProbeKind::kHadamard
                           ? hadamard_probes(cfg.num_scenarios, cfg.num_probes)
                           : rademacher_probes(cfg.num_scenarios, cfg.num_probes, cfg.seed + 1);
    }
    return setup;
}

inline ContinuationSchedule make_schedule(const RunConfig& cfg) {
    if (!cfg.continuation) {
        ContinuationSchedule schedule;
        schedule.stages.push_back({cfg.penalty_to, cfg.projection_to, cfg.tol_to});
        return schedule;
    }
    return ContinuationSchedule::standard(cfg.penalty_from, cfg.penalty_to, cfg.penalty_step,
                                          cfg.projection_from, cfg.projection_to,
                                          cfg.projection_step, cfg.tol_from, cfg.tol_to);
}

/// Execute one optimization run and (unless the output directory is empty)
/// write report.json/report.csv, the density field, and the convergence
/// history into it. The STOCHTOP_OUTPUT_DIR environment variable overrides
/// the configured directory.
inline RunReport run(RunConfig cfg) {
    cfg.output_dir = detail::resolved_output_dir(cfg.output_dir);
    const auto t_start = std::chrono::steady_clock::now();

    const bool needs_probes = cfg.method != Method::kExact;
    RunSetup setup = make_setup(cfg, needs_probes);
    const GroundMesh& mesh = *setup.mesh;
    const Eigen::MatrixXd& F = setup.scenarios.F;
    const int ne = mesh.num_elements();
    const int L = cfg.num_scenarios;

    GlobalSystem sys(mesh, Eigen::VectorXd::Ones(ne));

    RunReport report;
    report.config = cfg;

    // one-time correction ratios at the full ground mesh (x = 1)
    CorrectionFactors corr;
    if (cfg.method == Method::kDiagCorrected) {
        const long before = sys.solve_count();
        corr = correction_factors(F, sys, setup.probes,
                                  /*need_std=*/cfg.objective == Objective::kMeanStd);
        report.solves_correction = sys.solve_count() - before;
    }
    report.gamma_mean = corr.gamma_mean;
    report.gamma_std = corr.gamma_std;

    MmaParams params;
    params.max_iters = cfg.max_iters;
    params.move = cfg.mma_move;

    const ContinuationSchedule schedule = make_schedule(cfg);

    const auto factory = [&](const ContinuationStage& stage,
                             const Eigen::VectorXd&) -> MmaProblem {
        // the objective is normalized by its magnitude at the stage's first
        // evaluation (the warm-start point); the volume function is not scaled
        auto scale = std::make_shared<double>(0.0);
        MmaProblem problem;
        problem.lower = Eigen::VectorXd::Zero(ne);
        problem.upper = Eigen::VectorXd::Ones(ne);
        problem.objective = [&, stage, scale](const Eigen::VectorXd& x,
                                              Eigen::VectorXd& grad) -> double {
            const DensityField field =
                forward_chain(x, setup.filter, stage.penalty, stage.projection, cfg.x_min);
            sys.refactorize(field.rho);
            double value = 0.0;
            Eigen::VectorXd grad_rho;
            switch (cfg.method) {
                case Method::kExact: {
                    const Eigen::MatrixXd U = sys.solve(F);
                    Eigen::VectorXd c(L);
                    for (int i = 0; i < L; ++i) c[i] = F.col(i).dot(U.col(i));
                    if (cfg.objective == Objective::kMean) {
                        value = c.mean();
                        grad_rho = -element_energy_sums(mesh, U, U) / L;
                    } else {
                        const WeightedObjective obj = mean_std_objective(c, cfg.std_multiplier);
                        value = obj.value;
                        grad_rho = exact_grad_weighted(obj.dvalue_dC, U, sys);
                    }
                    break;
                }
                case Method::kTrace: {
                    const TraceEstimate est = estimate_mean_and_grad(F, sys, setup.probes);
                    value = est.mu;
                    grad_rho = est.grad_rho;
                    break;
                }
                case Method::kDiagCorrected: {
                    const DiagEstimate est = estimate_diag(F, sys, setup.probes);
                    Eigen::VectorXd weights;
                    if (cfg.objective == Objective::kMean) {
                        value = corr.gamma_mean * est.compliances.mean();
                        weights = Eigen::VectorXd::Constant(L, corr.gamma_mean / L);
                    } else {
                        const WeightedObjective obj = mean_std_objective(
                            est.compliances, cfg.std_multiplier, corr.gamma_mean, corr.gamma_std);
                        value = obj.value;
                        weights = obj.dvalue_dC;
                    }
                    grad_rho = grad_weighted_compliances(weights, est.cache, F, sys);
                    break;
                }
            }
            if (*scale == 0.0) *scale = std::abs(value) > 0.0 ? 1.0 / std::abs(value) : 1.0;
            grad = backprop_chain(field, setup.filter, grad_rho) * *scale;
            return value * *scale;
        };
        problem.constraints.push_back([&, stage](const Eigen::VectorXd& x,
                                                 Eigen::VectorXd& grad) -> double {
            const DensityField field =
                forward_chain(x, setup.filter, stage.penalty, stage.projection, cfg.x_min);
            const Eigen::VectorXd dv = Eigen::VectorXd::Constant(ne, 1.0 / ne);
            grad = backprop_chain(field, setup.filter, dv) / cfg.volume_fraction;
            return field.rho.mean() / cfg.volume_fraction - 1.0;
        });
        return problem;
    };

    const double x0_value = cfg.initial_density >= 0.0 ? cfg.initial_density : cfg.volume_fraction;
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(ne, x0_value);

    const long solves_before_opt = sys.solve_count();
    ContinuationResult opt = continuation_run(factory, schedule, x0, params,
                                              [&] { return sys.solve_count(); });
    report.solves_optimization = sys.solve_count() - solves_before_opt;
    report.stages = std::move(opt.stages);
    for (const StageRecord& s : report.stages) report.total_evaluations += s.iterations;

    // final exact statistics (plus the estimator's own value when applicable)
    const ContinuationStage last = schedule.stages.back();
    const DensityField final_field =
        forward_chain(opt.x, setup.filter, last.penalty, last.projection, cfg.x_min);
    sys.refactorize(final_field.rho);
    const long solves_before_final = sys.solve_count();
    report.compliances = exact_compliances(F, sys);
    report.exact_mu = report.compliances.mean();
    if (L >= 2) {
        const ComplianceStats s = stats(report.compliances);
        report.exact_sigma = s.sigma;
        report.exact_c_max = s.c_max;
        report.exact_c_min = s.c_min;
    } else {
        report.exact_c_max = report.exact_c_min = report.compliances[0];
    }
    report.exact_objective = cfg.objective == Objective::kMean
                                 ? report.exact_mu
                                 : report.exact_mu + cfg.std_multiplier * report.exact_sigma;
    if (cfg.method == Method::kTrace) {
        const DiagEstimate est = estimate_diag(F, sys, setup.probes);
        report.approx_mu = est.compliances.mean();
        if (L >= 2) report.approx_sigma = stats(est.compliances).sigma;
        report.approx_objective = report.approx_mu;
        report.approx_corrected = false;
    } else if (cfg.method == Method::kDiagCorrected) {
        const DiagEstimate est = estimate_diag(F, sys, setup.probes);
        report.approx_mu = corr.gamma_mean * est.compliances.mean();
        if (L >= 2) report.approx_sigma = corr.gamma_std * stats(est.compliances).sigma;
        report.approx_objective = cfg.objective == Objective::kMean
                                      ? report.approx_mu
                                      : report.approx_mu + cfg.std_multiplier * report.approx_sigma;
        report.approx_corrected = true;
    }
    report.solves_final_report = sys.solve_count() - solves_before_final;
    report.solves_total = sys.solve_count();

    report.volume = final_field.rho.mean();
    report.x = opt.x;
    report.rho = final_field.rho;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    if (!cfg.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.output_dir);
        const fs::path dir(cfg.output_dir);
        {
            std::ofstream out(dir / "report.json");
            out << detail::report_to_json(report).dump(2) << '\n';
        }
        detail::write_report_csv((dir / "report.csv").string(), report);
        detail::write_pgm((dir / "density.pgm").string(), mesh, report.rho);
        detail::write_density_csv((dir / "density.csv").string(), mesh, report.rho);
        detail::write_history_csv((dir / "history.csv").string(), report);
        detail::write_stages_csv((dir / "stages.csv").string(), report);
        {
            std::ofstream out(dir / "config_resolved.txt");
            detail::write_config(out, report.config);
        }
    }
    return report;
}

/// One accuracy-profile row: estimator values for one probe count and kind.
struct ProfileRow {
    std::string kind; // "exact", "hadamard", "rademacher"
    int probes = 0;
    double mu = 0.0;
    double sigma = 0.0;
};

struct ProfileResult {
    std::vector<ProfileRow> rows; // first row is the exact reference
};

/// Estimator accuracy versus probe count at the full ground mesh design.
/// The trace estimate of the mean equals the scenario average of the
/// diagonal estimate under the same probes, so one pass yields both values.
inline ProfileResult accuracy_profile(const RunConfig& cfg_in, const std::vector<int>& probe_counts,
                                      bool centered = false, bool write = true) {
    RunConfig cfg = cfg_in;
    cfg.output_dir = detail::resolved_output_dir(cfg.output_dir);
    RunSetup setup = make_setup(cfg, /*want_probes=*/false);
    if (probe_counts.empty()) throw ParameterError("accuracy_profile: empty probe count list");
    const int order = hadamard_order(cfg.num_scenarios);
    for (int n : probe_counts)
        if (n < 1 || n > order)
            throw ParameterError("accuracy_profile: probe counts must lie in [1, Hadamard order]");

    const GroundMesh& mesh = *setup.mesh;
    GlobalSystem sys(mesh, Eigen::VectorXd::Ones(mesh.num_elements()));
    const Eigen::MatrixXd& F = setup.scenarios.F;

    ProfileResult result;
    const Eigen::VectorXd exact = exact_compliances(F, sys);
    result.rows.push_back({"exact", 0, exact.mean(),
                           cfg.num_scenarios >= 2 ? stats(exact).sigma
                                                  : std::numeric_limits<double>::quiet_NaN()});
    int seed_offset = 1;
    for (const char* kind : {"hadamard", "rademacher"}) {
        for (int n : probe_counts) {
            const ProbingSet probes =
                kind == std::string("hadamard")
                    ? hadamard_probes(cfg.num_scenarios, n)
                    : rademacher_probes(cfg.num_scenarios, n, cfg.seed + seed_offset++);
            const Eigen::VectorXd c_hat = centered
                                              ? centered_diag_estimate(F, sys, probes)
                                              : estimate_diag(F, sys, probes).compliances;
            result.rows.push_back({kind, n, c_hat.mean(),
                                   cfg.num_scenarios >= 2
                                       ? stats(c_hat).sigma
                                       : std::numeric_limits<double>::quiet_NaN()});
        }
    }

    if (write && !cfg.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.output_dir);
        std::ofstream out(fs::path(cfg.output_dir) / "profile.csv");
        out << "kind,probes,mu_hat,sigma_hat,mu_exact,sigma_exact\n";
        for (const ProfileRow& row : result.rows)
            out << row.kind << ',' << row.probes << ',' << detail::format_double(row.mu) << ','
                << detail::format_double(row.sigma) << ','
                << detail::format_double(result.rows.front().mu) << ','
                << detail::format_double(result.rows.front().sigma) << '\n';
    }
    return result;
}

struct RatioHistogram {
    double design_mean = 0.0;
    RatioSamples samples;
};

/// Correcting-ratio samples over random designs for each design-mean value;
/// one CSV per mean for external plotting.
inline std::vector<RatioHistogram> ratio_histograms(const RunConfig& cfg_in,
                                                    const std::vector<double>& means,
                                                    int n_designs, double design_sd = 0.2,
                                                    bool write = true) {
    RunConfig cfg = cfg_in;
    cfg.output_dir = detail::resolved_output_dir(cfg.output_dir);
    for (double m : means)
        if (!(m > 0.0 && m < 1.0))
            throw ParameterError("ratio_histograms: design means must lie in (0,1)");
    RunSetup setup = make_setup(cfg, /*want_probes=*/true);

    std::vector<RatioHistogram> out;
    int index = 0;
    for (double design_mean : means) {
        RatioHistogram h;
        h.design_mean = design_mean;
        h.samples = sample_correcting_ratios(*setup.mesh, setup.scenarios.F, setup.probes,
                                             n_designs, design_mean, design_sd,
                                             cfg.seed + 101 + static_cast<std::uint64_t>(index),
                                             cfg.x_min);
        out.push_back(std::move(h));
        ++index;
    }

    if (write && !cfg.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.output_dir);
        for (const RatioHistogram& h : out) {
            char name[64];
            std::snprintf(name, sizeof name, "ratios_mean_%.2f.csv", h.design_mean);
            std::ofstream file(fs::path(cfg.output_dir) / name);
            file << "mean_ratio,std_ratio\n";
            for (std::size_t i = 0; i < h.samples.mean_ratio.size(); ++i)
                file << detail::format_double(h.samples.mean_ratio[i]) << ','
                     << detail::format_double(h.samples.std_ratio[i]) << '\n';
        }
    }
    return out;
}

} // namespace stochtop
