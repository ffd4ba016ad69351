// Command-line front end: optimization runs, estimator accuracy profiles,
// correcting-ratio histograms, and scenario export/import.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "stochtop/stochtop.hpp"

namespace {

int fail_with_json(const std::string& type, const std::string& message) {
    nlohmann::ordered_json err;
    err["error"] = {{"type", type}, {"message", message}};
    std::cerr << err.dump() << '\n';
    return 1;
}

stochtop::RunConfig load_config(const std::string& path, const std::string& output_override) {
    stochtop::RunConfig cfg = stochtop::parse_config_file(path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    stochtop::validate(cfg);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochtop: stochastic compliance topology optimization"};
    app.require_subcommand(1);

    std::string config_path;
    std::string output_dir;

    auto* cmd_run = app.add_subcommand("run", "execute an optimization run");
    cmd_run->add_option("--config", config_path, "run configuration file")->required();
    cmd_run->add_option("--output-dir", output_dir, "override the configured output directory");

    std::vector<int> probe_counts;
    bool centered = false;
    auto* cmd_profile =
        app.add_subcommand("profile", "estimator accuracy versus number of probing vectors");
    cmd_profile->add_option("--config", config_path, "run configuration file")->required();
    cmd_profile->add_option("--probes", probe_counts,
                            "probe counts to evaluate (default: 10,100,...,1000 clipped to the "
                            "Hadamard order)");
    cmd_profile->add_option("--output-dir", output_dir, "override the output directory");
    cmd_profile->add_flag("--centered", centered, "center the loads before estimating");

    std::vector<double> means{0.1, 0.3, 0.5, 0.7, 0.9};
    int n_designs = 500;
    double design_sd = 0.2;
    auto* cmd_ratios =
        app.add_subcommand("ratios", "correcting-ratio samples over random designs");
    cmd_ratios->add_option("--config", config_path, "run configuration file")->required();
    cmd_ratios->add_option("--means", means, "truncated-normal design means");
    cmd_ratios->add_option("--designs", n_designs, "designs per mean");
    cmd_ratios->add_option("--sd", design_sd, "truncated-normal standard deviation");
    cmd_ratios->add_option("--output-dir", output_dir, "override the output directory");

    auto* cmd_scen = app.add_subcommand("scenarios", "export or import load scenario matrices");
    cmd_scen->require_subcommand(1);
    std::string scen_file;
    auto* cmd_export = cmd_scen->add_subcommand("export", "sample scenarios and write them to CSV");
    cmd_export->add_option("--config", config_path, "run configuration file")->required();
    cmd_export->add_option("--out", scen_file, "destination CSV path")->required();
    auto* cmd_import = cmd_scen->add_subcommand("import", "validate a scenario CSV against a config");
    cmd_import->add_option("--config", config_path, "run configuration file")->required();
    cmd_import->add_option("--file", scen_file, "scenario CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_run->parsed()) {
            const stochtop::RunReport report = stochtop::run(load_config(config_path, output_dir));
            std::printf("objective (exact) = %.6g Nmm, V = %.4f, solves = %ld, %.1f s\n",
                        report.exact_objective, report.volume, report.solves_total,
                        report.wall_seconds);
            std::printf("artifacts written to %s\n", report.config.output_dir.c_str());
        } else if (cmd_profile->parsed()) {
            const stochtop::RunConfig cfg = load_config(config_path, output_dir);
            if (probe_counts.empty()) {
                const int order = stochtop::hadamard_order(cfg.num_scenarios);
                for (int n : {10, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000})
                    if (n <= order) probe_counts.push_back(n);
                if (probe_counts.empty()) probe_counts.push_back(order);
            }
            const auto rows = stochtop::accuracy_profile(cfg, probe_counts, centered);
            std::printf("profile.csv written: %zu rows (exact mu = %.6g, sigma = %.6g)\n",
                        rows.rows.size(), rows.rows.front().mu, rows.rows.front().sigma);
        } else if (cmd_ratios->parsed()) {
            const stochtop::RunConfig cfg = load_config(config_path, output_dir);
            const auto hists = stochtop::ratio_histograms(cfg, means, n_designs, design_sd);
            std::printf("ratio CSVs written for %zu design means, %d designs each\n", hists.size(),
                        n_designs);
        } else if (cmd_export->parsed()) {
            const stochtop::RunConfig cfg = load_config(config_path, "");
            stochtop::GroundMesh mesh(cfg.nx, cfg.ny, cfg.youngs_modulus, cfg.poisson_ratio,
                                      cfg.thickness);
            mesh.fix_left_edge();
            const auto set = stochtop::sample_scenarios(mesh, cfg.rank, cfg.num_scenarios,
                                                        cfg.seed, cfg.base_loads);
            stochtop::save_scenarios(scen_file, set);
            std::printf("wrote %d scenarios (n_dofs = %d, R = %d, seed = %llu) to %s\n",
                        set.scenario_count(), static_cast<int>(set.F.rows()), set.rank,
                        static_cast<unsigned long long>(set.seed), scen_file.c_str());
        } else if (cmd_import->parsed()) {
            const stochtop::RunConfig cfg = load_config(config_path, "");
            const auto set = stochtop::load_scenarios(scen_file);
            stochtop::GroundMesh mesh(cfg.nx, cfg.ny, cfg.youngs_modulus, cfg.poisson_ratio,
                                      cfg.thickness);
            if (set.F.rows() != mesh.num_dofs())
                throw stochtop::ConfigError("scenario file dof count does not match the mesh");
            nlohmann::ordered_json info;
            info["n_dofs"] = set.F.rows();
            info["L"] = set.scenario_count();
            info["R"] = set.rank;
            info["seed"] = set.seed;
            info["max_load_norm"] = set.F.colwise().norm().maxCoeff();
            std::cout << info.dump() << '\n';
        }
    } catch (const stochtop::ConfigError& e) {
        return fail_with_json("config", e.what());
    } catch (const stochtop::ParameterError& e) {
        return fail_with_json("parameter", e.what());
    } catch (const stochtop::AssemblyError& e) {
        return fail_with_json("assembly", e.what());
    } catch (const stochtop::OptimizerError& e) {
        return fail_with_json("optimizer", e.what());
    } catch (const std::exception& e) {
        return fail_with_json("runtime", e.what());
    }
    return 0;
}
