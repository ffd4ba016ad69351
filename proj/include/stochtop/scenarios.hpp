#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stochtop/errors.hpp"
#include "stochtop/fem.hpp"
#include "stochtop/random.hpp"

namespace stochtop {

/// A concentrated nodal load: position in mm (must hit a mesh node) and
/// force components in N.
struct PointLoad {
    double x = 0.0;
    double y = 0.0;
    double fx = 0.0;
    double fy = 0.0;
};

/// Tip load pulling down, plus two 45-degree loads on the top and bottom
/// faces, mirroring the documented cantilever setup. Positions scale with
/// the mesh so the 60x20 default puts them at (60,10), (30,20), (40,0).
inline std::vector<PointLoad> default_base_loads(const GroundMesh& mesh) {
    const double s = std::sqrt(2.0) / 2.0;
    const double nx = mesh.nx();
    const double ny = mesh.ny();
    return {
        {nx, std::round(ny / 2.0), 0.0, -1.0},
        {std::round(nx / 2.0), ny, s, -s},
        {std::round(2.0 * nx / 3.0), 0.0, -s, -s},
    };
}

/// Sampled loading scenarios: columns of F are the per-scenario nodal load
/// vectors, zero at every Dirichlet dof.
struct LoadScenarioSet {
    Eigen::MatrixXd F; // n_dofs x L
    int rank = 0;      // R
    std::uint64_t seed = 0;

    int scenario_count() const noexcept { return static_cast<int>(F.cols()); }
};

/// f_i = s1 F1 + s2 F2 + s3 F3 + (1/(R-3)) sum_{j=4..R} s_j F_j with
/// s1..s3 ~ U(-2,2) per scenario, F_j fixed standard-normal vectors on the
/// free surface dofs, and s_j ~ N(0,1) per scenario. Deterministic by seed.
inline LoadScenarioSet sample_scenarios(const GroundMesh& mesh, int rank, int scenario_count,
                                        std::uint64_t seed,
                                        const std::vector<PointLoad>& base_loads = {}) {
    if (rank < 4) throw ParameterError("sample_scenarios: rank R must be at least 4");
    if (scenario_count < 1) throw ParameterError("sample_scenarios: need at least one scenario");

    const std::vector<PointLoad> bases =
        base_loads.empty() ? default_base_loads(mesh) : base_loads;
    if (bases.size() != 3)
        throw ParameterError("sample_scenarios: exactly three base loads are required");

    const int n = mesh.num_dofs();
    Eigen::MatrixXd components = Eigen::MatrixXd::Zero(n, rank);
    for (int b = 0; b < 3; ++b) {
        const PointLoad& load = bases[static_cast<std::size_t>(b)];
        const double ix = load.x;
        const double iy = load.y;
        if (ix != std::floor(ix) || iy != std::floor(iy))
            throw ParameterError("sample_scenarios: base load position must coincide with a node");
        const int node = mesh.node_id(static_cast<int>(ix), static_cast<int>(iy));
        if (mesh.dof_fixed(2 * node) || mesh.dof_fixed(2 * node + 1))
            throw ParameterError("sample_scenarios: base load applied to a Dirichlet node");
        components(2 * node, b) = load.fx;
        components(2 * node + 1, b) = load.fy;
    }

    std::mt19937_64 rng(seed);
    const std::vector<int> surface = mesh.surface_free_dofs();
    for (int j = 3; j < rank; ++j)
        for (int dof : surface) components(dof, j) = detail::standard_normal(rng);

    Eigen::MatrixXd coeffs(rank, scenario_count);
    for (int i = 0; i < scenario_count; ++i) {
        for (int b = 0; b < 3; ++b) coeffs(b, i) = detail::uniform(rng, -2.0, 2.0);
        for (int j = 3; j < rank; ++j)
            coeffs(j, i) = detail::standard_normal(rng) / (rank - 3);
    }

    LoadScenarioSet set;
    set.F = components * coeffs;
    set.rank = rank;
    set.seed = seed;
    return set;
}

/// CSV export, one scenario column per line, 17 significant digits so the
/// values round-trip bit-exactly. Header rows carry n_dofs, L, R, seed.
inline void save_scenarios(std::ostream& out, const LoadScenarioSet& set) {
    out << "n_dofs,L,R,seed\n";
    out << set.F.rows() << ',' << set.F.cols() << ',' << set.rank << ',' << set.seed << '\n';
    char buf[64];
    for (int i = 0; i < set.F.cols(); ++i) {
        for (int d = 0; d < set.F.rows(); ++d) {
            std::snprintf(buf, sizeof buf, "%.17g", set.F(d, i));
            if (d) out << ',';
            out << buf;
        }
        out << '\n';
    }
}

inline void save_scenarios(const std::string& path, const LoadScenarioSet& set) {
    std::ofstream out(path);
    if (!out) throw ParameterError("save_scenarios: cannot open " + path);
    save_scenarios(out, set);
    if (!out) throw ParameterError("save_scenarios: write failed for " + path);
}

inline LoadScenarioSet load_scenarios(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("n_dofs,L,R,seed", 0) != 0)
        throw ParameterError("load_scenarios: missing header row");
    if (!std::getline(in, line)) throw ParameterError("load_scenarios: missing dimension row");
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream dims(line);
    long n_dofs = 0, count = 0, rank = 0;
    unsigned long long seed = 0;
    if (!(dims >> n_dofs >> count >> rank >> seed) || n_dofs < 1 || count < 1)
        throw ParameterError("load_scenarios: malformed dimension row");

    LoadScenarioSet set;
    set.rank = static_cast<int>(rank);
    set.seed = seed;
    set.F.resize(n_dofs, count);
    for (long i = 0; i < count; ++i) {
        if (!std::getline(in, line))
            throw ParameterError("load_scenarios: truncated file (missing scenario rows)");
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        for (long d = 0; d < n_dofs; ++d) {
            double value;
            if (!(row >> value))
                throw ParameterError("load_scenarios: truncated scenario row");
            set.F(d, i) = value;
        }
        double extra;
        if (row >> extra) throw ParameterError("load_scenarios: scenario row too long");
    }
    return set;
}

inline LoadScenarioSet load_scenarios(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("load_scenarios: cannot open " + path);
    return load_scenarios(in);
}

} // namespace stochtop
