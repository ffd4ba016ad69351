#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "stochtop/errors.hpp"
#include "stochtop/fem.hpp"
#include "stochtop/probing.hpp"
#include "stochtop/random.hpp"
#include "stochtop/stats.hpp"

namespace stochtop {

/// Displacement solutions of one estimator value pass, reusable by the
/// matching gradient pass. Valid only for the design stamped on it.
struct SolveCache {
    Eigen::MatrixXd Z;      // n_dofs x N, z_i = K^{-1} F v_i
    Eigen::MatrixXd probes; // the V used (L x N)
    std::uint64_t stamp = 0;
};

/// Per-element sums over paired displacement columns:
/// out_e = sum_i weight_i * z_{i,e}^T ke t_{i,e}. Z and T must share shape.
inline Eigen::VectorXd element_energy_sums(const GroundMesh& mesh,
                                           const Eigen::MatrixXd& Z,
                                           const Eigen::MatrixXd& T,
                                           const Eigen::VectorXd& weights = {}) {
    if (Z.rows() != mesh.num_dofs() || T.rows() != Z.rows() || T.cols() != Z.cols())
        throw ParameterError("element_energy_sums: displacement block shape mismatch");
    if (weights.size() != 0 && weights.size() != Z.cols())
        throw ParameterError("element_energy_sums: weight count mismatch");
    const int ne = mesh.num_elements();
    const int cols = static_cast<int>(Z.cols());
    const Matrix8d& ke = mesh.ke();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(ne);
    Eigen::Matrix<double, 8, Eigen::Dynamic> ze(8, cols), te(8, cols);
    for (int e = 0; e < ne; ++e) {
        const auto dofs = mesh.element_dofs(e);
        for (int a = 0; a < 8; ++a) {
            ze.row(a) = Z.row(dofs[a]);
            te.row(a) = T.row(dofs[a]);
        }
        const Eigen::Matrix<double, 8, Eigen::Dynamic> kt = ke * te;
        double acc = 0.0;
        if (weights.size() == 0) {
            acc = (ze.array() * kt.array()).sum();
        } else {
            for (int i = 0; i < cols; ++i) acc += weights[i] * ze.col(i).dot(kt.col(i));
        }
        out[e] = acc;
    }
    return out;
}

/// C_i = f_i^T K^{-1} f_i for every scenario; L solves.
inline Eigen::VectorXd exact_compliances(const Eigen::MatrixXd& loads, const GlobalSystem& sys) {
    const Eigen::MatrixXd U = sys.solve(loads);
    const int count = static_cast<int>(loads.cols());
    Eigen::VectorXd c(count);
    for (int i = 0; i < count; ++i) c[i] = loads.col(i).dot(U.col(i));
    return c;
}

struct ExactMeanResult {
    double mu = 0.0;             // mean compliance, Nmm
    Eigen::VectorXd grad_rho;    // d mu / d rho_e
    Eigen::VectorXd compliances; // per-scenario C, free with the same solves
    Eigen::MatrixXd U;           // displacements, reusable for weighted adjoints
};

/// Exact mean compliance and its density gradient via L solves:
/// mu = (1/L) sum_i C_i, d mu/d rho_e = -(1/L) sum_i u_i^T K_e u_i.
inline ExactMeanResult exact_mean_and_grad(const Eigen::MatrixXd& loads, const GlobalSystem& sys) {
    ExactMeanResult out;
    out.U = sys.solve(loads);
    const int count = static_cast<int>(loads.cols());
    out.compliances.resize(count);
    for (int i = 0; i < count; ++i) out.compliances[i] = loads.col(i).dot(out.U.col(i));
    out.mu = out.compliances.mean();
    out.grad_rho = -element_energy_sums(sys.mesh(), out.U, out.U) / count;
    return out;
}

/// Exact gradient of C^T w at the design of `sys`, given the displacement
/// block from exact_mean_and_grad: d(C^T w)/d rho_e = -sum_i w_i u_i^T K_e u_i.
inline Eigen::VectorXd exact_grad_weighted(const Eigen::VectorXd& w, const Eigen::MatrixXd& U,
                                           const GlobalSystem& sys) {
    if (w.size() != U.cols())
        throw ParameterError("exact_grad_weighted: weight count mismatch");
    return -element_energy_sums(sys.mesh(), U, U, w);
}

struct TraceEstimate {
    double mu = 0.0;          // Hutchinson estimate of the mean compliance
    Eigen::VectorXd grad_rho; // gradient of the estimate (probes fixed)
    SolveCache cache;
};

/// Trace estimator of the mean compliance and its gradient; N solves.
/// mu_hat = 1/(L N) sum_i z_i^T (F v_i), grad_e = -1/(L N) sum_i z_i^T K_e z_i.
inline TraceEstimate estimate_mean_and_grad(const Eigen::MatrixXd& loads, const GlobalSystem& sys,
                                            const ProbingSet& probes) {
    if (probes.length() != loads.cols())
        throw ParameterError("estimate_mean_and_grad: probe length must equal scenario count");
    TraceEstimate out;
    const int scenario_count = static_cast<int>(loads.cols());
    const int probe_count = probes.count();
    const Eigen::MatrixXd B = loads * probes.V; // n_dofs x N
    out.cache.Z = sys.solve(B);
    out.cache.probes = probes.V;
    out.cache.stamp = sys.stamp();
    double acc = 0.0;
    for (int i = 0; i < probe_count; ++i) acc += out.cache.Z.col(i).dot(B.col(i));
    out.mu = acc / (static_cast<double>(scenario_count) * probe_count);
    out.grad_rho = -element_energy_sums(sys.mesh(), out.cache.Z, out.cache.Z) /
                   (static_cast<double>(scenario_count) * probe_count);
    return out;
}

struct DiagEstimate {
    Eigen::VectorXd compliances; // C_hat, length L
    SolveCache cache;
};

/// Diagonal estimator of the load compliances; N solves.
/// C_hat = (1/N) sum_i D_{v_i} F^T r_i with r_i = K^{-1} F v_i.
inline DiagEstimate estimate_diag(const Eigen::MatrixXd& loads, const GlobalSystem& sys,
                                  const ProbingSet& probes) {
    if (probes.length() != loads.cols())
        throw ParameterError("estimate_diag: probe length must equal scenario count");
    DiagEstimate out;
    const Eigen::MatrixXd B = loads * probes.V;
    out.cache.Z = sys.solve(B);
    out.cache.probes = probes.V;
    out.cache.stamp = sys.stamp();
    const Eigen::MatrixXd G = loads.transpose() * out.cache.Z; // G(j,i) = f_j^T r_i
    out.compliances = (probes.V.array() * G.array()).rowwise().sum() / probes.count();
    return out;
}

/// Gradient of C_hat^T w using the cached value-pass solutions r_i and a
/// fresh JVP pass t_i = K^{-1} F D_w v_i; N additional solves (2N per
/// value+gradient cycle). The cache must carry the current design stamp.
inline Eigen::VectorXd grad_weighted_compliances(const Eigen::VectorXd& w, const SolveCache& cache,
                                                 const Eigen::MatrixXd& loads,
                                                 const GlobalSystem& sys) {
    if (cache.stamp != sys.stamp())
        throw StaleCacheError("grad_weighted_compliances: cache is stale for this design");
    if (w.size() != loads.cols())
        throw ParameterError("grad_weighted_compliances: weight length must equal scenario count");
    if (cache.probes.rows() != loads.cols() || cache.Z.cols() != cache.probes.cols())
        throw ParameterError("grad_weighted_compliances: cache shape mismatch");
    const Eigen::MatrixXd weighted = w.asDiagonal() * cache.probes; // D_w v_i columns
    const Eigen::MatrixXd T = sys.solve(loads * weighted);
    return -element_energy_sums(sys.mesh(), T, cache.Z) / cache.probes.cols();
}

/// Diagonal estimate on zero-centered loads plus the exactly computed
/// mean-load cross terms; N+1 solves. For load mean mu_f and
/// f~_i = f_i - mu_f: C_i = d_i + 2 f~_i^T q + mu_f^T q with q = K^{-1} mu_f.
inline Eigen::VectorXd centered_diag_estimate(const Eigen::MatrixXd& loads, const GlobalSystem& sys,
                                              const ProbingSet& probes) {
    if (loads.cols() < 2)
        throw ParameterError("centered_diag_estimate: need at least two scenarios");
    const Eigen::VectorXd load_mean = loads.rowwise().mean();
    const Eigen::MatrixXd centered = loads.colwise() - load_mean;
    const DiagEstimate base = estimate_diag(centered, sys, probes);
    const Eigen::VectorXd q = sys.solve(load_mean);
    const double mean_term = load_mean.dot(q);
    return base.compliances + 2.0 * (centered.transpose() * q) +
           Eigen::VectorXd::Constant(loads.cols(), mean_term);
}

/// Scenario indices sorted by load norm and split into contiguous groups of
/// at most max_cluster_size; indices inside each group are in natural order.
inline std::vector<std::vector<int>> cluster_scenarios(const Eigen::MatrixXd& loads,
                                                       int max_cluster_size) {
    if (max_cluster_size < 1)
        throw ParameterError("cluster_scenarios: max_cluster_size must be >= 1");
    const int count = static_cast<int>(loads.cols());
    std::vector<int> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return loads.col(a).norm() < loads.col(b).norm();
    });
    std::vector<std::vector<int>> groups;
    for (int start = 0; start < count; start += max_cluster_size) {
        const int stop = std::min(count, start + max_cluster_size);
        std::vector<int> group(order.begin() + start, order.begin() + stop);
        std::sort(group.begin(), group.end());
        groups.push_back(std::move(group));
    }
    return groups;
}

/// Diagonal estimation run independently per norm cluster and concatenated.
/// Each group gets its own probe set of min(N, group order) columns.
inline Eigen::VectorXd clustered_diag_estimate(const Eigen::MatrixXd& loads,
                                               const GlobalSystem& sys, int max_cluster_size,
                                               ProbeKind kind, int probe_count,
                                               std::uint64_t seed) {
    const auto groups = cluster_scenarios(loads, max_cluster_size);
    Eigen::VectorXd out(loads.cols());
    std::uint64_t group_seed = seed;
    for (const auto& group : groups) {
        const int group_size = static_cast<int>(group.size());
        Eigen::MatrixXd sub(loads.rows(), group_size);
        for (int k = 0; k < group_size; ++k) sub.col(k) = loads.col(group[static_cast<std::size_t>(k)]);
        ProbingSet probes =
            kind == ProbeKind::kHadamard
                ? hadamard_probes(group_size, std::min(probe_count, hadamard_order(group_size)))
                : rademacher_probes(group_size, std::min(probe_count, group_size), group_seed++);
        const DiagEstimate est = estimate_diag(sub, sys, probes);
        for (int k = 0; k < group_size; ++k) out[group[static_cast<std::size_t>(k)]] = est.compliances[k];
    }
    return out;
}

/// Exact-to-estimated ratios computed once at a reference design and then
/// frozen for the whole run.
struct CorrectionFactors {
    double gamma_mean = 1.0;
    double gamma_std = 1.0;
};

/// One exact evaluation (L solves) and one estimated evaluation (N solves)
/// at the design already factorized in `sys` (the full ground mesh by
/// convention). Throws if an estimator value vanishes while its exact
/// counterpart does not.
inline CorrectionFactors correction_factors(const Eigen::MatrixXd& loads, const GlobalSystem& sys,
                                            const ProbingSet& probes, bool need_std = true) {
    const Eigen::VectorXd exact = exact_compliances(loads, sys);
    const DiagEstimate est = estimate_diag(loads, sys, probes);
    CorrectionFactors corr;
    const double mu = exact.mean();
    const double mu_hat = est.compliances.mean();
    // "vanishes" means at roundoff level relative to the estimate magnitudes
    const double scale = est.compliances.cwiseAbs().maxCoeff();
    if (!(std::abs(mu_hat) > 1e-12 * scale) || !std::isfinite(mu / mu_hat))
        throw DegenerateCorrectionError("correction_factors: mean estimate vanishes");
    corr.gamma_mean = mu / mu_hat;
    if (need_std) {
        if (loads.cols() < 2)
            throw ParameterError("correction_factors: std correction needs at least two scenarios");
        const double sigma = stats(exact).sigma;
        const double sigma_hat = stats(est.compliances).sigma;
        if (sigma_hat <= 1e-12 * scale) {
            if (sigma > 1e-12 * exact.cwiseAbs().maxCoeff())
                throw DegenerateCorrectionError("correction_factors: std estimate vanishes");
            corr.gamma_std = 1.0;
        } else {
            corr.gamma_std = sigma / sigma_hat;
        }
    }
    return corr;
}

/// Exact/estimated ratio samples over random designs, for histogram output.
struct RatioSamples {
    std::vector<double> mean_ratio;
    std::vector<double> std_ratio;
};

/// Samples n_designs pseudo-density fields elementwise from a truncated
/// normal on [0,1] (floored at min_density so the system stays SPD) and
/// records the exact/estimated ratio of the mean and std under the fixed
/// probe set; (L + N) solves per design.
inline RatioSamples sample_correcting_ratios(const GroundMesh& mesh, const Eigen::MatrixXd& loads,
                                             const ProbingSet& probes, int n_designs,
                                             double density_mean, double density_sd,
                                             std::uint64_t seed, double min_density = 0.001) {
    if (!(density_mean > 0.0 && density_mean < 1.0))
        throw ParameterError("sample_correcting_ratios: mean must lie in (0,1)");
    if (n_designs < 0)
        throw ParameterError("sample_correcting_ratios: n_designs must be nonnegative");
    RatioSamples out;
    if (n_designs == 0) return out;

    std::mt19937_64 rng(seed);
    const int ne = mesh.num_elements();
    Eigen::VectorXd rho(ne);
    GlobalSystem sys(mesh, Eigen::VectorXd::Ones(ne));
    for (int d = 0; d < n_designs; ++d) {
        for (int e = 0; e < ne; ++e)
            rho[e] = std::max(detail::truncated_normal(rng, density_mean, density_sd, 0.0, 1.0),
                              min_density);
        sys.refactorize(rho);
        const Eigen::VectorXd exact = exact_compliances(loads, sys);
        const DiagEstimate est = estimate_diag(loads, sys, probes);
        out.mean_ratio.push_back(exact.mean() / est.compliances.mean());
        out.std_ratio.push_back(stats(exact).sigma / stats(est.compliances).sigma);
    }
    return out;
}

} // namespace stochtop
