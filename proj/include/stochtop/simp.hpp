#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <vector>

#include "stochtop/errors.hpp"
#include "stochtop/fem.hpp"

namespace stochtop {

/// Row-stochastic density filter over element centroids.
struct FilterMatrix {
    Eigen::SparseMatrix<double> A; // n_E x n_E, rows sum to 1
    double radius = 0.0;           // mm
};

/// Linear hat weights w_ej = max(0, radius - dist(centroids)), normalized
/// per row. radius <= 0 degenerates to the identity (no smoothing).
inline FilterMatrix build_filter(const GroundMesh& mesh, double radius) {
    if (radius < 0.0) throw ParameterError("build_filter: radius must be nonnegative");
    const int ne = mesh.num_elements();
    FilterMatrix filter;
    filter.radius = radius;
    filter.A.resize(ne, ne);

    std::vector<Eigen::Triplet<double>> trips;
    if (radius <= 0.0) {
        trips.reserve(static_cast<std::size_t>(ne));
        for (int e = 0; e < ne; ++e) trips.emplace_back(e, e, 1.0);
    } else {
        const int reach = static_cast<int>(std::ceil(radius));
        const int ny = mesh.ny();
        for (int e = 0; e < ne; ++e) {
            const int ex = e / ny;
            const int ey = e % ny;
            double row_sum = 0.0;
            std::vector<std::pair<int, double>> row;
            for (int dx = -reach; dx <= reach; ++dx) {
                for (int dy = -reach; dy <= reach; ++dy) {
                    const int jx = ex + dx;
                    const int jy = ey + dy;
                    if (jx < 0 || jx >= mesh.nx() || jy < 0 || jy >= ny) continue;
                    const double dist = std::hypot(double(dx), double(dy));
                    const double w = radius - dist;
                    if (w <= 0.0) continue;
                    row.emplace_back(jx * ny + jy, w);
                    row_sum += w;
                }
            }
            for (const auto& [j, w] : row) trips.emplace_back(e, j, w / row_sum);
        }
    }
    filter.A.setFromTriplets(trips.begin(), trips.end());
    filter.A.makeCompressed();
    return filter;
}

/// Regularized Heaviside projection H_beta(v) = 1 - e^{-beta v} + v e^{-beta};
/// H_0 is the identity, H_beta(1) = 1 for every beta.
inline double heaviside(double v, double beta) {
    if (beta == 0.0) return v;
    return 1.0 - std::exp(-beta * v) + v * std::exp(-beta);
}

inline double heaviside_deriv(double v, double beta) {
    if (beta == 0.0) return 1.0;
    return beta * std::exp(-beta * v) + std::exp(-beta);
}

/// Pseudo-densities and the retained chain state needed to backpropagate
/// through filter -> power penalty -> affine interpolation -> projection.
struct DensityField {
    Eigen::VectorXd rho;       // final densities, in [x_min, 1]
    Eigen::VectorXd filtered;  // y = A x
    Eigen::VectorXd preimage;  // w = (1 - x_min) y^p + x_min (projection input)
    double penalty = 1.0;      // p
    double projection = 0.0;   // beta
    double x_min = 0.001;

    bool has_state() const noexcept { return rho.size() > 0 && filtered.size() == rho.size(); }
};

/// x -> rho. Order follows the run settings: filter, then power penalty,
/// then affine interpolation to [x_min, 1], then Heaviside projection.
inline DensityField forward_chain(const Eigen::VectorXd& x, const FilterMatrix& filter,
                                  double penalty, double projection, double x_min) {
    if (!(penalty >= 1.0)) throw ParameterError("forward_chain: penalty must be >= 1");
    if (!(projection >= 0.0)) throw ParameterError("forward_chain: projection beta must be >= 0");
    if (!(x_min > 0.0 && x_min < 1.0)) throw ParameterError("forward_chain: x_min must lie in (0,1)");
    if (x.size() != filter.A.cols()) throw ParameterError("forward_chain: design vector length mismatch");
    constexpr double kBoxSlack = 1e-9;
    if (x.size() > 0 && (x.minCoeff() < -kBoxSlack || x.maxCoeff() > 1.0 + kBoxSlack))
        throw ParameterError("forward_chain: design variables must lie in [0,1]");

    DensityField field;
    field.penalty = penalty;
    field.projection = projection;
    field.x_min = x_min;
    field.filtered = filter.A * x.cwiseMax(0.0).cwiseMin(1.0);
    const int n = static_cast<int>(x.size());
    field.preimage.resize(n);
    field.rho.resize(n);
    for (int e = 0; e < n; ++e) {
        const double z = std::pow(field.filtered[e], penalty);
        const double w = (1.0 - x_min) * z + x_min;
        field.preimage[e] = w;
        field.rho[e] = heaviside(w, projection);
    }
    return field;
}

/// Reverse-mode chain rule: dF/drho -> dF/dx for the field produced by
/// forward_chain with the given filter.
inline Eigen::VectorXd backprop_chain(const DensityField& field, const FilterMatrix& filter,
                                      const Eigen::VectorXd& dF_drho) {
    if (!field.has_state())
        throw StaleCacheError("backprop_chain: density field carries no chain state");
    if (field.rho.size() != filter.A.cols())
        throw StaleCacheError("backprop_chain: chain state does not match this filter");
    if (dF_drho.size() != field.rho.size())
        throw ParameterError("backprop_chain: sensitivity vector length mismatch");

    const int n = static_cast<int>(field.rho.size());
    Eigen::VectorXd t(n);
    for (int e = 0; e < n; ++e) {
        const double dh = heaviside_deriv(field.preimage[e], field.projection);
        const double dz = field.penalty * std::pow(field.filtered[e], field.penalty - 1.0);
        t[e] = dF_drho[e] * dh * (1.0 - field.x_min) * dz;
    }
    return filter.A.transpose() * t;
}

} // namespace stochtop
