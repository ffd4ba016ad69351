#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <vector>

#include "stochtop/errors.hpp"

namespace stochtop {

using Matrix8d = Eigen::Matrix<double, 8, 8>;

/// Plane-stress Q4 stiffness for a unit-square element (side 1 mm),
/// 2x2 Gauss quadrature, bilinear shape functions. Node order is
/// counterclockwise from the bottom-left corner; dof order is
/// (u1x, u1y, ..., u4x, u4y).
inline Matrix8d element_stiffness_q4(double youngs, double poisson, double thickness) {
    if (!(youngs > 0.0))
        throw ParameterError("element_stiffness_q4: Young's modulus must be positive");
    if (!(poisson > -1.0 && poisson < 0.5))
        throw ParameterError("element_stiffness_q4: Poisson ratio must lie in (-1, 0.5)");
    if (!(thickness > 0.0))
        throw ParameterError("element_stiffness_q4: thickness must be positive");

    Eigen::Matrix3d elasticity;
    const double c = youngs / (1.0 - poisson * poisson);
    elasticity << c, c * poisson, 0.0,
                  c * poisson, c, 0.0,
                  0.0, 0.0, c * (1.0 - poisson) / 2.0;

    constexpr double corner_xi[4]  = {-1.0, 1.0, 1.0, -1.0};
    constexpr double corner_eta[4] = {-1.0, -1.0, 1.0, 1.0};
    const double gauss = 1.0 / std::sqrt(3.0);

    Matrix8d ke = Matrix8d::Zero();
    for (int gx = 0; gx < 2; ++gx) {
        for (int gy = 0; gy < 2; ++gy) {
            const double xi = (gx == 0 ? -gauss : gauss);
            const double eta = (gy == 0 ? -gauss : gauss);
            Eigen::Matrix<double, 3, 8> strain_op = Eigen::Matrix<double, 3, 8>::Zero();
            for (int a = 0; a < 4; ++a) {
                // unit-square Jacobian is diag(1/2, 1/2), so d/dx = 2 d/dxi
                const double dndx = 0.5 * corner_xi[a] * (1.0 + corner_eta[a] * eta);
                const double dndy = 0.5 * corner_eta[a] * (1.0 + corner_xi[a] * xi);
                strain_op(0, 2 * a) = dndx;
                strain_op(1, 2 * a + 1) = dndy;
                strain_op(2, 2 * a) = dndy;
                strain_op(2, 2 * a + 1) = dndx;
            }
            // det J = 1/4, unit Gauss weights
            ke += 0.25 * thickness * strain_op.transpose() * elasticity * strain_op;
        }
    }
    return ke;
}

/// Structured ground mesh of nx x ny unit-square Q4 elements.
///
/// Nodes are numbered column by column: node(ix, iy) = ix*(ny+1) + iy,
/// elements likewise: element(ex, ey) = ex*ny + ey. Each node carries an
/// x and a y dof (2*node, 2*node+1). Dirichlet dofs are marked on the
/// mesh before any system is assembled from it.
class GroundMesh {
public:
    GroundMesh(int nx, int ny, double youngs, double poisson, double thickness)
        : nx_(nx), ny_(ny), youngs_(youngs), poisson_(poisson), thickness_(thickness) {
        if (nx < 1 || ny < 1)
            throw ParameterError("GroundMesh: nx and ny must be at least 1");
        ke_ = element_stiffness_q4(youngs, poisson, thickness);
        fixed_.assign(static_cast<std::size_t>(num_dofs()), 0);
    }

    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    int num_elements() const noexcept { return nx_ * ny_; }
    int num_nodes() const noexcept { return (nx_ + 1) * (ny_ + 1); }
    int num_dofs() const noexcept { return 2 * num_nodes(); }

    double youngs() const noexcept { return youngs_; }
    double poisson() const noexcept { return poisson_; }
    double thickness() const noexcept { return thickness_; }

    /// Shared unit element stiffness (uniform mesh).
    const Matrix8d& ke() const noexcept { return ke_; }

    int node_id(int ix, int iy) const {
        if (ix < 0 || ix > nx_ || iy < 0 || iy > ny_)
            throw ParameterError("GroundMesh: node index out of range");
        return ix * (ny_ + 1) + iy;
    }

    int element_id(int ex, int ey) const {
        if (ex < 0 || ex >= nx_ || ey < 0 || ey >= ny_)
            throw ParameterError("GroundMesh: element index out of range");
        return ex * ny_ + ey;
    }

    /// Global dofs of element e, matching the ke() row/column order.
    std::array<int, 8> element_dofs(int e) const {
        const int ex = e / ny_;
        const int ey = e % ny_;
        const int n1 = node_id(ex, ey);
        const int n2 = node_id(ex + 1, ey);
        const int n3 = node_id(ex + 1, ey + 1);
        const int n4 = node_id(ex, ey + 1);
        return {2 * n1, 2 * n1 + 1, 2 * n2, 2 * n2 + 1,
                2 * n3, 2 * n3 + 1, 2 * n4, 2 * n4 + 1};
    }

    Eigen::Vector2d centroid(int e) const {
        const int ex = e / ny_;
        const int ey = e % ny_;
        return {ex + 0.5, ey + 0.5};
    }

    void fix_dof(int dof) {
        if (dof < 0 || dof >= num_dofs())
            throw ParameterError("GroundMesh: dof index out of range");
        fixed_[static_cast<std::size_t>(dof)] = 1;
    }

    void fix_node(int ix, int iy) {
        const int n = node_id(ix, iy);
        fix_dof(2 * n);
        fix_dof(2 * n + 1);
    }

    /// Clamp the whole left edge (cantilever root).
    void fix_left_edge() {
        for (int iy = 0; iy <= ny_; ++iy) fix_node(0, iy);
    }

    bool dof_fixed(int dof) const { return fixed_[static_cast<std::size_t>(dof)] != 0; }

    std::vector<int> fixed_dofs() const {
        std::vector<int> out;
        for (int d = 0; d < num_dofs(); ++d)
            if (fixed_[static_cast<std::size_t>(d)]) out.push_back(d);
        return out;
    }

    int num_fixed_dofs() const {
        return static_cast<int>(std::count(fixed_.begin(), fixed_.end(), char(1)));
    }

    bool node_on_boundary(int ix, int iy) const {
        return ix == 0 || ix == nx_ || iy == 0 || iy == ny_;
    }

    /// All non-Dirichlet dofs attached to boundary nodes.
    std::vector<int> surface_free_dofs() const {
        std::vector<int> out;
        for (int ix = 0; ix <= nx_; ++ix) {
            for (int iy = 0; iy <= ny_; ++iy) {
                if (!node_on_boundary(ix, iy)) continue;
                const int n = node_id(ix, iy);
                for (int c = 0; c < 2; ++c) {
                    const int dof = 2 * n + c;
                    if (!dof_fixed(dof)) out.push_back(dof);
                }
            }
        }
        return out;
    }

private:
    int nx_, ny_;
    double youngs_, poisson_, thickness_;
    Matrix8d ke_;
    std::vector<char> fixed_;
};

/// Scatter-assemble K(rho) = sum_e rho_e K_e. Dirichlet handling is
/// row/column elimination with a unit diagonal when apply_bc is set.
inline Eigen::SparseMatrix<double> assemble_global(const GroundMesh& mesh,
                                                   const Eigen::VectorXd& rho,
                                                   bool apply_bc = true) {
    if (rho.size() != mesh.num_elements())
        throw ParameterError("assemble_global: density vector length mismatch");
    const int n = mesh.num_dofs();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(mesh.num_elements()) * 64 + static_cast<std::size_t>(n));
    const Matrix8d& ke = mesh.ke();
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto dofs = mesh.element_dofs(e);
        for (int a = 0; a < 8; ++a) {
            for (int b = 0; b < 8; ++b) {
                if (apply_bc && (mesh.dof_fixed(dofs[a]) || mesh.dof_fixed(dofs[b]))) continue;
                trips.emplace_back(dofs[a], dofs[b], rho[e] * ke(a, b));
            }
        }
    }
    if (apply_bc) {
        for (int d : mesh.fixed_dofs()) trips.emplace_back(d, d, 1.0);
    }
    Eigen::SparseMatrix<double> K(n, n);
    K.setFromTriplets(trips.begin(), trips.end());
    K.makeCompressed();
    return K;
}

/// Assembled and factorized global system for one design. The sparsity
/// pattern and symbolic factorization are built once; refactorize()
/// rebuilds numeric values for a new density vector in place.
///
/// Immutable after factorization except for the solve counter, which is
/// atomic; concurrent solve() calls are allowed. The mesh must outlive
/// the system.
class GlobalSystem {
public:
    GlobalSystem(const GroundMesh& mesh, const Eigen::VectorXd& rho) : mesh_(&mesh) {
        if (mesh.num_fixed_dofs() == 0)
            throw AssemblyError("GlobalSystem: no Dirichlet dofs; system would be singular");
        K_ = assemble_global(mesh, Eigen::VectorXd::Ones(mesh.num_elements()), true);
        build_slot_map();
        llt_.analyzePattern(K_);
        refactorize(rho);
    }

    GlobalSystem(const GlobalSystem&) = delete;
    GlobalSystem& operator=(const GlobalSystem&) = delete;

    /// Re-assemble numeric values for a new design and refactorize.
    /// The solve counter is cumulative across refactorizations.
    void refactorize(const Eigen::VectorXd& rho) {
        if (rho.size() != mesh_->num_elements())
            throw ParameterError("GlobalSystem: density vector length mismatch");
        if (rho.minCoeff() <= 0.0)
            throw AssemblyError("GlobalSystem: densities must be strictly positive");
        double* vals = K_.valuePtr();
        std::fill(vals, vals + K_.nonZeros(), 0.0);
        const Matrix8d& ke = mesh_->ke();
        for (int e = 0; e < mesh_->num_elements(); ++e) {
            const std::int64_t* idx = slot_idx_.data() + 64 * static_cast<std::size_t>(e);
            for (int k = 0; k < 64; ++k) {
                if (idx[k] >= 0) vals[idx[k]] += rho[e] * ke(k / 8, k % 8);
            }
        }
        for (std::int64_t d : diag_idx_) vals[d] = 1.0;
        llt_.factorize(K_);
        if (llt_.info() != Eigen::Success)
            throw AssemblyError("GlobalSystem: Cholesky factorization failed (non-SPD system)");
        rho_ = rho;
        stamp_ = next_stamp();
    }

    /// Multi-RHS solve. Entries of B at fixed dofs are zeroed before the
    /// solve, so U is zero there. Adds B.cols() to the solve counter.
    Eigen::MatrixXd solve(Eigen::MatrixXd rhs) const {
        if (rhs.rows() != mesh_->num_dofs())
            throw ParameterError("GlobalSystem::solve: rhs row count mismatch");
        if (rhs.cols() < 1)
            throw ParameterError("GlobalSystem::solve: need at least one rhs column");
        for (int d : mesh_->fixed_dofs()) rhs.row(d).setZero();
        Eigen::MatrixXd u = llt_.solve(rhs);
        solves_.fetch_add(rhs.cols(), std::memory_order_relaxed);
        return u;
    }

    /// Cumulative number of right-hand-side columns solved (#Lin audit).
    long solve_count() const noexcept { return solves_.load(std::memory_order_relaxed); }

    /// Unique id of the current factorization; caches carry it to detect staleness.
    std::uint64_t stamp() const noexcept { return stamp_; }

    const Eigen::SparseMatrix<double>& matrix() const noexcept { return K_; }
    const Eigen::VectorXd& rho() const noexcept { return rho_; }
    const GroundMesh& mesh() const noexcept { return *mesh_; }

private:
    static std::uint64_t next_stamp() {
        static std::atomic<std::uint64_t> counter{0};
        return counter.fetch_add(1, std::memory_order_relaxed) + 1;
    }

    // Map each element's 8x8 entries to value-array indices of K_ so
    // refactorize() can scatter without rebuilding the pattern.
    void build_slot_map() {
        const int ne = mesh_->num_elements();
        slot_idx_.assign(static_cast<std::size_t>(ne) * 64, -1);
        for (int e = 0; e < ne; ++e) {
            const auto dofs = mesh_->element_dofs(e);
            for (int a = 0; a < 8; ++a) {
                for (int b = 0; b < 8; ++b) {
                    if (mesh_->dof_fixed(dofs[a]) || mesh_->dof_fixed(dofs[b])) continue;
                    slot_idx_[64 * static_cast<std::size_t>(e) + 8 * a + b] =
                        value_index(dofs[a], dofs[b]);
                }
            }
        }
        diag_idx_.clear();
        for (int d : mesh_->fixed_dofs()) diag_idx_.push_back(value_index(d, d));
    }

    std::int64_t value_index(int row, int col) const {
        const auto* outer = K_.outerIndexPtr();
        const auto* inner = K_.innerIndexPtr();
        const auto lo = outer[col];
        const auto hi = outer[col + 1];
        const auto* it = std::lower_bound(inner + lo, inner + hi, row);
        if (it == inner + hi || *it != row)
            throw AssemblyError("GlobalSystem: entry missing from sparsity pattern");
        return it - inner;
    }

    const GroundMesh* mesh_;
    Eigen::VectorXd rho_;
    Eigen::SparseMatrix<double> K_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
    std::vector<std::int64_t> slot_idx_;
    std::vector<std::int64_t> diag_idx_;
    mutable std::atomic<long> solves_{0};
    std::uint64_t stamp_ = 0;
};

} // namespace stochtop
